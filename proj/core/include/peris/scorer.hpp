#pragma once

#include <cstddef>
#include <span>

#include "peris/types.hpp"

namespace peris {

// Read-only recommendation scorer; implementations must be safe to call
// concurrently from several threads.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::size_t n_users() const = 0;
  virtual std::size_t n_items() const = 0;
  virtual void score(UserIdx user, std::span<const ItemIdx> items, std::span<double> out) const = 0;

  double score(UserIdx user, ItemIdx item) const {
    double out = 0.0;
    score(user, std::span(&item, 1), std::span(&out, 1));
    return out;
  }
};

}  // namespace peris
