#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace peris {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed set of parameter groups. Each group keeps its own step
// count, advanced only when that group is updated.
class Adam {
 public:
  Adam(AdamOptions options, std::span<const std::size_t> group_sizes);

  void step(std::size_t group, std::span<double> params, std::span<const double> grad);
  std::uint64_t steps(std::size_t group) const { return groups_.at(group).t; }
  const AdamOptions& options() const { return options_; }

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
  };
  AdamOptions options_;
  std::vector<Moments> groups_;
};

}  // namespace peris
