#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace peris {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;
using UserIdx = std::uint32_t;
using ItemIdx = std::uint32_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

constexpr Timestamp days(std::int64_t n) { return n * kSecondsPerDay; }

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Bad input data or arguments supplied by the caller.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace peris
