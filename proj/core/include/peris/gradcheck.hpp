#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "peris/random.hpp"

namespace peris {

// A parameter tensor paired with the analytic gradient computed at the
// current parameter values.
struct GradientProbe {
  std::string name;
  std::span<double> values;
  std::span<const double> analytic;
};

// Objective value plus a signature of the piecewise branch it was evaluated
// on (e.g. which hinge terms are active). A coordinate whose +/- eps
// evaluations land on a different branch is skipped.
struct ObjectiveSample {
  double value = 0.0;
  std::vector<std::uint8_t> branch;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::map<std::string, double> group_max_rel_error;
  std::map<std::string, std::size_t> group_checked;
};

// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

double relative_error(double analytic, double numeric);

// Central differences (f(x + eps) - f(x - eps)) / 2eps on up to
// `coords_per_group` randomly chosen coordinates of every probe.
GradCheckReport gradient_check(std::span<GradientProbe> probes,
                               const std::function<ObjectiveSample()>& objective, double eps,
                               std::size_t coords_per_group, Rng& rng);

}  // namespace peris
