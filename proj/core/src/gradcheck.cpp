#include "peris/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace peris {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport gradient_check(std::span<GradientProbe> probes,
                               const std::function<ObjectiveSample()>& objective, double eps,
                               std::size_t coords_per_group, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("gradient_check: eps must be positive");
  GradCheckReport report;
  const ObjectiveSample center = objective();
  for (auto& probe : probes) {
    if (probe.values.size() != probe.analytic.size()) {
      throw std::invalid_argument("gradient_check: gradient size mismatch for " + probe.name);
    }
    std::vector<std::size_t> coords(probe.values.size());
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    if (coords.size() > coords_per_group) coords.resize(coords_per_group);

    double group_max = 0.0;
    std::size_t group_checked = 0;
    for (const std::size_t c : coords) {
      const double saved = probe.values[c];
      probe.values[c] = saved + eps;
      const ObjectiveSample plus = objective();
      probe.values[c] = saved - eps;
      const ObjectiveSample minus = objective();
      probe.values[c] = saved;
      if (plus.branch != center.branch || minus.branch != center.branch) {
        ++report.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * eps);
      const double err = relative_error(probe.analytic[c], numeric);
      group_max = std::max(group_max, err);
      ++group_checked;
    }
    report.group_max_rel_error[probe.name] = group_max;
    report.group_checked[probe.name] = group_checked;
    report.max_rel_error = std::max(report.max_rel_error, group_max);
    report.checked += group_checked;
  }
  return report;
}

}  // namespace peris
