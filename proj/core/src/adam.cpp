#include "peris/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace peris {

Adam::Adam(AdamOptions options, std::span<const std::size_t> group_sizes) : options_(options) {
  groups_.reserve(group_sizes.size());
  for (const std::size_t n : group_sizes) groups_.push_back({std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0});
}

void Adam::step(std::size_t group, std::span<double> params, std::span<const double> grad) {
  auto& g = groups_.at(group);
  if (params.size() != g.m.size() || grad.size() != g.m.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  ++g.t;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(g.t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(g.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    g.m[i] = b1 * g.m[i] + (1.0 - b1) * grad[i];
    g.v[i] = b2 * g.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double m_hat = g.m[i] / correction1;
    const double v_hat = g.v[i] / correction2;
    params[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
  }
}

}  // namespace peris
