#include "planefield/optim.hpp"

#include <cmath>
#include <numbers>

#include "planefield/errors.hpp"

namespace planefield {

AdamState make_adam(std::span<const NamedTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor->size(), 0.0);
    s.v.emplace_back(p.tensor->size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractViolation("adam_step: optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i].tensor;
    if (state.m[i].size() != p.size() || state.v[i].size() != p.size())
      throw ContractViolation("adam_step: moment shape mismatch for " + params[i].name);
    if (!p.requires_grad() || !p.has_grad()) continue;
    for (double g : p.grad())
      if (!std::isfinite(g)) throw NumericFault("adam_step: non-finite gradient in " + params[i].name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    if (!p.requires_grad()) continue;
    auto values = p.values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = p.has_grad();
    const auto grad = has ? p.grad() : std::span<double>{};
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has ? grad[k] : 0.0;
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      values[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
    }
  }
}

double lr_at(std::size_t iter, const Schedule& s) {
  if (s.iters == 0 || iter >= s.iters)
    throw ContractViolation("lr_at: iteration " + std::to_string(iter) + " outside [0, " +
                            std::to_string(s.iters) + ")");
  if (iter < s.warmup_iters)
    return s.lr_init * static_cast<double>(iter) / static_cast<double>(s.warmup_iters);
  const double floor = s.lr_init * s.floor_ratio;
  const std::size_t span = s.iters - 1 - s.warmup_iters;
  if (span == 0) return s.lr_init;
  const double progress = static_cast<double>(iter - s.warmup_iters) / static_cast<double>(span);
  return floor + (s.lr_init - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace planefield
