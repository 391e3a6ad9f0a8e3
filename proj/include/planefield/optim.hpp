#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "planefield/model.hpp"

namespace planefield {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam(std::span<const NamedTensor> params);

/// Bias-corrected Adam update of every parameter that requires grad. A
/// parameter without a gradient buffer is treated as having zero gradient.
void adam_step(std::span<const NamedTensor> params, AdamState& state, double lr);

struct Schedule {
  std::size_t iters = 1;
  std::size_t warmup_iters = 0;
  double lr_init = 0.01;
  double floor_ratio = 0.01;
};

/// Linear warm-up from 0, then cosine decay to lr_init * floor_ratio at the
/// last iteration.
double lr_at(std::size_t iter, const Schedule& schedule);

}  // namespace planefield
