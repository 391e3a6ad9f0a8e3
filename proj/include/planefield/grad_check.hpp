#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "planefield/graph.hpp"

namespace planefield::ad {

/// One coordinate of one parameter tensor to probe.
struct Probe {
  Tensor* tensor = nullptr;
  std::size_t index = 0;
};

struct GradCheckEntry {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool kink = false;  // one-sided differences disagree; excluded from pass/fail
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::size_t kinks = 0;
  bool passed = false;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is ~0 from turning finite-difference round-off into huge ratios.
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Builds a scalar loss on a fresh graph; must be deterministic.
using LossBuilder = std::function<Var(Graph&)>;

/// Compares backward() against central differences at each probe.
GradCheckReport grad_check(const LossBuilder& loss, const std::vector<Probe>& probes, double step,
                           double tol, double floor = 1e-8);

/// Single-tensor convenience form: f maps a parameter node to a scalar.
GradCheckReport grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                           double step, double tol, double floor = 1e-8);

}  // namespace planefield::ad
