#include "planefield/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "planefield/errors.hpp"

namespace planefield::ad {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& loss) {
  Graph g;
  Var v = loss(g);
  return v.item();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, const std::vector<Probe>& probes, double step,
                           double tol, double floor) {
  if (!(step > 0)) throw ContractViolation("grad_check: step must be positive");

  const double base_a = evaluate(loss);
  const double base_b = evaluate(loss);
  if (std::bit_cast<std::uint64_t>(base_a) != std::bit_cast<std::uint64_t>(base_b))
    throw ContractViolation("grad_check: loss is not deterministic (two evaluations differ)");

  std::vector<Tensor*> touched;
  for (const auto& p : probes) {
    if (!p.tensor || p.index >= p.tensor->size())
      throw ContractViolation("grad_check: probe out of range");
    if (std::find(touched.begin(), touched.end(), p.tensor) == touched.end())
      touched.push_back(p.tensor);
  }
  for (auto* t : touched) t->zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }

  GradCheckReport report;
  report.passed = true;
  const double kink_threshold = std::sqrt(step);
  for (const auto& p : probes) {
    GradCheckEntry e;
    e.analytic = p.tensor->grad()[p.index];
    double& x = p.tensor->values()[p.index];
    const double saved = x;
    x = saved + step;
    const double up = evaluate(loss);
    x = saved - step;
    const double down = evaluate(loss);
    x = saved;
    e.numeric = (up - down) / (2 * step);
    const double forward = (up - base_a) / step;
    const double backward = (base_a - down) / step;
    e.kink = std::fabs(forward - backward) > kink_threshold * (1.0 + std::fabs(e.numeric));
    e.rel_error = relative_error(e.analytic, e.numeric, floor);
    if (e.kink) {
      ++report.kinks;
    } else {
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      if (e.rel_error > tol) report.passed = false;
    }
    report.entries.push_back(e);
  }
  for (auto* t : touched) t->zero_grad();
  return report;
}

GradCheckReport grad_check(const std::function<Var(Graph&, Var)>& f, const Tensor& point,
                           double step, double tol, double floor) {
  Tensor x = point;
  x.set_requires_grad(true);
  std::vector<Probe> probes;
  for (std::size_t i = 0; i < x.size(); ++i) probes.push_back({&x, i});
  return grad_check([&](Graph& g) { return f(g, g.parameter(x)); }, probes, step, tol, floor);
}

}  // namespace planefield::ad
