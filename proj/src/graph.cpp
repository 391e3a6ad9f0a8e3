#include "planefield/graph.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "planefield/errors.hpp"

namespace planefield::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.values().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Buffer& buf, std::size_t rows, std::size_t cols) {
  return MutMap(buf.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                            " vs " + shape_string(b.shape()));
}

void require_2d(std::string_view op, const Tensor& t, std::string_view what) {
  if (t.shape().size() != 2)
    throw ContractViolation(std::string(op) + ": " + std::string(what) + " must be 2D, got " +
                            shape_string(t.shape()));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto in = a.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  auto x = a.values();
  auto y = b.values();
  auto o = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(x[i], y[i]);
  return out;
}

}  // namespace

RowGather RowGather::select(std::size_t source_rows, const std::vector<std::size_t>& rows) {
  RowGather g;
  g.source_rows = source_rows;
  g.index = rows;
  g.weights.assign(rows.size(), 1.0);
  g.offsets.resize(rows.size() + 1);
  for (std::size_t r = 0; r <= rows.size(); ++r) g.offsets[r] = r;
  return g;
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Leaf: return "parameter";
    case Op::Add: return "add";
    case Op::Sub: return "subtract";
    case Op::Mul: return "element-multiply";
    case Op::Div: return "divide";
    case Op::Scale: return "scalar-multiply";
    case Op::MatMul: return "matmul";
    case Op::Affine: return "affine";
    case Op::Exp: return "exp";
    case Op::Neg: return "negate";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Relu: return "relu";
    case Op::Abs: return "abs";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Concat: return "concat";
    case Op::Gather: return "gather-rows";
    case Op::ClampMin: return "clamp-min";
    case Op::Reshape: return "reshape";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }

std::size_t Graph::check(Var v) const {
  if (v.graph != this || v.id >= nodes_.size())
    throw ContractViolation("variable does not belong to this graph");
  return v.id;
}

const Tensor& Graph::val(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.leaf ? *n.leaf : n.value;
}

const Tensor& Graph::value(Var v) const { return val(check(v)); }

bool Graph::tracks_grad(Var v) const { return nodes_[check(v)].needs_grad; }

Var Graph::push(Op op, std::vector<std::size_t> inputs, Tensor value, double scalar,
                std::shared_ptr<const RowGather> gather) {
  for (double x : value.values())
    if (!std::isfinite(x))
      throw NumericFault(std::string("non-finite output from op '") + std::string(op_name(op)) +
                         "'");
  Node node;
  bool any = false;
  for (auto i : inputs) any = any || nodes_[i].needs_grad;
  if (any) {
    node.op = op;
    node.inputs = std::move(inputs);
    node.scalar = scalar;
    node.gather = std::move(gather);
    node.needs_grad = true;
  }
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(Tensor t) {
  for (double x : t.values())
    if (!std::isfinite(x)) throw NumericFault("non-finite value in constant tensor");
  Node node;
  node.value = std::move(t);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(Tensor& t) {
  Node node;
  node.op = Op::Leaf;
  node.leaf = &t;
  node.needs_grad = t.requires_grad();
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::add(Var a, Var b) {
  const auto &x = val(check(a)), &y = val(check(b));
  require_same_shape("add", x, y);
  return push(Op::Add, {a.id, b.id}, map_binary(x, y, [](double p, double q) { return p + q; }));
}

Var Graph::sub(Var a, Var b) {
  const auto &x = val(check(a)), &y = val(check(b));
  require_same_shape("subtract", x, y);
  return push(Op::Sub, {a.id, b.id}, map_binary(x, y, [](double p, double q) { return p - q; }));
}

Var Graph::mul(Var a, Var b) {
  const auto &x = val(check(a)), &y = val(check(b));
  require_same_shape("element-multiply", x, y);
  return push(Op::Mul, {a.id, b.id}, map_binary(x, y, [](double p, double q) { return p * q; }));
}

Var Graph::div(Var a, Var b) {
  const auto &x = val(check(a)), &y = val(check(b));
  require_same_shape("divide", x, y);
  return push(Op::Div, {a.id, b.id}, map_binary(x, y, [](double p, double q) { return p / q; }));
}

Var Graph::scale(Var a, double s) {
  return push(Op::Scale, {a.id}, map_unary(val(check(a)), [s](double p) { return s * p; }), s);
}

Var Graph::matmul(Var a, Var b) {
  const auto &x = val(check(a)), &y = val(check(b));
  require_2d("matmul", x, "left operand");
  require_2d("matmul", y, "right operand");
  if (x.cols() != y.rows())
    throw ContractViolation("matmul: shape mismatch " + shape_string(x.shape()) + " vs " +
                            shape_string(y.shape()));
  Tensor out({x.rows(), y.cols()});
  MutMap(out.values().data(), static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(y.cols())).noalias() =
      as_matrix(x) * as_matrix(y);
  return push(Op::MatMul, {a.id, b.id}, std::move(out));
}

Var Graph::affine(Var xv, Var wv, Var bv) {
  const auto &x = val(check(xv)), &w = val(check(wv)), &b = val(check(bv));
  require_2d("affine", x, "input");
  require_2d("affine", w, "weight");
  if (x.cols() != w.rows())
    throw ContractViolation("affine: shape mismatch " + shape_string(x.shape()) + " vs " +
                            shape_string(w.shape()));
  if (b.size() != w.cols())
    throw ContractViolation("affine: bias " + shape_string(b.shape()) + " does not match weight " +
                            shape_string(w.shape()));
  Buffer buf(x.rows() * w.cols());
  auto y = as_matrix(buf, x.rows(), w.cols());
  y.noalias() = as_matrix(x) * as_matrix(w);
  Eigen::Map<const Eigen::RowVectorXd> bias(b.values().data(), static_cast<Eigen::Index>(b.size()));
  y.rowwise() += bias;
  return push(Op::Affine, {xv.id, wv.id, bv.id}, Tensor({x.rows(), w.cols()}, std::move(buf)));
}

Var Graph::exp(Var a) {
  return push(Op::Exp, {a.id}, map_unary(val(check(a)), [](double p) { return std::exp(p); }));
}

Var Graph::neg(Var a) {
  return push(Op::Neg, {a.id}, map_unary(val(check(a)), [](double p) { return -p; }));
}

Var Graph::sigmoid(Var a) {
  return push(Op::Sigmoid, {a.id}, map_unary(val(check(a)), stable_sigmoid));
}

Var Graph::softplus(Var a) {
  return push(Op::Softplus, {a.id}, map_unary(val(check(a)), stable_softplus));
}

Var Graph::relu(Var a) {
  return push(Op::Relu, {a.id}, map_unary(val(check(a)), [](double p) { return p > 0 ? p : 0.0; }));
}

Var Graph::abs(Var a) {
  return push(Op::Abs, {a.id}, map_unary(val(check(a)), [](double p) { return std::fabs(p); }));
}

Var Graph::square(Var a) {
  return push(Op::Square, {a.id}, map_unary(val(check(a)), [](double p) { return p * p; }));
}

Var Graph::sum(Var a) {
  double s = 0;
  for (double x : val(check(a)).values()) s += x;
  return push(Op::Sum, {a.id}, Tensor::scalar(s));
}

Var Graph::mean(Var a) {
  const auto& x = val(check(a));
  double s = 0;
  for (double v : x.values()) s += v;
  return push(Op::Mean, {a.id}, Tensor::scalar(s / static_cast<double>(x.size())));
}

Var Graph::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractViolation("concat: no inputs");
  const auto& first = val(check(parts[0]));
  const std::size_t rows = first.rows();
  std::size_t total_cols = 0;
  std::vector<std::size_t> ids;
  for (auto p : parts) {
    const auto& t = val(check(p));
    Shape lead_a(first.shape().begin(), first.shape().end() - 1);
    Shape lead_b(t.shape().begin(), t.shape().end() - 1);
    if (lead_a != lead_b)
      throw ContractViolation("concat: shape mismatch " + shape_string(first.shape()) + " vs " +
                              shape_string(t.shape()));
    total_cols += t.cols();
    ids.push_back(p.id);
  }
  Shape shape = first.shape();
  shape.back() = total_cols;
  Tensor out(shape);
  auto o = out.values();
  std::size_t offset = 0;
  for (auto id : ids) {
    const auto& t = val(id);
    const std::size_t c = t.cols();
    auto in = t.values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(in.begin() + r * c, c, o.begin() + r * total_cols + offset);
    offset += c;
  }
  return push(Op::Concat, std::move(ids), std::move(out));
}

Var Graph::gather(Var a, std::shared_ptr<const RowGather> g) {
  const auto& x = val(check(a));
  if (!g || g->source_rows != x.rows())
    throw ContractViolation("gather-rows: stencil expects " +
                            std::to_string(g ? g->source_rows : 0) + " source rows, input " +
                            shape_string(x.shape()) + " has " + std::to_string(x.rows()));
  const std::size_t cols = x.cols();
  Tensor out({g->out_rows(), cols});
  auto in = x.values();
  auto o = out.values();
  for (std::size_t r = 0; r < g->out_rows(); ++r) {
    double* dst = o.data() + r * cols;
    for (std::size_t k = g->offsets[r]; k < g->offsets[r + 1]; ++k) {
      if (g->index[k] >= x.rows()) throw ContractViolation("gather-rows: row index out of range");
      const double* src = in.data() + g->index[k] * cols;
      const double w = g->weights[k];
      for (std::size_t c = 0; c < cols; ++c) dst[c] += w * src[c];
    }
  }
  return push(Op::Gather, {a.id}, std::move(out), 0.0, std::move(g));
}

Var Graph::clamp_min(Var a, double floor) {
  return push(Op::ClampMin, {a.id},
              map_unary(val(check(a)), [floor](double p) { return p > floor ? p : floor; }), floor);
}

Var Graph::reshape(Var a, Shape shape) {
  Tensor out = val(check(a));
  out.drop_grad();
  out.set_requires_grad(false);
  out.reshape(std::move(shape));
  return push(Op::Reshape, {a.id}, std::move(out));
}

Buffer& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(val(id).size(), 0.0);
  return n.grad;
}

void Graph::propagate(Node& node) {
  const auto& g = node.grad;
  const auto& y = node.value;
  auto in = [&](std::size_t k) -> const Tensor& { return val(node.inputs[k]); };
  auto wants = [&](std::size_t k) { return nodes_[node.inputs[k]].needs_grad; };
  auto unary = [&](auto dfdx) {
    auto& ga = grad_of(node.inputs[0]);
    auto x = in(0).values();
    auto yv = y.values();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], yv[i]);
  };

  switch (node.op) {
    case Op::Constant:
    case Op::Leaf:
      break;
    case Op::Add:
    case Op::Sub: {
      const double sign = node.op == Op::Add ? 1.0 : -1.0;
      if (wants(0)) {
        auto& ga = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(node.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      break;
    }
    case Op::Mul: {
      auto a = in(0).values();
      auto b = in(1).values();
      if (wants(0)) {
        auto& ga = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(node.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::Div: {
      auto a = in(0).values();
      auto b = in(1).values();
      if (wants(0)) {
        auto& ga = grad_of(node.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b[i];
      }
      if (wants(1)) {
        auto& gb = grad_of(node.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * a[i] / (b[i] * b[i]);
      }
      break;
    }
    case Op::Scale: {
      const double s = node.scalar;
      unary([s](double, double) { return s; });
      break;
    }
    case Op::MatMul:
    case Op::Affine: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      ConstMap G(g.data(), static_cast<Eigen::Index>(y.rows()), static_cast<Eigen::Index>(y.cols()));
      if (wants(0)) as_matrix(grad_of(node.inputs[0]), a.rows(), a.cols()).noalias() += G * as_matrix(b).transpose();
      if (wants(1)) as_matrix(grad_of(node.inputs[1]), b.rows(), b.cols()).noalias() += as_matrix(a).transpose() * G;
      if (node.op == Op::Affine && wants(2)) {
        auto& gb = grad_of(node.inputs[2]);
        Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) += G.colwise().sum();
      }
      break;
    }
    case Op::Exp:
      unary([](double, double out) { return out; });
      break;
    case Op::Neg:
      unary([](double, double) { return -1.0; });
      break;
    case Op::Sigmoid:
      unary([](double, double out) { return out * (1.0 - out); });
      break;
    case Op::Softplus:
      unary([](double x, double) { return stable_sigmoid(x); });
      break;
    case Op::Relu:
      unary([](double x, double) { return x > 0 ? 1.0 : 0.0; });
      break;
    case Op::Abs:
      unary([](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
      break;
    case Op::Square:
      unary([](double x, double) { return 2.0 * x; });
      break;
    case Op::Sum:
    case Op::Mean: {
      auto& ga = grad_of(node.inputs[0]);
      const double d = node.op == Op::Sum ? g[0] : g[0] / static_cast<double>(ga.size());
      for (auto& v : ga) v += d;
      break;
    }
    case Op::Concat: {
      const std::size_t total = y.cols();
      const std::size_t rows = y.rows();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < node.inputs.size(); ++k) {
        const std::size_t c = in(k).cols();
        if (wants(k)) {
          auto& gk = grad_of(node.inputs[k]);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) gk[r * c + j] += g[r * total + offset + j];
        }
        offset += c;
      }
      break;
    }
    case Op::Gather: {
      const RowGather& st = *node.gather;
      const std::size_t cols = y.cols();
      auto& ga = grad_of(node.inputs[0]);
      for (std::size_t r = 0; r < st.out_rows(); ++r) {
        const double* src = g.data() + r * cols;
        for (std::size_t k = st.offsets[r]; k < st.offsets[r + 1]; ++k) {
          double* dst = ga.data() + st.index[k] * cols;
          const double w = st.weights[k];
          for (std::size_t c = 0; c < cols; ++c) dst[c] += w * src[c];
        }
      }
      break;
    }
    case Op::ClampMin: {
      const double floor = node.scalar;
      unary([floor](double x, double) { return x > floor ? 1.0 : 0.0; });
      break;
    }
    case Op::Reshape: {
      auto& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      break;
    }
  }
}

void Graph::backward(Var loss) {
  const std::size_t root = check(loss);
  if (val(root).size() != 1)
    throw ContractViolation("backward: loss must be scalar, got shape " +
                            shape_string(val(root).shape()));
  if (nodes_[root].needs_grad) {
    grad_of(root)[0] = 1.0;
    for (std::size_t i = root + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.needs_grad || node.grad.empty()) continue;
      if (node.op == Op::Leaf) {
        auto dst = node.leaf->grad();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
        continue;
      }
      propagate(node);
      node.grad.clear();
      node.grad.shrink_to_fit();
    }
  }
  clear();
}

}  // namespace planefield::ad
