#pragma once

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

#include "planefield/tensor.hpp"

namespace planefield::ad {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid until the graph is
/// cleared.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
};

/// Constant sparse row mixing: output row r is
///   sum_{k in [offsets[r], offsets[r+1])} weights[k] * input.row(index[k]).
/// With one unit-weight entry per row this is a plain row gather; bilinear
/// lookups, finite differences and interval overlaps are all expressed
/// through it.
struct RowGather {
  std::size_t source_rows = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> index;
  std::vector<double> weights;

  std::size_t out_rows() const { return offsets.size() - 1; }
  void push(std::size_t row, double weight) {
    index.push_back(row);
    weights.push_back(weight);
  }
  void end_row() { offsets.push_back(index.size()); }

  static RowGather select(std::size_t source_rows, const std::vector<std::size_t>& rows);
};

enum class Op {
  Constant,
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  MatMul,
  Affine,
  Exp,
  Neg,
  Sigmoid,
  Softplus,
  Relu,
  Abs,
  Square,
  Sum,
  Mean,
  Concat,
  Gather,
  ClampMin,
  Reshape,
};

std::string_view op_name(Op op);

/// Tape of operation records. Nodes are appended in creation order and
/// backward() walks them in strict reverse order, so gradient accumulation
/// order is fixed and runs are reproducible.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  /// Binds a persistent tensor. If it requires grad, backward() accumulates
  /// dLoss/dParam into its grad buffer; otherwise it behaves as a constant.
  /// The tensor must outlive the graph (or the next clear()).
  Var parameter(Tensor& t);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  Var affine(Var x, Var w, Var b);
  Var exp(Var a);
  Var neg(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var relu(Var a);
  Var abs(Var a);
  Var square(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var concat(const std::vector<Var>& parts);
  Var gather(Var a, std::shared_ptr<const RowGather> g);
  Var clamp_min(Var a, double floor);
  Var reshape(Var a, Shape shape);

  /// Reverse sweep from a scalar loss. Clears the graph afterwards.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  bool tracks_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor* leaf = nullptr;
    Buffer grad;
    bool needs_grad = false;
    double scalar = 0.0;
    std::shared_ptr<const RowGather> gather;
  };

  Var push(Op op, std::vector<std::size_t> inputs, Tensor value, double scalar = 0.0,
           std::shared_ptr<const RowGather> gather = nullptr);
  const Tensor& val(std::size_t id) const;
  std::size_t check(Var v) const;
  void propagate(Node& node);
  Buffer& grad_of(std::size_t id);

  std::vector<Node> nodes_;
};

// Free-function spellings so model code reads naturally.
inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.graph->div(a, b); }
inline Var operator*(double s, Var a) { return a.graph->scale(a, s); }
inline Var operator-(Var a) { return a.graph->neg(a); }

inline Var matmul(Var a, Var b) { return a.graph->matmul(a, b); }
inline Var affine(Var x, Var w, Var b) { return x.graph->affine(x, w, b); }
inline Var exp(Var a) { return a.graph->exp(a); }
inline Var sigmoid(Var a) { return a.graph->sigmoid(a); }
inline Var softplus(Var a) { return a.graph->softplus(a); }
inline Var relu(Var a) { return a.graph->relu(a); }
inline Var abs(Var a) { return a.graph->abs(a); }
inline Var square(Var a) { return a.graph->square(a); }
inline Var sum(Var a) { return a.graph->sum(a); }
inline Var mean(Var a) { return a.graph->mean(a); }
inline Var clamp_min(Var a, double floor) { return a.graph->clamp_min(a, floor); }
inline Var reshape(Var a, Shape s) { return a.graph->reshape(a, std::move(s)); }
inline Var gather(Var a, std::shared_ptr<const RowGather> g) {
  return a.graph->gather(a, std::move(g));
}

}  // namespace planefield::ad
