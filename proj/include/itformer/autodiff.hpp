#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "itformer/array.hpp"
#include "itformer/params.hpp"

namespace itf {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its Graph lives.
class Var {
 public:
  Var() = default;

  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  std::size_t rank() const { return value().rank(); }
  bool requires_grad() const;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// One entry of the computation record: which primitive produced which node from which inputs.
struct TraceEntry {
  std::string op;
  std::vector<std::size_t> inputs;
  std::size_t output;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so insertion order is a
/// topological order and the backward sweep is a single reverse pass.
///
/// A node requires a gradient iff gradients are enabled and at least one input does;
/// leaves require one only when they are trainable parameters. Frozen parameters and
/// constants therefore never accumulate gradient and cost nothing in backward.
class Graph {
 public:
  using Backward = std::function<void(Graph&, std::size_t self)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Array value);
  /// Leaf bound to `p`. Repeated calls for the same parameter return the same node.
  Var parameter(Parameter& p);

  /// Runs the backward sweep from a single-element `loss` and returns gradients of the
  /// trainable parameters that took part in it, keyed by parameter name.
  GradientMap backward(Var loss);

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }
  std::vector<TraceEntry> trace() const;

  // Primitive construction.
  Var record(Array value, std::vector<std::size_t> inputs, Backward backward, const char* op);
  const Array& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Array& grad(std::size_t id) const { return nodes_[id].grad; }
  void accumulate(std::size_t id, Array&& g);
  /// Zero-initialized gradient buffer of node `id` for in-place accumulation.
  Array& grad_buffer(std::size_t id);

 private:
  struct Node {
    Array value;
    Array grad;
    std::vector<std::size_t> inputs;
    Backward backward;
    Parameter* param = nullptr;
    const char* op = "";
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool grad_enabled_;
};

/// Differentiable primitives. Shape violations throw DimensionError.
namespace ops {

Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_bt(Var a, Var b);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Adds a vector along the last axis of `a`.
Var add_row(Var a, Var row);
/// Multiplies by a vector along the last axis of `a`.
Var mul_row(Var a, Var row);

/// Normalizes over the last axis (no affine).
Var layer_norm(Var x, double eps = 1e-5);
Var gelu(Var x);
Var relu(Var x);
Var softmax(Var x, std::size_t axis);

/// Mean negative log-likelihood of `targets` over rows where `mask` is true.
Var cross_entropy(Var logits, std::span<const int> targets, const std::vector<bool>& mask);

Var embedding(Var table, std::span<const int> ids);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
/// Mean over `axis`; the axis is removed (a rank-1 input yields shape {1}).
Var mean(Var x, std::size_t axis);
Var sum(Var x);
Var reshape(Var x, Shape shape);
/// Swaps the first two axes of a rank-3 array.
Var transpose01(Var x);

/// Rotates feature pairs (2j, 2j+1) of every row by angle position·base^(−2j/d).
Var rotary(Var x, double position, double base);
/// Sets entries above the diagonal of a square matrix to a large negative constant.
Var causal_mask(Var scores);
Var gather_rows(Var x, std::span<const std::size_t> rows);
/// `base` with rows `positions[i]` replaced by row i of `rows`.
Var scatter_rows(Var base, Var rows, std::span<const std::size_t> positions);

}  // namespace ops
}  // namespace itf
