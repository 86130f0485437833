#ifndef LGAN_TAPE_HPP
#define LGAN_TAPE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lgan/tensor.hpp"

namespace lgan {

/// Handle to a node on an expression tape.
struct NodeId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
  bool operator==(const NodeId&) const = default;
};

using Bindings = std::unordered_map<std::string, Tensor>;
using GradientMap = std::unordered_map<std::string, Tensor>;

/// Recorded computation graph over tensors. Nodes are appended in
/// topological order (inputs always precede their consumers) and carry
/// shapes inferred at build time; shape mismatches throw immediately,
/// naming the operation and both shapes.
///
/// A tape is built once, then evaluated with `forward` (which caches every
/// intermediate value) and differentiated with `backward` from a scalar
/// root. One tape serves one evaluation at a time; distinct tapes are
/// independent.
class Tape {
public:
  // ---- graph construction -------------------------------------------------

  /// Bindable input/parameter node. Names must be unique per tape.
  NodeId leaf(std::string name, Shape shape);
  NodeId constant(Tensor value);
  NodeId scalar_constant(double v) { return constant(Tensor::scalar(v)); }

  // Elementwise; operands must have identical shapes.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  /// Multiply every element by a fixed factor.
  NodeId scale(NodeId a, double factor);

  /// Matrix [n,m] plus vector [m], added to each row.
  NodeId add_rowvec(NodeId m, NodeId v);
  /// Matrix [n,m] times vector [m], applied to each row elementwise.
  NodeId mul_rowvec(NodeId m, NodeId v);
  /// Matrix [n,m] with row i scaled by v[i]; v has length n.
  NodeId scale_rows(NodeId m, NodeId v);

  /// [r,c] x [c,k] -> [r,k], or [r,c] x [c] -> [r].
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);

  /// Concatenate along the last axis: vectors [a],[b] -> [a+b],
  /// matrices [n,a],[n,b] -> [n,a+b].
  NodeId concat_cols(NodeId a, NodeId b);
  /// Select elements (vector) or columns (matrix) by index, in order.
  NodeId gather_cols(NodeId a, std::vector<std::size_t> indices);
  /// Contiguous gather_cols.
  NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);

  NodeId sum(NodeId a);           // all elements -> rank-0
  NodeId mean(NodeId a);          // all elements -> rank-0
  NodeId row_sum(NodeId a);       // [n,m] -> [n]
  NodeId squared_norm(NodeId a);  // sum of squares -> rank-0

  NodeId leaky_relu(NodeId a, double slope = 0.2);
  /// Derivative of leaky_relu as a value: 1 where the input is positive,
  /// `slope` elsewhere. Contributes no gradient of its own.
  NodeId leaky_relu_deriv(NodeId a, double slope = 0.2);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  /// Row-wise softmax (vector -> vector, matrix -> per-row).
  NodeId softmax_rows(NodeId a);
  /// Stable log-sum-exp over the last axis: vector [m] -> rank-0,
  /// matrix [n,m] -> [n].
  NodeId logsumexp_rows(NodeId a);

  NodeId log(NodeId a);
  NodeId clamp(NodeId a, double lo, double hi);

  // ---- inspection ----------------------------------------------------------

  const Shape& shape(NodeId id) const;
  std::size_t node_count() const { return nodes_.size(); }
  /// Last node added; the default forward/backward root.
  NodeId root() const;

  // ---- evaluation ----------------------------------------------------------

  /// Evaluates every node with the given leaf bindings and returns the value
  /// of the root (last) node. All intermediates are cached on the tape.
  /// Bindings not matching any leaf are ignored; a missing or wrongly shaped
  /// binding throws. Any non-finite intermediate throws.
  Tensor forward(const Bindings& bindings);

  /// Cached value of a node; requires a prior forward.
  const Tensor& value(NodeId id) const;

  /// Reverse-mode gradients of a rank-0 root with respect to every leaf,
  /// keyed by leaf name and shaped like the leaf. Leaves the root does not
  /// depend on map to zero tensors. Requires a prior forward.
  GradientMap backward(NodeId root_node) const;
  GradientMap backward() const { return backward(root()); }

private:
  enum class Op : std::uint8_t {
    Leaf, Constant, Add, Sub, Mul, Scale, AddRowVec, MulRowVec, ScaleRows,
    MatMul, Transpose, ConcatCols, GatherCols, Sum, Mean, RowSum, SquaredNorm,
    LeakyRelu, LeakyReluDeriv, Tanh, Sigmoid, SoftmaxRows, LogSumExpRows,
    Log, Clamp,
  };

  struct Node {
    Op op;
    NodeId a, b;
    double p0 = 0.0, p1 = 0.0;
    std::vector<std::size_t> indices;
    std::string name;
    Shape shape;
    Tensor value;
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const;
  NodeId binary_same_shape(Op op, const char* opname, NodeId a, NodeId b);
  NodeId unary(Op op, NodeId a, double p0 = 0.0, double p1 = 0.0);
  void eval_node(std::size_t i);
  static const char* op_name(Op op);

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::uint32_t> leaf_index_;
  bool evaluated_ = false;
};

/// Central-difference gradient (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per
/// component. The oracle against which backward is checked.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f,
                            const Tensor& x, double eps = 1e-5);

/// Componentwise |a-b| <= abs_floor + rel * max(|a|,|b|). Both tensors must
/// share a shape.
bool gradients_close(const Tensor& a, const Tensor& b, double rel = 1e-6,
                     double abs_floor = 1e-8);

}  // namespace lgan

#endif
