#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gnlab/tensor.hpp"

namespace gnlab::ad {

/// Position of a node on its Tape. Valid while index < tape.size().
struct NodeId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const noexcept { return index != UINT32_MAX; }
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  Neg,
  Scale,         // payload.scalar
  AddScalar,     // payload.scalar
  Sum,           // all elements -> rank-0
  ExpandScalar,  // rank-0 -> payload.shape
  SumRows,       // [m x n] -> {n}
  BroadcastRows, // {n} -> [payload.count x n]
  SumCols,       // [m x n] -> {m}
  BroadcastCols, // {m} -> [m x payload.count]
  Reshape,       // payload.shape
  Relu,
  ReluMask,      // zero-derivative step function
  LeakyRelu,     // payload.scalar = slope
  LeakyMask,     // zero-derivative, payload.scalar = slope
  Sign,          // zero-derivative
  Abs,
  Sqrt,
  Reciprocal,    // 1/x with 1/0 := 0
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Softplus,      // payload.scalar = beta
  Elu,           // alpha = 1
  Im2col,        // [B x C*H*W] -> [C*kh*kw x B*P], payload.conv, payload.count = B
  Col2im,        // adjoint of Im2col
  FoldBatch,     // [R x B*P] -> [B x R*P], payload.count = B
  UnfoldBatch,   // adjoint of FoldBatch
  SelectCols,    // [B x L] -> {B}, picks column labels[b]
  ScatterCols,   // {B} -> [B x payload.count], adjoint of SelectCols
  Count_
};

const char* op_name(Op op);

/// Op parameters. Unused fields keep their defaults.
struct Payload {
  double scalar = 0.0;
  std::size_t count = 0;
  Shape shape;
  ConvGeometry conv;
  std::shared_ptr<const std::vector<std::size_t>> labels;
};

/// Append-only record of eagerly evaluated operations. Backward passes append
/// their adjoint computations to the same tape, so gradients are ordinary nodes
/// and can be differentiated again.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  NodeId leaf(Tensor value);
  NodeId constant(double value) { return leaf(Tensor::scalar(value)); }

  /// Records `op` over `inputs` and evaluates it immediately.
  NodeId record(Op op, std::span<const NodeId> inputs, Payload payload = {});

  const Tensor& value(NodeId id) const;
  Op op(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Replaces a leaf's value (same shape) without touching dependent nodes.
  void set_leaf(NodeId id, Tensor value);

  /// Recomputes every non-leaf node from the current leaf values, in order.
  void replay();

  /// True when re-evaluating every node reproduces its cached value bit-for-bit.
  bool replay_matches() const;

  /// d y / d wrt[i] as nodes on this tape. `y` must hold a single element.
  /// Nodes that do not depend on wrt[i] yield a zero leaf of its shape.
  std::vector<NodeId> backward(NodeId y, std::span<const NodeId> wrt);
  NodeId backward(NodeId y, NodeId wrt) { return backward(y, std::span<const NodeId>(&wrt, 1))[0]; }

 private:
  struct Node {
    Op op;
    std::uint8_t arity;
    NodeId inputs[2];
    Payload payload;
    Tensor value;
  };

  void check(NodeId id) const;
  Tensor evaluate(const Node& node) const;
  void vjp(NodeId node, NodeId grad, const bool need[2], NodeId out[2]);

  std::vector<Node> nodes_;
};

// Recording helpers. Each checks shapes eagerly and throws DimensionError.
NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId transpose(Tape& t, NodeId a);
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId neg(Tape& t, NodeId a);
NodeId scale(Tape& t, NodeId a, double c);
NodeId add_scalar(Tape& t, NodeId a, double c);
NodeId sum(Tape& t, NodeId a);
NodeId mean(Tape& t, NodeId a);
NodeId expand_scalar(Tape& t, NodeId s, Shape shape);
NodeId sum_rows(Tape& t, NodeId a);
NodeId broadcast_rows(Tape& t, NodeId v, std::size_t rows);
NodeId sum_cols(Tape& t, NodeId a);
NodeId broadcast_cols(Tape& t, NodeId v, std::size_t cols);
NodeId reshape(Tape& t, NodeId a, Shape shape);
NodeId relu(Tape& t, NodeId a);
NodeId relu_mask(Tape& t, NodeId a);
NodeId leaky_relu(Tape& t, NodeId a, double slope);
NodeId leaky_mask(Tape& t, NodeId a, double slope);
NodeId sign(Tape& t, NodeId a);
NodeId abs(Tape& t, NodeId a);
NodeId sqrt(Tape& t, NodeId a);
NodeId reciprocal(Tape& t, NodeId a);
NodeId exp(Tape& t, NodeId a);
NodeId log(Tape& t, NodeId a);
NodeId tanh(Tape& t, NodeId a);
NodeId sigmoid(Tape& t, NodeId a);
NodeId softplus(Tape& t, NodeId a, double beta);
NodeId elu(Tape& t, NodeId a);
NodeId im2col(Tape& t, NodeId x, const ConvGeometry& geom, std::size_t batch);
NodeId col2im(Tape& t, NodeId cols, const ConvGeometry& geom, std::size_t batch);
NodeId fold_batch(Tape& t, NodeId a, std::size_t batch);
/// [B x R*P] -> [R x B*P]; inverse of fold_batch.
NodeId unfold_batch(Tape& t, NodeId a, std::size_t rows);
NodeId select_cols(Tape& t, NodeId a, std::shared_ptr<const std::vector<std::size_t>> labels);
NodeId scatter_cols(Tape& t, NodeId v, std::shared_ptr<const std::vector<std::size_t>> labels,
                    std::size_t cols);

/// Per-row L2 norm of d(sum of f)/dx, i.e. ||grad_x f(x_i)|| for every sample
/// when x is [B x n] and f is one value per sample with no cross-sample mixing.
/// Differentiable: backward through it is double backpropagation.
NodeId input_gradient_norm(Tape& t, NodeId f_out, NodeId x);

}  // namespace gnlab::ad
