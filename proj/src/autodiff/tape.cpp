#include <algorithm>
#include <cmath>
#include <string>

#include "gnlab/autodiff.hpp"
#include "gnlab/simd/kernels.hpp"

namespace gnlab::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Neg: return "neg";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Sum: return "sum";
    case Op::ExpandScalar: return "expand_scalar";
    case Op::SumRows: return "sum_rows";
    case Op::BroadcastRows: return "broadcast_rows";
    case Op::SumCols: return "sum_cols";
    case Op::BroadcastCols: return "broadcast_cols";
    case Op::Reshape: return "reshape";
    case Op::Relu: return "relu";
    case Op::ReluMask: return "relu_mask";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::LeakyMask: return "leaky_mask";
    case Op::Sign: return "sign";
    case Op::Abs: return "abs";
    case Op::Sqrt: return "sqrt";
    case Op::Reciprocal: return "reciprocal";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::Elu: return "elu";
    case Op::Im2col: return "im2col";
    case Op::Col2im: return "col2im";
    case Op::FoldBatch: return "fold_batch";
    case Op::UnfoldBatch: return "unfold_batch";
    case Op::SelectCols: return "select_cols";
    case Op::ScatterCols: return "scatter_cols";
    case Op::Count_: break;
  }
  return "unknown";
}

namespace {

int arity_of(Op op) {
  switch (op) {
    case Op::Leaf: return 0;
    case Op::MatMul:
    case Op::Add:
    case Op::Sub:
    case Op::Mul: return 2;
    default: return 1;
  }
}

// Ops whose derivative is zero almost everywhere; gradients never flow through them.
bool zero_derivative(Op op) { return op == Op::ReluMask || op == Op::LeakyMask || op == Op::Sign; }

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  const double* src = a.ptr();
  double* dst = out.ptr();
  for (std::size_t i = 0; i < a.numel(); ++i) dst[i] = f(src[i]);
  return out;
}

template <class K>
Tensor kernel_map(const Tensor& a, K k) {
  Tensor out(a.shape());
  k(a.ptr(), out.ptr(), a.numel());
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

const Tensor& require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected matrix, got " + shape_to_string(a.shape()));
  }
  return a;
}

Tensor batched_im2col(const Tensor& x, const ConvGeometry& g, std::size_t batch) {
  g.validate();
  if (batch == 0 || x.numel() != batch * g.image_size()) {
    throw DimensionError("im2col: input " + shape_to_string(x.shape()) + " does not hold " +
                         std::to_string(batch) + " images of " + std::to_string(g.image_size()));
  }
  const std::size_t rows = g.patch_size();
  const std::size_t pos = g.positions();
  Tensor out({rows, batch * pos});
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor image({g.image_size()},
                 std::vector<double>(x.ptr() + b * g.image_size(), x.ptr() + (b + 1) * g.image_size()));
    const Tensor cols = gnlab::im2col(image, g);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(cols.ptr() + r * pos, pos, out.ptr() + r * batch * pos + b * pos);
    }
  }
  return out;
}

Tensor batched_col2im(const Tensor& cols, const ConvGeometry& g, std::size_t batch) {
  g.validate();
  const std::size_t rows = g.patch_size();
  const std::size_t pos = g.positions();
  if (batch == 0 || cols.numel() != rows * batch * pos) {
    throw DimensionError("col2im: columns " + shape_to_string(cols.shape()) + " do not match geometry");
  }
  Tensor out({batch, g.image_size()});
  Tensor block({rows, pos});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(cols.ptr() + r * batch * pos + b * pos, pos, block.ptr() + r * pos);
    }
    const Tensor image = gnlab::col2im(block, g);
    std::copy_n(image.ptr(), g.image_size(), out.ptr() + b * g.image_size());
  }
  return out;
}

}  // namespace

void Tape::check(NodeId id) const {
  if (!id.valid() || id.index >= nodes_.size()) {
    throw ContractError("node id " + std::to_string(id.index) + " is not on this tape (size " +
                        std::to_string(nodes_.size()) + ")");
  }
}

NodeId Tape::leaf(Tensor value) {
  Node node{Op::Leaf, 0, {}, {}, std::move(value)};
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::record(Op op, std::span<const NodeId> inputs, Payload payload) {
  if (op == Op::Leaf || static_cast<unsigned>(op) >= static_cast<unsigned>(Op::Count_)) {
    throw UnsupportedOpError("unsupported op kind " + std::to_string(static_cast<unsigned>(op)));
  }
  const int arity = arity_of(op);
  if (static_cast<int>(inputs.size()) != arity) {
    throw ContractError(std::string(op_name(op)) + " expects " + std::to_string(arity) +
                        " inputs, got " + std::to_string(inputs.size()));
  }
  Node node{op, static_cast<std::uint8_t>(arity), {}, std::move(payload), {}};
  for (int i = 0; i < arity; ++i) {
    check(inputs[i]);
    node.inputs[i] = inputs[i];
  }
  node.value = evaluate(node);
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id.index].value;
}

Op Tape::op(NodeId id) const {
  check(id);
  return nodes_[id.index].op;
}

void Tape::set_leaf(NodeId id, Tensor value) {
  check(id);
  Node& node = nodes_[id.index];
  if (node.op != Op::Leaf) throw ContractError("set_leaf on a non-leaf node");
  if (node.value.shape() != value.shape()) {
    throw DimensionError("set_leaf: shape " + shape_to_string(value.shape()) + " differs from " +
                         shape_to_string(node.value.shape()));
  }
  node.value = std::move(value);
}

void Tape::replay() {
  for (Node& node : nodes_) {
    if (node.op != Op::Leaf) node.value = evaluate(node);
  }
}

bool Tape::replay_matches() const {
  for (const Node& node : nodes_) {
    if (node.op != Op::Leaf && !(evaluate(node) == node.value)) return false;
  }
  return true;
}

Tensor Tape::evaluate(const Node& node) const {
  const auto& k = simd::active();
  const Tensor& a = nodes_[node.inputs[0].index].value;
  const Payload& p = node.payload;
  switch (node.op) {
    case Op::MatMul: return gnlab::matmul(a, nodes_[node.inputs[1].index].value);
    case Op::Transpose: return gnlab::transpose(require_matrix(a, "transpose"));
    case Op::Add: return gnlab::add(a, nodes_[node.inputs[1].index].value);
    case Op::Sub: return gnlab::sub(a, nodes_[node.inputs[1].index].value);
    case Op::Mul: return gnlab::mul(a, nodes_[node.inputs[1].index].value);
    case Op::Neg: return gnlab::scale(a, -1.0);
    case Op::Scale: return gnlab::scale(a, p.scalar);
    case Op::AddScalar: {
      Tensor out(a.shape());
      k.add_scalar(a.ptr(), p.scalar, out.ptr(), a.numel());
      return out;
    }
    case Op::Sum: return Tensor::scalar(gnlab::sum(a));
    case Op::ExpandScalar: return Tensor::full(p.shape, a.item());
    case Op::SumRows: {
      const std::size_t m = require_matrix(a, "sum_rows").rows();
      const std::size_t n = a.cols();
      Tensor out({n});
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j] += a[i * n + j];
      }
      return out;
    }
    case Op::BroadcastRows: {
      const std::size_t n = a.numel();
      Tensor out({p.count, n});
      for (std::size_t i = 0; i < p.count; ++i) std::copy_n(a.ptr(), n, out.ptr() + i * n);
      return out;
    }
    case Op::SumCols: {
      const std::size_t m = require_matrix(a, "sum_cols").rows();
      const std::size_t n = a.cols();
      Tensor out({m});
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[i * n + j];
        out[i] = s;
      }
      return out;
    }
    case Op::BroadcastCols: {
      const std::size_t m = a.numel();
      Tensor out({m, p.count});
      for (std::size_t i = 0; i < m; ++i) std::fill_n(out.ptr() + i * p.count, p.count, a[i]);
      return out;
    }
    case Op::Reshape: return a.reshaped(p.shape);
    case Op::Relu: return kernel_map(a, k.relu);
    case Op::ReluMask: return kernel_map(a, k.relu_mask);
    case Op::LeakyRelu: {
      Tensor out(a.shape());
      k.leaky_relu(a.ptr(), p.scalar, out.ptr(), a.numel());
      return out;
    }
    case Op::LeakyMask: {
      Tensor out(a.shape());
      k.leaky_mask(a.ptr(), p.scalar, out.ptr(), a.numel());
      return out;
    }
    case Op::Sign: return kernel_map(a, k.sign);
    case Op::Abs: return kernel_map(a, k.abs);
    case Op::Sqrt: return map(a, [](double x) { return std::sqrt(x); });
    case Op::Reciprocal: return map(a, [](double x) { return x == 0.0 ? 0.0 : 1.0 / x; });
    case Op::Exp: return map(a, [](double x) { return std::exp(x); });
    case Op::Log: return map(a, [](double x) { return std::log(x); });
    case Op::Tanh: return map(a, [](double x) { return std::tanh(x); });
    case Op::Sigmoid: return map(a, stable_sigmoid);
    case Op::Softplus: {
      const double beta = p.scalar;
      return map(a, [beta](double x) { return stable_softplus(beta * x) / beta; });
    }
    case Op::Elu: return map(a, [](double x) { return x > 0.0 ? x : std::expm1(x); });
    case Op::Im2col: return batched_im2col(a, p.conv, p.count);
    case Op::Col2im: return batched_col2im(a, p.conv, p.count);
    case Op::FoldBatch: {
      const std::size_t rows = require_matrix(a, "fold_batch").rows();
      const std::size_t batch = p.count;
      if (batch == 0 || a.cols() % batch != 0) {
        throw DimensionError("fold_batch: " + shape_to_string(a.shape()) + " not divisible by batch " +
                             std::to_string(batch));
      }
      const std::size_t pos = a.cols() / batch;
      Tensor out({batch, rows * pos});
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t b = 0; b < batch; ++b) {
          std::copy_n(a.ptr() + r * a.cols() + b * pos, pos, out.ptr() + b * rows * pos + r * pos);
        }
      }
      return out;
    }
    case Op::UnfoldBatch: {
      const std::size_t batch = require_matrix(a, "unfold_batch").rows();
      if (p.shape.size() != 2 || shape_numel(p.shape) != a.numel() || p.shape[1] % batch != 0) {
        throw DimensionError("unfold_batch: cannot map " + shape_to_string(a.shape()) + " to " +
                             shape_to_string(p.shape));
      }
      const std::size_t rows = p.shape[0];
      const std::size_t pos = p.shape[1] / batch;
      Tensor out(p.shape);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t b = 0; b < batch; ++b) {
          std::copy_n(a.ptr() + b * rows * pos + r * pos, pos, out.ptr() + r * p.shape[1] + b * pos);
        }
      }
      return out;
    }
    case Op::SelectCols: {
      const std::size_t batch = require_matrix(a, "select_cols").rows();
      const std::size_t width = a.cols();
      if (!p.labels || p.labels->size() != batch) {
        throw DimensionError("select_cols: label count does not match batch " + std::to_string(batch));
      }
      Tensor out({batch});
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t label = (*p.labels)[b];
        if (label >= width) {
          throw ContractError("label " + std::to_string(label) + " out of range for " +
                              std::to_string(width) + " heads");
        }
        out[b] = a[b * width + label];
      }
      return out;
    }
    case Op::ScatterCols: {
      const std::size_t batch = a.numel();
      if (!p.labels || p.labels->size() != batch) {
        throw DimensionError("scatter_cols: label count does not match batch " + std::to_string(batch));
      }
      Tensor out({batch, p.count});
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t label = (*p.labels)[b];
        if (label >= p.count) {
          throw ContractError("label " + std::to_string(label) + " out of range for " +
                              std::to_string(p.count) + " heads");
        }
        out[b * p.count + label] = a[b];
      }
      return out;
    }
    case Op::Leaf:
    case Op::Count_: break;
  }
  throw UnsupportedOpError(std::string("cannot evaluate op ") + op_name(node.op));
}

std::vector<NodeId> Tape::backward(NodeId y, std::span<const NodeId> wrt) {
  check(y);
  if (nodes_[y.index].value.numel() != 1) {
    throw ContractError("backward needs a single-element output, got shape " +
                        shape_to_string(nodes_[y.index].value.shape()));
  }
  for (NodeId w : wrt) check(w);

  const std::size_t end = y.index + 1;
  std::size_t lowest = end;
  std::vector<char> depends(end, 0);
  for (NodeId w : wrt) {
    if (w.index < end) {
      depends[w.index] = 1;
      lowest = std::min<std::size_t>(lowest, w.index);
    }
  }
  for (std::size_t i = lowest; i < end; ++i) {
    const Node& node = nodes_[i];
    if (depends[i] || node.arity == 0 || zero_derivative(node.op)) continue;
    for (int k = 0; k < node.arity; ++k) {
      if (depends[node.inputs[k].index]) depends[i] = 1;
    }
  }

  std::vector<NodeId> adjoint(end);
  if (depends[y.index]) adjoint[y.index] = leaf(Tensor::full(nodes_[y.index].value.shape(), 1.0));

  for (std::size_t i = end; i-- > lowest;) {
    if (!depends[i] || !adjoint[i].valid() || nodes_[i].arity == 0 || zero_derivative(nodes_[i].op)) {
      continue;
    }
    const int arity = nodes_[i].arity;
    const bool need[2] = {depends[nodes_[i].inputs[0].index] != 0,
                          arity > 1 && depends[nodes_[i].inputs[1].index] != 0};
    NodeId contrib[2];
    vjp(NodeId{static_cast<std::uint32_t>(i)}, adjoint[i], need, contrib);
    for (int k = 0; k < arity; ++k) {
      const NodeId in = nodes_[i].inputs[k];
      if (!need[k] || !contrib[k].valid()) continue;
      adjoint[in.index] = adjoint[in.index].valid() ? add(*this, adjoint[in.index], contrib[k]) : contrib[k];
    }
  }

  std::vector<NodeId> result;
  result.reserve(wrt.size());
  for (NodeId w : wrt) {
    if (w.index < end && adjoint[w.index].valid()) {
      result.push_back(adjoint[w.index]);
    } else {
      result.push_back(leaf(Tensor::zeros(nodes_[w.index].value.shape())));
    }
  }
  return result;
}

// Emits the adjoint contributions of node `id` given its output adjoint `g`.
// Never holds references into nodes_ across a record call: recording may reallocate.
void Tape::vjp(NodeId id, NodeId g, const bool need[2], NodeId out[2]) {
  out[0] = NodeId{};
  out[1] = NodeId{};
  const Op kind = nodes_[id.index].op;
  const NodeId a = nodes_[id.index].inputs[0];
  const NodeId b = nodes_[id.index].inputs[1];
  const Payload p = nodes_[id.index].payload;
  const Shape a_shape = nodes_[a.index].value.shape();

  switch (kind) {
    case Op::MatMul:
      if (need[0]) out[0] = matmul(*this, g, transpose(*this, b));
      if (need[1]) out[1] = matmul(*this, transpose(*this, a), g);
      return;
    case Op::Transpose: out[0] = transpose(*this, g); return;
    case Op::Add:
      out[0] = g;
      out[1] = g;
      return;
    case Op::Sub:
      out[0] = g;
      if (need[1]) out[1] = neg(*this, g);
      return;
    case Op::Mul:
      if (need[0]) out[0] = mul(*this, g, b);
      if (need[1]) out[1] = mul(*this, g, a);
      return;
    case Op::Neg: out[0] = neg(*this, g); return;
    case Op::Scale: out[0] = scale(*this, g, p.scalar); return;
    case Op::AddScalar: out[0] = g; return;
    case Op::Sum: out[0] = expand_scalar(*this, g, a_shape); return;
    case Op::ExpandScalar: {
      NodeId s = sum(*this, g);
      out[0] = a_shape.empty() ? s : reshape(*this, s, a_shape);
      return;
    }
    case Op::SumRows: out[0] = broadcast_rows(*this, g, a_shape[0]); return;
    case Op::BroadcastRows: out[0] = reshape(*this, sum_rows(*this, g), a_shape); return;
    case Op::SumCols: out[0] = broadcast_cols(*this, g, a_shape[1]); return;
    case Op::BroadcastCols: out[0] = reshape(*this, sum_cols(*this, g), a_shape); return;
    case Op::Reshape: out[0] = reshape(*this, g, a_shape); return;
    case Op::Relu: out[0] = mul(*this, g, relu_mask(*this, a)); return;
    case Op::LeakyRelu: out[0] = mul(*this, g, leaky_mask(*this, a, p.scalar)); return;
    case Op::Abs: out[0] = mul(*this, g, sign(*this, a)); return;
    case Op::Sqrt: out[0] = mul(*this, g, scale(*this, reciprocal(*this, id), 0.5)); return;
    case Op::Reciprocal: out[0] = mul(*this, g, neg(*this, mul(*this, id, id))); return;
    case Op::Exp: out[0] = mul(*this, g, id); return;
    case Op::Log: out[0] = mul(*this, g, reciprocal(*this, a)); return;
    case Op::Tanh: out[0] = mul(*this, g, add_scalar(*this, neg(*this, mul(*this, id, id)), 1.0)); return;
    case Op::Sigmoid:
      out[0] = mul(*this, g, mul(*this, id, add_scalar(*this, neg(*this, id), 1.0)));
      return;
    case Op::Softplus: out[0] = mul(*this, g, sigmoid(*this, scale(*this, a, p.scalar))); return;
    case Op::Elu: {
      // d/dx = 1 for x > 0, exp(x) = y + 1 otherwise.
      const NodeId pos = relu_mask(*this, a);
      const NodeId neg_part = add_scalar(*this, neg(*this, pos), 1.0);
      const NodeId deriv = add(*this, pos, mul(*this, neg_part, add_scalar(*this, id, 1.0)));
      out[0] = mul(*this, g, deriv);
      return;
    }
    case Op::Im2col: out[0] = col2im(*this, g, p.conv, p.count); return;
    case Op::Col2im: out[0] = im2col(*this, g, p.conv, p.count); return;
    case Op::FoldBatch: out[0] = unfold_batch(*this, g, a_shape[0]); return;
    case Op::UnfoldBatch: out[0] = fold_batch(*this, g, a_shape[0]); return;
    case Op::SelectCols: out[0] = scatter_cols(*this, g, p.labels, a_shape[1]); return;
    case Op::ScatterCols: out[0] = select_cols(*this, g, p.labels); return;
    case Op::ReluMask:
    case Op::LeakyMask:
    case Op::Sign:
    case Op::Leaf:
    case Op::Count_: return;
  }
}

namespace {

NodeId rec1(Tape& t, Op op, NodeId a, Payload p = {}) { return t.record(op, std::array{a}, std::move(p)); }
NodeId rec2(Tape& t, Op op, NodeId a, NodeId b) { return t.record(op, std::array{a, b}); }
Payload with_scalar(double s) {
  Payload p;
  p.scalar = s;
  return p;
}
Payload with_count(std::size_t n) {
  Payload p;
  p.count = n;
  return p;
}
Payload with_shape(Shape s) {
  Payload p;
  p.shape = std::move(s);
  return p;
}

}  // namespace

NodeId matmul(Tape& t, NodeId a, NodeId b) { return rec2(t, Op::MatMul, a, b); }
NodeId transpose(Tape& t, NodeId a) { return rec1(t, Op::Transpose, a); }
NodeId add(Tape& t, NodeId a, NodeId b) { return rec2(t, Op::Add, a, b); }
NodeId sub(Tape& t, NodeId a, NodeId b) { return rec2(t, Op::Sub, a, b); }
NodeId mul(Tape& t, NodeId a, NodeId b) { return rec2(t, Op::Mul, a, b); }
NodeId neg(Tape& t, NodeId a) { return rec1(t, Op::Neg, a); }
NodeId scale(Tape& t, NodeId a, double c) { return rec1(t, Op::Scale, a, with_scalar(c)); }
NodeId add_scalar(Tape& t, NodeId a, double c) { return rec1(t, Op::AddScalar, a, with_scalar(c)); }
NodeId sum(Tape& t, NodeId a) { return rec1(t, Op::Sum, a); }
NodeId mean(Tape& t, NodeId a) {
  return scale(t, sum(t, a), 1.0 / static_cast<double>(t.value(a).numel()));
}
NodeId expand_scalar(Tape& t, NodeId s, Shape shape) {
  return rec1(t, Op::ExpandScalar, s, with_shape(std::move(shape)));
}
NodeId sum_rows(Tape& t, NodeId a) { return rec1(t, Op::SumRows, a); }
NodeId broadcast_rows(Tape& t, NodeId v, std::size_t rows) {
  return rec1(t, Op::BroadcastRows, v, with_count(rows));
}
NodeId sum_cols(Tape& t, NodeId a) { return rec1(t, Op::SumCols, a); }
NodeId broadcast_cols(Tape& t, NodeId v, std::size_t cols) {
  return rec1(t, Op::BroadcastCols, v, with_count(cols));
}
NodeId reshape(Tape& t, NodeId a, Shape shape) {
  if (t.value(a).shape() == shape) return a;
  return rec1(t, Op::Reshape, a, with_shape(std::move(shape)));
}
NodeId relu(Tape& t, NodeId a) { return rec1(t, Op::Relu, a); }
NodeId relu_mask(Tape& t, NodeId a) { return rec1(t, Op::ReluMask, a); }
NodeId leaky_relu(Tape& t, NodeId a, double slope) { return rec1(t, Op::LeakyRelu, a, with_scalar(slope)); }
NodeId leaky_mask(Tape& t, NodeId a, double slope) { return rec1(t, Op::LeakyMask, a, with_scalar(slope)); }
NodeId sign(Tape& t, NodeId a) { return rec1(t, Op::Sign, a); }
NodeId abs(Tape& t, NodeId a) { return rec1(t, Op::Abs, a); }
NodeId sqrt(Tape& t, NodeId a) { return rec1(t, Op::Sqrt, a); }
NodeId reciprocal(Tape& t, NodeId a) { return rec1(t, Op::Reciprocal, a); }
NodeId exp(Tape& t, NodeId a) { return rec1(t, Op::Exp, a); }
NodeId log(Tape& t, NodeId a) { return rec1(t, Op::Log, a); }
NodeId tanh(Tape& t, NodeId a) { return rec1(t, Op::Tanh, a); }
NodeId sigmoid(Tape& t, NodeId a) { return rec1(t, Op::Sigmoid, a); }
NodeId softplus(Tape& t, NodeId a, double beta) {
  if (!(beta > 0.0)) throw ContractError("softplus requires beta > 0");
  return rec1(t, Op::Softplus, a, with_scalar(beta));
}
NodeId elu(Tape& t, NodeId a) { return rec1(t, Op::Elu, a); }

NodeId im2col(Tape& t, NodeId x, const ConvGeometry& geom, std::size_t batch) {
  Payload p;
  p.conv = geom;
  p.count = batch;
  return rec1(t, Op::Im2col, x, std::move(p));
}

NodeId col2im(Tape& t, NodeId cols, const ConvGeometry& geom, std::size_t batch) {
  Payload p;
  p.conv = geom;
  p.count = batch;
  return rec1(t, Op::Col2im, cols, std::move(p));
}

NodeId fold_batch(Tape& t, NodeId a, std::size_t batch) { return rec1(t, Op::FoldBatch, a, with_count(batch)); }

NodeId unfold_batch(Tape& t, NodeId a, std::size_t rows) {
  const Tensor& v = t.value(a);
  if (rows == 0 || v.rank() != 2 || v.cols() % rows != 0) {
    throw DimensionError("unfold_batch: " + shape_to_string(v.shape()) + " cannot split into " +
                         std::to_string(rows) + " rows");
  }
  return rec1(t, Op::UnfoldBatch, a, with_shape({rows, v.rows() * (v.cols() / rows)}));
}

NodeId select_cols(Tape& t, NodeId a, std::shared_ptr<const std::vector<std::size_t>> labels) {
  Payload p;
  p.labels = std::move(labels);
  return rec1(t, Op::SelectCols, a, std::move(p));
}

NodeId scatter_cols(Tape& t, NodeId v, std::shared_ptr<const std::vector<std::size_t>> labels,
                    std::size_t cols) {
  Payload p;
  p.labels = std::move(labels);
  p.count = cols;
  return rec1(t, Op::ScatterCols, v, std::move(p));
}

NodeId input_gradient_norm(Tape& t, NodeId f_out, NodeId x) {
  const NodeId total = t.value(f_out).numel() == 1 ? f_out : sum(t, f_out);
  const NodeId grad = t.backward(total, x);
  const NodeId squared = mul(t, grad, grad);
  const Tensor& gv = t.value(grad);
  if (gv.rank() == 2) return sqrt(t, sum_cols(t, squared));
  return sqrt(t, sum(t, squared));
}

}  // namespace gnlab::ad
