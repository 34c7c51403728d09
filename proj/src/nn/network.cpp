#include <cmath>
#include <string>

#include "gnlab/nn.hpp"

namespace gnlab::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::elu: return "elu";
    case Activation::softplus: return "softplus";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  for (auto a : {Activation::relu, Activation::leaky_relu, Activation::elu, Activation::softplus,
                 Activation::tanh, Activation::sigmoid}) {
    if (name == activation_name(a)) return a;
  }
  throw ContractError("unknown activation '" + name + "'");
}

bool is_piecewise_linear(Activation a) { return a == Activation::relu || a == Activation::leaky_relu; }

namespace {

std::string at_layer(std::size_t i) { return "layer " + std::to_string(i) + ": "; }

// Walks the spec, returning the feature shape after each layer.
std::vector<Shape> trace_shapes(const NetworkSpec& spec) {
  if (spec.input_shape.empty()) throw DimensionError("network input shape is empty");
  for (std::size_t d : spec.input_shape) {
    if (d == 0) throw DimensionError("network input shape has a zero dimension");
  }
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      if (lin->in == 0 || lin->out == 0) throw DimensionError(at_layer(i) + "linear dimensions must be positive");
      if (shape_numel(cur) != lin->in) {
        throw DimensionError(at_layer(i) + "linear expects " + std::to_string(lin->in) +
                             " inputs, previous layer yields " + shape_to_string(cur));
      }
      cur = {lin->out};
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      if (conv->in_channels == 0 || conv->out_channels == 0 || conv->kernel == 0 || conv->stride == 0) {
        throw DimensionError(at_layer(i) + "conv dimensions must be positive");
      }
      if (cur.size() != 3 || cur[0] != conv->in_channels) {
        throw DimensionError(at_layer(i) + "conv expects " + std::to_string(conv->in_channels) +
                             " input channels, previous layer yields " + shape_to_string(cur));
      }
      ConvGeometry g{cur[0], cur[1], cur[2], conv->kernel, conv->kernel, conv->stride, conv->pad};
      try {
        g.validate();
      } catch (const DimensionError& e) {
        throw DimensionError(at_layer(i) + e.what());
      }
      cur = {conv->out_channels, g.out_height(), g.out_width()};
    } else {
      const auto& act = std::get<ActivationLayer>(layer);
      if (act.kind == Activation::softplus && !(act.beta > 0.0)) {
        throw DimensionError(at_layer(i) + "softplus requires beta > 0");
      }
    }
    shapes.push_back(cur);
  }
  return shapes;
}

ad::NodeId apply_activation(ad::Tape& t, const ActivationLayer& act, ad::NodeId h) {
  switch (act.kind) {
    case Activation::relu: return ad::relu(t, h);
    case Activation::leaky_relu: return ad::leaky_relu(t, h, kLeakySlope);
    case Activation::elu: return ad::elu(t, h);
    case Activation::softplus: return ad::softplus(t, h, act.beta);
    case Activation::tanh: return ad::tanh(t, h);
    case Activation::sigmoid: return ad::sigmoid(t, h);
  }
  return h;
}

ad::NodeId run_layers(const NetworkSpec& spec, const BoundParams& params, std::size_t affine_limit,
                      ad::NodeId x, ad::Tape& tape, std::vector<ad::NodeId>* affine_out = nullptr) {
  const std::vector<Shape> shapes = trace_shapes(spec);
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2 || xv.cols() != spec.input_size()) {
    throw DimensionError("network input must be [B x " + std::to_string(spec.input_size()) + "], got " +
                         shape_to_string(xv.shape()));
  }
  if (params.weights.size() != spec.affine_count() || params.biases.size() != spec.affine_count()) {
    throw DimensionError("parameter count does not match the network's affine layers");
  }
  const std::size_t batch = xv.rows();
  ad::NodeId h = x;
  Shape cur = spec.input_shape;
  std::size_t affine = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (std::holds_alternative<ActivationLayer>(layer)) {
      h = apply_activation(tape, std::get<ActivationLayer>(layer), h);
    } else {
      if (affine == affine_limit) break;
      const ad::NodeId w = params.weights[affine];
      const ad::NodeId b = params.biases[affine];
      if (std::holds_alternative<LinearLayer>(layer)) {
        try {
          h = ad::matmul(tape, h, ad::transpose(tape, w));
          h = ad::add(tape, h, ad::broadcast_rows(tape, b, batch));
        } catch (const DimensionError& e) {
          throw DimensionError(at_layer(i) + e.what());
        }
      } else {
        const auto& conv = std::get<ConvLayer>(layer);
        const ConvGeometry g{cur[0], cur[1], cur[2], conv.kernel, conv.kernel, conv.stride, conv.pad};
        try {
          const ad::NodeId cols = ad::im2col(tape, h, g, batch);
          ad::NodeId out = ad::matmul(tape, w, cols);
          out = ad::add(tape, out, ad::broadcast_cols(tape, b, batch * g.positions()));
          h = ad::fold_batch(tape, out, batch);
        } catch (const DimensionError& e) {
          throw DimensionError(at_layer(i) + e.what());
        }
      }
      if (affine_out) affine_out->push_back(h);
      ++affine;
    }
    cur = shapes[i];
  }
  return h;
}

}  // namespace

void NetworkSpec::validate() const { trace_shapes(*this); }

std::size_t NetworkSpec::output_size() const {
  const auto shapes = trace_shapes(*this);
  return shapes.empty() ? input_size() : shape_numel(shapes.back());
}

std::size_t NetworkSpec::affine_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += std::holds_alternative<ActivationLayer>(l) ? 0 : 1;
  return n;
}

bool NetworkSpec::is_piecewise_linear() const {
  for (const auto& l : layers) {
    if (const auto* a = std::get_if<ActivationLayer>(&l); a && !nn::is_piecewise_linear(a->kind)) return false;
  }
  return true;
}

NetworkSpec NetworkSpec::mlp(std::size_t input, std::size_t width, std::size_t depth, std::size_t output,
                             ActivationLayer act) {
  if (depth == 0) throw DimensionError("mlp depth must be at least 1");
  NetworkSpec spec;
  spec.input_shape = {input};
  std::size_t in = input;
  for (std::size_t k = 0; k + 1 < depth; ++k) {
    spec.layers.emplace_back(LinearLayer{in, width});
    spec.layers.emplace_back(act);
    in = width;
  }
  spec.layers.emplace_back(LinearLayer{in, output});
  spec.validate();
  return spec;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.numel();
  for (const auto& b : biases) n += b.numel();
  return n;
}

void Params::check(const NetworkSpec& spec) const {
  const auto shapes = trace_shapes(spec);
  if (weights.size() != spec.affine_count() || biases.size() != spec.affine_count()) {
    throw DimensionError("expected " + std::to_string(spec.affine_count()) + " affine layers, params hold " +
                         std::to_string(weights.size()));
  }
  Shape cur = spec.input_shape;
  std::size_t k = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    Shape w_shape;
    Shape b_shape;
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      w_shape = {lin->out, lin->in};
      b_shape = {lin->out};
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      w_shape = {conv->out_channels, conv->in_channels * conv->kernel * conv->kernel};
      b_shape = {conv->out_channels};
    }
    if (!w_shape.empty()) {
      if (weights[k].shape() != w_shape || biases[k].shape() != b_shape) {
        throw DimensionError(at_layer(i) + "parameter shapes " + shape_to_string(weights[k].shape()) + "/" +
                             shape_to_string(biases[k].shape()) + " expected " + shape_to_string(w_shape) +
                             "/" + shape_to_string(b_shape));
      }
      ++k;
    }
    cur = shapes[i];
  }
}

Params init_kaiming(const NetworkSpec& spec, Prng& prng) {
  spec.validate();
  Params p;
  for (const auto& layer : spec.layers) {
    std::size_t out = 0;
    std::size_t fan_in = 0;
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      out = lin->out;
      fan_in = lin->in;
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      out = conv->out_channels;
      fan_in = conv->in_channels * conv->kernel * conv->kernel;
    } else {
      continue;
    }
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor w({out, fan_in});
    for (double& v : w.data()) v = std_dev * prng.normal();
    p.weights.push_back(std::move(w));
    p.biases.push_back(Tensor({out}));
  }
  return p;
}

Params init_kaiming(const NetworkSpec& spec, std::uint64_t seed) {
  Prng prng(seed);
  return init_kaiming(spec, prng);
}

Params zeros_like(const Params& params) {
  Params z;
  for (const auto& w : params.weights) z.weights.push_back(Tensor::zeros(w.shape()));
  for (const auto& b : params.biases) z.biases.push_back(Tensor::zeros(b.shape()));
  return z;
}

std::vector<ad::NodeId> BoundParams::all() const {
  std::vector<ad::NodeId> ids;
  ids.reserve(weights.size() + biases.size());
  ids.insert(ids.end(), weights.begin(), weights.end());
  ids.insert(ids.end(), biases.begin(), biases.end());
  return ids;
}

BoundParams bind(ad::Tape& tape, const Params& params) {
  BoundParams b;
  for (const auto& w : params.weights) b.weights.push_back(tape.leaf(w));
  for (const auto& v : params.biases) b.biases.push_back(tape.leaf(v));
  return b;
}

Params collect(const ad::Tape& tape, const std::vector<ad::NodeId>& nodes, const Params& like) {
  if (nodes.size() != like.weights.size() + like.biases.size()) {
    throw DimensionError("collect: node count does not match parameter layout");
  }
  Params out;
  const std::size_t n = like.weights.size();
  for (std::size_t i = 0; i < n; ++i) out.weights.push_back(tape.value(nodes[i]).reshaped(like.weights[i].shape()));
  for (std::size_t i = 0; i < like.biases.size(); ++i) {
    out.biases.push_back(tape.value(nodes[n + i]).reshaped(like.biases[i].shape()));
  }
  return out;
}

ad::NodeId forward(const NetworkSpec& spec, const BoundParams& params, ad::NodeId x, ad::Tape& tape) {
  return run_layers(spec, params, spec.affine_count(), x, tape);
}

ad::NodeId prefix_forward(const NetworkSpec& spec, const BoundParams& params, std::size_t k, ad::NodeId x,
                          ad::Tape& tape) {
  if (k < 1 || k > spec.affine_count()) {
    throw ContractError("prefix length " + std::to_string(k) + " outside [1, " +
                        std::to_string(spec.affine_count()) + "]");
  }
  return run_layers(spec, params, k, x, tape);
}

ad::NodeId scalar_output(ad::Tape& tape, ad::NodeId out) {
  const Tensor& v = tape.value(out);
  if (v.rank() != 2 || v.cols() != 1) {
    throw DimensionError("expected a per-sample scalar head [B x 1], got " + shape_to_string(v.shape()));
  }
  return ad::reshape(tape, out, {v.rows()});
}

Tensor evaluate(const NetworkSpec& spec, const Params& params, const Tensor& x) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  const ad::NodeId xn = tape.leaf(x);
  return tape.value(forward(spec, bound, xn, tape));
}

std::vector<Tensor> pre_activations(const NetworkSpec& spec, const Params& params, const Tensor& x) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  std::vector<ad::NodeId> nodes;
  run_layers(spec, bound, spec.affine_count(), tape.leaf(x), tape, &nodes);
  std::vector<Tensor> out;
  for (ad::NodeId n : nodes) out.push_back(tape.value(n));
  return out;
}

}  // namespace gnlab::nn
