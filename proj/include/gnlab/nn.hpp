#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "gnlab/autodiff.hpp"
#include "gnlab/prng.hpp"
#include "gnlab/tensor.hpp"

namespace gnlab::nn {

enum class Activation : std::uint8_t { relu, leaky_relu, elu, softplus, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.1;

const char* activation_name(Activation a);
/// Parses "relu", "leaky_relu", "elu", "softplus", "tanh", "sigmoid".
Activation parse_activation(const std::string& name);
bool is_piecewise_linear(Activation a);

struct LinearLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

struct ActivationLayer {
  Activation kind = Activation::relu;
  double beta = 1.0;  // softplus only
};

using LayerSpec = std::variant<LinearLayer, ConvLayer, ActivationLayer>;

/// Feedforward stack. An "affine layer" (linear or conv) together with the
/// activations that follow it forms one layer of the k-layer prefix f_k.
struct NetworkSpec {
  Shape input_shape;  // {n} for vectors, {C, H, W} for images
  std::vector<LayerSpec> layers;

  /// Throws DimensionError naming the offending layer index.
  void validate() const;
  std::size_t input_size() const { return shape_numel(input_shape); }
  std::size_t output_size() const;
  std::size_t affine_count() const;
  bool is_piecewise_linear() const;

  /// MLP helper: `depth` affine layers, hidden width `width`, activation after
  /// every affine layer except the last.
  static NetworkSpec mlp(std::size_t input, std::size_t width, std::size_t depth, std::size_t output,
                         ActivationLayer act = {});
};

/// Weights and biases per affine layer. Linear weights are [out x in]; conv
/// weights are [out_ch x in_ch*k*k]; biases are {out} / {out_ch}.
struct Params {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t size() const { return weights.size(); }
  std::size_t parameter_count() const;
  /// Throws DimensionError when shapes disagree with `spec`.
  void check(const NetworkSpec& spec) const;
  friend bool operator==(const Params&, const Params&) = default;
};

/// Kaiming normal weights (std sqrt(2/fan_in)), zero biases.
Params init_kaiming(const NetworkSpec& spec, Prng& prng);
Params init_kaiming(const NetworkSpec& spec, std::uint64_t seed);
Params zeros_like(const Params& params);

/// Parameters placed on a tape, one node per tensor.
struct BoundParams {
  std::vector<ad::NodeId> weights;
  std::vector<ad::NodeId> biases;
  std::vector<ad::NodeId> all() const;
};

BoundParams bind(ad::Tape& tape, const Params& params);
/// Reads gradient nodes back into Params in weight/bias order (as returned by all()).
Params collect(const ad::Tape& tape, const std::vector<ad::NodeId>& nodes, const Params& like);

/// Batched evaluation: x is [B x input_size]; returns [B x output_size].
ad::NodeId forward(const NetworkSpec& spec, const BoundParams& params, ad::NodeId x, ad::Tape& tape);

/// Output of the first k affine layers (with their activations), [B x features].
ad::NodeId prefix_forward(const NetworkSpec& spec, const BoundParams& params, std::size_t k,
                          ad::NodeId x, ad::Tape& tape);

/// Per-sample scalar head: [B x 1] -> {B}.
ad::NodeId scalar_output(ad::Tape& tape, ad::NodeId out);

/// Tape-free convenience: evaluates the network on a [B x n] batch.
Tensor evaluate(const NetworkSpec& spec, const Params& params, const Tensor& x);
/// Output of every affine layer before its activation, in layer order.
std::vector<Tensor> pre_activations(const NetworkSpec& spec, const Params& params, const Tensor& x);

// Binary container "GNNET1"; layout documented in README.md.
void save_network(const std::filesystem::path& path, const NetworkSpec& spec, const Params& params);
struct LoadedNetwork {
  NetworkSpec spec;
  Params params;
};
LoadedNetwork load_network(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_network(const NetworkSpec& spec, const Params& params);
LoadedNetwork decode_network(const std::vector<std::uint8_t>& bytes);

}  // namespace gnlab::nn
