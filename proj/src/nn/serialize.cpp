#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gnlab/nn.hpp"

namespace gnlab::nn {
namespace {

constexpr char kMagic[6] = {'G', 'N', 'N', 'E', 'T', '1'};
constexpr std::uint8_t kLinear = 0;
constexpr std::uint8_t kConv = 1;
constexpr std::uint8_t kActivation = 2;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint64_t v) {
    if (v > UINT32_MAX) throw DimensionError("dimension too large for GNNET1");
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::size_t offset() const { return pos_; }
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) throw FormatError(std::string("truncated GNNET1 file reading ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return std::bit_cast<double>(bits);
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_network(const NetworkSpec& spec, const Params& params) {
  params.check(spec);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(spec.layers.size());
  w.u32(spec.input_shape.size());
  for (std::size_t d : spec.input_shape) w.u32(d);
  for (const auto& layer : spec.layers) {
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      w.u8(kLinear);
      w.u32(lin->in);
      w.u32(lin->out);
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      w.u8(kConv);
      w.u32(conv->in_channels);
      w.u32(conv->out_channels);
      w.u32(conv->kernel);
      w.u32(conv->stride);
      w.u32(conv->pad);
    } else {
      const auto& act = std::get<ActivationLayer>(layer);
      w.u8(kActivation);
      w.u8(static_cast<std::uint8_t>(act.kind));
      w.f64(act.beta);
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (double v : params.weights[k].data()) w.f64(v);
    for (double v : params.biases[k].data()) w.f64(v);
  }
  return w.take();
}

LoadedNetwork decode_network(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(sizeof kMagic, "magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw FormatError("bad GNNET1 magic", 0);
  for (std::size_t i = 0; i < sizeof kMagic; ++i) r.u8("magic");

  LoadedNetwork net;
  const std::uint32_t layer_count = r.u32("layer count");
  const std::uint32_t rank = r.u32("input rank");
  if (rank == 0 || rank > 3) throw FormatError("input rank must be 1..3", r.offset() - 4);
  for (std::uint32_t i = 0; i < rank; ++i) net.spec.input_shape.push_back(r.u32("input dimension"));
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t kind = r.u8("layer kind");
    if (kind == kLinear) {
      LinearLayer lin;
      lin.in = r.u32("linear in");
      lin.out = r.u32("linear out");
      net.spec.layers.emplace_back(lin);
    } else if (kind == kConv) {
      ConvLayer conv;
      conv.in_channels = r.u32("conv in_channels");
      conv.out_channels = r.u32("conv out_channels");
      conv.kernel = r.u32("conv kernel");
      conv.stride = r.u32("conv stride");
      conv.pad = r.u32("conv pad");
      net.spec.layers.emplace_back(conv);
    } else if (kind == kActivation) {
      const std::uint8_t id = r.u8("activation id");
      if (id > static_cast<std::uint8_t>(Activation::sigmoid)) {
        throw FormatError("unknown activation id " + std::to_string(id), r.offset() - 1);
      }
      ActivationLayer act;
      act.kind = static_cast<Activation>(id);
      act.beta = r.f64("activation beta");
      net.spec.layers.emplace_back(act);
    } else {
      throw FormatError("unknown layer kind " + std::to_string(kind), at);
    }
  }
  try {
    net.spec.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("inconsistent layer descriptors: ") + e.what(), r.offset());
  }

  for (const auto& layer : net.spec.layers) {
    Shape ws;
    Shape bs;
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      ws = {lin->out, lin->in};
      bs = {lin->out};
    } else if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      ws = {conv->out_channels, conv->in_channels * conv->kernel * conv->kernel};
      bs = {conv->out_channels};
    } else {
      continue;
    }
    Tensor w(ws);
    for (double& v : w.data()) v = r.f64("weights");
    Tensor b(bs);
    for (double& v : b.data()) v = r.f64("biases");
    net.params.weights.push_back(std::move(w));
    net.params.biases.push_back(std::move(b));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after GNNET1 payload", r.offset());
  return net;
}

void save_network(const std::filesystem::path& path, const NetworkSpec& spec, const Params& params) {
  const auto bytes = encode_network(spec, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

LoadedNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_network(bytes);
}

}  // namespace gnlab::nn
