#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <algorithm>
#include <numbers>
#include <string>

#include "gnlab/data.hpp"

namespace gnlab {

double Prng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gnlab

namespace gnlab::data {

Mixture2D::Mixture2D(std::vector<Gaussian2D> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw ContractError("mixture needs at least one component");
  if (weights_.size() != components_.size()) throw ContractError("mixture weight count mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ContractError("mixture weights must be non-negative");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw ContractError("mixture weights must sum to 1");
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i].cov;
    if (c[0][1] != c[1][0]) throw ContractError("covariance " + std::to_string(i) + " is not symmetric");
    const double det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if (!(c[0][0] > 0.0) || !(det > 0.0)) {
      throw ContractError("covariance " + std::to_string(i) + " is not positive definite");
    }
    Factor f;
    f.l11 = std::sqrt(c[0][0]);
    f.l21 = c[1][0] / f.l11;
    f.l22 = std::sqrt(c[1][1] - f.l21 * f.l21);
    f.inv[0][0] = c[1][1] / det;
    f.inv[1][1] = c[0][0] / det;
    f.inv[0][1] = f.inv[1][0] = -c[0][1] / det;
    f.log_norm = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det);
    factors_.push_back(f);
  }
}

Mixture2D Mixture2D::single(double mx, double my, double variance) {
  Gaussian2D g;
  g.mean[0] = mx;
  g.mean[1] = my;
  g.cov[0][0] = g.cov[1][1] = variance;
  g.cov[0][1] = g.cov[1][0] = 0.0;
  return Mixture2D({g}, {1.0});
}

Tensor Mixture2D::sample(std::size_t n, Prng& prng) const {
  if (n == 0) throw ContractError("sample count must be at least 1");
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    if (components_.size() > 1) {
      const double u = prng.uniform();
      double acc = 0.0;
      k = components_.size() - 1;
      for (std::size_t j = 0; j < components_.size(); ++j) {
        acc += weights_[j];
        if (u < acc) {
          k = j;
          break;
        }
      }
    }
    const double z1 = prng.normal();
    const double z2 = prng.normal();
    const Factor& f = factors_[k];
    out[2 * i] = components_[k].mean[0] + f.l11 * z1;
    out[2 * i + 1] = components_[k].mean[1] + f.l21 * z1 + f.l22 * z2;
  }
  return out;
}

double Mixture2D::density(double x, double y) const {
  double p = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const Factor& f = factors_[k];
    const double dx = x - components_[k].mean[0];
    const double dy = y - components_[k].mean[1];
    const double q = dx * (f.inv[0][0] * dx + f.inv[0][1] * dy) + dy * (f.inv[1][0] * dx + f.inv[1][1] * dy);
    p += weights_[k] * std::exp(f.log_norm - 0.5 * q);
  }
  return p;
}

double Mixture2D::log_density(double x, double y) const {
  std::vector<double> terms;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (weights_[k] == 0.0) continue;
    const Factor& f = factors_[k];
    const double dx = x - components_[k].mean[0];
    const double dy = y - components_[k].mean[1];
    const double q = dx * (f.inv[0][0] * dx + f.inv[0][1] * dy) + dy * (f.inv[1][0] * dx + f.inv[1][1] * dy);
    terms.push_back(std::log(weights_[k]) + f.log_norm - 0.5 * q);
    top = std::max(top, terms.back());
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

PoolSource::PoolSource(Tensor pool) : pool_(std::move(pool)) {
  if (pool_.rank() != 2) throw DimensionError("sample pool must be [n x d], got " + shape_to_string(pool_.shape()));
}

Tensor PoolSource::sample(std::size_t n, Prng& prng) {
  if (n == 0) throw ContractError("sample count must be at least 1");
  const std::size_t rows = pool_.rows();
  const std::size_t d = pool_.cols();
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = static_cast<std::size_t>(prng() % rows);
    std::copy_n(pool_.ptr() + r * d, d, out.ptr() + i * d);
  }
  return out;
}

Tensor parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("truncated IDX header", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("bad IDX magic", 0);
  if (bytes[2] != 0x08) throw FormatError("unsupported IDX element type (only unsigned bytes)", 2);
  const std::size_t rank = bytes[3];
  if (rank == 0) throw FormatError("IDX file declares zero dimensions", 3);
  std::size_t pos = 4;
  Shape shape;
  for (std::size_t i = 0; i < rank; ++i) {
    if (bytes.size() - pos < 4) throw FormatError("truncated IDX dimension list", pos);
    const std::uint32_t d = (std::uint32_t{bytes[pos]} << 24) | (std::uint32_t{bytes[pos + 1]} << 16) |
                            (std::uint32_t{bytes[pos + 2]} << 8) | std::uint32_t{bytes[pos + 3]};
    if (d == 0) throw FormatError("IDX dimension is zero", pos);
    shape.push_back(d);
    pos += 4;
  }
  const std::size_t count = shape_numel(shape);
  if (bytes.size() - pos < count) throw FormatError("truncated IDX payload", bytes.size());
  if (bytes.size() - pos > count) throw FormatError("trailing bytes after IDX payload", pos + count);
  Tensor t(shape);
  for (std::size_t i = 0; i < count; ++i) t[i] = static_cast<double>(bytes[pos + i]) / 127.5 - 1.0;
  return t;
}

Tensor load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<std::uint8_t> encode_idx(const std::vector<std::uint32_t>& dims, const std::vector<std::uint8_t>& payload) {
  std::vector<std::uint8_t> out = {0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  for (std::uint32_t d : dims) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(d >> s));
  }
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace gnlab::data
