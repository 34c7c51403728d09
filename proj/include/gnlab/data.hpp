#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "gnlab/prng.hpp"
#include "gnlab/tensor.hpp"

namespace gnlab::data {

struct Gaussian2D {
  double mean[2] = {0.0, 0.0};
  double cov[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
};

/// Finite mixture of 2D Gaussians. Construction validates the covariances
/// (symmetric positive definite) and the weights (non-negative, sum to 1).
class Mixture2D {
 public:
  Mixture2D(std::vector<Gaussian2D> components, std::vector<double> weights);
  static Mixture2D single(double mx, double my, double variance);

  std::size_t size() const { return components_.size(); }
  const Gaussian2D& component(std::size_t i) const { return components_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// n x 2 samples: component by weight, then a Cholesky-transformed standard normal.
  Tensor sample(std::size_t n, Prng& prng) const;
  double density(double x, double y) const;
  /// log density via log-sum-exp; finite far into the tails.
  double log_density(double x, double y) const;

 private:
  struct Factor {
    double l11, l21, l22;  // lower Cholesky factor
    double inv[2][2];
    double log_norm;       // -log(2*pi*sqrt(det))
  };
  std::vector<Gaussian2D> components_;
  std::vector<double> weights_;
  std::vector<Factor> factors_;
};

/// Source of training batches (rows are samples).
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual Tensor sample(std::size_t n, Prng& prng) = 0;
  virtual std::size_t dim() const = 0;
};

class MixtureSource : public DataSource {
 public:
  explicit MixtureSource(Mixture2D mixture) : mixture_(std::move(mixture)) {}
  Tensor sample(std::size_t n, Prng& prng) override { return mixture_.sample(n, prng); }
  std::size_t dim() const override { return 2; }
  const Mixture2D& mixture() const { return mixture_; }

 private:
  Mixture2D mixture_;
};

/// Draws rows uniformly with replacement from a fixed pool.
class PoolSource : public DataSource {
 public:
  explicit PoolSource(Tensor pool);
  Tensor sample(std::size_t n, Prng& prng) override;
  std::size_t dim() const override { return pool_.cols(); }
  const Tensor& pool() const { return pool_; }

 private:
  Tensor pool_;
};

/// Parses an IDX file of unsigned bytes, scaled to [-1, 1]. The result keeps
/// the file's dimensions. Errors throw FormatError with the byte offset.
Tensor load_idx(const std::filesystem::path& path);
Tensor parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_idx(const std::vector<std::uint32_t>& dims,
                                     const std::vector<std::uint8_t>& payload);

}  // namespace gnlab::data
