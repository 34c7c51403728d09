#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gnlab/autodiff.hpp"
#include "gnlab/constraint.hpp"
#include "gnlab/data.hpp"
#include "gnlab/nn.hpp"

namespace gnlab::gan {

enum class LossKind { vanilla, non_saturating, hinge, wasserstein };

struct Loss {
  LossKind kind = LossKind::hinge;
  /// vanilla / non-saturating only: apply a sigmoid to the critic output. When
  /// false the outputs are used as probabilities directly and must lie in (0, 1).
  bool with_sigmoid = true;
};

/// vanilla, ns, ns_nosigmoid, hinge, wasserstein.
std::string loss_name(const Loss& loss);
Loss parse_loss(const std::string& name);

/// Mean discriminator loss over equal-sized real and fake batches ({B} nodes).
ad::NodeId discriminator_loss(ad::Tape& tape, const Loss& loss, ad::NodeId d_real, ad::NodeId d_fake);
ad::NodeId generator_loss(ad::Tape& tape, const Loss& loss, ad::NodeId d_fake);

struct AdamConfig {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  nn::Params m;
  nn::Params v;
  std::size_t t = 0;
  static AdamState like(const nn::Params& params);
};

/// Bias-corrected Adam in the folded form
///   theta -= lr * sqrt(1 - b2^t) / (1 - b1^t) * m / (sqrt(v) + eps).
void adam_step(nn::Params& params, const nn::Params& grads, AdamState& state, double lr, const AdamConfig& cfg);

struct EmaState {
  nn::Params shadow;
  double decay = 0.9999;
};

/// shadow <- decay * shadow + (1 - decay) * params
void ema_update(EmaState& ema, const nn::Params& params);

struct TrainConfig {
  std::size_t batch_size = 64;  // M
  std::size_t n_dis = 5;
  std::size_t steps = 0;        // N generator updates
  double lr_g = 2e-4;
  double lr_d = 4e-4;
  AdamConfig adam;
  bool lr_decay = false;
  std::uint64_t seed = 0;
  std::optional<double> ema_decay;
  Loss loss;
  std::size_t latent_dim = 64;
  bool generator_tanh = false;
  std::size_t lipschitz_every = 100;
  std::size_t lipschitz_samples = 1024;

  /// Throws ContractError on non-positive sizes/rates or betas outside [0, 1).
  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double max_grad_norm = 0.0;
  std::optional<double> lipschitz_est;
  double lr = 0.0;
};

struct TrainReport {
  nn::Params generator;
  nn::Params discriminator;
  std::optional<nn::Params> generator_ema;
  std::optional<constraint::SpectralState> spectral;
  std::vector<StepMetrics> metrics;
  std::size_t d_updates = 0;
  std::size_t g_updates = 0;
};

/// Fired after every parameter update.
struct StepEvent {
  bool generator_update = false;
  std::size_t step = 0;
  std::size_t d_index = 0;
  const nn::Params& generator;
  const nn::Params& discriminator;
  double max_abs_output = 0.0;  // over the critic outputs used by this update
};
using StepObserver = std::function<void(const StepEvent&)>;

struct InitialParams {
  nn::Params generator;
  nn::Params discriminator;
};

/// Alternating GAN training: n_dis discriminator updates on fresh size-M real
/// and fake batches, then one generator update on 2M fresh latents, repeated
/// `steps` times. Deterministic per seed. Non-finite losses throw NumericalError.
TrainReport train(const nn::NetworkSpec& gen_spec, const nn::NetworkSpec& disc_spec,
                  const constraint::ConstraintMode& mode, data::DataSource& real, const TrainConfig& cfg,
                  const std::optional<InitialParams>& init = std::nullopt, const StepObserver& observer = {});

struct DiscriminatorRun {
  nn::Params params;
  std::optional<constraint::SpectralState> spectral;
  std::vector<double> losses;
};

/// Trains a discriminator alone against two fixed distributions: cfg.steps
/// updates on fresh size-M batches from each, using lr_d, the Adam settings and
/// the loss kind of `cfg`.
DiscriminatorRun train_discriminator(const nn::NetworkSpec& spec, const constraint::ConstraintMode& mode,
                                     data::DataSource& real, data::DataSource& fake, const TrainConfig& cfg);

/// Samples from the generator for a [n x latent_dim] standard normal batch.
Tensor generate(const nn::NetworkSpec& gen_spec, const nn::Params& gen, std::size_t n, std::size_t latent_dim,
                bool tanh_output, Prng& prng);

/// CSV with header step,loss_d,loss_g,max_grad_norm,lipschitz_est,lr. Values
/// use 17 significant digits; a missing Lipschitz estimate is an empty field.
void write_report_csv(std::ostream& out, const TrainReport& report);

}  // namespace gnlab::gan
