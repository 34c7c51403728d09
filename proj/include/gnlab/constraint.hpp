#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gnlab/autodiff.hpp"
#include "gnlab/nn.hpp"
#include "gnlab/prng.hpp"

namespace gnlab::constraint {

/// Stabilizer added to the gradient norm in the GN denominator.
enum class Zeta { abs_f, one, zero };

const char* zeta_name(Zeta z);

struct Gn {
  Zeta zeta = Zeta::abs_f;
};
/// GN applied to the label-selected head of a multi-head discriminator.
struct GnConditional {};
struct Sn {
  int power_iters = 1;
};
struct Gp {
  int center = 1;
  double lambda = 10.0;
};
struct Clip {
  double c = 0.01;
};
struct None {};

using ConstraintMode = std::variant<None, Gn, GnConditional, Sn, Gp, Clip>;

/// Short tag: gn_abs_f, gn_one, gn_zero, gn_conditional, sn, gp0, gp1, clip, none.
std::string mode_name(const ConstraintMode& mode);
/// Accepts the tags above plus "gn" for gn_abs_f. Throws ContractError.
ConstraintMode parse_mode(const std::string& name);
/// Throws ContractError on lambda <= 0, c <= 0, power_iters < 1 or gp center not in {0,1}.
void validate(const ConstraintMode& mode);
bool is_gn(const ConstraintMode& mode);

/// f_hat = f / (||grad_x f|| + zeta) per sample; f is {B}, x is [B x n].
/// A zero denominator yields f_hat = 0 (reciprocal convention 1/0 := 0).
ad::NodeId gn_normalize(ad::Tape& tape, ad::NodeId f, ad::NodeId x, Zeta zeta);
ad::NodeId gn_normalize(const nn::NetworkSpec& spec, const nn::BoundParams& params, ad::NodeId x, Zeta zeta,
                        ad::Tape& tape);

/// D_y(x) / (||grad_x D_y(x)|| + |D_y(x)|) with y taken per sample from `labels`.
ad::NodeId gn_conditional(const nn::NetworkSpec& spec, const nn::BoundParams& params, ad::NodeId x,
                          std::shared_ptr<const std::vector<std::size_t>> labels, ad::Tape& tape);

/// Persistent power-iteration vectors, one (u, v) pair per affine layer.
struct SpectralState {
  std::vector<Tensor> u;  // {rows}
  std::vector<Tensor> v;  // {cols}
};

SpectralState init_spectral_state(const nn::Params& params, Prng& prng);

/// Runs `iters` power iterations on w (viewed as rows x rest), updating u and v,
/// and returns sigma = u^T w v.
double power_iteration(const Tensor& w, Tensor& u, Tensor& v, int iters);

/// Every weight divided by its estimated largest singular value. Advances `state`.
nn::Params spectral_normalize(const nn::Params& params, SpectralState& state, int iters);

/// Weight nodes replaced by w / (u^T w v) with u, v held constant, so gradients
/// flow through the normalization. Does not advance `state`.
nn::BoundParams spectral_bind(ad::Tape& tape, const nn::BoundParams& params, const SpectralState& state);

/// lambda * mean_i (||grad D(x~_i)|| - center)^2 with x~ = u x_real + (1-u) x_fake,
/// one u per sample from `prng`.
ad::NodeId gradient_penalty(const nn::NetworkSpec& spec, const nn::BoundParams& params, const Tensor& x_real,
                            const Tensor& x_fake, int center, double lambda, Prng& prng, ad::Tape& tape);

/// Clamp of every weight and bias to [-c, c].
nn::Params weight_clip(const nn::Params& params, double c);

/// The discriminator seen by the loss: GN-normalized output for GN modes,
/// spectrally normalized weights for SN, raw output otherwise. Returns {B}.
/// `spectral` is required for Sn; `labels` for GnConditional.
ad::NodeId critic_output(const nn::NetworkSpec& spec, const nn::BoundParams& params, const ConstraintMode& mode,
                         const SpectralState* spectral, ad::NodeId x, ad::Tape& tape,
                         std::shared_ptr<const std::vector<std::size_t>> labels = nullptr);

/// Per-sample critic values and input-gradient norms ||grad_x D_hat(x_i)|| for a batch.
struct CriticProbe {
  Tensor output;     // {B}
  Tensor grad_norm;  // {B}
};

CriticProbe probe_critic(const nn::NetworkSpec& spec, const nn::Params& params, const ConstraintMode& mode,
                         const SpectralState* spectral, const Tensor& x,
                         std::shared_ptr<const std::vector<std::size_t>> labels = nullptr);

}  // namespace gnlab::constraint
