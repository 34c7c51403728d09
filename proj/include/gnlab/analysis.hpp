#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gnlab/constraint.hpp"
#include "gnlab/data.hpp"
#include "gnlab/gan.hpp"
#include "gnlab/nn.hpp"

namespace gnlab::analysis {

/// Worker count for analysis loops: GNLAB_THREADS when set to a positive
/// integer, otherwise the hardware concurrency (at least 1).
std::size_t thread_count();

/// Calls fn(i) for every i in [0, n), spread over thread_count() workers.
/// The first exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

using Sampler = std::function<Tensor(std::size_t n, Prng& prng)>;

Sampler sampler_from(data::DataSource& source);
/// Uniform on [lo, hi]^dim.
Sampler uniform_box(std::size_t dim, double lo, double hi);

/// Max of ||grad_x D_hat(x)|| over n samples drawn from each source. Samples
/// are drawn serially from `prng`; evaluation is parallel, so the result does
/// not depend on the thread count.
double estimate_lipschitz(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const constraint::SpectralState* spectral, const std::vector<Sampler>& sources,
                          std::size_t n, Prng& prng);

/// Max over n sampled pairs of ||f_k(x) - f_k(y)|| / ||x - y||.
double prefix_lipschitz(const nn::NetworkSpec& spec, const nn::Params& params, std::size_t k, const Sampler& sampler,
                        std::size_t n, Prng& prng);

/// prefix_lipschitz for k = 1..K evaluated on one shared set of pairs.
std::vector<double> prefix_lipschitz_all(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                                         std::size_t n, Prng& prng);

/// Largest singular value of each (reshaped) weight matrix, by power iteration.
std::vector<double> layer_spectral_norms(const nn::Params& params, int iters = 200);

struct LipschitzReport {
  double model_estimate = 0.0;
  std::vector<double> prefix_estimates;  // k = 1..K
  std::vector<double> spectral_norms;    // per affine layer
  std::size_t samples = 0;
};

/// CSV rows `quantity,index,value` for model, prefix, spectral_norm and samples.
void write_lipschitz_csv(std::ostream& out, const LipschitzReport& report);

/// Closed form of ||grad f_hat|| when the Hessian of f vanishes:
///   zeta=|f|: (g/(g+|f|))^2,  zeta=1: g/(g+1),  zeta=0: 1 (0 if g=0).
double gn_closed_form(double grad_norm, double f, constraint::Zeta zeta);

struct GnBoundReport {
  double max_discrepancy = 0.0;  // |autodiff - closed form|; 0 when the check is skipped
  double max_grad_norm = 0.0;    // max ||grad f_hat||
  double max_abs_output = 0.0;   // max |f_hat|
  bool piecewise_linear = true;  // false: identity check skipped, bound audited only
  std::size_t samples = 0;
};

/// Autodiff ||grad f_hat|| against the closed form on a batch of inputs.
GnBoundReport verify_gn_bound(const nn::NetworkSpec& spec, const nn::Params& params, constraint::Zeta zeta,
                              const Tensor& x);
GnBoundReport verify_gn_bound(const nn::NetworkSpec& spec, const nn::Params& params, constraint::Zeta zeta,
                              const Sampler& sampler, std::size_t n, Prng& prng);

/// values(i, j) is the surface at (x_j, y_i); x_j = x_min + j*(x_max-x_min)/(res-1).
struct SurfaceGrid {
  double x_min = -2.0, x_max = 2.0;
  double y_min = -2.0, y_max = 2.0;
  std::size_t resolution = 2;
  Tensor values;

  double x_at(std::size_t j) const;
  double y_at(std::size_t i) const;
  /// Throws ContractError on resolution < 2 or an empty range.
  void validate_geometry() const;
};

enum class SurfaceOutput { raw, sigmoid };

/// D_hat on every grid point. `output = sigmoid` maps logits to D = sigmoid(f).
SurfaceGrid value_surface(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const constraint::SpectralState* spectral, const SurfaceGrid& geometry,
                          SurfaceOutput output = SurfaceOutput::raw);

/// D*(x) = p_r / (p_r + p_g), computed from log densities so far tails stay finite.
SurfaceGrid theoretical_surface(const data::Mixture2D& real, const data::Mixture2D& fake, const SurfaceGrid& geometry);

/// Central differences inside the grid, one-sided on the border.
Tensor grid_gradient_magnitude(const SurfaceGrid& grid);
double max_grid_gradient(const SurfaceGrid& grid);

/// Writes <stem>.csv (x,y,value), <stem>.pgm (P2, maxval 65535, top row = y_max)
/// and <stem>.pgm.txt with the affine pixel mapping.
void write_surface(const SurfaceGrid& grid, const std::filesystem::path& dir, const std::string& stem);

struct GradcheckReport {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  double max_abs_gradient = 0.0;
  std::size_t parameters = 0;
  std::size_t resampled_inputs = 0;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckFloor = 1e-6;
inline constexpr double kKinkMargin = 1e-6;

/// Parameter gradient of the full discriminator loss (including GN or the
/// gradient penalty) against central differences. Relative error is
/// |a - n| / max(|a|, |n|, kGradcheckFloor).
GradcheckReport gradcheck(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const gan::Loss& loss, const Tensor& x_real, const Tensor& x_fake,
                          std::uint64_t penalty_seed = 0);

/// Draws an n-row batch from `sampler`, redrawing any row where some
/// pre-activation, or the raw output, lies within kKinkMargin of a kink.
Tensor sample_away_from_kinks(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                              std::size_t n, Prng& prng, std::size_t* redrawn = nullptr);

struct AuditResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Random ReLU / LeakyReLU MLPs (depth 2..6, width <= 64, input dim 2..8):
/// ||grad f_hat|| <= 1 + tol and equality with the closed form within tol.
AuditResult audit_gn_bound(std::size_t nets, std::size_t inputs_per_net, double tol, Prng& prng);

/// Layer-wise spectrally normalized MLP: prefix estimates non-increasing in k within tol.
AuditResult audit_prefix_decay(std::size_t depth, std::size_t width, std::size_t pairs, double tol, Prng& prng);

/// |f(x)-f(y)|/||x-y|| for nearby pairs never exceeds the sampled max gradient norm by more than tol.
AuditResult audit_lipschitz_gradient(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                                     std::size_t pairs, double tol, Prng& prng);

/// |f_hat| under each zeta on two constructed families of 2-4-1 ReLU nets:
/// "plateau" (output scale s -> 0 with unit offset, so ||grad f|| -> 0 while
/// f stays near 1) and "growing" (offset c -> 1e7, so |f| -> infinity).
struct ZetaFamilyRow {
  std::string family;
  constraint::Zeta zeta;
  double max_abs_output = 0.0;
};
std::vector<ZetaFamilyRow> zeta_failure_families(std::size_t members, Prng& prng);
AuditResult audit_zeta_families(Prng& prng);

}  // namespace gnlab::analysis
