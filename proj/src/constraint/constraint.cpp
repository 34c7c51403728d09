#include "gnlab/constraint.hpp"

#include <algorithm>
#include <cmath>

namespace gnlab::constraint {

const char* zeta_name(Zeta z) {
  switch (z) {
    case Zeta::abs_f: return "abs_f";
    case Zeta::one: return "one";
    case Zeta::zero: return "zero";
  }
  return "unknown";
}

std::string mode_name(const ConstraintMode& mode) {
  struct Visitor {
    std::string operator()(const None&) const { return "none"; }
    std::string operator()(const Gn& g) const { return std::string("gn_") + zeta_name(g.zeta); }
    std::string operator()(const GnConditional&) const { return "gn_conditional"; }
    std::string operator()(const Sn&) const { return "sn"; }
    std::string operator()(const Gp& g) const { return "gp" + std::to_string(g.center); }
    std::string operator()(const Clip&) const { return "clip"; }
  };
  return std::visit(Visitor{}, mode);
}

ConstraintMode parse_mode(const std::string& name) {
  if (name == "gn" || name == "gn_abs_f") return Gn{Zeta::abs_f};
  if (name == "gn_one") return Gn{Zeta::one};
  if (name == "gn_zero") return Gn{Zeta::zero};
  if (name == "gn_conditional") return GnConditional{};
  if (name == "sn") return Sn{};
  if (name == "gp0") return Gp{0, 10.0};
  if (name == "gp1" || name == "gp") return Gp{1, 10.0};
  if (name == "clip") return Clip{};
  if (name == "none") return None{};
  throw ContractError("unknown constraint '" + name + "'");
}

void validate(const ConstraintMode& mode) {
  if (const auto* gp = std::get_if<Gp>(&mode)) {
    if (!(gp->lambda > 0.0)) throw ContractError("gradient penalty lambda must be > 0");
    if (gp->center != 0 && gp->center != 1) throw ContractError("gradient penalty center must be 0 or 1");
  } else if (const auto* clip = std::get_if<Clip>(&mode)) {
    if (!(clip->c > 0.0)) throw ContractError("clip bound must be > 0");
  } else if (const auto* sn = std::get_if<Sn>(&mode)) {
    if (sn->power_iters < 1) throw ContractError("power_iters must be >= 1");
  }
}

bool is_gn(const ConstraintMode& mode) {
  return std::holds_alternative<Gn>(mode) || std::holds_alternative<GnConditional>(mode);
}

ad::NodeId gn_normalize(ad::Tape& tape, ad::NodeId f, ad::NodeId x, Zeta zeta) {
  const ad::NodeId grad_norm = ad::input_gradient_norm(tape, f, x);
  ad::NodeId denom = grad_norm;
  switch (zeta) {
    case Zeta::abs_f: denom = ad::add(tape, grad_norm, ad::abs(tape, f)); break;
    case Zeta::one: denom = ad::add_scalar(tape, grad_norm, 1.0); break;
    case Zeta::zero: break;
  }
  return ad::mul(tape, f, ad::reciprocal(tape, denom));
}

ad::NodeId gn_normalize(const nn::NetworkSpec& spec, const nn::BoundParams& params, ad::NodeId x, Zeta zeta,
                        ad::Tape& tape) {
  const ad::NodeId f = nn::scalar_output(tape, nn::forward(spec, params, x, tape));
  return gn_normalize(tape, f, x, zeta);
}

ad::NodeId gn_conditional(const nn::NetworkSpec& spec, const nn::BoundParams& params, ad::NodeId x,
                          std::shared_ptr<const std::vector<std::size_t>> labels, ad::Tape& tape) {
  if (!labels) throw ContractError("conditional GN needs labels");
  const ad::NodeId heads = nn::forward(spec, params, x, tape);
  const ad::NodeId f = ad::select_cols(tape, heads, std::move(labels));
  return gn_normalize(tape, f, x, Zeta::abs_f);
}

SpectralState init_spectral_state(const nn::Params& params, Prng& prng) {
  SpectralState s;
  auto unit = [&prng](std::size_t n) {
    Tensor t({n});
    double norm = 0.0;
    for (double& x : t.data()) {
      x = prng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : t.data()) x /= norm;
    return t;
  };
  for (const auto& w : params.weights) {
    s.u.push_back(unit(w.rows()));
    s.v.push_back(unit(w.cols()));
  }
  return s;
}

double power_iteration(const Tensor& w, Tensor& u, Tensor& v, int iters) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  if (u.numel() != m || v.numel() != n) throw DimensionError("power iteration vectors do not match weight");
  if (iters < 1) throw ContractError("power_iters must be >= 1");
  auto normalize = [](Tensor& t) {
    double s = 0.0;
    for (double x : t.data()) s += x * x;
    s = std::sqrt(s);
    if (s > 0.0) {
      for (double& x : t.data()) x /= s;
    }
  };
  for (int it = 0; it < iters; ++it) {
    for (std::size_t j = 0; j < n; ++j) v[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) v[j] += w[i * n + j] * u[i];
    }
    normalize(v);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * v[j];
      u[i] = s;
    }
    normalize(u);
  }
  double sigma = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[i * n + j] * v[j];
    sigma += u[i] * s;
  }
  return sigma;
}

nn::Params spectral_normalize(const nn::Params& params, SpectralState& state, int iters) {
  if (state.u.size() != params.weights.size()) throw DimensionError("spectral state does not match params");
  nn::Params out = params;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    const double sigma = power_iteration(params.weights[k], state.u[k], state.v[k], iters);
    if (sigma > 0.0) out.weights[k] = scale(params.weights[k], 1.0 / sigma);
  }
  return out;
}

nn::BoundParams spectral_bind(ad::Tape& tape, const nn::BoundParams& params, const SpectralState& state) {
  if (state.u.size() != params.weights.size()) throw DimensionError("spectral state does not match params");
  nn::BoundParams out = params;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    const Tensor& w = tape.value(params.weights[k]);
    const std::size_t m = w.rows();
    const std::size_t n = w.cols();
    Tensor outer({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) outer[i * n + j] = state.u[k][i] * state.v[k][j];
    }
    const ad::NodeId sigma = ad::sum(tape, ad::mul(tape, params.weights[k], tape.leaf(std::move(outer))));
    const ad::NodeId inv = ad::expand_scalar(tape, ad::reciprocal(tape, sigma), {m, n});
    out.weights[k] = ad::mul(tape, params.weights[k], inv);
  }
  return out;
}

ad::NodeId gradient_penalty(const nn::NetworkSpec& spec, const nn::BoundParams& params, const Tensor& x_real,
                            const Tensor& x_fake, int center, double lambda, Prng& prng, ad::Tape& tape) {
  if (x_real.shape() != x_fake.shape()) {
    throw DimensionError("gradient penalty: real " + shape_to_string(x_real.shape()) + " vs fake " +
                         shape_to_string(x_fake.shape()));
  }
  const std::size_t batch = x_real.rows();
  const std::size_t d = x_real.cols();
  Tensor mixed({batch, d});
  for (std::size_t i = 0; i < batch; ++i) {
    const double u = prng.uniform();
    for (std::size_t j = 0; j < d; ++j) {
      mixed[i * d + j] = u * x_real[i * d + j] + (1.0 - u) * x_fake[i * d + j];
    }
  }
  const ad::NodeId x = tape.leaf(std::move(mixed));
  const ad::NodeId f = nn::scalar_output(tape, nn::forward(spec, params, x, tape));
  const ad::NodeId norm = ad::input_gradient_norm(tape, f, x);
  const ad::NodeId dev = center == 0 ? norm : ad::add_scalar(tape, norm, -static_cast<double>(center));
  return ad::scale(tape, ad::mean(tape, ad::mul(tape, dev, dev)), lambda);
}

nn::Params weight_clip(const nn::Params& params, double c) {
  if (!(c > 0.0)) throw ContractError("clip bound must be > 0");
  nn::Params out = params;
  auto clamp = [c](Tensor& t) {
    for (double& x : t.data()) x = std::clamp(x, -c, c);
  };
  for (auto& w : out.weights) clamp(w);
  for (auto& b : out.biases) clamp(b);
  return out;
}

ad::NodeId critic_output(const nn::NetworkSpec& spec, const nn::BoundParams& params, const ConstraintMode& mode,
                         const SpectralState* spectral, ad::NodeId x, ad::Tape& tape,
                         std::shared_ptr<const std::vector<std::size_t>> labels) {
  if (const auto* gn = std::get_if<Gn>(&mode)) return gn_normalize(spec, params, x, gn->zeta, tape);
  if (std::holds_alternative<GnConditional>(mode)) return gn_conditional(spec, params, x, std::move(labels), tape);
  if (std::holds_alternative<Sn>(mode)) {
    if (!spectral) throw ContractError("spectral normalization needs power-iteration state");
    const nn::BoundParams normalized = spectral_bind(tape, params, *spectral);
    return nn::scalar_output(tape, nn::forward(spec, normalized, x, tape));
  }
  return nn::scalar_output(tape, nn::forward(spec, params, x, tape));
}

CriticProbe probe_critic(const nn::NetworkSpec& spec, const nn::Params& params, const ConstraintMode& mode,
                         const SpectralState* spectral, const Tensor& x,
                         std::shared_ptr<const std::vector<std::size_t>> labels) {
  ad::Tape tape;
  const nn::BoundParams bound = nn::bind(tape, params);
  const ad::NodeId xn = tape.leaf(x);
  const ad::NodeId out = critic_output(spec, bound, mode, spectral, xn, tape, std::move(labels));
  const ad::NodeId norms = ad::input_gradient_norm(tape, out, xn);
  return {tape.value(out), tape.value(norms)};
}

}  // namespace gnlab::constraint
