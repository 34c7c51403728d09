#include "gnlab/gan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace gnlab::gan {

std::string loss_name(const Loss& loss) {
  switch (loss.kind) {
    case LossKind::vanilla: return "vanilla";
    case LossKind::non_saturating: return loss.with_sigmoid ? "ns" : "ns_nosigmoid";
    case LossKind::hinge: return "hinge";
    case LossKind::wasserstein: return "wasserstein";
  }
  return "unknown";
}

Loss parse_loss(const std::string& name) {
  if (name == "vanilla") return {LossKind::vanilla, true};
  if (name == "ns" || name == "non_saturating") return {LossKind::non_saturating, true};
  if (name == "ns_nosigmoid") return {LossKind::non_saturating, false};
  if (name == "hinge") return {LossKind::hinge, true};
  if (name == "wasserstein") return {LossKind::wasserstein, true};
  throw ContractError("unknown loss '" + name + "'");
}

namespace {

void check_probabilities(const ad::Tape& tape, ad::NodeId d, const char* which) {
  for (double p : tape.value(d).data()) {
    if (!(p > 0.0 && p < 1.0)) {
      throw ContractError(std::string(which) + " output " + std::to_string(p) +
                          " is not a probability in (0, 1); use a sigmoid or a squashing output layer");
    }
  }
}

// -mean log D for D = sigmoid(d) (sigmoid form) or D = d (probability form).
ad::NodeId neg_mean_log(ad::Tape& t, ad::NodeId d, bool with_sigmoid, const char* which) {
  if (with_sigmoid) return ad::mean(t, ad::softplus(t, ad::neg(t, d), 1.0));
  check_probabilities(t, d, which);
  return ad::neg(t, ad::mean(t, ad::log(t, d)));
}

// -mean log(1 - D).
ad::NodeId neg_mean_log1m(ad::Tape& t, ad::NodeId d, bool with_sigmoid, const char* which) {
  if (with_sigmoid) return ad::mean(t, ad::softplus(t, d, 1.0));
  check_probabilities(t, d, which);
  return ad::neg(t, ad::mean(t, ad::log(t, ad::add_scalar(t, ad::neg(t, d), 1.0))));
}

}  // namespace

ad::NodeId discriminator_loss(ad::Tape& tape, const Loss& loss, ad::NodeId d_real, ad::NodeId d_fake) {
  const Shape& rs = tape.value(d_real).shape();
  const Shape& fs = tape.value(d_fake).shape();
  if (rs != fs) {
    throw DimensionError("discriminator loss: real batch " + shape_to_string(rs) + " vs fake batch " +
                         shape_to_string(fs));
  }
  switch (loss.kind) {
    case LossKind::vanilla:
    case LossKind::non_saturating: {
      const bool sig = loss.kind == LossKind::vanilla || loss.with_sigmoid;
      return ad::add(tape, neg_mean_log(tape, d_real, sig, "real"), neg_mean_log1m(tape, d_fake, sig, "fake"));
    }
    case LossKind::hinge: {
      const ad::NodeId fake = ad::mean(tape, ad::relu(tape, ad::add_scalar(tape, d_fake, 1.0)));
      const ad::NodeId real = ad::mean(tape, ad::relu(tape, ad::add_scalar(tape, ad::neg(tape, d_real), 1.0)));
      return ad::add(tape, fake, real);
    }
    case LossKind::wasserstein:
      return ad::sub(tape, ad::mean(tape, d_fake), ad::mean(tape, d_real));
  }
  throw ContractError("unknown loss kind");
}

ad::NodeId generator_loss(ad::Tape& tape, const Loss& loss, ad::NodeId d_fake) {
  switch (loss.kind) {
    case LossKind::vanilla:
      // minimax form: mean log(1 - D(fake))
      return ad::neg(tape, neg_mean_log1m(tape, d_fake, true, "fake"));
    case LossKind::non_saturating:
      return neg_mean_log(tape, d_fake, loss.with_sigmoid, "fake");
    case LossKind::hinge:
    case LossKind::wasserstein:
      return ad::neg(tape, ad::mean(tape, d_fake));
  }
  throw ContractError("unknown loss kind");
}

AdamState AdamState::like(const nn::Params& params) {
  AdamState s;
  s.m = nn::zeros_like(params);
  s.v = nn::zeros_like(params);
  return s;
}

void adam_step(nn::Params& params, const nn::Params& grads, AdamState& state, double lr, const AdamConfig& cfg) {
  if (grads.weights.size() != params.weights.size() || grads.biases.size() != params.biases.size() ||
      state.m.weights.size() != params.weights.size()) {
    throw DimensionError("adam: parameter, gradient and moment layer counts differ");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double step = lr * std::sqrt(1.0 - std::pow(cfg.beta2, t)) / (1.0 - std::pow(cfg.beta1, t));
  auto update = [&](Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
    if (p.shape() != g.shape() || p.shape() != m.shape()) {
      throw DimensionError("adam: shape " + shape_to_string(p.shape()) + " vs gradient " +
                           shape_to_string(g.shape()));
    }
    for (std::size_t i = 0; i < p.numel(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(v[i]) + cfg.eps);
    }
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    update(params.weights[k], grads.weights[k], state.m.weights[k], state.v.weights[k]);
    update(params.biases[k], grads.biases[k], state.m.biases[k], state.v.biases[k]);
  }
}

void ema_update(EmaState& ema, const nn::Params& params) {
  if (ema.shadow.weights.size() != params.weights.size()) throw DimensionError("ema: layer count mismatch");
  const double d = ema.decay;
  auto blend = [d](Tensor& s, const Tensor& p) {
    if (s.shape() != p.shape()) throw DimensionError("ema: shape mismatch");
    for (std::size_t i = 0; i < s.numel(); ++i) s[i] = d * s[i] + (1.0 - d) * p[i];
  };
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    blend(ema.shadow.weights[k], params.weights[k]);
    blend(ema.shadow.biases[k], params.biases[k]);
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("batch size M must be positive");
  if (n_dis == 0) throw ContractError("n_dis must be positive");
  if (latent_dim == 0) throw ContractError("latent_dim must be positive");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ContractError("learning rates must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ContractError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ContractError("beta2 must lie in [0, 1)");
  if (!(adam.eps > 0.0)) throw ContractError("adam eps must be positive");
  if (ema_decay && !(*ema_decay >= 0.0 && *ema_decay <= 1.0)) throw ContractError("ema decay must lie in [0, 1]");
  if (lipschitz_every > 0 && lipschitz_samples == 0) throw ContractError("lipschitz_samples must be positive");
}

namespace {

Tensor standard_normal(std::size_t rows, std::size_t cols, Prng& prng) {
  Tensor z({rows, cols});
  for (double& v : z.data()) v = prng.normal();
  return z;
}

ad::NodeId generator_forward(const nn::NetworkSpec& spec, const nn::BoundParams& params, ad::NodeId z, bool tanh_out,
                             ad::Tape& tape) {
  const ad::NodeId x = nn::forward(spec, params, z, tape);
  return tanh_out ? ad::tanh(tape, x) : x;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::fabs(v));
  return m;
}

double max_row_norm(const Tensor& g) {
  const std::size_t d = g.cols();
  double best = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += g[i * d + j] * g[i * d + j];
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double lipschitz_probe(const nn::NetworkSpec& gen_spec, const nn::NetworkSpec& disc_spec, const nn::Params& gen,
                       const nn::Params& disc, const constraint::ConstraintMode& mode,
                       const constraint::SpectralState* spectral, data::DataSource& real, const TrainConfig& cfg,
                       Prng& prng) {
  constexpr std::size_t kChunk = 256;
  double best = 0.0;
  for (int source = 0; source < 2; ++source) {
    for (std::size_t done = 0; done < cfg.lipschitz_samples; done += kChunk) {
      const std::size_t n = std::min(kChunk, cfg.lipschitz_samples - done);
      const Tensor x = source == 0 ? real.sample(n, prng)
                                   : generate(gen_spec, gen, n, cfg.latent_dim, cfg.generator_tanh, prng);
      const auto probe = constraint::probe_critic(disc_spec, disc, mode, spectral, x);
      best = std::max(best, max_abs(probe.grad_norm));
    }
  }
  return best;
}


struct DStep {
  double loss = 0.0;
  double max_grad_norm = 0.0;
  double max_abs_output = 0.0;
};

// One discriminator update on the given real/fake batches. Advances SN power
// iteration first so the normalized weights track the current parameters.
DStep discriminator_step(const nn::NetworkSpec& disc_spec, nn::Params& disc, const constraint::ConstraintMode& mode,
                         constraint::SpectralState* spectral, AdamState& adam, const Tensor& x_real,
                         const Tensor& x_fake, double lr, const TrainConfig& cfg, std::size_t step,
                         bool want_grad_norm, Prng& prng) {
  if (const auto* sn = std::get_if<constraint::Sn>(&mode)) {
    for (std::size_t k = 0; k < disc.weights.size(); ++k) {
      constraint::power_iteration(disc.weights[k], spectral->u[k], spectral->v[k], sn->power_iters);
    }
  }
  ad::Tape tape;
  const nn::BoundParams bound = nn::bind(tape, disc);
  const ad::NodeId xr = tape.leaf(x_real);
  const ad::NodeId xf = tape.leaf(x_fake);
  const ad::NodeId d_real = constraint::critic_output(disc_spec, bound, mode, spectral, xr, tape);
  const ad::NodeId d_fake = constraint::critic_output(disc_spec, bound, mode, spectral, xf, tape);
  ad::NodeId loss = discriminator_loss(tape, cfg.loss, d_real, d_fake);
  if (const auto* gp = std::get_if<constraint::Gp>(&mode)) {
    loss = ad::add(tape, loss,
                   constraint::gradient_penalty(disc_spec, bound, x_real, x_fake, gp->center, gp->lambda, prng, tape));
  }
  DStep r;
  r.loss = tape.value(loss).item();
  if (!std::isfinite(r.loss)) throw NumericalError(step, "discriminator loss");
  const std::vector<ad::NodeId> grad_nodes = tape.backward(loss, bound.all());
  r.max_abs_output = std::max(max_abs(tape.value(d_real)), max_abs(tape.value(d_fake)));
  if (want_grad_norm) {
    // Samples are independent, so the gradient of the batch sum gives every per-sample gradient.
    const ad::NodeId total = ad::add(tape, ad::sum(tape, d_real), ad::sum(tape, d_fake));
    const std::vector<ad::NodeId> xs = {xr, xf};
    const auto gx = tape.backward(total, xs);
    r.max_grad_norm = std::max(max_row_norm(tape.value(gx[0])), max_row_norm(tape.value(gx[1])));
  }
  adam_step(disc, nn::collect(tape, grad_nodes, disc), adam, lr, cfg.adam);
  if (const auto* clip = std::get_if<constraint::Clip>(&mode)) disc = constraint::weight_clip(disc, clip->c);
  return r;
}

}  // namespace

Tensor generate(const nn::NetworkSpec& gen_spec, const nn::Params& gen, std::size_t n, std::size_t latent_dim,
                bool tanh_output, Prng& prng) {
  Tensor x = nn::evaluate(gen_spec, gen, standard_normal(n, latent_dim, prng));
  if (tanh_output) {
    for (double& v : x.data()) v = std::tanh(v);
  }
  return x;
}

TrainReport train(const nn::NetworkSpec& gen_spec, const nn::NetworkSpec& disc_spec,
                  const constraint::ConstraintMode& mode, data::DataSource& real, const TrainConfig& cfg,
                  const std::optional<InitialParams>& init, const StepObserver& observer) {
  cfg.validate();
  constraint::validate(mode);
  gen_spec.validate();
  disc_spec.validate();
  if (std::holds_alternative<constraint::GnConditional>(mode)) {
    throw ContractError("train: conditional GN needs labelled batches; use it through the constraint API");
  }
  if (gen_spec.input_size() != cfg.latent_dim) {
    throw DimensionError("generator input " + std::to_string(gen_spec.input_size()) + " does not match latent_dim " +
                         std::to_string(cfg.latent_dim));
  }
  if (gen_spec.output_size() != real.dim() || disc_spec.input_size() != real.dim()) {
    throw DimensionError("generator output / discriminator input must match data dimension " +
                         std::to_string(real.dim()));
  }
  if (disc_spec.output_size() != 1) throw DimensionError("discriminator must have a single output");

  Prng prng(cfg.seed);
  // Metric sampling draws from its own stream so the cadence never perturbs training.
  Prng metric_prng = prng.split();

  TrainReport report;
  if (init) {
    init->generator.check(gen_spec);
    init->discriminator.check(disc_spec);
    report.generator = init->generator;
    report.discriminator = init->discriminator;
  } else {
    report.generator = nn::init_kaiming(gen_spec, prng);
    report.discriminator = nn::init_kaiming(disc_spec, prng);
  }
  nn::Params& gen = report.generator;
  nn::Params& disc = report.discriminator;

  if (std::holds_alternative<constraint::Sn>(mode)) report.spectral = constraint::init_spectral_state(disc, prng);
  constraint::SpectralState* spectral = report.spectral ? &*report.spectral : nullptr;

  AdamState adam_g = AdamState::like(gen);
  AdamState adam_d = AdamState::like(disc);
  std::optional<EmaState> ema;
  if (cfg.ema_decay) ema = EmaState{gen, *cfg.ema_decay};

  const std::size_t M = cfg.batch_size;
  const double n_steps = static_cast<double>(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double decay = cfg.lr_decay ? 1.0 - static_cast<double>(step) / n_steps : 1.0;
    const double lr_g = cfg.lr_g * decay;
    const double lr_d = cfg.lr_d * decay;
    StepMetrics metrics;
    metrics.step = step;
    metrics.lr = lr_g;

    for (std::size_t d_index = 0; d_index < cfg.n_dis; ++d_index) {
      const Tensor x_real = real.sample(M, prng);
      const Tensor x_fake = generate(gen_spec, gen, M, cfg.latent_dim, cfg.generator_tanh, prng);
      const bool last = d_index + 1 == cfg.n_dis;
      const DStep r = discriminator_step(disc_spec, disc, mode, spectral, adam_d, x_real, x_fake, lr_d, cfg, step,
                                         last, prng);
      if (last) {
        metrics.loss_d = r.loss;
        metrics.max_grad_norm = r.max_grad_norm;
      }
      report.d_updates += 1;
      if (observer) observer(StepEvent{false, step, d_index, gen, disc, r.max_abs_output});
    }

    {
      const Tensor z = standard_normal(2 * M, cfg.latent_dim, prng);
      ad::Tape tape;
      const nn::BoundParams gbound = nn::bind(tape, gen);
      const nn::BoundParams dbound = nn::bind(tape, disc);
      const ad::NodeId x = generator_forward(gen_spec, gbound, tape.leaf(z), cfg.generator_tanh, tape);
      const ad::NodeId d_fake = constraint::critic_output(disc_spec, dbound, mode, spectral, x, tape);
      const ad::NodeId loss = generator_loss(tape, cfg.loss, d_fake);
      const double loss_value = tape.value(loss).item();
      if (!std::isfinite(loss_value)) throw NumericalError(step, "generator loss");
      metrics.loss_g = loss_value;
      const std::vector<ad::NodeId> grad_nodes = tape.backward(loss, gbound.all());
      const double out_max = max_abs(tape.value(d_fake));
      adam_step(gen, nn::collect(tape, grad_nodes, gen), adam_g, lr_g, cfg.adam);
      if (ema) ema_update(*ema, gen);
      report.g_updates += 1;
      if (observer) observer(StepEvent{true, step, 0, gen, disc, out_max});
    }

    if (cfg.lipschitz_every > 0 && (step + 1) % cfg.lipschitz_every == 0) {
      metrics.lipschitz_est =
          lipschitz_probe(gen_spec, disc_spec, gen, disc, mode, spectral, real, cfg, metric_prng);
    }
    report.metrics.push_back(metrics);
  }
  if (ema) report.generator_ema = ema->shadow;
  return report;
}

DiscriminatorRun train_discriminator(const nn::NetworkSpec& spec, const constraint::ConstraintMode& mode,
                                     data::DataSource& real, data::DataSource& fake, const TrainConfig& cfg) {
  cfg.validate();
  constraint::validate(mode);
  spec.validate();
  if (std::holds_alternative<constraint::GnConditional>(mode)) {
    throw ContractError("train_discriminator: conditional GN needs labelled batches");
  }
  if (spec.input_size() != real.dim() || real.dim() != fake.dim()) {
    throw DimensionError("discriminator input must match both data dimensions");
  }
  if (spec.output_size() != 1) throw DimensionError("discriminator must have a single output");
  Prng prng(cfg.seed);
  DiscriminatorRun run;
  run.params = nn::init_kaiming(spec, prng);
  if (std::holds_alternative<constraint::Sn>(mode)) run.spectral = constraint::init_spectral_state(run.params, prng);
  constraint::SpectralState* spectral = run.spectral ? &*run.spectral : nullptr;
  AdamState adam = AdamState::like(run.params);
  const double n_steps = static_cast<double>(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double decay = cfg.lr_decay ? 1.0 - static_cast<double>(step) / n_steps : 1.0;
    const Tensor x_real = real.sample(cfg.batch_size, prng);
    const Tensor x_fake = fake.sample(cfg.batch_size, prng);
    const DStep r = discriminator_step(spec, run.params, mode, spectral, adam, x_real, x_fake, cfg.lr_d * decay, cfg,
                                       step, false, prng);
    run.losses.push_back(r.loss);
  }
  return run;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "step,loss_d,loss_g,max_grad_norm,lipschitz_est,lr\n";
  for (const auto& m : report.metrics) {
    out << m.step << ',' << num(m.loss_d) << ',' << num(m.loss_g) << ',' << num(m.max_grad_norm) << ','
        << (m.lipschitz_est ? num(*m.lipschitz_est) : std::string()) << ',' << num(m.lr) << '\n';
  }
}

}  // namespace gnlab::gan
