#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "gnlab/analysis.hpp"
#include "gnlab/cli.hpp"

namespace gnlab::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  fs::path out = "out";
  std::optional<std::size_t> steps;
  std::optional<std::string> constraint;
};

struct Data {
  std::unique_ptr<data::DataSource> real;
  std::size_t dim = 0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Data load_data(const Config& cfg) {
  Data d;
  if (cfg.data.real) {
    d.real = std::make_unique<data::MixtureSource>(*cfg.data.real);
    d.dim = 2;
  } else if (cfg.data.idx_path) {
    Tensor t = data::load_idx(*cfg.data.idx_path);
    const std::size_t rows = t.dim(0);
    const std::size_t cols = t.numel() / rows;
    d.real = std::make_unique<data::PoolSource>(t.reshaped({rows, cols}));
    d.dim = cols;
  } else {
    throw ConfigError("[data] needs 'real' (a 2D mixture) or 'idx' (an IDX file)", 0);
  }
  return d;
}

const data::Mixture2D& require_fake(const Config& cfg) {
  if (!cfg.data.fake) throw ConfigError("[data] needs 'fake' (the generator-side 2D mixture) for this subcommand", 0);
  return *cfg.data.fake;
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  return f;
}

// Weights as the SN discriminator used them at its last step: W / (u^T W v).
nn::Params effective_params(const nn::Params& params, const constraint::SpectralState* spectral) {
  if (!spectral) return params;
  nn::Params out = params;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    const Tensor& w = params.weights[k];
    const std::size_t m = w.rows();
    const std::size_t n = w.cols();
    double sigma = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) sigma += spectral->u[k][i] * w[i * n + j] * spectral->v[k][j];
    }
    if (sigma != 0.0) out.weights[k] = scale(w, 1.0 / sigma);
  }
  return out;
}

analysis::Sampler generator_sampler(const nn::NetworkSpec& gspec, const nn::Params& gen, const gan::TrainConfig& t) {
  return [&gspec, &gen, &t](std::size_t n, Prng& prng) {
    return gan::generate(gspec, gen, n, t.latent_dim, t.generator_tanh, prng);
  };
}

int cmd_train(const Config& cfg, const Options& opt, std::ostream& out) {
  Data d = load_data(cfg);
  const nn::NetworkSpec gspec = generator_spec(cfg, d.dim);
  const nn::NetworkSpec dspec = discriminator_spec(cfg, d.dim);
  const gan::TrainReport report = gan::train(gspec, dspec, cfg.constraint, *d.real, cfg.train);
  {
    std::ofstream csv = open_out(opt.out, "report.csv");
    gan::write_report_csv(csv, report);
  }
  nn::save_network(opt.out / "generator.gnnet", gspec, report.generator);
  nn::save_network(opt.out / "discriminator.gnnet", dspec, report.discriminator);
  if (report.generator_ema) nn::save_network(opt.out / "generator_ema.gnnet", gspec, *report.generator_ema);
  out << "train: " << report.g_updates << " generator / " << report.d_updates << " discriminator updates";
  if (!report.metrics.empty()) {
    const auto& last = report.metrics.back();
    out << ", final loss_d " << fmt_short(last.loss_d) << ", loss_g " << fmt_short(last.loss_g)
        << ", max_grad_norm " << fmt_short(last.max_grad_norm);
  }
  out << "\nwrote " << (opt.out / "report.csv").string() << '\n';
  return 0;
}

int cmd_surface(const Config& cfg, const Options& opt, std::ostream& out) {
  if (!cfg.data.real) throw ConfigError("surface needs a 2D mixture in [data] 'real'", 0);
  data::MixtureSource real(*cfg.data.real);
  data::MixtureSource fake(require_fake(cfg));
  const nn::NetworkSpec dspec = discriminator_spec(cfg, 2);
  gan::TrainConfig tc = cfg.train;
  tc.steps = opt.steps ? *opt.steps : cfg.analysis.surface_steps;
  const gan::DiscriminatorRun run = gan::train_discriminator(dspec, cfg.constraint, real, fake, tc);

  analysis::SurfaceGrid geometry;
  geometry.x_min = cfg.analysis.surface_x_min;
  geometry.x_max = cfg.analysis.surface_x_max;
  geometry.y_min = cfg.analysis.surface_y_min;
  geometry.y_max = cfg.analysis.surface_y_max;
  geometry.resolution = cfg.analysis.surface_resolution;
  const constraint::SpectralState* spectral = run.spectral ? &*run.spectral : nullptr;
  const auto empirical = analysis::value_surface(dspec, run.params, cfg.constraint, spectral, geometry);
  const bool probability = tc.loss.kind == gan::LossKind::vanilla ||
                           (tc.loss.kind == gan::LossKind::non_saturating && tc.loss.with_sigmoid);
  if (probability) {
    analysis::write_surface(
        analysis::value_surface(dspec, run.params, cfg.constraint, spectral, geometry, analysis::SurfaceOutput::sigmoid),
        opt.out, "surface_empirical_sigmoid");
  }
  const auto theoretical = analysis::theoretical_surface(*cfg.data.real, *cfg.data.fake, geometry);
  analysis::write_surface(empirical, opt.out, "surface_empirical");
  analysis::write_surface(theoretical, opt.out, "surface_theoretical");

  double lo = empirical.values[0];
  double hi = lo;
  for (double v : empirical.values.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  out << "surface: " << constraint::mode_name(cfg.constraint) << " / " << gan::loss_name(tc.loss) << ", " << tc.steps
      << " discriminator steps\n"
      << "empirical range [" << fmt_short(lo) << ", " << fmt_short(hi) << "], max grid gradient "
      << fmt_short(analysis::max_grid_gradient(empirical)) << '\n'
      << "theoretical max grid gradient " << fmt_short(analysis::max_grid_gradient(theoretical)) << '\n';
  return 0;
}

int cmd_lipschitz(const Config& cfg, const Options& opt, std::ostream& out) {
  Data d = load_data(cfg);
  const nn::NetworkSpec gspec = generator_spec(cfg, d.dim);
  const nn::NetworkSpec dspec = discriminator_spec(cfg, d.dim);
  const gan::TrainReport report = gan::train(gspec, dspec, cfg.constraint, *d.real, cfg.train);
  const constraint::SpectralState* spectral = report.spectral ? &*report.spectral : nullptr;

  Prng prng(cfg.train.seed ^ 0x4c1b5c417ULL);
  analysis::LipschitzReport rep;
  rep.samples = cfg.analysis.lipschitz_samples;
  rep.model_estimate = analysis::estimate_lipschitz(
      dspec, report.discriminator, cfg.constraint, spectral,
      {analysis::sampler_from(*d.real), generator_sampler(gspec, report.generator, cfg.train)}, rep.samples, prng);
  const nn::Params effective = effective_params(report.discriminator, spectral);
  rep.prefix_estimates =
      analysis::prefix_lipschitz_all(dspec, effective, analysis::sampler_from(*d.real), rep.samples, prng);
  rep.spectral_norms = analysis::layer_spectral_norms(effective);
  std::ofstream csv = open_out(opt.out, "lipschitz.csv");
  analysis::write_lipschitz_csv(csv, rep);
  out << "lipschitz: " << constraint::mode_name(cfg.constraint) << " after " << cfg.train.steps
      << " steps, estimated L_D " << fmt_short(rep.model_estimate) << '\n';
  return 0;
}

int cmd_verify(const Config& cfg, const Options& opt, std::ostream& out) {
  Data d = load_data(cfg);
  const nn::NetworkSpec dspec = discriminator_spec(cfg, d.dim);
  Prng prng(cfg.train.seed);
  const nn::Params params = nn::init_kaiming(dspec, prng);
  std::vector<analysis::AuditResult> results;

  results.push_back(analysis::audit_gn_bound(cfg.analysis.audit_nets, cfg.analysis.audit_inputs, 1e-8, prng));

  {
    constraint::Zeta zeta = constraint::Zeta::abs_f;
    if (const auto* gn = std::get_if<constraint::Gn>(&cfg.constraint)) zeta = gn->zeta;
    const auto rep = analysis::verify_gn_bound(dspec, params, zeta, analysis::sampler_from(*d.real),
                                               cfg.analysis.lipschitz_samples, prng);
    analysis::AuditResult r;
    r.name = std::string("gn_bound_config_net_") + constraint::zeta_name(zeta);
    if (rep.piecewise_linear) {
      r.pass = rep.max_grad_norm <= 1.0 + 1e-8 && rep.max_discrepancy <= 1e-8;
      r.detail = "max norm " + fmt(rep.max_grad_norm) + ", closed-form gap " + fmt_short(rep.max_discrepancy);
    } else {
      r.pass = rep.max_grad_norm <= 1.0 + 1e-6;
      r.detail = "non-piecewise-linear activations: identity check skipped, max norm " + fmt(rep.max_grad_norm);
    }
    if (zeta == constraint::Zeta::abs_f) {
      r.pass = r.pass && rep.max_abs_output <= 1.0;
      r.detail += ", max |f_hat| " + fmt(rep.max_abs_output);
    }
    r.detail += ", " + std::to_string(rep.samples) + " samples";
    results.push_back(r);
  }

  results.push_back(analysis::audit_prefix_decay(9, 64, cfg.analysis.prefix_pairs, 1e-3, prng));
  results.push_back(analysis::audit_lipschitz_gradient(dspec, params, analysis::sampler_from(*d.real),
                                                       cfg.analysis.lipschitz_samples, 1e-3, prng));
  results.push_back(analysis::audit_zeta_families(prng));

  std::ofstream txt = open_out(opt.out, "verify.txt");
  std::size_t failed = 0;
  for (const auto& r : results) {
    const std::string line = std::string(r.pass ? "PASS " : "FAIL ") + r.name + ": " + r.detail + '\n';
    txt << line;
    out << line;
    if (!r.pass) ++failed;
  }
  const std::string summary =
      failed == 0 ? "all " + std::to_string(results.size()) + " audits passed\n"
                  : std::to_string(failed) + " of " + std::to_string(results.size()) + " audits failed\n";
  txt << summary;
  out << summary;
  return failed == 0 ? 0 : 1;
}

int cmd_gradcheck(const Config& cfg, const Options& opt, std::ostream& out) {
  Data d = load_data(cfg);
  const nn::NetworkSpec dspec = discriminator_spec(cfg, d.dim);
  Prng prng(cfg.train.seed);
  const nn::Params params = nn::init_kaiming(dspec, prng);
  const analysis::Sampler real = analysis::sampler_from(*d.real);
  std::optional<data::MixtureSource> fake_source;
  if (cfg.data.fake) fake_source.emplace(*cfg.data.fake);
  const analysis::Sampler fake =
      fake_source ? analysis::sampler_from(*fake_source) : analysis::uniform_box(d.dim, -1.0, 1.0);
  const std::size_t n = cfg.analysis.gradcheck_samples;
  const Tensor xr = analysis::sample_away_from_kinks(dspec, params, real, n, prng);
  const Tensor xf = analysis::sample_away_from_kinks(dspec, params, fake, n, prng);
  const auto rep = analysis::gradcheck(dspec, params, cfg.constraint, cfg.train.loss, xr, xf, cfg.train.seed);
  const bool pass = rep.max_relative_error < cfg.analysis.gradcheck_threshold;
  const std::string line = "max_relative_error " + fmt(rep.max_relative_error) + " (" +
                           std::to_string(rep.parameters) + " parameters, threshold " +
                           fmt_short(cfg.analysis.gradcheck_threshold) + ") " + (pass ? "PASS" : "FAIL") + '\n';
  std::ofstream txt = open_out(opt.out, "gradcheck.txt");
  txt << line;
  out << line;
  return pass ? 0 : 1;
}

int cmd_ablate(const Config& cfg, const Options& opt, std::ostream& out) {
  Data d = load_data(cfg);
  const nn::NetworkSpec gspec = generator_spec(cfg, d.dim);
  const nn::NetworkSpec dspec = discriminator_spec(cfg, d.dim);
  std::ofstream csv = open_out(opt.out, "ablate.csv");
  csv << "mode,status,final_max_grad_norm,peak_max_grad_norm,max_abs_dhat,final_loss_d,final_loss_g,"
         "final_lipschitz_est,grad_norm_bounded\n";
  for (constraint::Zeta zeta : {constraint::Zeta::abs_f, constraint::Zeta::one, constraint::Zeta::zero}) {
    const constraint::ConstraintMode mode = constraint::Gn{zeta};
    double max_abs_dhat = 0.0;
    const gan::StepObserver observer = [&](const gan::StepEvent& e) {
      max_abs_dhat = std::max(max_abs_dhat, e.max_abs_output);
    };
    std::string status = "ok";
    gan::TrainReport report;
    try {
      report = gan::train(gspec, dspec, mode, *d.real, cfg.train, std::nullopt, observer);
    } catch (const NumericalError& e) {
      status = "numerical_abort_step_" + std::to_string(e.step());
    }
    double final_norm = 0.0;
    double peak = 0.0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    std::optional<double> lip;
    for (const auto& m : report.metrics) {
      peak = std::max(peak, m.max_grad_norm);
      if (m.lipschitz_est) lip = m.lipschitz_est;
    }
    if (!report.metrics.empty()) {
      final_norm = report.metrics.back().max_grad_norm;
      loss_d = report.metrics.back().loss_d;
      loss_g = report.metrics.back().loss_g;
    }
    const bool bounded = status == "ok" && peak <= 1.0 + 1e-6;
    csv << constraint::mode_name(mode) << ',' << status << ',' << fmt(final_norm) << ',' << fmt(peak) << ','
        << fmt(max_abs_dhat) << ',' << fmt(loss_d) << ',' << fmt(loss_g) << ',' << (lip ? fmt(*lip) : "") << ','
        << (bounded ? "yes" : "no") << '\n';
    out << constraint::mode_name(mode) << ": " << status << ", peak max_grad_norm " << fmt_short(peak)
        << ", max |D_hat| " << fmt_short(max_abs_dhat) << '\n';
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-normalized GAN workbench"};
  app.require_subcommand(1, 1);
  Options opt;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::string constraint_name;
  app.add_option("--config", opt.config, "Config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding [train] seed");
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();
  auto* steps_opt = app.add_option("--steps", steps, "Training steps overriding the config");
  auto* constraint_opt = app.add_option("--constraint", constraint_name, "Constraint mode overriding the config");

  using Handler = int (*)(const Config&, const Options&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"train", "Train a GAN; writes report.csv and GNNET1 checkpoints", cmd_train},
      {"surface", "Discriminator value surface vs. the optimal discriminator", cmd_surface},
      {"lipschitz", "Train, then estimate L_D, prefix constants and layer spectral norms", cmd_lipschitz},
      {"verify", "Run the theorem audits; exit 0 iff all pass", cmd_verify},
      {"gradcheck", "Autodiff vs. finite differences on the full discriminator loss", cmd_gradcheck},
      {"ablate", "Train each zeta variant from one seed; writes ablate.csv", cmd_ablate},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, handler] : commands) subs.push_back(app.add_subcommand(name, help)->fallthrough());

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) opt.seed = seed;
  if (*steps_opt) opt.steps = steps;
  if (*constraint_opt) opt.constraint = constraint_name;

  try {
    Config cfg = load_config(opt.config);
    if (opt.seed) cfg.train.seed = *opt.seed;
    if (opt.steps) cfg.train.steps = *opt.steps;
    if (opt.constraint) {
      try {
        cfg.constraint = constraint::parse_mode(*opt.constraint);
      } catch (const ContractError& e) {
        throw ConfigError(std::string("--constraint: ") + e.what(), 0);
      }
    }
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return std::get<2>(commands[i])(cfg, opt, out);
    }
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << " (quantity: " << e.quantity() << ", step " << e.step() << ")\n";
    return 3;
  } catch (const ContractError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gnlab::cli
