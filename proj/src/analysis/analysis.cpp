#include "gnlab/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace gnlab::analysis {

std::size_t thread_count() {
  if (const char* env = std::getenv("GNLAB_THREADS")) {
    std::size_t n = 0;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec == std::errc() && ptr == end && n > 0) return n;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Sampler sampler_from(data::DataSource& source) {
  return [&source](std::size_t n, Prng& prng) { return source.sample(n, prng); };
}

Sampler uniform_box(std::size_t dim, double lo, double hi) {
  return [=](std::size_t n, Prng& prng) {
    Tensor x({n, dim});
    for (double& v : x.data()) v = lo + (hi - lo) * prng.uniform();
    return x;
  };
}

namespace {

constexpr std::size_t kChunk = 256;

// Splits n sampled rows into chunk tensors, drawn serially so results are
// independent of the worker count.
std::vector<Tensor> draw_chunks(const Sampler& sampler, std::size_t n, Prng& prng) {
  std::vector<Tensor> chunks;
  for (std::size_t done = 0; done < n; done += kChunk) chunks.push_back(sampler(std::min(kChunk, n - done), prng));
  return chunks;
}

double max_of(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, v);
  return m;
}

double max_abs_of(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::fabs(v));
  return m;
}

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

}  // namespace

double estimate_lipschitz(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const constraint::SpectralState* spectral, const std::vector<Sampler>& sources,
                          std::size_t n, Prng& prng) {
  if (n == 0) throw ContractError("estimate_lipschitz needs n >= 1");
  std::vector<Tensor> chunks;
  for (const auto& source : sources) {
    for (auto& c : draw_chunks(source, n, prng)) chunks.push_back(std::move(c));
  }
  std::vector<double> best(chunks.size(), 0.0);
  parallel_for(chunks.size(), [&](std::size_t i) {
    best[i] = max_of(constraint::probe_critic(spec, params, mode, spectral, chunks[i]).grad_norm);
  });
  return best.empty() ? 0.0 : *std::max_element(best.begin(), best.end());
}

std::vector<double> prefix_lipschitz_all(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                                         std::size_t n, Prng& prng) {
  if (n == 0) throw ContractError("prefix_lipschitz needs n >= 1");
  const std::size_t K = spec.affine_count();
  const std::vector<Tensor> xs = draw_chunks(sampler, n, prng);
  const std::vector<Tensor> ys = draw_chunks(sampler, n, prng);
  std::vector<std::vector<double>> best(xs.size(), std::vector<double>(K, 0.0));
  parallel_for(xs.size(), [&](std::size_t c) {
    const Tensor& x = xs[c];
    const Tensor& y = ys[c];
    const std::size_t rows = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> dist(rows);
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x[i * d + j] - y[i * d + j];
        s += diff * diff;
      }
      dist[i] = std::sqrt(s);
    }
    ad::Tape tape;
    const nn::BoundParams bound = nn::bind(tape, params);
    const ad::NodeId xn = tape.leaf(x);
    const ad::NodeId yn = tape.leaf(y);
    for (std::size_t k = 1; k <= K; ++k) {
      const Tensor& fx = tape.value(nn::prefix_forward(spec, bound, k, xn, tape));
      const Tensor& fy = tape.value(nn::prefix_forward(spec, bound, k, yn, tape));
      const std::size_t m = fx.cols();
      for (std::size_t i = 0; i < rows; ++i) {
        if (dist[i] == 0.0) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double diff = fx[i * m + j] - fy[i * m + j];
          s += diff * diff;
        }
        best[c][k - 1] = std::max(best[c][k - 1], std::sqrt(s) / dist[i]);
      }
    }
  });
  std::vector<double> out(K, 0.0);
  for (const auto& b : best) {
    for (std::size_t k = 0; k < K; ++k) out[k] = std::max(out[k], b[k]);
  }
  return out;
}

double prefix_lipschitz(const nn::NetworkSpec& spec, const nn::Params& params, std::size_t k, const Sampler& sampler,
                        std::size_t n, Prng& prng) {
  if (k < 1 || k > spec.affine_count()) {
    throw ContractError("prefix length " + std::to_string(k) + " outside [1, " +
                        std::to_string(spec.affine_count()) + "]");
  }
  return prefix_lipschitz_all(spec, params, sampler, n, prng)[k - 1];
}

std::vector<double> layer_spectral_norms(const nn::Params& params, int iters) {
  Prng prng(0x5eed);
  constraint::SpectralState state = constraint::init_spectral_state(params, prng);
  std::vector<double> out;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    out.push_back(constraint::power_iteration(params.weights[k], state.u[k], state.v[k], iters));
  }
  return out;
}

void write_lipschitz_csv(std::ostream& out, const LipschitzReport& report) {
  out << "quantity,index,value\n";
  out << "model,0," << fmt(report.model_estimate) << '\n';
  for (std::size_t k = 0; k < report.prefix_estimates.size(); ++k) {
    out << "prefix," << k + 1 << ',' << fmt(report.prefix_estimates[k]) << '\n';
  }
  for (std::size_t k = 0; k < report.spectral_norms.size(); ++k) {
    out << "spectral_norm," << k + 1 << ',' << fmt(report.spectral_norms[k]) << '\n';
  }
  out << "samples,0," << report.samples << '\n';
}

double gn_closed_form(double grad_norm, double f, constraint::Zeta zeta) {
  switch (zeta) {
    case constraint::Zeta::abs_f: {
      const double denom = grad_norm + std::fabs(f);
      if (denom == 0.0) return 0.0;
      const double r = grad_norm / denom;
      return r * r;
    }
    case constraint::Zeta::one: return grad_norm / (grad_norm + 1.0);
    case constraint::Zeta::zero: return grad_norm > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

GnBoundReport verify_gn_bound(const nn::NetworkSpec& spec, const nn::Params& params, constraint::Zeta zeta,
                              const Tensor& x) {
  ad::Tape tape;
  const nn::BoundParams bound = nn::bind(tape, params);
  const ad::NodeId xn = tape.leaf(x);
  const ad::NodeId f = nn::scalar_output(tape, nn::forward(spec, bound, xn, tape));
  const ad::NodeId g = ad::input_gradient_norm(tape, f, xn);
  const ad::NodeId fhat = constraint::gn_normalize(tape, f, xn, zeta);
  const ad::NodeId ghat = ad::input_gradient_norm(tape, fhat, xn);

  GnBoundReport r;
  r.piecewise_linear = spec.is_piecewise_linear();
  r.samples = x.rows();
  const Tensor& fv = tape.value(f);
  const Tensor& gv = tape.value(g);
  const Tensor& ghv = tape.value(ghat);
  r.max_grad_norm = max_of(ghv);
  r.max_abs_output = max_abs_of(tape.value(fhat));
  if (r.piecewise_linear) {
    for (std::size_t i = 0; i < fv.numel(); ++i) {
      r.max_discrepancy = std::max(r.max_discrepancy, std::fabs(ghv[i] - gn_closed_form(gv[i], fv[i], zeta)));
    }
  }
  return r;
}

GnBoundReport verify_gn_bound(const nn::NetworkSpec& spec, const nn::Params& params, constraint::Zeta zeta,
                              const Sampler& sampler, std::size_t n, Prng& prng) {
  const std::vector<Tensor> chunks = draw_chunks(sampler, n, prng);
  std::vector<GnBoundReport> parts(chunks.size());
  parallel_for(chunks.size(), [&](std::size_t i) { parts[i] = verify_gn_bound(spec, params, zeta, chunks[i]); });
  GnBoundReport r;
  r.piecewise_linear = spec.is_piecewise_linear();
  for (const auto& p : parts) {
    r.max_discrepancy = std::max(r.max_discrepancy, p.max_discrepancy);
    r.max_grad_norm = std::max(r.max_grad_norm, p.max_grad_norm);
    r.max_abs_output = std::max(r.max_abs_output, p.max_abs_output);
    r.samples += p.samples;
  }
  return r;
}

double SurfaceGrid::x_at(std::size_t j) const {
  return x_min + (x_max - x_min) * static_cast<double>(j) / static_cast<double>(resolution - 1);
}

double SurfaceGrid::y_at(std::size_t i) const {
  return y_min + (y_max - y_min) * static_cast<double>(i) / static_cast<double>(resolution - 1);
}

void SurfaceGrid::validate_geometry() const {
  if (resolution < 2) throw ContractError("surface resolution must be >= 2");
  if (!(x_max > x_min) || !(y_max > y_min)) throw ContractError("surface range must be non-empty");
}

namespace {

SurfaceGrid blank_like(const SurfaceGrid& geometry) {
  geometry.validate_geometry();
  SurfaceGrid out = geometry;
  out.values = Tensor({geometry.resolution, geometry.resolution});
  return out;
}

}  // namespace

SurfaceGrid value_surface(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const constraint::SpectralState* spectral, const SurfaceGrid& geometry,
                          SurfaceOutput output) {
  if (spec.input_size() != 2) {
    throw ContractError("value surfaces need a 2D-input network, got input size " +
                        std::to_string(spec.input_size()));
  }
  SurfaceGrid out = blank_like(geometry);
  const std::size_t res = out.resolution;
  parallel_for(res, [&](std::size_t i) {
    Tensor x({res, 2});
    for (std::size_t j = 0; j < res; ++j) {
      x[2 * j] = out.x_at(j);
      x[2 * j + 1] = out.y_at(i);
    }
    ad::Tape tape;
    const nn::BoundParams bound = nn::bind(tape, params);
    const Tensor& v = tape.value(constraint::critic_output(spec, bound, mode, spectral, tape.leaf(std::move(x)), tape));
    for (std::size_t j = 0; j < res; ++j) {
      out.values[i * res + j] = output == SurfaceOutput::sigmoid ? 1.0 / (1.0 + std::exp(-v[j])) : v[j];
    }
  });
  return out;
}

SurfaceGrid theoretical_surface(const data::Mixture2D& real, const data::Mixture2D& fake, const SurfaceGrid& geometry) {
  SurfaceGrid out = blank_like(geometry);
  const std::size_t res = out.resolution;
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      const double lr = real.log_density(out.x_at(j), out.y_at(i));
      const double lg = fake.log_density(out.x_at(j), out.y_at(i));
      out.values[i * res + j] = 1.0 / (1.0 + std::exp(lg - lr));
    }
  }
  return out;
}

Tensor grid_gradient_magnitude(const SurfaceGrid& grid) {
  grid.validate_geometry();
  const std::size_t res = grid.resolution;
  const double hx = (grid.x_max - grid.x_min) / static_cast<double>(res - 1);
  const double hy = (grid.y_max - grid.y_min) / static_cast<double>(res - 1);
  const Tensor& v = grid.values;
  auto at = [&](std::size_t i, std::size_t j) { return v[i * res + j]; };
  Tensor out({res, res});
  for (std::size_t i = 0; i < res; ++i) {
    for (std::size_t j = 0; j < res; ++j) {
      double gx = 0.0;
      double gy = 0.0;
      if (j == 0) gx = (at(i, 1) - at(i, 0)) / hx;
      else if (j == res - 1) gx = (at(i, j) - at(i, j - 1)) / hx;
      else gx = (at(i, j + 1) - at(i, j - 1)) / (2.0 * hx);
      if (i == 0) gy = (at(1, j) - at(0, j)) / hy;
      else if (i == res - 1) gy = (at(i, j) - at(i - 1, j)) / hy;
      else gy = (at(i + 1, j) - at(i - 1, j)) / (2.0 * hy);
      out[i * res + j] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double max_grid_gradient(const SurfaceGrid& grid) {
  const Tensor g = grid_gradient_magnitude(grid);
  double m = 0.0;
  for (double v : g.data()) {
    if (!std::isfinite(v)) return v;
    m = std::max(m, v);
  }
  return m;
}

void write_surface(const SurfaceGrid& grid, const std::filesystem::path& dir, const std::string& stem) {
  grid.validate_geometry();
  const std::size_t res = grid.resolution;
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / (stem + ".csv"), std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + (dir / (stem + ".csv")).string());
    csv << "x,y,value\n";
    for (std::size_t i = 0; i < res; ++i) {
      for (std::size_t j = 0; j < res; ++j) {
        csv << fmt(grid.x_at(j)) << ',' << fmt(grid.y_at(i)) << ',' << fmt(grid.values[i * res + j]) << '\n';
      }
    }
  }
  double lo = grid.values[0];
  double hi = grid.values[0];
  for (double v : grid.values.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  constexpr int kMaxval = 65535;
  {
    std::ofstream pgm(dir / (stem + ".pgm"), std::ios::binary);
    if (!pgm) throw std::runtime_error("cannot write " + (dir / (stem + ".pgm")).string());
    pgm << "P2\n" << res << ' ' << res << '\n' << kMaxval << '\n';
    for (std::size_t r = 0; r < res; ++r) {
      const std::size_t i = res - 1 - r;  // first image row is y_max
      for (std::size_t j = 0; j < res; ++j) {
        const double t = hi > lo ? (grid.values[i * res + j] - lo) / (hi - lo) : 0.0;
        pgm << static_cast<int>(std::lround(t * kMaxval)) << (j + 1 == res ? '\n' : ' ');
      }
    }
  }
  std::ofstream side(dir / (stem + ".pgm.txt"), std::ios::binary);
  side << "min " << fmt(lo) << '\n'
       << "max " << fmt(hi) << '\n'
       << "maxval " << kMaxval << '\n'
       << "value = min + pixel * (max - min) / maxval\n"
       << "x_range " << fmt(grid.x_min) << ' ' << fmt(grid.x_max) << '\n'
       << "y_range " << fmt(grid.y_min) << ' ' << fmt(grid.y_max) << '\n'
       << "first row is y_max, first column is x_min\n";
}

namespace {

struct LossEval {
  const nn::NetworkSpec& spec;
  const constraint::ConstraintMode& mode;
  const constraint::SpectralState* spectral;
  const gan::Loss& loss;
  const Tensor& x_real;
  const Tensor& x_fake;
  std::uint64_t penalty_seed;

  ad::NodeId build(ad::Tape& tape, const nn::BoundParams& bound) const {
    const ad::NodeId xr = tape.leaf(x_real);
    const ad::NodeId xf = tape.leaf(x_fake);
    const ad::NodeId dr = constraint::critic_output(spec, bound, mode, spectral, xr, tape);
    const ad::NodeId df = constraint::critic_output(spec, bound, mode, spectral, xf, tape);
    ad::NodeId l = gan::discriminator_loss(tape, loss, dr, df);
    if (const auto* gp = std::get_if<constraint::Gp>(&mode)) {
      Prng prng(penalty_seed);
      l = ad::add(tape, l, constraint::gradient_penalty(spec, bound, x_real, x_fake, gp->center, gp->lambda, prng, tape));
    }
    return l;
  }

  double value(const nn::Params& params) const {
    ad::Tape tape;
    return tape.value(build(tape, nn::bind(tape, params))).item();
  }
};

}  // namespace

GradcheckReport gradcheck(const nn::NetworkSpec& spec, const nn::Params& params, const constraint::ConstraintMode& mode,
                          const gan::Loss& loss, const Tensor& x_real, const Tensor& x_fake,
                          std::uint64_t penalty_seed) {
  params.check(spec);
  std::optional<constraint::SpectralState> spectral;
  if (std::holds_alternative<constraint::Sn>(mode)) {
    Prng prng(penalty_seed);
    spectral = constraint::init_spectral_state(params, prng);
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
      constraint::power_iteration(params.weights[k], spectral->u[k], spectral->v[k], 50);
    }
  }
  const LossEval eval{spec, mode, spectral ? &*spectral : nullptr, loss, x_real, x_fake, penalty_seed};

  ad::Tape tape;
  const nn::BoundParams bound = nn::bind(tape, params);
  const ad::NodeId l = eval.build(tape, bound);
  const nn::Params analytic = nn::collect(tape, tape.backward(l, bound.all()), params);

  // Flat view over (tensor, index) so perturbations can run in parallel.
  struct Slot {
    bool weight;
    std::size_t layer;
    std::size_t index;
  };
  std::vector<Slot> slots;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    for (std::size_t i = 0; i < params.weights[k].numel(); ++i) slots.push_back({true, k, i});
    for (std::size_t i = 0; i < params.biases[k].numel(); ++i) slots.push_back({false, k, i});
  }
  std::vector<double> numeric(slots.size());
  parallel_for(slots.size(), [&](std::size_t s) {
    nn::Params p = params;
    const Slot& slot = slots[s];
    double& entry = slot.weight ? p.weights[slot.layer][slot.index] : p.biases[slot.layer][slot.index];
    const double orig = entry;
    entry = orig + kGradcheckStep;
    const double up = eval.value(p);
    entry = orig - kGradcheckStep;
    const double down = eval.value(p);
    numeric[s] = (up - down) / (2.0 * kGradcheckStep);
  });

  GradcheckReport r;
  r.parameters = slots.size();
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Slot& slot = slots[s];
    const double a = slot.weight ? analytic.weights[slot.layer][slot.index] : analytic.biases[slot.layer][slot.index];
    const double n = numeric[s];
    const double err = std::fabs(a - n);
    const double denom = std::max({std::fabs(a), std::fabs(n), kGradcheckFloor});
    r.max_abs_error = std::max(r.max_abs_error, err);
    r.max_relative_error = std::max(r.max_relative_error, err / denom);
    r.max_abs_gradient = std::max(r.max_abs_gradient, std::fabs(a));
  }
  return r;
}

Tensor sample_away_from_kinks(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                              std::size_t n, Prng& prng, std::size_t* redrawn) {
  auto near_kink = [&](const Tensor& row) {
    for (const Tensor& pre : nn::pre_activations(spec, params, row)) {
      for (double v : pre.data()) {
        if (std::fabs(v) < kKinkMargin) return true;
      }
    }
    return false;
  };
  Tensor x = sampler(n, prng);
  const std::size_t d = x.cols();
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor row({1, d}, std::vector<double>(x.ptr() + i * d, x.ptr() + (i + 1) * d));
    for (std::size_t attempt = 0; near_kink(row); ++attempt) {
      if (attempt == 1000) throw ContractError("could not draw an input away from activation kinks");
      row = sampler(1, prng);
      ++count;
    }
    std::copy_n(row.ptr(), d, x.ptr() + i * d);
  }
  if (redrawn) *redrawn = count;
  return x;
}

namespace {

nn::Params random_params(const nn::NetworkSpec& spec, Prng& prng, double bias_std) {
  nn::Params p = nn::init_kaiming(spec, prng);
  for (auto& b : p.biases) {
    for (double& v : b.data()) v = bias_std * prng.normal();
  }
  return p;
}

Tensor normal_batch(std::size_t rows, std::size_t cols, Prng& prng) {
  Tensor x({rows, cols});
  for (double& v : x.data()) v = prng.normal();
  return x;
}

}  // namespace

AuditResult audit_gn_bound(std::size_t nets, std::size_t inputs_per_net, double tol, Prng& prng) {
  std::vector<std::uint64_t> seeds(nets);
  for (auto& s : seeds) s = prng();
  std::vector<GnBoundReport> parts(nets);
  parallel_for(nets, [&](std::size_t i) {
    Prng local(seeds[i]);
    const std::size_t depth = 2 + local() % 5;
    const std::size_t width = 1 + local() % 64;
    const std::size_t dim = 2 + local() % 7;
    nn::ActivationLayer act;
    act.kind = local() % 2 == 0 ? nn::Activation::relu : nn::Activation::leaky_relu;
    const nn::NetworkSpec spec = nn::NetworkSpec::mlp(dim, width, depth, 1, act);
    const nn::Params params = random_params(spec, local, 0.1);
    parts[i] = verify_gn_bound(spec, params, constraint::Zeta::abs_f, normal_batch(inputs_per_net, dim, local));
  });
  double worst_norm = 0.0;
  double worst_gap = 0.0;
  for (const auto& p : parts) {
    worst_norm = std::max(worst_norm, p.max_grad_norm);
    worst_gap = std::max(worst_gap, p.max_discrepancy);
  }
  AuditResult r;
  r.name = "gn_gradient_bound";
  r.pass = worst_norm <= 1.0 + tol && worst_gap <= tol;
  r.detail = std::to_string(nets) + " nets x " + std::to_string(inputs_per_net) + " inputs, max norm " +
             fmt(worst_norm) + ", max closed-form gap " + fmt_short(worst_gap) + ", tol " + fmt_short(tol);
  return r;
}

AuditResult audit_prefix_decay(std::size_t depth, std::size_t width, std::size_t pairs, double tol, Prng& prng) {
  const nn::NetworkSpec spec = nn::NetworkSpec::mlp(2, width, depth, 1);
  nn::Params params = random_params(spec, prng, 0.1);
  constraint::SpectralState state = constraint::init_spectral_state(params, prng);
  params = constraint::spectral_normalize(params, state, 500);
  const std::vector<double> est = prefix_lipschitz_all(spec, params, uniform_box(2, -3.0, 3.0), pairs, prng);
  AuditResult r;
  r.name = "prefix_lipschitz_decay";
  r.pass = true;
  std::ostringstream detail;
  detail << depth << "-layer SN MLP, " << pairs << " pairs:";
  for (std::size_t k = 0; k < est.size(); ++k) {
    detail << ' ' << fmt_short(est[k]);
    if (k > 0 && est[k] > est[k - 1] + tol) r.pass = false;
  }
  r.detail = detail.str();
  return r;
}

AuditResult audit_lipschitz_gradient(const nn::NetworkSpec& spec, const nn::Params& params, const Sampler& sampler,
                                     std::size_t pairs, double tol, Prng& prng) {
  constexpr double kRadius = 1e-3;
  const Tensor x = sampler(pairs, prng);
  const std::size_t d = x.cols();
  Tensor y = x;
  for (std::size_t i = 0; i < pairs; ++i) {
    double s = 0.0;
    std::vector<double> dir(d);
    for (double& v : dir) {
      v = prng.normal();
      s += v * v;
    }
    s = std::sqrt(s);
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] += kRadius * dir[j] / s;
  }
  const constraint::ConstraintMode none = constraint::None{};
  const auto px = constraint::probe_critic(spec, params, none, nullptr, x);
  const auto py = constraint::probe_critic(spec, params, none, nullptr, y);
  const double grad_max = std::max(max_of(px.grad_norm), max_of(py.grad_norm));
  double ratio_max = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (x[i * d + j] - y[i * d + j]) * (x[i * d + j] - y[i * d + j]);
    if (s > 0.0) ratio_max = std::max(ratio_max, std::fabs(px.output[i] - py.output[i]) / std::sqrt(s));
  }
  AuditResult r;
  r.name = "lipschitz_vs_gradient";
  r.pass = ratio_max <= grad_max + tol;
  r.detail = "max difference quotient " + fmt(ratio_max) + ", max gradient norm " + fmt(grad_max);
  return r;
}

std::vector<ZetaFamilyRow> zeta_failure_families(std::size_t members, Prng& prng) {
  const nn::NetworkSpec spec = nn::NetworkSpec::mlp(2, 4, 2, 1);
  const constraint::Zeta zetas[] = {constraint::Zeta::abs_f, constraint::Zeta::one, constraint::Zeta::zero};
  std::vector<ZetaFamilyRow> rows;
  for (const char* family : {"plateau", "growing"}) {
    for (constraint::Zeta z : zetas) rows.push_back({family, z, 0.0});
  }
  const Tensor x = normal_batch(64, 2, prng);
  for (std::size_t m = 0; m < members; ++m) {
    nn::Params base = nn::init_kaiming(spec, prng);
    for (double& b : base.biases[0].data()) b = 1.0;
    const double magnitude = std::pow(10.0, static_cast<double>(m));
    for (std::size_t fam = 0; fam < 2; ++fam) {
      nn::Params p = base;
      if (fam == 0) {
        // Output slope shrinks as 10^-m while the offset stays at 1.
        p.weights[1] = scale(p.weights[1], 1.0 / magnitude);
        p.biases[1][0] = 1.0;
      } else {
        p.biases[1][0] = magnitude;
      }
      for (std::size_t zi = 0; zi < 3; ++zi) {
        const GnBoundReport rep = verify_gn_bound(spec, p, zetas[zi], x);
        ZetaFamilyRow& row = rows[fam * 3 + zi];
        row.max_abs_output = std::max(row.max_abs_output, rep.max_abs_output);
      }
    }
  }
  return rows;
}

AuditResult audit_zeta_families(Prng& prng) {
  const auto rows = zeta_failure_families(8, prng);
  auto get = [&](const std::string& fam, constraint::Zeta z) {
    for (const auto& r : rows) {
      if (r.family == fam && r.zeta == z) return r.max_abs_output;
    }
    return 0.0;
  };
  using constraint::Zeta;
  AuditResult r;
  r.name = "zeta_failure_modes";
  r.pass = get("plateau", Zeta::zero) > 1e3 && get("growing", Zeta::one) > 1e3 &&
           get("plateau", Zeta::abs_f) <= 1.0 && get("growing", Zeta::abs_f) <= 1.0;
  std::ostringstream detail;
  for (const auto& row : rows) {
    detail << row.family << '/' << constraint::zeta_name(row.zeta) << " max|f_hat| " << fmt_short(row.max_abs_output)
           << "; ";
  }
  r.detail = detail.str();
  return r;
}

}  // namespace gnlab::analysis
