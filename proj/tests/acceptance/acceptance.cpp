// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gnlab/analysis.hpp"
#include "gnlab/cli.hpp"

using namespace gnlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const data::Mixture2D kReal = data::Mixture2D::single(-1.0, 0.0, 0.04);
const data::Mixture2D kFake = data::Mixture2D::single(1.0, 0.0, 0.04);

std::uint64_t fnv1a(std::uint64_t h, const Tensor& t) {
  const auto* p = reinterpret_cast<const unsigned char*>(t.ptr());
  for (std::size_t i = 0; i < t.numel() * sizeof(double); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_params(const nn::Params& g, const nn::Params& d) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const nn::Params* p : {&g, &d}) {
    for (const auto& w : p->weights) h = fnv1a(h, w);
    for (const auto& b : p->biases) h = fnv1a(h, b);
  }
  return h;
}

Outcome gn_bound() {
  Prng prng(1001);
  const auto r = analysis::audit_gn_bound(10000, 8, 1e-8, prng);
  return {r.pass, r.detail};
}

Outcome gradcheck_gn_hinge() {
  Prng prng(1002);
  const auto spec = nn::NetworkSpec::mlp(2, 16, 3, 1);
  nn::Params p = nn::init_kaiming(spec, prng);
  for (auto& b : p.biases) {
    for (double& v : b.data()) v = 0.1 * prng.normal();
  }
  data::MixtureSource real(kReal), fake(kFake);
  const Tensor xr = analysis::sample_away_from_kinks(spec, p, analysis::sampler_from(real), 8, prng);
  const Tensor xf = analysis::sample_away_from_kinks(spec, p, analysis::sampler_from(fake), 8, prng);
  const auto r = analysis::gradcheck(spec, p, constraint::Gn{}, {gan::LossKind::hinge}, xr, xf);
  return {r.max_relative_error < 1e-4,
          fmt("max relative error %.3e over %zu parameters (max |grad| %.3e)", r.max_relative_error, r.parameters,
              r.max_abs_gradient)};
}

Outcome prefix_decay() {
  Prng prng(1003);
  const auto r = analysis::audit_prefix_decay(9, 64, 10000, 1e-3, prng);
  return {r.pass, r.detail};
}

Outcome lipschitz_ordering() {
  const auto gen = nn::NetworkSpec::mlp(64, 64, 3, 2);
  const auto d3 = nn::NetworkSpec::mlp(2, 64, 3, 1);
  const auto d9 = nn::NetworkSpec::mlp(2, 64, 9, 1);
  int gn_ok = 0, order_ok = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    gan::TrainConfig cfg;
    cfg.steps = 2000;
    cfg.loss = {gan::LossKind::wasserstein};
    cfg.seed = seed;
    cfg.lipschitz_every = 0;
    auto estimate = [&](const nn::NetworkSpec& dspec, const constraint::ConstraintMode& mode) {
      data::MixtureSource real(kReal);
      const auto report = gan::train(gen, dspec, mode, real, cfg);
      const nn::Params g = report.generator;
      const analysis::Sampler fake = [&](std::size_t n, Prng& prng) {
        return gan::generate(gen, g, n, cfg.latent_dim, cfg.generator_tanh, prng);
      };
      Prng probe(seed + 100);
      data::MixtureSource real_probe(kReal);
      return analysis::estimate_lipschitz(dspec, report.discriminator, mode,
                                          report.spectral ? &*report.spectral : nullptr,
                                          {analysis::sampler_from(real_probe), fake}, 4096, probe);
    };
    const double gn = estimate(d3, constraint::Gn{});
    const double sn3 = estimate(d3, constraint::Sn{});
    const double sn9 = estimate(d9, constraint::Sn{});
    const bool g_ok = gn > 0.5 && gn <= 1.0;
    const bool o_ok = sn9 < sn3;
    gn_ok += g_ok;
    order_ok += o_ok && g_ok;
    detail << fmt("seed %llu: GN %.4f, SN-3 %.4f, SN-9 %.4f%s; ", static_cast<unsigned long long>(seed), gn, sn3,
                  sn9, g_ok && o_ok ? "" : " (miss)");
  }
  detail << fmt("%d/3 seeds hold", order_ok);
  return {order_ok >= 2, detail.str()};
}

Outcome hinge_wasserstein_identity() {
  const auto gen = nn::NetworkSpec::mlp(64, 64, 3, 2);
  const auto disc = nn::NetworkSpec::mlp(2, 64, 3, 1);
  struct Event {
    std::uint64_t hash;
    double max_abs;
  };
  auto trajectory = [&](gan::LossKind kind, gan::TrainReport* report) {
    gan::TrainConfig cfg;
    cfg.steps = 500;
    cfg.loss = {kind};
    cfg.seed = 5;
    cfg.lipschitz_every = 0;
    std::vector<Event> events;
    data::MixtureSource real(kReal);
    *report = gan::train(gen, disc, constraint::Gn{}, real, cfg, std::nullopt, [&](const gan::StepEvent& e) {
      events.push_back({hash_params(e.generator, e.discriminator), e.max_abs_output});
    });
    return events;
  };
  gan::TrainReport rh, rw;
  const auto h = trajectory(gan::LossKind::hinge, &rh);
  const auto w = trajectory(gan::LossKind::wasserstein, &rw);
  if (h.size() != w.size()) return {false, "event counts differ"};
  std::size_t compared = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i].max_abs >= 1.0 || w[i].max_abs >= 1.0) {
      return {true, fmt("identical through %zu updates; |D_hat| reached 1 at update %zu", compared, i)};
    }
    if (h[i].hash != w[i].hash) return {false, fmt("trajectories diverge at update %zu", i)};
    ++compared;
  }
  const bool final_same = rh.generator == rw.generator && rh.discriminator == rw.discriminator;
  return {final_same, fmt("%zu updates bit-identical (generator and discriminator), final params %s", compared,
                          final_same ? "identical" : "differ")};
}

Outcome value_surfaces() {
  const auto spec = nn::NetworkSpec::mlp(2, 512, 2, 1);
  gan::TrainConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 1;
  analysis::SurfaceGrid geom;
  geom.resolution = 101;
  auto surface = [&](const constraint::ConstraintMode& mode, gan::LossKind kind) {
    cfg.loss = {kind};
    data::MixtureSource real(kReal), fake(kFake);
    const auto run = gan::train_discriminator(spec, mode, real, fake, cfg);
    return analysis::value_surface(spec, run.params, mode, nullptr, geom);
  };
  const auto gn = surface(constraint::Gn{}, gan::LossKind::hinge);
  const auto vanilla = surface(constraint::None{}, gan::LossKind::vanilla);
  bool in_range = true;
  for (double v : gn.values.data()) in_range = in_range && std::isfinite(v) && std::fabs(v) <= 1.0;
  bool finite_grad = true;
  for (double v : analysis::grid_gradient_magnitude(gn).data()) finite_grad = finite_grad && std::isfinite(v);
  const double g_gn = analysis::max_grid_gradient(gn);
  const double g_van = analysis::max_grid_gradient(vanilla);
  const double ratio = g_van / g_gn;
  return {in_range && finite_grad && ratio >= 10.0,
          fmt("GN values in [-1,1]: %s, finite gradient: %s, max grid gradient GN %.4g vs vanilla %.4g (ratio %.2fx)",
              in_range ? "yes" : "no", finite_grad ? "yes" : "no", g_gn, g_van, ratio)};
}

Outcome zeta_families() {
  Prng prng(1007);
  const auto r = analysis::audit_zeta_families(prng);
  return {r.pass, r.detail};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "gnlab_acceptance_det";
  fs::remove_all(base);
  const fs::path cfg = fs::path(GNLAB_SOURCE_DIR) / "configs" / "fig9.cfg";
  std::ostringstream sink;
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = base / std::to_string(i);
    const int code = cli::run({"train", "--config", cfg.string(), "--seed", "7", "--out", out.string()}, sink, sink);
    if (code != 0) return {false, fmt("train exited with %d", code)};
    std::ifstream in(out / "report.csv", std::ios::binary);
    reports[i].assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(base);
  const bool same = !reports[0].empty() && reports[0] == reports[1];
  return {same, fmt("report.csv %zu bytes, %s", reports[0].size(), same ? "byte-identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "GN gradient bound and closed form on 1e4 random nets", 120, gn_bound},
      {2, "gradcheck of 2-16-16-1 GN-hinge discriminator", 30, gradcheck_gn_hinge},
      {3, "prefix Lipschitz monotonicity, 9-layer SN MLP", 120, prefix_decay},
      {4, "L_D ordering: GN in (0.5,1], SN-9 < SN-3", 900, lipschitz_ordering},
      {5, "GN hinge/wasserstein trajectories bit-identical", 300, hinge_wasserstein_identity},
      {6, "value surfaces: GN bounded, vanilla >= 10x rougher", 600, value_surfaces},
      {7, "zeta failure families", 60, zeta_families},
      {8, "train determinism (report.csv bytes)", 300, determinism},
  };
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d: %s [%.1fs / %.0fs budget] %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_s, o.detail.c_str(), in_time ? "" : " (over time budget)");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
