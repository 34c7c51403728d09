#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gnlab/gan.hpp"
#include "helpers.hpp"

using namespace gnlab;
using gnlab::test::random_tensor;
using gnlab::test::rel_err;

namespace {

double loss_value(const gan::Loss& loss, const Tensor& dr, const Tensor& df, bool generator = false) {
  ad::Tape t;
  const ad::NodeId r = t.leaf(dr);
  const ad::NodeId f = t.leaf(df);
  return t.value(generator ? gan::generator_loss(t, loss, f) : gan::discriminator_loss(t, loss, r, f)).item();
}

struct Toy {
  nn::NetworkSpec gen = nn::NetworkSpec::mlp(4, 16, 2, 2);
  nn::NetworkSpec disc = nn::NetworkSpec::mlp(2, 16, 2, 1);
  data::MixtureSource real{data::Mixture2D::single(-1.0, 0.0, 0.04)};
  gan::TrainConfig cfg;
  Toy() {
    cfg.batch_size = 16;
    cfg.latent_dim = 4;
    cfg.lipschitz_every = 0;
  }
};

}  // namespace

TEST_SUITE("gan") {

TEST_CASE("loss examples") {
  const gan::Loss hinge{gan::LossKind::hinge};
  const gan::Loss wass{gan::LossKind::wasserstein};
  CHECK(loss_value(hinge, Tensor::vector({2}), Tensor::vector({-2})) == 0.0);
  CHECK(loss_value(wass, Tensor::vector({0.3, -1}), Tensor::vector({0.3, -1})) == 0.0);
  CHECK(loss_value(hinge, Tensor::vector({0}), Tensor::vector({0, 0}), true) == 0.0);

  const gan::Loss ns_raw{gan::LossKind::non_saturating, false};
  CHECK(loss_value(ns_raw, Tensor::vector({0.5}), Tensor::vector({std::exp(-1.0)}), true) ==
        doctest::Approx(1.0).epsilon(1e-15));
  const gan::Loss ns{gan::LossKind::non_saturating, true};
  CHECK(loss_value(ns, Tensor::vector({0.5}), Tensor::vector({-std::log(std::exp(1.0) - 1.0)}), true) ==
        doctest::Approx(1.0).epsilon(1e-14));

  // vanilla discriminator loss against the log form
  const Tensor dr = Tensor::vector({0.4, -1.3, 2.0});
  const Tensor df = Tensor::vector({-0.2, 0.9, 0.1});
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double sr = 1.0 / (1.0 + std::exp(-dr[i]));
    const double sf = 1.0 / (1.0 + std::exp(-df[i]));
    expected += (-std::log(sr) - std::log(1.0 - sf)) / 3.0;
  }
  CHECK(loss_value({gan::LossKind::vanilla}, dr, df) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(loss_value(ns, dr, df) == loss_value({gan::LossKind::vanilla}, dr, df));
}

TEST_CASE("loss contract errors") {
  const gan::Loss ns_raw{gan::LossKind::non_saturating, false};
  CHECK_THROWS_AS(loss_value(ns_raw, Tensor::vector({1.5}), Tensor::vector({0.5})), ContractError);
  CHECK_THROWS_AS(loss_value(ns_raw, Tensor::vector({0.5}), Tensor::vector({0.0}), true), ContractError);
  CHECK_THROWS_AS(loss_value({gan::LossKind::hinge}, Tensor::vector({1, 2}), Tensor::vector({1})), DimensionError);
  CHECK_THROWS_AS(gan::parse_loss("bogus"), ContractError);
  CHECK(gan::loss_name(gan::parse_loss("ns_nosigmoid")) == "ns_nosigmoid");
}

TEST_CASE("hinge and wasserstein give identical gradients under GN") {
  Prng prng(41);
  const auto spec = nn::NetworkSpec::mlp(2, 16, 3, 1);
  nn::Params p = nn::init_kaiming(spec, prng);
  const Tensor xr = random_tensor({16, 2}, prng);
  const Tensor xf = random_tensor({16, 2}, prng);
  auto grads = [&](gan::LossKind kind) {
    ad::Tape t;
    const auto b = nn::bind(t, p);
    const ad::NodeId dr = constraint::critic_output(spec, b, constraint::Gn{}, nullptr, t.leaf(xr), t);
    const ad::NodeId df = constraint::critic_output(spec, b, constraint::Gn{}, nullptr, t.leaf(xf), t);
    for (double v : t.value(dr).data()) REQUIRE(std::fabs(v) < 1.0);
    for (double v : t.value(df).data()) REQUIRE(std::fabs(v) < 1.0);
    const ad::NodeId loss = gan::discriminator_loss(t, {kind}, dr, df);
    return nn::collect(t, t.backward(loss, b.all()), p);
  };
  CHECK(grads(gan::LossKind::hinge) == grads(gan::LossKind::wasserstein));
}

TEST_CASE("non-saturating loss without sigmoid matches finite differences") {
  const Tensor df = Tensor::vector({0.2, 0.7, 0.45});
  const gan::Loss ns_raw{gan::LossKind::non_saturating, false};
  ad::Tape t;
  const ad::NodeId f = t.leaf(df);
  const Tensor g = t.value(t.backward(gan::generator_loss(t, ns_raw, f), f));
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor plus = df, minus = df;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss_value(ns_raw, df, plus, true) - loss_value(ns_raw, df, minus, true)) / (2 * h);
    CHECK(rel_err(g[i], fd) < 1e-7);
  }
}

TEST_CASE("adam") {
  const gan::AdamConfig cfg;
  nn::Params p{{Tensor::matrix({{0.5, -1.0}})}, {Tensor::vector({2.0})}};
  const nn::Params before = p;
  auto state = gan::AdamState::like(p);
  gan::adam_step(p, nn::zeros_like(p), state, 0.1, cfg);
  CHECK(p == before);

  nn::Params s{{Tensor::matrix({{0.0}})}, {Tensor::vector({0.0})}};
  nn::Params g{{Tensor::matrix({{1.0}})}, {Tensor::vector({1.0})}};
  auto st = gan::AdamState::like(s);
  gan::adam_step(s, g, st, 0.1, cfg);
  const double hand = -0.1 / (1.0 + 1e-8 * std::sqrt(10.0));
  CHECK(s.weights[0][0] == doctest::Approx(hand).epsilon(1e-15));
  CHECK(std::fabs(s.weights[0][0] + 0.0999999968377) < 1e-13);

  // two steps, constant gradient 0.3, textbook bias-corrected recurrence with beta1 = 0.5
  const gan::AdamConfig c2{0.5, 0.9, 1e-8};
  nn::Params q{{Tensor::matrix({{1.0}})}, {Tensor::vector({0.0})}};
  nn::Params gq{{Tensor::matrix({{0.3}})}, {Tensor::vector({0.0})}};
  auto sq = gan::AdamState::like(q);
  double x = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    gan::adam_step(q, gq, sq, 0.01, c2);
    m = 0.5 * m + 0.5 * 0.3;
    v = 0.9 * v + 0.1 * 0.09;
    const double mhat = m / (1 - std::pow(0.5, t));
    const double vhat = v / (1 - std::pow(0.9, t));
    // folded epsilon: eps scaled by sqrt(1 - beta2^t)
    x -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8 / std::sqrt(1 - std::pow(0.9, t)));
    CHECK(q.weights[0][0] == doctest::Approx(x).epsilon(1e-14));
  }
  CHECK(sq.t == 2);
}

TEST_CASE("ema") {
  nn::Params shadow{{Tensor::matrix({{1.0, 2.0}})}, {Tensor::vector({3.0})}};
  nn::Params p{{Tensor::matrix({{-1.0, 0.5}})}, {Tensor::vector({7.0})}};
  gan::EmaState e0{shadow, 0.0};
  gan::ema_update(e0, p);
  CHECK(e0.shadow == p);
  gan::EmaState e1{shadow, 1.0};
  gan::ema_update(e1, p);
  CHECK(e1.shadow == shadow);

  // constant params: shadow_n = d^n s0 + (1 - d^n) p
  gan::EmaState e{shadow, 0.8};
  for (int i = 0; i < 10; ++i) gan::ema_update(e, p);
  const double dn = std::pow(0.8, 10);
  CHECK(e.shadow.weights[0][0] == doctest::Approx(dn * 1.0 + (1 - dn) * -1.0).epsilon(1e-14));
  CHECK(e.shadow.weights[0][1] == doctest::Approx(dn * 2.0 + (1 - dn) * 0.5).epsilon(1e-14));
  CHECK(e.shadow.biases[0][0] == doctest::Approx(dn * 3.0 + (1 - dn) * 7.0).epsilon(1e-14));
}

TEST_CASE("train with zero steps returns the initial params") {
  Toy toy;
  toy.cfg.steps = 0;
  const auto report = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg);
  Prng prng(toy.cfg.seed);
  prng.split();
  CHECK(report.generator == nn::init_kaiming(toy.gen, prng));
  CHECK(report.discriminator == nn::init_kaiming(toy.disc, prng));
  CHECK(report.metrics.empty());
  CHECK(report.d_updates == 0);
}

TEST_CASE("one generator step runs n_dis discriminator updates") {
  Toy toy;
  toy.cfg.steps = 1;
  toy.cfg.n_dis = 5;
  std::size_t d_events = 0, g_events = 0;
  const auto report = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg, std::nullopt,
                                 [&](const gan::StepEvent& e) { (e.generator_update ? g_events : d_events)++; });
  CHECK(report.d_updates == 5);
  CHECK(report.g_updates == 1);
  CHECK(d_events == 5);
  CHECK(g_events == 1);
  CHECK(report.metrics.size() == 1);
}

TEST_CASE("training is deterministic per seed") {
  Toy toy;
  toy.cfg.steps = 5;
  toy.cfg.seed = 3;
  toy.cfg.ema_decay = 0.99;
  const auto a = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg);
  const auto b = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg);
  CHECK(a.generator == b.generator);
  CHECK(a.discriminator == b.discriminator);
  CHECK(*a.generator_ema == *b.generator_ema);
  std::ostringstream ca, cb;
  gan::write_report_csv(ca, a);
  gan::write_report_csv(cb, b);
  CHECK(ca.str() == cb.str());
  CHECK(ca.str().rfind("step,loss_d,loss_g,max_grad_norm,lipschitz_est,lr\n", 0) == 0);
}

TEST_CASE("linear learning-rate decay") {
  Toy toy;
  toy.cfg.steps = 7;
  toy.cfg.n_dis = 1;
  toy.cfg.lr_decay = true;
  const auto report = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg);
  for (std::size_t t = 0; t < 7; ++t) CHECK(report.metrics[t].lr == toy.cfg.lr_g * (1.0 - static_cast<double>(t) / 7.0));
}

TEST_CASE("GN keeps gradient norms and outputs bounded during training") {
  Toy toy;
  toy.cfg.steps = 30;
  toy.cfg.lipschitz_every = 10;
  toy.cfg.lipschitz_samples = 256;
  double worst_out = 0.0;
  const auto report = gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg, std::nullopt,
                                 [&](const gan::StepEvent& e) { worst_out = std::max(worst_out, e.max_abs_output); });
  CHECK(worst_out <= 1.0 + 1e-12);
  for (const auto& m : report.metrics) {
    CHECK(m.max_grad_norm <= 1.0 + 1e-6);
    if (m.lipschitz_est) CHECK(*m.lipschitz_est <= 1.0 + 1e-6);
  }
  CHECK(report.metrics[9].lipschitz_est.has_value());
  CHECK_FALSE(report.metrics[8].lipschitz_est.has_value());
}

TEST_CASE("train rejects bad configs") {
  Toy toy;
  toy.cfg.steps = 1;
  toy.cfg.batch_size = 0;
  CHECK_THROWS_AS(gan::train(toy.gen, toy.disc, constraint::Gn{}, toy.real, toy.cfg), ContractError);
  Toy t2;
  t2.cfg.steps = 1;
  CHECK_THROWS_AS(gan::train(t2.gen, t2.disc, constraint::GnConditional{}, t2.real, t2.cfg), ContractError);
}

TEST_CASE("non-finite loss aborts with the step index") {
  Toy toy;
  toy.cfg.steps = 3;
  toy.cfg.lr_d = 1e300;
  toy.cfg.n_dis = 2;
  bool thrown = false;
  try {
    gan::train(toy.gen, toy.disc, constraint::None{}, toy.real, toy.cfg);
  } catch (const NumericalError& e) {
    thrown = true;
    CHECK(e.step() < 3);
    CHECK_FALSE(e.quantity().empty());
  }
  CHECK(thrown);
}

}  // TEST_SUITE
