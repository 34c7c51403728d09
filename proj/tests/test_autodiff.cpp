#include <doctest.h>

#include <cmath>

#include "gnlab/autodiff.hpp"
#include "gnlab/nn.hpp"
#include "helpers.hpp"

using namespace gnlab;
using gnlab::test::random_tensor;
using gnlab::test::rel_err;

namespace {

// f(x) summed over the batch, for a 2-layer ReLU MLP.
double mlp_sum(const nn::NetworkSpec& spec, const nn::Params& p, const Tensor& x) {
  return sum(nn::evaluate(spec, p, x));
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("record evaluates eagerly") {
  ad::Tape t;
  const ad::NodeId two = t.constant(2.0);
  CHECK(t.value(two).item() == 2.0);
  const ad::NodeId x = t.constant(3.0);
  const ad::NodeId sq = ad::mul(t, x, x);
  CHECK(t.value(sq).item() == 9.0);
  CHECK(t.value(ad::relu(t, t.constant(-1.0))).item() == 0.0);
}

TEST_CASE("record rejects invalid inputs and unknown ops") {
  ad::Tape t;
  const ad::NodeId x = t.constant(1.0);
  const ad::NodeId bad{42};
  CHECK_THROWS_AS(ad::add(t, x, bad), ContractError);
  const ad::NodeId inputs[1] = {x};
  CHECK_THROWS_AS(t.record(ad::Op::Count_, inputs), UnsupportedOpError);
  CHECK_THROWS_AS(t.record(static_cast<ad::Op>(200), inputs), UnsupportedOpError);
}

TEST_CASE("replay of a random 50-node tape reproduces every cached value") {
  Prng prng(7);
  ad::Tape t;
  std::vector<ad::NodeId> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(t.leaf(random_tensor({3, 3}, prng)));
  while (t.size() < 50) {
    const ad::NodeId a = pool[static_cast<std::size_t>(prng() % pool.size())];
    const ad::NodeId b = pool[static_cast<std::size_t>(prng() % pool.size())];
    switch (prng() % 8) {
      case 0: pool.push_back(ad::matmul(t, a, b)); break;
      case 1: pool.push_back(ad::add(t, a, b)); break;
      case 2: pool.push_back(ad::mul(t, a, b)); break;
      case 3: pool.push_back(ad::relu(t, a)); break;
      case 4: pool.push_back(ad::abs(t, a)); break;
      case 5: pool.push_back(ad::scale(t, a, 0.5)); break;
      case 6: pool.push_back(ad::tanh(t, a)); break;
      default: pool.push_back(ad::sqrt(t, ad::abs(t, a))); break;
    }
  }
  CHECK(t.replay_matches());
  std::vector<Tensor> before;
  for (std::uint32_t i = 0; i < t.size(); ++i) before.push_back(t.value(ad::NodeId{i}));
  t.replay();
  for (std::uint32_t i = 0; i < t.size(); ++i) CHECK(t.value(ad::NodeId{i}) == before[i]);
}

TEST_CASE("first and second derivatives of powers") {
  ad::Tape t;
  const ad::NodeId x = t.constant(3.0);
  CHECK(t.value(t.backward(ad::mul(t, x, x), x)).item() == 6.0);

  ad::Tape t2;
  const ad::NodeId z = t2.constant(2.0);
  const ad::NodeId cube = ad::mul(t2, ad::mul(t2, z, z), z);
  const ad::NodeId d1 = t2.backward(cube, z);
  CHECK(t2.value(d1).item() == 12.0);
  const ad::NodeId d2 = t2.backward(d1, z);
  CHECK(t2.value(d2).item() == 12.0);
}

TEST_CASE("backward requires a scalar output") {
  ad::Tape t;
  const ad::NodeId x = t.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(t.backward(ad::mul(t, x, x), x), ContractError);
}

TEST_CASE("parameter gradient of a ReLU MLP matches central differences") {
  Prng prng(31);
  const auto spec = nn::NetworkSpec::mlp(3, 8, 2, 1);
  nn::Params p = nn::init_kaiming(spec, prng);
  for (auto& b : p.biases) b = random_tensor(b.shape(), prng, 0.1);
  const Tensor x = random_tensor({4, 3}, prng);

  ad::Tape t;
  const auto bound = nn::bind(t, p);
  const ad::NodeId y = ad::sum(t, nn::forward(spec, bound, t.leaf(x), t));
  const auto grads = t.backward(y, bound.all());
  const nn::Params g = nn::collect(t, grads, p);

  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p.weights[k].numel(); ++i) {
      nn::Params plus = p, minus = p;
      plus.weights[k][i] += h;
      minus.weights[k][i] -= h;
      const double fd = (mlp_sum(spec, plus, x) - mlp_sum(spec, minus, x)) / (2 * h);
      worst = std::max(worst, rel_err(g.weights[k][i], fd, 1e-6));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("input_gradient_norm examples") {
  ad::Tape t;
  const ad::NodeId x = t.leaf(Tensor::vector({0.3, -1.2}));
  const ad::NodeId w = t.leaf(Tensor::vector({2.0, 0.0}));
  const ad::NodeId f = ad::sum(t, ad::mul(t, w, x));
  CHECK(t.value(ad::input_gradient_norm(t, f, x)).item() == 2.0);

  ad::Tape t2;
  const ad::NodeId x2 = t2.leaf(Tensor::vector({0.3, -1.2}));
  const ad::NodeId c = ad::add_scalar(t2, ad::scale(t2, ad::sum(t2, x2), 0.0), 5.0);
  const ad::NodeId n = ad::input_gradient_norm(t2, c, x2);
  CHECK(t2.value(n).item() == 0.0);
  // the zero-gradient rule keeps the derivative of the norm finite
  const ad::NodeId dn = t2.backward(n, x2);
  for (double v : t2.value(dn).data()) CHECK(v == 0.0);
}

TEST_CASE("weight gradient of the input-gradient norm matches finite differences") {
  Prng prng(17);
  const auto spec = nn::NetworkSpec::mlp(2, 6, 2, 1);
  nn::Params p = nn::init_kaiming(spec, prng);
  for (auto& b : p.biases) b = random_tensor(b.shape(), prng, 0.1);
  const Tensor x = random_tensor({5, 2}, prng);

  auto norm_sum = [&](const nn::Params& q, nn::Params* grad) {
    ad::Tape t;
    const auto bound = nn::bind(t, q);
    const ad::NodeId xn = t.leaf(x);
    const ad::NodeId f = nn::scalar_output(t, nn::forward(spec, bound, xn, t));
    const ad::NodeId total = ad::sum(t, ad::input_gradient_norm(t, f, xn));
    if (grad) *grad = nn::collect(t, t.backward(total, bound.all()), q);
    return t.value(total).item();
  };
  nn::Params g;
  norm_sum(p, &g);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (std::size_t i = 0; i < p.weights[k].numel(); ++i) {
      nn::Params plus = p, minus = p;
      plus.weights[k][i] += h;
      minus.weights[k][i] -= h;
      const double fd = (norm_sum(plus, nullptr) - norm_sum(minus, nullptr)) / (2 * h);
      worst = std::max(worst, rel_err(g.weights[k][i], fd, 1e-6));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("piecewise-linear nets have a zero input Hessian") {
  Prng prng(4);
  for (auto act : {nn::Activation::relu, nn::Activation::leaky_relu}) {
    const auto spec = nn::NetworkSpec::mlp(3, 16, 3, 1, {act});
    nn::Params p = nn::init_kaiming(spec, prng);
    for (auto& b : p.biases) b = random_tensor(b.shape(), prng, 0.1);
    ad::Tape t;
    const auto bound = nn::bind(t, p);
    const ad::NodeId x = t.leaf(random_tensor({6, 3}, prng));
    const ad::NodeId f = nn::scalar_output(t, nn::forward(spec, bound, x, t));
    const ad::NodeId g = t.backward(ad::sum(t, f), x);
    // each row of the Hessian: d/dx of one input-gradient coordinate
    for (std::size_t j = 0; j < 3; ++j) {
      const ad::NodeId gj = ad::sum_rows(t, g);
      Tensor pick = Tensor::zeros({3});
      pick[j] = 1.0;
      const ad::NodeId s = ad::sum(t, ad::mul(t, gj, t.leaf(pick)));
      for (double v : t.value(t.backward(s, x)).data()) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  Prng prng(12);
  ad::Tape t;
  const ad::NodeId x = t.leaf(random_tensor({4}, prng));
  const ad::NodeId c = t.leaf(random_tensor({4}, prng));
  // each term reaches x along one path, so no reassociation is involved
  const ad::NodeId a = ad::sum(t, ad::mul(t, c, x));
  const ad::NodeId b = ad::sum(t, ad::tanh(t, x));
  const Tensor ga = t.value(t.backward(a, x));
  const Tensor gb = t.value(t.backward(b, x));
  CHECK(t.value(t.backward(ad::add(t, a, b), x)) == add(ga, gb));

  // x*x reaches x twice; the sum may reassociate by one rounding
  const ad::NodeId q = ad::sum(t, ad::mul(t, x, x));
  const Tensor gq = t.value(t.backward(q, x));
  const Tensor gqb = t.value(t.backward(ad::add(t, q, b), x));
  const Tensor expect = add(gq, gb);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(gqb[i] - expect[i]) <= 4e-16 * std::fabs(expect[i]));
}

TEST_CASE("backward w.r.t. an unrelated node gives exact zeros") {
  ad::Tape t;
  const ad::NodeId x = t.leaf(Tensor::vector({1, 2, 3}));
  const ad::NodeId unrelated = t.leaf(Tensor::matrix({{1, 2}, {3, 4}}));
  const ad::NodeId y = ad::sum(t, ad::mul(t, x, x));
  const Tensor g = t.value(t.backward(y, unrelated));
  CHECK(g.shape() == Shape{2, 2});
  for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("relu derivative at the kink is zero") {
  ad::Tape t;
  const ad::NodeId x = t.leaf(Tensor::vector({0.0, -0.0, 1.0}));
  const Tensor g = t.value(t.backward(ad::sum(t, ad::relu(t, x)), x));
  CHECK(g == Tensor::vector({0.0, 0.0, 1.0}));
}

TEST_CASE("reciprocal maps zero to zero") {
  ad::Tape t;
  const ad::NodeId x = t.leaf(Tensor::vector({0.0, 4.0}));
  CHECK(t.value(ad::reciprocal(t, x)) == Tensor::vector({0.0, 0.25}));
}

TEST_CASE("select_cols checks labels") {
  ad::Tape t;
  const ad::NodeId a = t.leaf(Tensor::matrix({{1, 2}, {3, 4}}));
  auto ok = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{1, 0});
  CHECK(t.value(ad::select_cols(t, a, ok)) == Tensor::vector({2, 3}));
  auto bad = std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{2, 0});
  CHECK_THROWS_AS(ad::select_cols(t, a, bad), ContractError);
}

}  // TEST_SUITE
