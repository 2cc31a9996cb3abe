#include <doctest.h>

#include <cmath>

#include "testing_util.hpp"
#include "vvmc/entropy.hpp"
#include "vvmc/model.hpp"
#include "vvmc/training.hpp"

using namespace vvmc;

TEST_SUITE("entropy") {

TEST_CASE("channel slice plan partitions evenly in order") {
  auto p = ChannelSlicePlan::even(192, 4);
  REQUIRE(p.ranges.size() == 4);
  int at = 0;
  for (auto [a, b] : p.ranges) {
    CHECK(a == at);
    CHECK(b - a == 48);
    at = b;
  }
  CHECK(at == 192);
  CHECK(p.group_of(0) == 0);
  CHECK(p.group_of(191) == 3);

  auto odd = ChannelSlicePlan::even(10, 3);  // 4,3,3
  CHECK(odd.ranges[0].second == 4);
  CHECK(odd.ranges[2].second == 10);
}

TEST_CASE("anchor mask parity") {
  Tensor m22 = anchor_mask(2, 2);
  CHECK(m22.at3(0, 0, 0) == 1.0);
  CHECK(m22.at3(0, 0, 1) == 0.0);
  CHECK(m22.at3(0, 1, 0) == 0.0);
  CHECK(m22.at3(0, 1, 1) == 1.0);

  Tensor m11 = anchor_mask(1, 1);
  CHECK(m11.at3(0, 0, 0) == 1.0);

  Tensor m46 = anchor_mask(4, 6);
  int anchors = 0;
  for (double v : m46.data) anchors += v == 1.0;
  CHECK(anchors == 12);
  CHECK(static_cast<int>(m46.numel()) - anchors == 12);
}

TEST_CASE("noise quantizer bounds, mean, determinism") {
  Rng rng(3);
  Tensor y = testing::random_tensor({4, 16, 16}, rng, 2.0);
  Var yv = make_leaf(y, false);

  Rng a(99), b(99);
  Var q1 = quantize_noise(yv, a);
  Var q2 = quantize_noise(yv, b);
  CHECK(q1->value.data == q2->value.data);  // seeded reproducibility

  double mean = 0;
  Rng big(17);
  Tensor wide({100000});
  Var wv = make_leaf(wide, false);
  Var q = quantize_noise(wv, big);
  for (std::size_t i = 0; i < q->value.numel(); ++i) {
    double d = q->value.data[i] - wide.data[i];
    CHECK(std::abs(d) <= 0.5);
    mean += d;
  }
  CHECK(std::abs(mean / 1e5) < 0.01);
}

TEST_CASE("eval quantizer formula and rounding rule") {
  Tensor y({1, 1, 3});
  y.data = {1.4, 0.2, -0.5};
  Tensor mu({1, 1, 3});
  mu.data = {0.2, 0.2, 0.0};
  auto q = quantize_eval(y, mu);
  CHECK(q.symbols[0] == 1);
  CHECK(q.yhat.data[0] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(q.symbols[1] == 0);
  CHECK(q.yhat.data[1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(q.symbols[2] == -1);  // round half away from zero
}

TEST_CASE("ste quantizer value and gradient routing") {
  Rng rng(5);
  Tensor y = testing::random_tensor({2, 4, 4}, rng, 3.0);
  Tensor mu = testing::random_tensor({2, 4, 4}, rng, 0.3);
  Var yv = make_leaf(y, true);
  Var q = quantize_ste(yv, mu);
  for (std::size_t i = 0; i < y.numel(); ++i)
    CHECK(q->value.data[i] ==
          doctest::Approx(std::round(y.data[i] - mu.data[i]) + mu.data[i])
              .epsilon(1e-12));
  backward(sum(q));
  for (double g : yv->grad.data) CHECK(g == 1.0);  // identity gradient
}

TEST_CASE("gaussian likelihood values") {
  // normal-CDF oracle: Phi(0.5) - Phi(-0.5)
  double oracle = 0.5 * std::erfc(-0.5 / std::sqrt(2.0)) -
                  0.5 * std::erfc(0.5 / std::sqrt(2.0));
  CHECK(gaussian_likelihood(0, 1.0) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(gaussian_likelihood(0, 1.0) == doctest::Approx(0.382925).epsilon(1e-5));

  // telescoping sum over +-20 sigma
  for (double sigma : {0.3, 1.0, 4.2}) {
    double total = 0;
    int lim = static_cast<int>(std::ceil(20 * sigma));
    for (int s = -lim; s <= lim; ++s) total += gaussian_likelihood_raw(s, sigma);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }

  // mass concentrates at the bound
  CHECK(gaussian_likelihood(0, kSigmaMin) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(gaussian_likelihood(0, 1e-5), std::invalid_argument);
}

TEST_CASE("gaussian bits gradcheck") {
  // keep probabilities well above the training floor so the surrogate is
  // smooth everywhere the finite differences probe
  Rng rng(7);
  auto f = [](std::vector<Var>& in) {
    Var sigma = add_scalar(softplus(in[1]), 0.5);
    return sum(gaussian_bits(in[0], sigma));
  };
  CHECK(testing::gradcheck(f, {testing::random_tensor({3, 4, 4}, rng, 0.8),
                               testing::random_tensor({3, 4, 4}, rng)}) < 1e-5);
}

TEST_CASE("build_cdf determinism and bounds") {
  CdfTable a = build_cdf(0.73), b = build_cdf(0.73);
  CHECK(a.cum == b.cum);
  CHECK(a.cum.back() == kCdfTotal);
  for (int i = 0; i < a.alphabet(); ++i) CHECK(a.freq(i) >= 1);

  CdfTable tiny = build_cdf(kSigmaMin);
  CHECK(tiny.freq(tiny.index_of(0)) >=
        kCdfTotal - static_cast<std::uint32_t>(tiny.alphabet()));

  CdfCache cache;
  const CdfTable* p1 = cache.get_gaussian(1.25);
  const CdfTable* p2 = cache.get_gaussian(1.25);
  CHECK(p1 == p2);
  CHECK(cache.size() == 1);
}

TEST_CASE("estimate_rate") {
  CHECK(estimate_rate(std::vector<double>(8, 0.5)) == doctest::Approx(8.0));
  CHECK(estimate_rate({1.0, 1.0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(estimate_rate({0.0}), std::invalid_argument);

  // estimate tracks the actual coder on random gaussian symbols
  Rng rng(11);
  std::vector<int> symbols;
  std::vector<const CdfTable*> tables;
  CdfCache cache;
  double est_bits = 0;
  for (int i = 0; i < 5000; ++i) {
    double sigma = std::exp(rng.uniform(std::log(0.2), std::log(8.0)));
    int s = static_cast<int>(std::round(rng.normal(0.0, sigma)));
    symbols.push_back(s);
    tables.push_back(cache.get_gaussian(sigma));
    est_bits += -std::log2(gaussian_likelihood(s, sigma));
  }
  auto bytes = rc_encode(symbols, tables);
  double actual = 8.0 * static_cast<double>(bytes.size());
  CHECK(actual <= est_bits * 1.02 + 64.0 * 8.0);
}

TEST_CASE("entropy parameter network shapes and sigma bound") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m = Model::init(cfg, 42);
  VarMap p = m.vars(false);
  Rng rng(13);
  int lh = 4, lw = 4, ck = cfg.group_channels();

  Var psi = make_const(testing::random_tensor({2 * cfg.latent_channels, lh, lw}, rng));
  Var lf = make_const(testing::random_tensor({cfg.aux_latent_channels, lh, lw}, rng));
  Var sp = m.zero_ctx(lh, lw);
  Var ch = m.zero_ctx(lh, lw);
  auto th = m.entropy_params(p, 0, sp, ch, lf, psi);
  CHECK(th.mu->value.shape == std::vector<int>{ck, lh, lw});
  CHECK(th.sigma->value.shape == std::vector<int>{ck, lh, lw});
  for (double s : th.sigma->value.data) CHECK(s >= kSigmaMin);

  // channel context: group 0 has no prior groups
  Var phi0 = m.channel_ctx(p, 0, make_const(Tensor({1, lh, lw})));
  for (double v : phi0->value.data) CHECK(v == 0.0);

  // determinism
  auto th2 = m.entropy_params(p, 0, sp, ch, lf, psi);
  CHECK(th.mu->value.data == th2.mu->value.data);

  // spatial context with zero input stays zero (bias initialized to zero)
  Var phi_sp = m.spatial_ctx(p, 1, make_const(Tensor({ck, lh, lw})));
  for (double v : phi_sp->value.data) CHECK(v == 0.0);
}

TEST_CASE("ablated variant drops the auxiliary prior but keeps shapes") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.use_auxiliary = false;
  Model m = Model::init(cfg, 42);
  VarMap p = m.vars(false);
  Rng rng(17);
  int lh = 4, lw = 4, ck = cfg.group_channels();
  Var psi = make_const(testing::random_tensor({2 * cfg.latent_channels, lh, lw}, rng));
  auto th = m.entropy_params(p, 0, m.zero_ctx(lh, lw), m.zero_ctx(lh, lw), Var{}, psi);
  CHECK(th.mu->value.shape == std::vector<int>{ck, lh, lw});
  for (const auto& [name, t] : m.params.tensors) {
    CHECK(name.rfind("fa.", 0) != 0);
    CHECK(name.rfind("fs.", 0) != 0);
  }
}

TEST_CASE("factorized prior: monotone cumulative, mass bounds") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m = Model::init(cfg, 1);
  auto probs = m.fp_symbol_probs(kDefaultTail);
  REQUIRE(static_cast<int>(probs.size()) == cfg.hyper_channels);
  for (const auto& row : probs) {
    double total = 0;
    for (double v : row) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total <= 1.0 + 1e-9);
  }
}

TEST_CASE("factorized prior overfits a known distribution") {
  // synthetic-distribution oracle: iid symbols from a discretized gaussian
  ModelConfig cfg = ModelConfig::tiny();
  Model m = Model::init(cfg, 5);
  const int n = cfg.hyper_channels;
  const double mean = 0.8, sigma = 2.2;

  double true_entropy = 0;
  for (int s = -40; s <= 40; ++s) {
    double p = gaussian_likelihood_raw(s - mean, sigma);
    if (p > 0) true_entropy += -p * std::log2(p);
  }

  Rng rng(23);
  Adam opt(5e-2);
  const int cols = 512;
  for (int step = 0; step < 200; ++step) {
    Tensor batch({n, cols});
    for (double& v : batch.data) v = std::round(rng.normal(mean, sigma));
    VarMap p = VarMap::from(m.params, true);
    Var z = make_leaf(batch, false);
    Var noisy = quantize_noise(z, rng);
    Var bits = m.fp_bits(p, noisy);
    backward(bits);
    opt.step(m.params, p);
  }

  auto probs = m.fp_symbol_probs(kDefaultTail);
  double ce = 0;
  int count = 0;
  for (int i = 0; i < 4000; ++i) {
    int s = static_cast<int>(std::round(rng.normal(mean, sigma)));
    double p = std::max(probs[i % n][s + kDefaultTail], 1.0 / 65536.0);
    ce += -std::log2(p);
    ++count;
  }
  ce /= count;
  CHECK(ce < true_entropy * 1.05 + 0.05);
}

}  // TEST_SUITE
