#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "crowdlab/bounds.hpp"
#include "crowdlab/montecarlo.hpp"
#include "test_support.hpp"

using namespace crowdlab;
using Catch::Approx;

namespace {

OneCoinParams one_coin(std::vector<double> w, double pi = 0.5, double q = 1.0) {
  return OneCoinParams(std::move(w), pi, SamplingDesign::constant(q));
}

}  // namespace

TEST_CASE("phi") {
  CHECK(phi(0.0) == 1.0);
  CHECK(phi(2.0) == Approx(std::exp(-2.0)).epsilon(1e-14));
  for (double x : {0.3, 1.7, 4.0}) CHECK(phi(x) == phi(-x));
}

TEST_CASE("Bernoulli KL divergence") {
  CHECK(kl_bernoulli(0.5, 0.5) == 0.0);
  CHECK(kl_bernoulli(0.2, 0.1) ==
        Approx(0.2 * std::log(2.0) + 0.8 * std::log(8.0 / 9.0)).epsilon(1e-13));
  SECTION("positive whenever arguments differ, and above the Pinsker bound") {
    for (double x = 0.05; x < 1.0; x += 0.1) {
      for (double y = 0.05; y < 1.0; y += 0.1) {
        const double d = kl_bernoulli(x, y);
        if (x == y) continue;
        CHECK(d > 0.0);
        CHECK(d >= 2.0 * (x - y) * (x - y) - 1e-12);
      }
    }
  }
  SECTION("boundary arguments are rejected") {
    CHECK_THROWS_AS(kl_bernoulli(0.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(kl_bernoulli(1.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(kl_bernoulli(0.5, 0.0), std::domain_error);
    CHECK_THROWS_AS(kl_bernoulli(0.5, 1.0), std::domain_error);
  }
}

TEST_CASE("t statistics") {
  SECTION("perfect workers, full sampling") {
    auto t = t_stats(majority_rule(3), to_dawid_skene(one_coin({1.0, 1.0, 1.0})));
    CHECK(t.t1 == Approx(std::sqrt(3.0)).margin(1e-4));  // clamping nudges 1.0 inward
    CHECK(t.t2 == Approx(std::sqrt(3.0)).margin(1e-4));
  }
  SECTION("random-guessing crowd has t1 = t2 = 0") {
    auto t = t_stats(majority_rule(4), to_dawid_skene(one_coin({0.5, 0.5, 0.5, 0.5}, 0.5, 0.7)));
    CHECK(t.t1 == 0.0);
    CHECK(t.t2 == 0.0);
  }
  SECTION("MV one-coin constant q collapses to 2 q sqrt(M) (wbar - 1/2)") {
    rng::Engine eng(40);
    for (int trial = 0; trial < 10; ++trial) {
      const int m = 2 + int(eng.below(8));
      std::vector<double> w;
      double sum = 0;
      for (int i = 0; i < m; ++i) {
        w.push_back(0.1 + 0.8 * eng.uniform());
        sum += w.back();
      }
      const double q = 0.2 + 0.8 * eng.uniform();
      const double wbar = sum / m;
      auto t = t_stats(majority_rule(m), to_dawid_skene(one_coin(w, 0.5, q)));
      CHECK(t.t1 == Approx(2.0 * q * std::sqrt(double(m)) * (wbar - 0.5)).epsilon(1e-12));
      CHECK(t.t2 == Approx(t.t1).epsilon(1e-12));
    }
  }
  SECTION("all-zero weights are rejected") {
    CHECK_THROWS_AS(t_stats(HyperplaneRule{{0.0, 0.0}, 0.0},
                            to_dawid_skene(one_coin({0.6, 0.6}))),
                    std::invalid_argument);
  }
}

TEST_CASE("one-coin t statistics") {
  SECTION("zero shift agrees with the Dawid-Skene statistics") {
    rng::Engine eng(41);
    for (int trial = 0; trial < 10; ++trial) {
      auto gen = crowdlab::testing::random_one_coin(eng, 6, 10);
      OneCoinParams p(*gen.accuracies, gen.prior, gen.sampling);
      HyperplaneRule rule;
      for (int i = 0; i < gen.num_workers; ++i) rule.weights.push_back(eng.uniform() + 0.1);
      rule.shift = 0.0;
      auto a = t_stats_onecoin(rule, p);
      auto b = t_stats(rule, to_dawid_skene(p));
      CHECK(a.t1 == Approx(b.t1).margin(1e-14));
      CHECK(a.t2 == Approx(b.t2).margin(1e-14));
    }
  }
  SECTION("hand value") {
    auto t = t_stats_onecoin(HyperplaneRule{{1, 1}, 0}, one_coin({0.8, 0.7}));
    CHECK(t.t1 == Approx((0.6 + 0.4) / std::sqrt(2.0)).epsilon(1e-12));
  }
  SECTION("growing |a| shrinks t1 and grows t2") {
    OneCoinParams p = one_coin({0.8, 0.7}, 0.3, 0.9);
    double prev_t1 = std::numeric_limits<double>::infinity();
    double prev_t2 = -prev_t1;
    for (double a : {0.0, 0.5, -1.0, 2.0}) {
      auto t = t_stats_onecoin(HyperplaneRule{{1, 1}, a}, p);
      if (std::abs(a) > 0) {
        CHECK(t.t1 < prev_t1);
        CHECK(t.t2 > prev_t2);
      }
      prev_t1 = t.t1;
      prev_t2 = t.t2;
    }
  }
}

TEST_CASE("dispersion statistics") {
  SECTION("uniform weights: c_H = 1/sqrt(M)") {
    auto d = dispersion_stats(majority_rule(4), to_dawid_skene(one_coin({0.7, 0.7, 0.7, 0.7})));
    CHECK(d.c_h == Approx(0.5).epsilon(1e-12));
  }
  SECTION("one-coin simplified variance equals q under constant sampling") {
    HyperplaneRule rule{{0.3, -1.2, 0.8}, 0.0};
    CHECK(sigma2_onecoin(rule, SamplingDesign::constant(0.45)) == Approx(0.45).epsilon(1e-12));
  }
  SECTION("perfect workers at q = 1 have (near) zero variance") {
    auto d = dispersion_stats(majority_rule(3), to_dawid_skene(one_coin({1.0, 1.0, 1.0})));
    CHECK(d.sigma2 >= 0.0);
    CHECK(d.sigma2 < 1e-5);
  }
}

TEST_CASE("mean error bounds") {
  SECTION("t1 = 0 gives the vacuous upper bound 1") {
    BoundReport r = mean_error_bounds(majority_rule(3), to_dawid_skene(one_coin({0.5, 0.5, 0.5})));
    REQUIRE(r.t1_nonneg);
    CHECK(r.hoeffding_upper == 1.0);
    CHECK(r.bernstein_upper == 1.0);
    CHECK(r.combined_upper == 1.0);
    REQUIRE(r.t2_nonpos);
    CHECK(r.combined_lower == 0.0);
  }
  SECTION("three mediocre workers: Hoeffding dominates the exact error") {
    BoundReport r = mean_error_bounds(majority_rule(3), to_dawid_skene(one_coin({0.6, 0.6, 0.6})));
    CHECK(r.t1 == Approx(0.6 / std::sqrt(3.0)).epsilon(1e-12));
    REQUIRE(r.hoeffding_upper);
    CHECK(*r.hoeffding_upper == Approx(std::exp(-0.06)).epsilon(1e-12));
    // exact mean error by binomial enumeration: 3 * 0.4^2 * 0.6 + 0.4^3
    CHECK(*r.combined_upper >= 0.352);
    REQUIRE(r.combined_upper);
    CHECK(*r.combined_upper == std::min(*r.hoeffding_upper, *r.bernstein_upper));
  }
  SECTION("adversarial crowd produces a valid lower bound") {
    DawidSkeneParams p = to_dawid_skene(one_coin({0.3, 0.3, 0.3}));
    BoundReport r = mean_error_bounds(majority_rule(3), p);
    REQUIRE(r.t2_nonpos);
    CHECK(r.t2 < 0.0);
    REQUIRE(r.combined_lower);
    const double exact = exact_mean_error(majority_rule(3), p);
    CHECK(*r.combined_lower <= exact + 1e-12);
    CHECK_FALSE(r.t1_nonneg);
    CHECK_FALSE(r.combined_upper.has_value());
  }
}

TEST_CASE("closed-form MV bound") {
  SECTION("hand value at the simulation design point") {
    auto b = mv_mean_bound(11, 0.8, 0.7);
    CHECK(b.is_upper);
    CHECK(b.value == Approx(std::exp(-2.0 * 11 * 0.64 * 0.04)).epsilon(1e-12));
    CHECK(b.value == Approx(0.5694).margin(5e-4));
  }
  SECTION("vacuous at wbar = 1/2") {
    auto b = mv_mean_bound(7, 0.9, 0.5);
    CHECK(b.value == 1.0);
    CHECK(b.is_upper);
  }
  SECTION("lower branch below 1/2") {
    auto b = mv_mean_bound(7, 0.9, 0.3);
    CHECK_FALSE(b.is_upper);
    CHECK(b.value == Approx(1.0 - std::exp(-2.0 * 7 * 0.81 * 0.04)).epsilon(1e-12));
  }
  SECTION("matches exp(-t1^2/2) through the one-coin statistics") {
    rng::Engine eng(42);
    for (int trial = 0; trial < 10; ++trial) {
      const int m = 1 + int(eng.below(9));
      const double q = 0.2 + 0.8 * eng.uniform();
      std::vector<double> w(m, 0.0);
      double sum = 0;
      for (auto& x : w) {
        x = 0.5 + 0.45 * eng.uniform();
        sum += x;
      }
      const double wbar = sum / m;
      auto t = t_stats_onecoin(majority_rule(m), one_coin(w, 0.5, q));
      CHECK(mv_mean_bound(m, q, wbar).value == Approx(std::exp(-0.5 * t.t1 * t.t1)).epsilon(1e-12));
      // Corollary-style consistency: psi = phi(t1).
      CHECK(std::exp(-2.0 * m * q * q * (wbar - 0.5) * (wbar - 0.5)) ==
            Approx(phi(t.t1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("high-probability bound") {
  const double t1 = std::sqrt(-2.0 * std::log(0.1));  // phi(t1) = 0.1
  SECTION("hand value") {
    const double expected = 1.0 - std::exp(-100.0 * kl_bernoulli(0.2, 0.1));
    CHECK(high_prob_bound(0.2, t1, 100) == Approx(expected).epsilon(1e-12));
    CHECK(high_prob_bound(0.2, t1, 100) == Approx(0.9882).margin(5e-4));
  }
  SECTION("vacuous as eps approaches phi(t1)") {
    CHECK(high_prob_bound(0.1 + 1e-9, t1, 100) < 1e-10);
  }
  SECTION("doubling N squares the residual") {
    const double b1 = high_prob_bound(0.2, t1, 100);
    const double b2 = high_prob_bound(0.2, t1, 200);
    CHECK(1.0 - b2 == Approx((1.0 - b1) * (1.0 - b1)).epsilon(1e-12));
  }
  SECTION("inapplicable region is an error") {
    CHECK_THROWS_AS(high_prob_bound(0.05, t1, 100), std::domain_error);
    CHECK_THROWS_AS(high_prob_bound(0.1, t1, 100), std::domain_error);
    CHECK_THROWS_AS(high_prob_bound(0.2, -0.5, 100), std::domain_error);
  }
}

namespace {

// Independent inversion oracle: coarse forward scan, then bisection on the
// scanned bracket, all through long doubles.
double min_t1_oracle(double eps, double delta, int n) {
  auto value = [&](long double t) {
    const long double ph = std::exp(-0.5L * t * t);
    if (!(ph < eps)) return 1.0L;  // invalid: report a value above delta
    const long double d = eps * std::log((long double)eps / ph) +
                          (1.0L - eps) * std::log((1.0L - eps) / (1.0L - ph));
    return std::exp(-(long double)n * d);
  };
  long double lo = 0.0L, hi = 0.0L;
  for (long double t = 0.0L; t < 80.0L; t += 1e-3L) {
    if (value(t) <= delta) {
      hi = t;
      lo = t - 1e-3L;
      break;
    }
  }
  for (int k = 0; k < 200; ++k) {
    const long double mid = 0.5L * (lo + hi);
    if (value(mid) <= delta)
      hi = mid;
    else
      lo = mid;
  }
  return static_cast<double>(hi);
}

}  // namespace

TEST_CASE("min_t1_for inverts the high-probability bound") {
  SECTION("round trip reaches the requested confidence") {
    for (double eps : {0.1, 0.3}) {
      for (double delta : {0.01, 0.2}) {
        for (int n : {40, 500}) {
          const double t = min_t1_for(eps, delta, n);
          CHECK(high_prob_bound(eps, t, n) >= 1.0 - delta - 1e-6);
        }
      }
    }
  }
  SECTION("more items need a smaller t1") {
    CHECK(min_t1_for(0.1, 0.05, 600) < min_t1_for(0.1, 0.05, 300));
    CHECK(min_t1_for(0.1, 0.05, 300) < min_t1_for(0.1, 0.05, 100));
  }
  SECTION("agrees with an independent scan-and-bisect oracle") {
    const double lib = min_t1_for(0.1, 0.05, 300);
    const double oracle = min_t1_oracle(0.1, 0.05, 300);
    CHECK(lib == Approx(oracle).margin(1e-6));
    // Frozen regression value from the oracle.
    CHECK(lib == Approx(2.3518846).margin(1e-4));
  }
  SECTION("domain checks") {
    CHECK_THROWS_AS(min_t1_for(0.0, 0.05, 100), std::domain_error);
    CHECK_THROWS_AS(min_t1_for(0.1, 1.0, 100), std::domain_error);
  }
}

TEST_CASE("one-step WMV applicability condition") {
  SECTION("threshold value at M = 15") {
    const double thr = oswmv_wbar_threshold(15);
    CHECK(thr == Approx(0.5 + 1.0 / 15 + std::sqrt(14.0 * std::log(2.0) / 450.0)).epsilon(1e-12));
    CHECK(thr == Approx(0.71352).margin(1e-5));
    CHECK(oswmv_condition(15, 0.72));
    CHECK_FALSE(oswmv_condition(15, 0.71));
  }
  SECTION("random guessing never qualifies") {
    for (int m = 2; m <= 50; m += 7) CHECK_FALSE(oswmv_condition(m, 0.5));
  }
  SECTION("threshold decreases toward 1/2") {
    double prev = oswmv_wbar_threshold(2);
    for (int m : {3, 5, 10, 100, 10000}) {
      const double thr = oswmv_wbar_threshold(m);
      CHECK(thr < prev);
      CHECK(thr > 0.5);
      prev = thr;
    }
    CHECK(oswmv_wbar_threshold(100000000) == Approx(0.5).margin(1e-3));
  }
}

TEST_CASE("rho_bar") {
  CHECK(rho_bar({0.5, 0.5, 0.5}) == 0.0);
  CHECK(rho_bar({1.0, 1.0}) == Approx(0.5).epsilon(1e-12));
  CHECK(rho_bar({0.9, 0.6, 0.5}) == Approx(std::sqrt(0.17 / 3.0)).epsilon(1e-12));
  CHECK(rho_bar({0.9, 0.6, 0.5}) == Approx(0.23805).margin(1e-5));
}

TEST_CASE("bound statistics are scale invariant") {
  rng::Engine eng(4242);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 2 + int(eng.below(6));
    std::vector<double> w;
    for (int i = 0; i < m; ++i) w.push_back(0.2 + 0.7 * eng.uniform());
    DawidSkeneParams p = to_dawid_skene(one_coin(w, 0.4, 0.8));
    HyperplaneRule rule;
    for (int i = 0; i < m; ++i) rule.weights.push_back(eng.uniform() * 2 - 1);
    rule.shift = eng.uniform() - 0.5;
    BoundReport base = mean_error_bounds(rule, p);
    for (double c : {0.125, 5.5, 4096.0}) {
      HyperplaneRule scaled{rule.weights, c * rule.shift};
      for (double& v : scaled.weights) v *= c;
      BoundReport other = mean_error_bounds(scaled, p);
      CHECK(other.t1 == Approx(base.t1).epsilon(1e-12).margin(1e-300));
      CHECK(other.t2 == Approx(base.t2).epsilon(1e-12).margin(1e-300));
      CHECK(other.c_h == Approx(base.c_h).epsilon(1e-12));
      CHECK(other.sigma2 == Approx(base.sigma2).epsilon(1e-12));
      CHECK(other.combined_upper.has_value() == base.combined_upper.has_value());
      if (base.combined_upper)
        CHECK(*other.combined_upper == Approx(*base.combined_upper).epsilon(1e-12));
      CHECK(other.combined_lower.has_value() == base.combined_lower.has_value());
      if (base.combined_lower)
        CHECK(*other.combined_lower == Approx(*base.combined_lower).epsilon(1e-12).margin(1e-300));
    }
  }
}

TEST_CASE("plugin bound machinery") {
  SECTION("oracle report evaluates the MAP rule at its own parameters") {
    OneCoinParams p = one_coin({0.8, 0.7, 0.9}, 0.4, 0.8);
    BoundReport direct = mean_error_bounds(oracle_map_rule(p), to_dawid_skene(p));
    BoundReport report = oracle_map_report(p);
    CHECK(report.t1 == direct.t1);
    CHECK(report.combined_upper == direct.combined_upper);
    CHECK_FALSE(report.estimated);
  }
  SECTION("estimates against a perfect reference recover the empirical rates") {
    // Worker 0 always right, worker 1 always wrong, on 4 gold items.
    std::vector<std::int8_t> gold = {1, -1, 1, -1};
    std::vector<LabelMatrix::Entry> entries;
    for (int j = 0; j < 4; ++j) {
      entries.push_back({0, j, gold[j]});
      entries.push_back({1, j, static_cast<std::int8_t>(-gold[j])});
    }
    LabelMatrix m(2, 4, std::move(entries));
    OneCoinParams est = estimate_one_coin_params(m, GoldLabels::full(gold));
    CHECK(est.accuracy[0] == 1.0 - kProbClamp);  // clamped
    CHECK(est.accuracy[1] == kProbClamp);
    CHECK(est.prior == 0.5);
    CHECK(est.sampling.prob(0, 0) == 1.0);

    BoundReport r = plugin_report(m, GoldLabels::full(gold), ModelKind::OneCoin);
    CHECK(r.estimated);
    REQUIRE(r.combined_upper);
  }
  SECTION("a prediction works as the reference too") {
    rng::Engine eng(321);
    auto gen = crowdlab::testing::random_one_coin(eng, 5, 40, 0.6, 0.95);
    auto data = generate(gen);
    Prediction mv = predict(majority_rule(gen.num_workers), data.labels);
    OneCoinParams est = estimate_one_coin_params(data.labels, mv);
    auto acc = estimate_accuracies(data.labels, mv);
    for (int i = 0; i < gen.num_workers; ++i)
      CHECK(est.accuracy[i] == clamp_prob(acc[i]));
    BoundReport r = plugin_report(data.labels, mv, ModelKind::OneCoin);
    CHECK(r.estimated);
  }
  SECTION("Dawid-Skene estimation splits the classes") {
    // Worker perfect on positives, always wrong on negatives.
    std::vector<std::int8_t> gold = {1, 1, -1, -1};
    std::vector<LabelMatrix::Entry> entries;
    for (int j = 0; j < 4; ++j) entries.push_back({0, j, 1});
    LabelMatrix m(1, 4, std::move(entries));
    DawidSkeneParams est = estimate_dawid_skene_params(m, GoldLabels::full(gold));
    CHECK(est.sensitivity[0] == 1.0 - kProbClamp);
    CHECK(est.specificity[0] == kProbClamp);
    // The symmetric-slope MAP rule degrades to (near) zero weight for this
    // worker: the two clamped log-odds cancel up to rounding.
    HyperplaneRule rule = map_rule_ds(est);
    CHECK(rule.weights[0] == Approx(0.0).margin(1e-9));
  }
}
