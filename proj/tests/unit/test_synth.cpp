#include <doctest.h>

#include <cmath>
#include <numeric>
#include <string>

#include "causalmatch/effects.hpp"
#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"
#include "causalmatch/synth.hpp"

using namespace causalmatch;

namespace {

SupportPoint point(std::vector<int> x, double prob, double p_treat, std::vector<OutcomeCell> cells) {
  return {std::move(x), prob, p_treat, std::move(cells)};
}

double mean_diff(const PotentialFrame& pf) {
  double s = 0.0;
  for (std::size_t i = 0; i < pf.n(); ++i) s += pf.y1[i] - pf.y0[i];
  return s / static_cast<double>(pf.n());
}

}  // namespace

TEST_CASE("generated frames satisfy consistency and are seed-deterministic") {
  const auto spec = ScmSpec::default_spec();
  const auto a = generate(spec, 500, 1);
  const auto b = generate(spec, 500, 1);
  CHECK_NOTHROW(a.validate());
  CHECK(a.frame.y == b.frame.y);
  CHECK(a.y0 == b.y0);
  for (std::size_t i = 0; i < a.n(); ++i) {
    CHECK(a.frame.y[i] == (a.frame.a[i] ? a.y1[i] : a.y0[i]));
  }
  CHECK(a.frame.confounder_names == std::vector<std::string>{"x1", "x2", "x3"});
}

TEST_CASE("zero effect with shared noise is exact") {
  auto spec = ScmSpec::default_spec();
  spec.tau = 0.0;
  spec.interactions = {0.0, 0.0, 0.0};
  const auto pf = generate(spec, 1000, 2);
  CHECK(mean_diff(pf) == 0.0);
  CHECK(analytic_effects(spec).ate == 0.0);
}

TEST_CASE("randomised assignment leaves the naive contrast unbiased") {
  auto spec = ScmSpec::default_spec();
  spec.gamma = {0.0, 0.0, 0.0, 0.0};
  const auto pf = generate(spec, 20000, 3);
  const auto naive = diff_in_means(pf.frame);
  CHECK(std::abs(naive.estimate - analytic_effects(spec).ate) < 4.0 * naive.se);
}

TEST_CASE("sample effects match the analytic values") {
  const auto spec = ScmSpec::default_spec();
  const auto pf = generate(spec, 5000, 4);
  const auto truth = analytic_effects(spec);
  double ss = 0.0;
  const double m = mean_diff(pf);
  for (std::size_t i = 0; i < pf.n(); ++i) ss += std::pow(pf.y1[i] - pf.y0[i] - m, 2);
  const double mc_se = std::sqrt(ss / (pf.n() - 1.0) / pf.n());
  CHECK(std::abs(m - truth.ate) < 4.0 * mc_se);
  CHECK(truth.ate == doctest::Approx(spec.tau));
}

TEST_CASE("analytic moments agree with a large sample") {
  auto spec = ScmSpec::default_spec();
  spec.x_mean = {0.5, -1.0, 0.0};
  spec.x_sd = {1.0, 2.0, 0.5};
  spec.gamma = {0.2, 0.6, -0.3, 0.8};
  const auto mom = analytic_moments(spec);
  const auto eff = analytic_effects(spec);
  const auto pf = generate(spec, 10000, 5);
  const double n = 10000.0;
  const double pi_hat = static_cast<double>(pf.frame.n_treated()) / n;
  CHECK(std::abs(pi_hat - mom.pi) < 4.0 * std::sqrt(mom.pi * (1.0 - mom.pi) / n));
  const auto te = true_effects(pf);
  CHECK(std::abs(te.att - eff.att) < 0.1);
  CHECK(std::abs(te.atc - eff.atc) < 0.1);
  const auto x2 = pf.frame.column("x2");
  double sum = 0.0;
  for (std::size_t i = 0; i < x2.size(); ++i) sum += pf.frame.a[i] ? x2[i] : 0.0;
  CHECK(std::abs(sum / static_cast<double>(pf.frame.n_treated()) - mom.mean_treated[1]) < 0.1);
  CHECK(eff.pi == mom.pi);
  CHECK(eff.ate == doctest::Approx(eff.pi * eff.att + (1.0 - eff.pi) * eff.atc).epsilon(1e-14));
}

TEST_CASE("true effects") {
  const auto shift = make_potential_frame({1, 0, 1, 0}, {0, 1, 5, 2}, {3, 4, 8, 5});
  const auto e = true_effects(shift);
  CHECK(e.ate == 3.0);
  CHECK(e.att == 3.0);
  CHECK(e.atc == 3.0);

  const auto table = make_potential_frame({0, 1, 0, 1}, {0, 0, 1, 1}, {1, 2, 2, 3});
  const auto t = true_effects(table);
  CHECK(t.att == 2.0);
  CHECK(t.atc == 1.0);
  CHECK(t.pi == 0.5);

  CHECK_THROWS_AS(true_effects(make_potential_frame({1, 1, 1, 1}, {0, 1, 2, 3}, {1, 2, 3, 4})), Error);
}

TEST_CASE("decomposition agrees with true effects on random frames") {
  Rng rng(6);
  for (int rep = 0; rep < 200; ++rep) {
    const auto n = 4 + rng.uniform_index(17);
    std::vector<int> a(n);
    std::vector<double> y0(n), y1(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = i < 2 ? static_cast<int>(i) : (rng.bernoulli(0.5) ? 1 : 0);
      y0[i] = rng.normal();
      y1[i] = y0[i] + rng.normal();
    }
    const auto pf = make_potential_frame(a, y0, y1);
    const auto d = decompose(pf);
    const auto t = true_effects(pf);
    CHECK(d.ate == doctest::Approx(t.ate).epsilon(1e-14));
    CHECK(d.att == doctest::Approx(t.att).epsilon(1e-14));
    CHECK(std::abs(d.naive - (t.ate + d.selection_bias_term + (1.0 - t.pi) * (t.att - t.atc))) < 1e-12);
  }
}

TEST_CASE("balancing property on hand-built models") {
  SUBCASE("constant propensity") {
    DiscreteModel dm;
    for (int i = 0; i < 4; ++i) dm.support.push_back(point({i / 2, i % 2}, 0.25, 0.5, {{0, 1, 1.0, {}}}));
    const auto r = check_balancing_property(dm);
    CHECK(r.strata == 1);
    CHECK(r.max_violation <= 1e-12);
  }
  SUBCASE("shared score with different support probabilities") {
    DiscreteModel dm;
    dm.support = {point({0, 0}, 0.1, 0.3, {{0, 1, 1.0, {}}}), point({0, 1}, 0.4, 0.3, {{0, 1, 1.0, {}}}),
                  point({1, 0}, 0.2, 0.7, {{0, 1, 1.0, {}}}), point({1, 1}, 0.3, 0.9, {{0, 1, 1.0, {}}})};
    const auto r = check_balancing_property(dm);
    CHECK(r.strata == 3);
    CHECK(r.max_violation <= 1e-12);
    // Grouping by x1 alone mixes propensities 0.3, 0.3 with 0.7, 0.9 and breaks balance.
    const std::vector<double> coarse{0, 0, 1, 1};
    CHECK(check_balancing_property(dm, coarse).max_violation > 0.01);
  }
  SUBCASE("distinct scores are singletons") {
    DiscreteModel dm;
    dm.support = {point({0, 0}, 0.25, 0.1, {{0, 1, 1.0, {}}}), point({0, 1}, 0.25, 0.2, {{0, 1, 1.0, {}}}),
                  point({1, 0}, 0.25, 0.3, {{0, 1, 1.0, {}}}), point({1, 1}, 0.25, 0.4, {{0, 1, 1.0, {}}})};
    const auto r = check_balancing_property(dm);
    CHECK(r.strata == 4);
    CHECK(r.max_violation == 0.0);
  }
  SUBCASE("deterministic stratum excluded with a note") {
    DiscreteModel dm;
    dm.support = {point({0, 0}, 0.5, 1.0, {{0, 1, 1.0, {}}}), point({1, 1}, 0.5, 0.4, {{0, 1, 1.0, {}}})};
    const auto r = check_balancing_property(dm);
    CHECK(r.excluded_strata == 1);
    CHECK(r.notes.size() == 1);
  }
}

TEST_CASE("outcome independence") {
  SUBCASE("deterministic outcomes") {
    DiscreteModel dm;
    dm.support = {point({0}, 0.5, 0.3, {{1, 2, 1.0, {}}}), point({1}, 0.5, 0.6, {{3, 5, 1.0, {}}})};
    CHECK(check_outcome_independence(dm).max_violation <= 1e-12);
  }
  SUBCASE("stochastic outcome tables with a shared score") {
    DiscreteModel dm;
    dm.support = {point({0}, 0.4, 0.3, {{0, 1, 0.5, {}}, {1, 1, 0.5, {}}}),
                  point({1}, 0.6, 0.3, {{0, 1, 0.2, {}}, {2, 4, 0.8, {}}})};
    CHECK(check_outcome_independence(dm).max_violation <= 1e-12);
  }
  SUBCASE("treatment driven by the potential outcomes") {
    DiscreteModel dm;
    dm.support = {point({0}, 1.0, 0.5, {{0, 1, 0.5, 0.2}, {1, 3, 0.5, 0.8}})};
    CHECK(check_outcome_independence(dm).max_violation > 0.01);
  }
  SUBCASE("random families") {
    Rng rng(7);
    for (int m = 0; m < 25; ++m) {
      const auto dm = random_discrete_model(rng, 2);
      CHECK(check_balancing_property(dm).max_violation <= 1e-12);
      CHECK(check_outcome_independence(dm).max_violation <= 1e-12);
      CHECK(check_outcome_independence(unignorable_discrete_model(rng, 2)).max_violation > 0.01);
    }
  }
}

TEST_CASE("spec json") {
  const auto spec = ScmSpec::default_spec();
  const auto again = ScmSpec::from_json(spec.to_json());
  CHECK(again.to_json() == spec.to_json());
  CHECK(again.gamma == spec.gamma);

  try {
    ScmSpec::from_json("{\n  \"k\": 2,\n  \"tau\": ,\n}");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  try {
    ScmSpec::from_json(R"({"k": 2, "gamma": [0, 1]})");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  CHECK_THROWS_AS(ScmSpec::from_json(R"({"k": 1, "colour": 3})"), Error);
  CHECK_THROWS_AS(ScmSpec::from_json(R"({"k": 1, "noise_sd": -1})"), Error);
}
