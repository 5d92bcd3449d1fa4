#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "causalmatch/effects.hpp"
#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"
#include "../fixtures.hpp"
#include "../oracles.hpp"

using namespace causalmatch;

namespace {

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

CausalFrame two_groups(const std::vector<double>& treated, const std::vector<double>& control) {
  std::vector<int> a;
  std::vector<double> y, t;
  for (double v : treated) {
    a.push_back(1);
    y.push_back(v);
  }
  for (double v : control) {
    a.push_back(0);
    y.push_back(v);
  }
  t.assign(a.begin(), a.end());
  std::vector<double> x(y.size());
  std::iota(x.begin(), x.end(), 0.0);
  return fixtures::frame(a, t, y, column(x));
}

ScmSpec no_interaction_spec() {
  auto s = ScmSpec::default_spec();
  s.interactions = {0.0, 0.0, 0.0};
  return s;
}

WeightSet random_weights(Rng& rng, std::size_t n) {
  WeightSet ws;
  ws.w.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) ws.w(static_cast<Eigen::Index>(i)) = 0.2 + 3.0 * rng.uniform();
  return ws;
}

// Average over units of the uncentred outcome model's prediction at a=1 minus a=0,
// with the uncentred model fitted by the extended-precision normal equations.
double per_unit_gcomp(const CausalFrame& f, const Eigen::VectorXd& w) {
  const auto k = f.k();
  oracle::Matrix rows;
  std::vector<double> wv;
  for (std::size_t i = 0; i < f.n(); ++i) {
    std::vector<double> r{1.0, static_cast<double>(f.a[i])};
    for (std::size_t j = 0; j < k; ++j) r.push_back(f.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    for (std::size_t j = 0; j < k; ++j) r.push_back(f.a[i] * f.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    rows.push_back(r);
    wv.push_back(w(static_cast<Eigen::Index>(i)));
  }
  const auto b = oracle::normal_equations(rows, f.y, wv);
  double total = 0.0;
  for (std::size_t i = 0; i < f.n(); ++i) {
    double m1 = b[0] + b[1], m0 = b[0];
    for (std::size_t j = 0; j < k; ++j) {
      const double xij = f.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      m1 += b[2 + j] * xij + b[2 + k + j] * xij;
      m0 += b[2 + j] * xij;
    }
    total += m1 - m0;
  }
  return total / static_cast<double>(f.n());
}

}  // namespace

TEST_CASE("difference in means") {
  SUBCASE("identical groups") {
    const auto e = diff_in_means(two_groups({1, 2, 3}, {1, 2, 3}));
    CHECK(e.estimate == 0.0);
    CHECK(e.ci_low == doctest::Approx(-e.ci_high).epsilon(1e-15));
  }
  SUBCASE("Welch by hand") {
    // Variances 2 and 2, n 2 and 2: se = sqrt(2/2 + 2/2), df = (1 + 1)^2 / (1 + 1) = 2.
    const auto e = diff_in_means(two_groups({3, 5}, {1, 3}));
    CHECK(e.estimate == 2.0);
    CHECK(e.se == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(e.df == doctest::Approx(2.0).epsilon(1e-15));
    // Student t with 2 df has the closed-form quantile (2p - 1) * sqrt(2 / (4p(1 - p))).
    const double t = 0.95 * std::sqrt(2.0 / (4.0 * 0.975 * 0.025));
    CHECK(t == doctest::Approx(4.3026527297494639).epsilon(1e-15));
    CHECK(e.ci_low == doctest::Approx(-4.0848698445933111).epsilon(1e-13));
    CHECK(e.ci_high == doctest::Approx(8.0848698445933111).epsilon(1e-13));
    CHECK(e.n_used == 4);
  }
  SUBCASE("singleton group") {
    try {
      diff_in_means(two_groups({3}, {1, 3, 4}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::variance);
    }
  }
  SUBCASE("wider with a larger variance ratio") {
    double last = 0.0;
    for (double spread : {1.0, 2.0, 4.0, 8.0}) {
      const auto e = diff_in_means(two_groups({10 - spread, 10, 10 + spread, 10}, {0, 1, 2, 1}));
      CHECK(e.ci_high - e.ci_low > last);
      last = e.ci_high - e.ci_low;
    }
  }
}

TEST_CASE("outcome model recovers a constant effect") {
  const auto pf = generate(no_interaction_spec(), 5000, 314);
  const auto model = fit_outcome_model(pf.frame);
  const auto& fit = model.fit;
  CHECK(std::abs(fit.coefficients(model.treatment_index()) - 2.0) < 3.0 * fit.se(model.treatment_index()));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(fit.coefficients(model.interaction_index(j))) < 3.0 * fit.se(model.interaction_index(j)));
  }
  CHECK(fit.labels[model.interaction_index(0)] == "a:x1");
  const auto e = gcomp_ate(model, pf.frame);
  CHECK(e.estimate == fit.coefficients(model.treatment_index()));
}

TEST_CASE("outcome model needs a confounder") {
  auto f = two_groups({1, 2, 4}, {0, 1, 1});
  f.x = Eigen::MatrixXd(6, 0);
  f.confounder_names.clear();
  CHECK_THROWS_AS(fit_outcome_model(f), Error);
}

TEST_CASE("g-computation equals per-unit prediction differencing") {
  Rng rng(606);
  for (int rep = 0; rep < 30; ++rep) {
    auto spec = ScmSpec::default_spec();
    spec.interactions = {rng.normal(), rng.normal(), rng.normal()};
    spec.x_mean = {rng.normal(), 2.0 * rng.normal(), 0.0};
    const auto pf = generate(spec, 40 + rng.uniform_index(100), rng.next());
    if (pf.frame.n_treated() < 5 || pf.frame.n_treated() + 5 > pf.n()) continue;
    const auto ws = random_weights(rng, pf.n());
    const auto model = fit_outcome_model(pf.frame, &ws);
    const auto est = gcomp_ate(model, pf.frame).estimate;
    CHECK(std::abs(est - per_unit_gcomp(pf.frame, ws.w)) < 1e-10 * std::max(1.0, std::abs(est)));
  }
}

TEST_CASE("adjusted estimate on a six-row table") {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 7;
  const auto f = fixtures::frame({0, 1, 0, 1, 0, 1}, {0, 1, 0, 1, 0, 1}, {2, 5, 4, 8, 7, 12}, x);
  const auto e = adjusted_ate(f);
  CHECK(e.estimate == doctest::Approx(2.21505376344086).epsilon(1e-12));
  CHECK(e.se == doctest::Approx(0.17162227).epsilon(1e-6));
  const auto b = oracle::ols({{1, 0, 1}, {1, 1, 2}, {1, 0, 3}, {1, 1, 4}, {1, 0, 5}, {1, 1, 7}}, {2, 5, 4, 8, 7, 12});
  CHECK(std::abs(e.estimate - b[1]) < 1e-12);
}

TEST_CASE("unconfounded data: adjusted agrees with the naive contrast") {
  auto spec = no_interaction_spec();
  spec.gamma = {0.0, 0.0, 0.0, 0.0};
  const auto pf = generate(spec, 4000, 8);
  const auto naive = diff_in_means(pf.frame);
  const auto adjusted = adjusted_ate(pf.frame);
  CHECK(std::abs(naive.estimate - adjusted.estimate) < 2.0 * naive.se);
}

TEST_CASE("estimator invariance under outcome shifts and scaling") {
  const auto pf = generate(ScmSpec::default_spec(), 800, 55);
  const auto psr = estimate_ps(pf.frame);
  const auto ws = ipw_weights(psr, pf.frame.a);
  auto shifted = pf.frame;
  auto scaled = pf.frame;
  for (auto& v : shifted.y) v += 123.0;
  for (auto& v : scaled.y) v *= -3.0;
  for (auto run : {+[](const CausalFrame& f, const WeightSet&) { return diff_in_means(f); },
                   +[](const CausalFrame& f, const WeightSet&) { return adjusted_ate(f); },
                   +[](const CausalFrame& f, const WeightSet& w) { return matched_ate(f, w); }}) {
    const auto base = run(pf.frame, ws);
    const auto s = run(shifted, ws);
    const auto c = run(scaled, ws);
    CHECK(std::abs(s.estimate - base.estimate) < 1e-10);
    CHECK(c.estimate == doctest::Approx(-3.0 * base.estimate).epsilon(1e-10));
    CHECK(c.ci_high - c.ci_low == doctest::Approx(3.0 * (base.ci_high - base.ci_low)).epsilon(1e-10));
  }
}

TEST_CASE("matched estimates do not depend on unit order") {
  const auto pf = generate(ScmSpec::default_spec(), 600, 91);
  std::vector<std::size_t> order(600);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  std::rotate(order.begin(), order.begin() + 217, order.end());
  const auto permuted = pf.frame.subset(order);
  for (auto scheme : {WeightScheme::ipw, WeightScheme::nn, WeightScheme::subclass}) {
    const auto w1 = make_weights(scheme, estimate_ps(pf.frame), pf.frame.a);
    const auto w2 = make_weights(scheme, estimate_ps(permuted), permuted.a);
    CHECK(matched_ate(pf.frame, w1).estimate == doctest::Approx(matched_ate(permuted, w2).estimate).epsilon(1e-9));
  }
}

TEST_CASE("subclassification with 5 or 10 strata agrees within one SE") {
  const auto pf = generate(ScmSpec::default_spec(), 5000, 12);
  const auto psr = estimate_ps(pf.frame);
  const auto five = matched_ate(pf.frame, subclass_weights(psr, pf.frame.a, 5));
  const auto ten = matched_ate(pf.frame, subclass_weights(psr, pf.frame.a, 10));
  CHECK(std::abs(five.estimate - ten.estimate) < five.se);
}

TEST_CASE("decomposition") {
  SUBCASE("four-unit table by hand") {
    const auto pf = make_potential_frame({0, 1, 0, 1}, {0, 0, 1, 1}, {1, 2, 1, 3});
    const auto d = decompose(pf);
    CHECK(d.naive == 2.0);
    CHECK(d.ate == 1.25);
    CHECK(d.att == 2.0);
    CHECK(d.atc == 0.5);
    CHECK(d.pi == 0.5);
    CHECK(d.selection_bias_term == 0.0);
    CHECK(d.het_term == 0.75);
    CHECK(d.residual == 0.0);
  }
  SUBCASE("randomised table has no selection bias") {
    // Every (y0, y1) profile appears once treated and once untreated.
    const auto pf = make_potential_frame({1, 0, 1, 0, 1, 0}, {0, 0, 2, 2, 5, 5}, {1, 1, 3, 3, 9, 9});
    const auto d = decompose(pf);
    CHECK(d.selection_bias_term == 0.0);
    CHECK(d.het_term == 0.0);
    CHECK(d.naive == d.ate);
  }
  SUBCASE("equal ATT and ATC") {
    const auto pf = make_potential_frame({1, 0, 1, 0}, {0, 4, 1, 7}, {2, 6, 3, 9});
    CHECK(decompose(pf).het_term == 0.0);
  }
  SUBCASE("single class") {
    try {
      decompose(make_potential_frame({1, 1, 1, 1}, {0, 1, 2, 3}, {1, 2, 3, 4}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::positivity);
    }
  }
}

TEST_CASE("simpson strata") {
  const auto f = fixtures::simpson_clusters(200, 71);
  SUBCASE("reversal in every stratum, slopes equal per-bin OLS") {
    const auto s = simpson_strata(f, "z", 10);
    CHECK(s.marginal.slope > 0.0);
    CHECK(s.strata.size() == 10);
    CHECK(s.all_reversed());
    const auto z = f.column("z");
    for (std::size_t b = 0; b < s.strata.size(); ++b) {
      const auto& st = s.strata[b];
      std::vector<double> t, y;
      for (std::size_t i = 0; i < f.n(); ++i) {
        const bool last = b + 1 == s.strata.size();
        if (z[i] >= st.lower && (z[i] < st.upper || (last && z[i] <= st.upper))) {
          t.push_back(f.treatment[i]);
          y.push_back(f.y[i]);
        }
      }
      CHECK(t.size() == st.n);
      CHECK(std::abs(st.slope - oracle::simple_slope(t, y)) < 1e-10);
      CHECK(st.ci_low <= st.slope);
      CHECK(st.slope <= st.ci_high);
    }
  }
  SUBCASE("one bin is the marginal fit") {
    const auto s = simpson_strata(f, "z", 1);
    CHECK(s.strata.size() == 1);
    CHECK(s.strata[0].slope == s.marginal.slope);
    CHECK(s.strata[0].n == f.n());
  }
  SUBCASE("independent confounder shows no reversal") {
    Rng rng(3);
    std::vector<double> t, y;
    Eigen::MatrixXd z(600, 1);
    for (Eigen::Index i = 0; i < 600; ++i) {
      z(i, 0) = rng.normal();
      t.push_back(rng.normal());
      y.push_back(2.0 * t.back() + 0.3 * rng.normal());
    }
    const auto s = simpson_strata(fixtures::frame({}, t, y, z), "x1", 6);
    CHECK(s.reversed_count == 0);
    for (const auto& st : s.strata) CHECK(std::abs(st.slope - s.marginal.slope) < 4.0 * st.se);
  }
  SUBCASE("sparse bins merge") {
    auto small = fixtures::simpson_clusters(5, 2);
    const auto s = simpson_strata(small, "z", 50);
    CHECK(s.strata.size() < 50);
    for (const auto& st : s.strata) CHECK(st.n >= kMinRowsPerStratum);
    std::size_t total = 0;
    for (const auto& st : s.strata) total += st.n;
    CHECK(total == small.n());
  }
  SUBCASE("too few rows") {
    auto tiny = fixtures::frame({}, {1, 2}, {1, 2}, column({0, 1}));
    CHECK_THROWS_AS(simpson_strata(tiny, "x1", 2), Error);
  }
}

TEST_CASE("trials") {
  const auto pf = generate(ScmSpec::default_spec(), 3000, 4242);
  SUBCASE("one full-data trial") {
    TrialOptions opt;
    opt.n_trials = 1;
    opt.threads = 1;
    const auto r = run_trials(pf.frame, opt);
    REQUIRE(r.size() == 1);
    CHECK(r[0].ok);
    CHECK(r[0].naive.n_used == 3000);
    CHECK(r[0].matched.estimate == matched_ate(pf.frame, ipw_weights(estimate_ps(pf.frame), pf.frame.a)).estimate);
  }
  SUBCASE("matched intervals cover the effect and threads do not matter") {
    TrialOptions opt;
    opt.n_trials = 10;
    opt.sample_size = 2000;
    opt.seed = 9;
    opt.threads = 1;
    const auto serial = run_trials(pf.frame, opt);
    opt.threads = 4;
    const auto parallel = run_trials(pf.frame, opt);
    int covered = 0;
    for (std::size_t t = 0; t < 10; ++t) {
      CHECK(serial[t].trial_index == t);
      CHECK(serial[t].matched.estimate == parallel[t].matched.estimate);
      CHECK(serial[t].naive.ci_low == parallel[t].naive.ci_low);
      covered += serial[t].matched.covers(analytic_effects(ScmSpec::default_spec()).ate) ? 1 : 0;
    }
    CHECK(covered >= 8);
  }
  SUBCASE("sample larger than the frame fails every trial") {
    TrialOptions opt;
    opt.n_trials = 2;
    opt.sample_size = 5000;
    CHECK_THROWS_AS(run_trials(pf.frame, opt), Error);
  }
}
