#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>

#include "causalmatch/balance.hpp"
#include "causalmatch/effects.hpp"
#include "causalmatch/error.hpp"
#include "causalmatch/pipeline.hpp"
#include "causalmatch/propensity.hpp"
#include "causalmatch/synth.hpp"

namespace py = pybind11;
using namespace causalmatch;

namespace {

CausalFrame make_frame(const std::vector<int>& a, const std::vector<double>& y, const Eigen::MatrixXd& x,
                       std::vector<std::string> names) {
  CausalFrame f;
  f.a = a;
  f.treatment.assign(a.begin(), a.end());
  f.y = y;
  f.x = x;
  if (names.empty()) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j + 1));
  }
  f.confounder_names = std::move(names);
  for (std::size_t i = 0; i < y.size(); ++i) f.unit_ids.push_back(std::to_string(i));
  f.validate();
  return f;
}

ScmSpec spec_from(const std::optional<std::string>& json) {
  return json ? ScmSpec::from_json(*json) : ScmSpec::default_spec();
}

SchemeParams scheme_params(std::optional<double> caliper, bool with_replacement, std::size_t n_strata) {
  SchemeParams p;
  p.nn.caliper = caliper;
  p.nn.with_replacement = with_replacement;
  p.n_strata = n_strata;
  return p;
}

std::span<const double> as_span(const std::optional<std::vector<double>>& w) {
  return w ? std::span<const double>(*w) : std::span<const double>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Propensity-score weighting and treatment-effect estimators";
  m.attr("__version__") = pipeline::version();

  static py::exception<Error> error(m, "CausalMatchError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("kind") = to_string(e.kind());
      exc.attr("exit_code") = exit_code(e.kind());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<EffectEstimate>(m, "EffectEstimate")
      .def_readonly("estimate", &EffectEstimate::estimate)
      .def_readonly("se", &EffectEstimate::se)
      .def_readonly("ci_low", &EffectEstimate::ci_low)
      .def_readonly("ci_high", &EffectEstimate::ci_high)
      .def_readonly("n_used", &EffectEstimate::n_used)
      .def_readonly("df", &EffectEstimate::df)
      .def_property_readonly("estimator", [](const EffectEstimate& e) { return to_string(e.estimator); })
      .def("covers", &EffectEstimate::covers)
      .def("__repr__", [](const EffectEstimate& e) {
        return std::string("<EffectEstimate ") + to_string(e.estimator) + " " + std::to_string(e.estimate) + " [" +
               std::to_string(e.ci_low) + ", " + std::to_string(e.ci_high) + "]>";
      });

  py::class_<DecompositionResult>(m, "Decomposition")
      .def_readonly("naive", &DecompositionResult::naive)
      .def_readonly("ate", &DecompositionResult::ate)
      .def_readonly("att", &DecompositionResult::att)
      .def_readonly("atc", &DecompositionResult::atc)
      .def_readonly("pi", &DecompositionResult::pi)
      .def_readonly("selection_bias_term", &DecompositionResult::selection_bias_term)
      .def_readonly("het_term", &DecompositionResult::het_term)
      .def_readonly("residual", &DecompositionResult::residual);

  py::class_<StratumSlope>(m, "StratumSlope")
      .def_readonly("lower", &StratumSlope::lower)
      .def_readonly("upper", &StratumSlope::upper)
      .def_readonly("slope", &StratumSlope::slope)
      .def_readonly("se", &StratumSlope::se)
      .def_readonly("ci_low", &StratumSlope::ci_low)
      .def_readonly("ci_high", &StratumSlope::ci_high)
      .def_readonly("n", &StratumSlope::n)
      .def_readonly("reversed", &StratumSlope::reversed);

  py::class_<StratifiedSlopes>(m, "StratifiedSlopes")
      .def_readonly("strata", &StratifiedSlopes::strata)
      .def_readonly("marginal", &StratifiedSlopes::marginal)
      .def_readonly("reversed_count", &StratifiedSlopes::reversed_count)
      .def_property_readonly("all_reversed", &StratifiedSlopes::all_reversed);

  m.def(
      "simulate",
      [](std::size_t n, std::uint64_t seed, std::optional<std::string> spec) {
        const auto pf = generate(spec_from(spec), n, seed);
        py::dict d;
        d["a"] = pf.frame.a;
        d["y"] = pf.frame.y;
        d["x"] = pf.frame.x;
        d["y0"] = pf.y0;
        d["y1"] = pf.y1;
        d["confounders"] = pf.frame.confounder_names;
        return d;
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("spec") = py::none());

  m.def(
      "analytic_effects",
      [](std::optional<std::string> spec) {
        const auto e = analytic_effects(spec_from(spec));
        py::dict d;
        d["ate"] = e.ate;
        d["att"] = e.att;
        d["atc"] = e.atc;
        d["pi"] = e.pi;
        return d;
      },
      py::arg("spec") = py::none());

  m.def("default_spec", [] { return ScmSpec::default_spec().to_json(); });

  m.def(
      "estimate_ps",
      [](const std::vector<int>& a, const Eigen::MatrixXd& x) {
        std::vector<double> y(a.size(), 0.0);
        const auto psr = estimate_ps(make_frame(a, y, x, {}));
        py::dict d;
        d["ps"] = psr.ps;
        d["linear_predictor"] = psr.linear_predictor;
        d["coefficients"] = psr.treatment_fit.coefficients;
        d["covariance"] = psr.treatment_fit.covariance;
        d["loglik"] = psr.treatment_fit.loglik;
        d["common_support"] = psr.common_support;
        return d;
      },
      py::arg("a"), py::arg("x"));

  m.def(
      "weights",
      [](const std::vector<int>& a, const Eigen::VectorXd& ps, const std::string& scheme,
         std::optional<double> caliper, bool with_replacement, std::size_t n_strata) {
        const auto psr = propensity_from_scores(ps, a);
        return make_weights(parse_scheme(scheme), psr, a, scheme_params(caliper, with_replacement, n_strata)).w;
      },
      py::arg("a"), py::arg("ps"), py::arg("scheme") = "ipw", py::arg("caliper") = py::none(),
      py::arg("with_replacement") = true, py::arg("n_strata") = 5);

  m.def(
      "smd",
      [](const std::vector<double>& values, const std::vector<int>& a, std::optional<std::vector<double>> w) {
        return smd(values, a, as_span(w));
      },
      py::arg("values"), py::arg("a"), py::arg("w") = py::none());

  m.def(
      "weighted_quantiles",
      [](const std::vector<double>& values, const std::vector<double>& w, const std::vector<double>& probs) {
        return weighted_quantiles(values, w, probs);
      },
      py::arg("values"), py::arg("w"), py::arg("probs"));

  m.def(
      "estimate_effects",
      [](const std::vector<int>& a, const std::vector<double>& y, const Eigen::MatrixXd& x,
         const std::string& scheme, std::optional<double> caliper, bool with_replacement, std::size_t n_strata) {
        const auto frame = make_frame(a, y, x, {});
        const auto psr = estimate_ps(frame);
        const auto ws =
            make_weights(parse_scheme(scheme), psr, frame.a, scheme_params(caliper, with_replacement, n_strata));
        py::dict d;
        d["naive"] = diff_in_means(frame);
        d["adjusted"] = adjusted_ate(frame);
        d["matched"] = matched_ate(frame, ws);
        return d;
      },
      py::arg("a"), py::arg("y"), py::arg("x"), py::arg("scheme") = "ipw", py::arg("caliper") = py::none(),
      py::arg("with_replacement") = true, py::arg("n_strata") = 5);

  m.def(
      "decompose",
      [](std::vector<int> a, std::vector<double> y0, std::vector<double> y1) {
        return decompose(make_potential_frame(std::move(a), std::move(y0), std::move(y1)));
      },
      py::arg("a"), py::arg("y0"), py::arg("y1"));

  m.def(
      "simpson",
      [](const std::vector<double>& treatment, const std::vector<double>& y, const std::vector<double>& z,
         std::size_t bins) {
        CausalFrame f;
        f.treatment = treatment;
        f.treatment_name = "t";
        f.y = y;
        f.x = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
        f.confounder_names = {"z"};
        for (std::size_t i = 0; i < y.size(); ++i) f.unit_ids.push_back(std::to_string(i));
        return simpson_strata(f, "z", bins);
      },
      py::arg("treatment"), py::arg("y"), py::arg("z"), py::arg("bins") = 50);

  m.def(
      "analyze",
      [](const std::string& config_json) {
        const auto config = pipeline::RunConfig::from_json(config_json);
        py::gil_scoped_release release;
        pipeline::cmd_analyze(config);
      },
      py::arg("config_json"), "Run the analyze command from a JSON config; outputs go to its 'out' directory.");
}
