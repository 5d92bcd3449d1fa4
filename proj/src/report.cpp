#include "causalmatch/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace causalmatch::report {

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

namespace {

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Linear map of a data range onto a pixel range with 5% padding.
struct Axis {
  double lo, hi, px_lo, px_hi;

  Axis(double data_lo, double data_hi, double a, double b) : px_lo(a), px_hi(b) {
    if (!(data_hi > data_lo)) {
      data_lo -= 0.5;
      data_hi += 0.5;
    }
    const double pad = 0.05 * (data_hi - data_lo);
    lo = data_lo - pad;
    hi = data_hi + pad;
  }
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

class Svg {
 public:
  Svg(const std::string& title, const std::string& xlabel, const std::string& ylabel, const std::string& timestamp) {
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"400\" viewBox=\"0 0 480 400\">\n";
    out_ << "<rect width=\"480\" height=\"400\" fill=\"white\"/>\n";
    out_ << "<rect x=\"60\" y=\"40\" width=\"400\" height=\"300\" fill=\"none\" stroke=\"black\"/>\n";
    text(260, 24, title, 14);
    text(260, 385, xlabel, 12);
    out_ << "<text x=\"16\" y=\"190\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 190)\">"
         << escape(ylabel) << "</text>\n";
    if (!timestamp.empty()) out_ << "<!-- generated " << escape(timestamp) << " -->\n";
  }

  void text(double x, double y, const std::string& s, int size = 10) {
    out_ << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
         << "\" text-anchor=\"middle\">" << escape(s) << "</text>\n";
  }
  void circle(double x, double y, const char* color) {
    out_ << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* color, const char* dash = nullptr) {
    out_ << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2) << "\" y2=\"" << fmt(y2)
         << "\" stroke=\"" << color << "\"";
    if (dash) out_ << " stroke-dasharray=\"" << dash << "\"";
    out_ << "/>\n";
  }
  void ticks(const Axis& x, const Axis& y) {
    text(60, 355, fmt(x.lo, 3));
    text(460, 355, fmt(x.hi, 3));
    text(35, 340, fmt(y.lo, 3));
    text(35, 44, fmt(y.hi, 3));
  }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  static std::string fmt(double v, int digits = 6) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.*g", digits, v);
    return buffer;
  }
  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  }
  std::ostringstream out_;
};

std::pair<double, double> range_of(std::initializer_list<const std::vector<double>*> series) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto* s : series) {
    for (double v : *s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

}  // namespace

void write_frame_csv(std::ostream& out, const CausalFrame& frame) {
  out << "unit_id," << csv_text(frame.treatment_name) << ',' << csv_text(frame.outcome_name);
  for (const auto& name : frame.confounder_names) out << ',' << csv_text(name);
  out << '\n';
  for (std::size_t i = 0; i < frame.n(); ++i) {
    out << csv_text(frame.unit_ids[i]) << ','
        << (frame.has_binary_treatment() ? std::to_string(frame.a[i]) : format_number(frame.treatment[i])) << ','
        << format_number(frame.y[i]);
    for (Eigen::Index j = 0; j < frame.x.cols(); ++j) out << ',' << format_number(frame.x(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

void write_potential_frame_csv(std::ostream& out, const PotentialFrame& pf, bool with_potential) {
  if (!with_potential) {
    write_frame_csv(out, pf.frame);
    return;
  }
  std::ostringstream body;
  write_frame_csv(body, pf.frame);
  std::istringstream lines(body.str());
  std::string line;
  std::getline(lines, line);
  out << line << ",y0,y1\n";
  for (std::size_t i = 0; std::getline(lines, line); ++i) {
    out << line << ',' << format_number(pf.y0[i]) << ',' << format_number(pf.y1[i]) << '\n';
  }
}

void write_weights_csv(std::ostream& out, const CausalFrame& frame, const PropensityResult& psr, const WeightSet& ws) {
  out << "unit_id,a,ps,w,scheme\n";
  for (std::size_t i = 0; i < frame.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << csv_text(frame.unit_ids[i]) << ',' << frame.a[i] << ',' << format_number(psr.ps(row)) << ','
        << format_number(ws.w(row)) << ',' << to_string(ws.scheme) << '\n';
  }
}

void write_balance_header(std::ostream& out) { out << "trial,variable,scheme,smd_before,smd_after,balanced_after\n"; }

void write_balance_rows(std::ostream& out, const BalanceReport& report, std::size_t trial) {
  for (const auto& r : report.records) {
    for (std::size_t s = 0; s < report.schemes.size(); ++s) {
      out << trial << ',' << csv_text(r.name) << ',' << report.schemes[s] << ',' << format_number(r.smd_before) << ','
          << format_number(r.smd_after[s]) << ',' << (std::fabs(r.smd_after[s]) < report.threshold ? 1 : 0) << '\n';
    }
  }
}

void write_qq_csv(std::ostream& out, const QQPairs& before, const QQPairs& after) {
  out << "p,q_control,q_treatment,stage\n";
  for (std::size_t j = 0; j < before.probs.size(); ++j) {
    out << format_number(before.probs[j]) << ',' << format_number(before.control_q[j]) << ','
        << format_number(before.treatment_q[j]) << ",before\n";
  }
  for (std::size_t j = 0; j < after.probs.size(); ++j) {
    out << format_number(after.probs[j]) << ',' << format_number(after.control_q[j]) << ','
        << format_number(after.treatment_q[j]) << ",after\n";
  }
}

void write_effects_header(std::ostream& out) { out << "trial,estimator,estimate,se,ci_low,ci_high,n_used\n"; }

void write_effect_row(std::ostream& out, const EffectEstimate& e) {
  out << (e.trial_index ? std::to_string(*e.trial_index) : std::string()) << ',' << to_string(e.estimator) << ','
      << format_number(e.estimate) << ',' << format_number(e.se) << ',' << format_number(e.ci_low) << ','
      << format_number(e.ci_high) << ',' << e.n_used << '\n';
}

void write_strata_csv(std::ostream& out, const StratifiedSlopes& slopes) {
  out << "stratum,lower,upper,n,slope,se,ci_low,ci_high,reversed\n";
  auto row = [&](const std::string& label, const StratumSlope& s) {
    out << label << ',' << format_number(s.lower) << ',' << format_number(s.upper) << ',' << s.n << ','
        << format_number(s.slope) << ',' << format_number(s.se) << ',' << format_number(s.ci_low) << ','
        << format_number(s.ci_high) << ',' << (s.reversed ? 1 : 0) << '\n';
  };
  row("marginal", slopes.marginal);
  for (std::size_t b = 0; b < slopes.strata.size(); ++b) row(std::to_string(b), slopes.strata[b]);
}

std::string qq_svg(const QQPairs& before, const QQPairs& after, const std::string& timestamp) {
  const auto [lo, hi] = range_of({&before.control_q, &before.treatment_q, &after.control_q, &after.treatment_q});
  Svg svg("Q-Q: " + before.variable + " (grey before, blue after)", "control quantile", "treatment quantile",
          timestamp);
  const Axis x(lo, hi, 60, 460), y(lo, hi, 340, 40);
  svg.ticks(x, y);
  svg.line(x(x.lo), y(x.lo), x(x.hi), y(x.hi), "black", "4 3");
  for (std::size_t j = 0; j < before.probs.size(); ++j) svg.circle(x(before.control_q[j]), y(before.treatment_q[j]), "#999999");
  for (std::size_t j = 0; j < after.probs.size(); ++j) svg.circle(x(after.control_q[j]), y(after.treatment_q[j]), "#1f5fbf");
  return svg.finish();
}

std::string smd_svg(const std::vector<BalanceReport>& per_trial, const std::string& timestamp) {
  Svg svg("SMD before (grey) and after (blue) weighting", "variable", "SMD", timestamp);
  if (per_trial.empty() || per_trial.front().records.empty()) return svg.finish();
  std::vector<double> values{-kBalanceThreshold, kBalanceThreshold};
  for (const auto& r : per_trial) {
    for (const auto& rec : r.records) {
      values.push_back(rec.smd_before);
      values.insert(values.end(), rec.smd_after.begin(), rec.smd_after.end());
    }
  }
  const auto [lo, hi] = range_of({&values});
  const auto vars = per_trial.front().records.size();
  const Axis x(0.0, static_cast<double>(vars - 1), 60, 460), y(lo, hi, 340, 40);
  svg.ticks(x, y);
  svg.line(60, y(0.0), 460, y(0.0), "black");
  svg.line(60, y(kBalanceThreshold), 460, y(kBalanceThreshold), "red", "4 3");
  svg.line(60, y(-kBalanceThreshold), 460, y(-kBalanceThreshold), "red", "4 3");
  for (std::size_t v = 0; v < vars; ++v) {
    const double cx = x(static_cast<double>(v));
    svg.text(cx, 335, per_trial.front().records[v].name);
    for (const auto& r : per_trial) {
      svg.circle(cx - 6, y(r.records[v].smd_before), "#999999");
      if (!r.records[v].smd_after.empty()) svg.circle(cx + 6, y(r.records[v].smd_after.front()), "#1f5fbf");
    }
  }
  return svg.finish();
}

std::string effects_svg(const std::vector<TrialResult>& trials, const std::string& timestamp) {
  Svg svg("95% intervals per trial: naive, adjusted, matched", "trial", "effect", timestamp);
  std::vector<double> values{0.0};
  for (const auto& t : trials) {
    if (!t.ok) continue;
    for (const auto* e : {&t.naive, &t.adjusted, &t.matched}) {
      values.push_back(e->ci_low);
      values.push_back(e->ci_high);
    }
  }
  const auto [lo, hi] = range_of({&values});
  const Axis x(0.0, static_cast<double>(std::max<std::size_t>(trials.size(), 2) - 1), 60, 460), y(lo, hi, 340, 40);
  svg.ticks(x, y);
  svg.line(60, y(0.0), 460, y(0.0), "black", "4 3");
  const char* colors[] = {"#999999", "#d08020", "#1f5fbf"};
  for (const auto& t : trials) {
    if (!t.ok) continue;
    const double cx = x(static_cast<double>(t.trial_index));
    int c = 0;
    for (const auto* e : {&t.naive, &t.adjusted, &t.matched}) {
      const double px = cx + (c - 1) * 6.0;
      svg.line(px, y(e->ci_low), px, y(e->ci_high), colors[c]);
      svg.circle(px, y(e->estimate), colors[c]);
      ++c;
    }
  }
  return svg.finish();
}

std::string strata_svg(const StratifiedSlopes& slopes, const std::string& timestamp) {
  Svg svg("Per-stratum slopes by " + slopes.confounder + " (dashed: marginal)", slopes.confounder, "slope",
          timestamp);
  std::vector<double> xs, ys{slopes.marginal.slope, 0.0};
  for (const auto& s : slopes.strata) {
    xs.push_back(s.lower);
    xs.push_back(s.upper);
    ys.push_back(s.ci_low);
    ys.push_back(s.ci_high);
  }
  if (xs.empty()) return svg.finish();
  const auto [xlo, xhi] = range_of({&xs});
  const auto [ylo, yhi] = range_of({&ys});
  const Axis x(xlo, xhi, 60, 460), y(ylo, yhi, 340, 40);
  svg.ticks(x, y);
  svg.line(60, y(0.0), 460, y(0.0), "black");
  svg.line(60, y(slopes.marginal.slope), 460, y(slopes.marginal.slope), "red", "4 3");
  for (const auto& s : slopes.strata) {
    const double cx = x(0.5 * (s.lower + s.upper));
    svg.line(cx, y(s.ci_low), cx, y(s.ci_high), "#1f5fbf");
    svg.circle(cx, y(s.slope), s.reversed ? "#c02020" : "#1f5fbf");
  }
  return svg.finish();
}

}  // namespace causalmatch::report
