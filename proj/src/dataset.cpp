#include "causalmatch/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "causalmatch/error.hpp"
#include "causalmatch/rng.hpp"

namespace causalmatch {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "null";
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw Error(ErrorKind::data, "row " + std::to_string(row) + ", column '" + column +
                                     "': cannot parse '" + cell + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::data, "row " + std::to_string(row) + ", column '" + column +
                                     "': non-finite value '" + cell + "'");
  }
  return value;
}

void check_positivity(const std::vector<int>& a) {
  const auto treated = std::count(a.begin(), a.end(), 1);
  if (treated == 0 || treated == static_cast<std::ptrdiff_t>(a.size())) {
    throw Error(ErrorKind::positivity,
                "treatment has a single class (" + std::to_string(treated) + " treated of " +
                    std::to_string(a.size()) + ")");
  }
}

std::vector<double>* mutable_column(CausalFrame& frame, const std::string& name, std::size_t* confounder) {
  *confounder = static_cast<std::size_t>(-1);
  if (name == frame.treatment_name) return &frame.treatment;
  if (name == frame.outcome_name) return &frame.y;
  *confounder = frame.confounder_index(name);
  return nullptr;
}

}  // namespace

GridField::GridField(std::size_t r, std::size_t c, std::vector<double> v, std::string label)
    : rows(r), cols(c), values(std::move(v)), name(std::move(label)) {
  if (rows == 0 || cols == 0) throw Error(ErrorKind::dimension, "grid dimensions must be positive");
  if (values.size() != rows * cols) {
    throw Error(ErrorKind::dimension, "grid '" + name + "' has " + std::to_string(values.size()) +
                                          " values, expected " + std::to_string(rows * cols));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorKind::data, "grid '" + name + "' has a non-finite value at row " +
                                       std::to_string(i / cols) + ", col " + std::to_string(i % cols));
    }
  }
}

double TransformRecord::param(const std::string& key) const {
  for (const auto& [k, v] : params) {
    if (k == key) return v;
  }
  throw Error(ErrorKind::config, "transform '" + name + "' has no parameter '" + key + "'");
}

std::size_t CausalFrame::n_treated() const {
  return static_cast<std::size_t>(std::count(a.begin(), a.end(), 1));
}

std::size_t CausalFrame::confounder_index(const std::string& name) const {
  const auto it = std::find(confounder_names.begin(), confounder_names.end(), name);
  if (it == confounder_names.end()) throw Error(ErrorKind::schema, "unknown column '" + name + "'");
  return static_cast<std::size_t>(it - confounder_names.begin());
}

std::vector<double> CausalFrame::column(const std::string& name) const {
  if (name == treatment_name) return treatment;
  if (name == outcome_name) return y;
  const auto j = confounder_index(name);
  std::vector<double> out(n());
  for (std::size_t i = 0; i < n(); ++i) out[i] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

void CausalFrame::validate(bool require_binary) const {
  const auto rows = n();
  if (static_cast<std::size_t>(x.rows()) != rows || treatment.size() != rows || unit_ids.size() != rows) {
    throw Error(ErrorKind::dimension, "frame columns have inconsistent lengths");
  }
  if (confounder_names.size() != k()) throw Error(ErrorKind::schema, "confounder label count mismatch");
  if (k() < 1) throw Error(ErrorKind::schema, "at least one confounder is required");
  if (rows <= k() + 2) {
    throw Error(ErrorKind::size, "need more than k+2 = " + std::to_string(k() + 2) + " units, have " +
                                     std::to_string(rows));
  }
  if (!x.allFinite()) throw Error(ErrorKind::data, "confounder matrix has non-finite entries");
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(treatment[i])) {
      throw Error(ErrorKind::data, "non-finite value in row " + std::to_string(i));
    }
  }
  if (require_binary && !has_binary_treatment()) {
    throw Error(ErrorKind::schema, "treatment '" + treatment_name + "' is not binary; dichotomize it first");
  }
  if (has_binary_treatment()) {
    if (a.size() != rows) throw Error(ErrorKind::dimension, "treatment length mismatch");
    for (int v : a) {
      if (v != 0 && v != 1) throw Error(ErrorKind::data, "treatment contains values other than 0/1");
    }
    check_positivity(a);
  }
}

CausalFrame CausalFrame::subset(const std::vector<std::size_t>& rows) const {
  CausalFrame out;
  out.treatment_name = treatment_name;
  out.outcome_name = outcome_name;
  out.confounder_names = confounder_names;
  out.rows_dropped = rows_dropped;
  out.log = log;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = rows[r];
    if (!a.empty()) out.a.push_back(a[i]);
    out.treatment.push_back(treatment[i]);
    out.y.push_back(y[i]);
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(i));
    out.unit_ids.push_back(unit_ids[i]);
    if (!grid_row.empty()) out.grid_row.push_back(grid_row[i]);
    if (!grid_col.empty()) out.grid_col.push_back(grid_col[i]);
    if (!date.empty()) out.date.push_back(date[i]);
  }
  return out;
}

CausalFrame parse_csv(const std::string& text, const ColumnRoles& roles) {
  if (roles.treatment.empty() || roles.outcome.empty()) {
    throw Error(ErrorKind::schema, "schema must name a treatment and an outcome column");
  }
  if (roles.confounders.empty()) throw Error(ErrorKind::schema, "schema must name at least one confounder");

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::schema, "input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < header.size(); ++j) index[header[j]] = j;

  auto require = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw Error(ErrorKind::schema, "missing column '" + name + "'");
    return it->second;
  };
  auto optional = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = index.find(name);
    return it == index.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  };

  const auto t_col = require(roles.treatment);
  const auto y_col = require(roles.outcome);
  std::vector<std::size_t> x_cols;
  for (const auto& c : roles.confounders) x_cols.push_back(require(c));
  const auto id_col = optional("unit_id");
  const auto row_col = optional("row");
  const auto col_col = optional("col");
  const auto date_col = optional("date");

  CausalFrame frame;
  frame.treatment_name = roles.treatment;
  frame.outcome_name = roles.outcome;
  frame.confounder_names = roles.confounders;
  std::vector<std::vector<double>> xs;

  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++data_row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::data, "row " + std::to_string(data_row) + " has " + std::to_string(cells.size()) +
                                       " fields, header has " + std::to_string(header.size()));
    }
    bool missing = is_missing(cells[t_col]) || is_missing(cells[y_col]);
    for (auto c : x_cols) missing = missing || is_missing(cells[c]);
    if (row_col >= 0) missing = missing || is_missing(cells[static_cast<std::size_t>(row_col)]);
    if (col_col >= 0) missing = missing || is_missing(cells[static_cast<std::size_t>(col_col)]);
    if (missing) {
      ++frame.rows_dropped;
      continue;
    }
    frame.treatment.push_back(parse_number(cells[t_col], data_row, roles.treatment));
    frame.y.push_back(parse_number(cells[y_col], data_row, roles.outcome));
    std::vector<double> xr;
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      xr.push_back(parse_number(cells[x_cols[j]], data_row, roles.confounders[j]));
    }
    xs.push_back(std::move(xr));

    std::string id;
    if (row_col >= 0) {
      const auto r = parse_number(cells[static_cast<std::size_t>(row_col)], data_row, "row");
      frame.grid_row.push_back(static_cast<int>(r));
    }
    if (col_col >= 0) {
      const auto c = parse_number(cells[static_cast<std::size_t>(col_col)], data_row, "col");
      frame.grid_col.push_back(static_cast<int>(c));
    }
    if (date_col >= 0) frame.date.push_back(cells[static_cast<std::size_t>(date_col)]);
    if (id_col >= 0) {
      id = cells[static_cast<std::size_t>(id_col)];
    } else if (row_col >= 0 && col_col >= 0) {
      id = "r" + std::to_string(frame.grid_row.back()) + "c" + std::to_string(frame.grid_col.back());
      if (date_col >= 0) id += "@" + frame.date.back();
    } else {
      id = std::to_string(data_row - 1);
    }
    frame.unit_ids.push_back(std::move(id));
  }

  const auto n = frame.y.size();
  frame.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(x_cols.size()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      frame.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i][j];
    }
  }

  const bool binary = std::all_of(frame.treatment.begin(), frame.treatment.end(),
                                  [](double v) { return v == 0.0 || v == 1.0; });
  if (binary) {
    frame.a.reserve(n);
    for (double v : frame.treatment) frame.a.push_back(v == 1.0 ? 1 : 0);
    if (n > 0) check_positivity(frame.a);
  }
  frame.validate(false);
  return frame;
}

CausalFrame load_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot open input '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), roles);
}

GridField trim_border(const GridField& field, std::size_t margin) {
  if (2 * margin >= field.rows || 2 * margin >= field.cols) {
    throw Error(ErrorKind::dimension, "margin " + std::to_string(margin) + " leaves no interior in a " +
                                          std::to_string(field.rows) + "x" + std::to_string(field.cols) +
                                          " grid");
  }
  const auto rows = field.rows - 2 * margin;
  const auto cols = field.cols - 2 * margin;
  std::vector<double> values;
  values.reserve(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto begin = field.values.begin() + static_cast<std::ptrdiff_t>((r + margin) * field.cols + margin);
    values.insert(values.end(), begin, begin + static_cast<std::ptrdiff_t>(cols));
  }
  return GridField(rows, cols, std::move(values), field.name);
}

CausalFrame trim_frame_border(const CausalFrame& frame, std::size_t margin, std::size_t rows, std::size_t cols) {
  if (frame.grid_row.empty() || frame.grid_col.empty()) {
    throw Error(ErrorKind::schema, "border trimming needs 'row' and 'col' columns");
  }
  if (rows == 0) rows = static_cast<std::size_t>(*std::max_element(frame.grid_row.begin(), frame.grid_row.end())) + 1;
  if (cols == 0) cols = static_cast<std::size_t>(*std::max_element(frame.grid_col.begin(), frame.grid_col.end())) + 1;
  if (2 * margin >= rows || 2 * margin >= cols) {
    throw Error(ErrorKind::dimension, "margin " + std::to_string(margin) + " leaves no interior in a " +
                                          std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < frame.n(); ++i) {
    const auto r = static_cast<std::size_t>(frame.grid_row[i]);
    const auto c = static_cast<std::size_t>(frame.grid_col[i]);
    if (r >= margin && r < rows - margin && c >= margin && c < cols - margin) keep.push_back(i);
  }
  auto out = frame.subset(keep);
  const auto shift = static_cast<int>(margin);
  for (auto& r : out.grid_row) r -= shift;
  for (auto& c : out.grid_col) c -= shift;
  out.log.push_back({"trim_border", "",
                     {{"margin", static_cast<double>(margin)},
                      {"rows", static_cast<double>(rows)},
                      {"cols", static_cast<double>(cols)}}});
  return out;
}

CausalFrame sqrt_transform(const CausalFrame& frame, const std::string& column) {
  CausalFrame out = frame;
  std::size_t j;
  auto* values = mutable_column(out, column, &j);
  if (values != nullptr) {
    for (std::size_t i = 0; i < values->size(); ++i) {
      if ((*values)[i] < 0.0) {
        throw Error(ErrorKind::domain, "negative value in column '" + column + "' at row " + std::to_string(i + 1) +
                                           " (unit " + frame.unit_ids[i] + ")");
      }
      (*values)[i] = std::sqrt((*values)[i]);
    }
  } else {
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < out.x.rows(); ++i) {
      if (out.x(i, col) < 0.0) {
        throw Error(ErrorKind::domain, "negative value in column '" + column + "' at row " + std::to_string(i + 1) +
                                           " (unit " + frame.unit_ids[static_cast<std::size_t>(i)] + ")");
      }
      out.x(i, col) = std::sqrt(out.x(i, col));
    }
  }
  out.log.push_back({"sqrt", column, {}});
  return out;
}

double sample_median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::size, "median of an empty column");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

CausalFrame apply_threshold(const CausalFrame& frame, const std::vector<double>& values,
                            const std::vector<double>& thresholds) {
  CausalFrame out = frame;
  out.a.assign(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) out.a[i] = values[i] > thresholds[i] ? 1 : 0;
  check_positivity(out.a);
  return out;
}

void require_treatment_column(const CausalFrame& frame, const std::string& column) {
  if (column != frame.treatment_name) {
    throw Error(ErrorKind::schema, "only the treatment column '" + frame.treatment_name +
                                       "' can be dichotomized, got '" + column + "'");
  }
}

}  // namespace

CausalFrame dichotomize_at_median(const CausalFrame& frame, const std::string& column, bool per_date) {
  require_treatment_column(frame, column);
  const auto& values = frame.treatment;
  std::set<double> distinct(values.begin(), values.end());
  if (distinct.size() < 2) {
    throw Error(ErrorKind::degenerate, "column '" + column + "' is constant; cannot split at the median");
  }
  std::vector<double> thresholds(values.size());
  std::vector<std::pair<std::string, double>> params;
  if (per_date && !frame.date.empty()) {
    std::map<std::string, std::vector<double>> by_date;
    for (std::size_t i = 0; i < values.size(); ++i) by_date[frame.date[i]].push_back(values[i]);
    std::map<std::string, double> medians;
    for (auto& [d, v] : by_date) medians[d] = sample_median(std::move(v));
    for (std::size_t i = 0; i < values.size(); ++i) thresholds[i] = medians[frame.date[i]];
    params.emplace_back("per_date", 1.0);
  } else {
    const double median = sample_median(values);
    std::fill(thresholds.begin(), thresholds.end(), median);
    params.emplace_back("median", median);
    params.emplace_back("per_date", 0.0);
  }
  auto out = apply_threshold(frame, values, thresholds);
  const auto treated = out.n_treated();
  params.emplace_back("n_treated", static_cast<double>(treated));
  params.emplace_back("n_control", static_cast<double>(out.n() - treated));
  out.log.push_back({"dichotomize_median", column, std::move(params)});
  return out;
}

CausalFrame dichotomize_at(const CausalFrame& frame, const std::string& column, double threshold) {
  require_treatment_column(frame, column);
  auto out = apply_threshold(frame, frame.treatment, std::vector<double>(frame.n(), threshold));
  const auto treated = out.n_treated();
  out.log.push_back({"dichotomize_threshold", column,
                     {{"threshold", threshold},
                      {"n_treated", static_cast<double>(treated)},
                      {"n_control", static_cast<double>(out.n() - treated)}}});
  return out;
}

CausalFrame sample_units(const CausalFrame& frame, std::size_t m, std::uint64_t seed, std::uint64_t trial_index) {
  const auto n = frame.n();
  if (m < 1 || m > n) {
    throw Error(ErrorKind::size, "sample size " + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");
  }
  Rng rng(derive_seed(seed, trial_index));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(order[i], order[j]);
  }
  order.resize(m);
  std::sort(order.begin(), order.end());
  auto out = frame.subset(order);
  if (out.has_binary_treatment()) check_positivity(out.a);
  out.log.push_back({"sample", "",
                     {{"m", static_cast<double>(m)},
                      {"seed_hi", static_cast<double>(seed >> 32)},
                      {"seed_lo", static_cast<double>(seed & 0xffffffffULL)},
                      {"trial_index", static_cast<double>(trial_index)}}});
  return out;
}

CausalFrame replay(const TransformLog& log, const CausalFrame& raw) {
  CausalFrame frame = raw;
  for (const auto& record : log) {
    if (record.name == "sqrt") {
      frame = sqrt_transform(frame, record.column);
    } else if (record.name == "dichotomize_median") {
      frame = dichotomize_at_median(frame, record.column, record.param("per_date") != 0.0);
    } else if (record.name == "dichotomize_threshold") {
      frame = dichotomize_at(frame, record.column, record.param("threshold"));
    } else if (record.name == "trim_border") {
      frame = trim_frame_border(frame, static_cast<std::size_t>(record.param("margin")),
                                static_cast<std::size_t>(record.param("rows")),
                                static_cast<std::size_t>(record.param("cols")));
    } else if (record.name == "sample") {
      frame = sample_units(frame, static_cast<std::size_t>(record.param("m")),
                           (static_cast<std::uint64_t>(record.param("seed_hi")) << 32) |
                               static_cast<std::uint64_t>(record.param("seed_lo")),
                           static_cast<std::uint64_t>(record.param("trial_index")));
    } else {
      throw Error(ErrorKind::config, "unknown transform '" + record.name + "' in log");
    }
  }
  return frame;
}

}  // namespace causalmatch
