#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace causalmatch {

// One scalar per grid point, row-major.
struct GridField {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::string name;

  GridField() = default;
  GridField(std::size_t rows, std::size_t cols, std::vector<double> values, std::string name = {});

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t size() const { return values.size(); }
};

struct TransformRecord {
  std::string name;
  std::string column;
  std::vector<std::pair<std::string, double>> params;

  double param(const std::string& key) const;
  bool operator==(const TransformRecord&) const = default;
};

using TransformLog = std::vector<TransformRecord>;

// Unit-level analysis table. `treatment` always holds the numeric treatment
// column as loaded (and transformed); `a` holds the binary assignment once the
// column is binary or has been dichotomized.
struct CausalFrame {
  std::vector<int> a;
  std::vector<double> treatment;
  std::vector<double> y;
  Eigen::MatrixXd x;
  std::vector<std::string> confounder_names;
  std::vector<std::string> unit_ids;

  // Optional grid provenance; empty when the input had no such columns.
  std::vector<int> grid_row;
  std::vector<int> grid_col;
  std::vector<std::string> date;

  std::string treatment_name = "a";
  std::string outcome_name = "y";
  std::size_t rows_dropped = 0;
  TransformLog log;

  std::size_t n() const { return y.size(); }
  std::size_t k() const { return static_cast<std::size_t>(x.cols()); }
  bool has_binary_treatment() const { return !a.empty(); }
  std::size_t n_treated() const;

  std::vector<double> column(const std::string& name) const;
  std::size_t confounder_index(const std::string& name) const;

  // Throws on any broken invariant. With `require_binary` the treatment must
  // already be binary with both classes present.
  void validate(bool require_binary = true) const;

  CausalFrame subset(const std::vector<std::size_t>& rows) const;
};

struct ColumnRoles {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> confounders;
};

CausalFrame load_csv(const std::string& path, const ColumnRoles& roles);
CausalFrame parse_csv(const std::string& text, const ColumnRoles& roles);

GridField trim_border(const GridField& field, std::size_t margin);

// Frame-level counterpart of trim_border using the row/col provenance columns.
// Zero extents are inferred as max(row)+1 by max(col)+1. Surviving units get
// interior coordinates (shifted by -margin); unit ids are kept.
CausalFrame trim_frame_border(const CausalFrame& frame, std::size_t margin, std::size_t rows = 0,
                              std::size_t cols = 0);

CausalFrame sqrt_transform(const CausalFrame& frame, const std::string& column);

double sample_median(std::vector<double> values);

// a_i = 1 iff the value strictly exceeds the median. With `per_date`, the
// median is taken separately within each date tag.
CausalFrame dichotomize_at_median(const CausalFrame& frame, const std::string& column,
                                  bool per_date = false);
CausalFrame dichotomize_at(const CausalFrame& frame, const std::string& column, double threshold);

CausalFrame sample_units(const CausalFrame& frame, std::size_t m, std::uint64_t seed,
                         std::uint64_t trial_index);

// Re-applies every record of `log` to `raw` in order.
CausalFrame replay(const TransformLog& log, const CausalFrame& raw);

}  // namespace causalmatch
