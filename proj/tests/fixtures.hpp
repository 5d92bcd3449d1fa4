#pragma once

#include <string>
#include <vector>

#include "causalmatch/dataset.hpp"
#include "causalmatch/rng.hpp"

namespace fixtures {

// Frame from explicit columns. `a` may be empty for a continuous treatment.
inline causalmatch::CausalFrame frame(const std::vector<int>& a, const std::vector<double>& treatment,
                                      const std::vector<double>& y, const Eigen::MatrixXd& x) {
  causalmatch::CausalFrame f;
  f.a = a;
  f.treatment = treatment;
  f.y = y;
  f.x = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) f.confounder_names.push_back("x" + std::to_string(j + 1));
  for (std::size_t i = 0; i < y.size(); ++i) f.unit_ids.push_back(std::to_string(i));
  return f;
}

// Two clusters separated along confounder z. Within a cluster y falls with
// the treatment t; across clusters both rise together, so the pooled slope is
// positive while every within-cluster slope is negative.
inline causalmatch::CausalFrame simpson_clusters(std::size_t per_cluster, std::uint64_t seed) {
  causalmatch::Rng rng(seed);
  std::vector<double> t, y;
  Eigen::MatrixXd z(static_cast<Eigen::Index>(2 * per_cluster), 1);
  Eigen::Index row = 0;
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < per_cluster; ++i) {
      const double u = rng.normal();
      z(row++, 0) = 10.0 * k + 0.5 * rng.normal();
      t.push_back(5.0 * k + u);
      y.push_back(20.0 * k - u + 0.1 * rng.normal());
    }
  }
  auto f = frame({}, t, y, z);
  f.treatment_name = "t";
  f.confounder_names = {"z"};
  return f;
}

}  // namespace fixtures
