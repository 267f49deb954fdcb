#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace hpppf {

/// Externally produced per-point feature rows, bound by row order to a cloud.
struct SemanticFeatureTable {
  Eigen::MatrixXd features;  // n x C
  std::string source_tag;

  int rows() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

/// Reads a table from CSV (header f0..f{C-1}) or the binary matrix container
/// (by file extension) and checks the row count against the bound cloud.
SemanticFeatureTable load_features(const std::string& path, int expected_n);

void save_features(const std::string& path, const SemanticFeatureTable& table);

struct ConsistencyReport {
  double mean = 0;
  double median = 0;
  double p05 = 0;  // 5th percentile
  long cosines = 0;
  int zero_rows_excluded = 0;
};

/// Per-point cosine similarity of corresponding rows across captures of the
/// same instance under different poses. correspondence[t][r] gives the row of
/// table t matching reference row r; an empty map means identity.
ConsistencyReport rotational_consistency(
    const std::vector<SemanticFeatureTable>& tables,
    const std::vector<std::vector<int>>& correspondence = {});

}  // namespace hpppf
