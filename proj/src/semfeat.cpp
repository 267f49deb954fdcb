#include "hpppf/semfeat.hpp"

#include <algorithm>
#include <cmath>

#include "hpppf/errors.hpp"
#include "hpppf/io.hpp"

namespace hpppf {

void SemanticFeatureTable::validate() const {
  if (features.rows() == 0 || features.cols() == 0) {
    throw input_error("semantic feature table is empty");
  }
  if (!features.allFinite()) {
    throw input_error("semantic feature table holds non-finite values");
  }
}

SemanticFeatureTable load_features(const std::string& path, int expected_n) {
  SemanticFeatureTable table;
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "csv") {
    table.features = read_matrix_csv(path);
  } else {
    table.features = read_matrix_bin(path);
  }
  table.source_tag = path;
  table.validate();
  if (expected_n >= 0 && table.rows() != expected_n) {
    throw input_error(path + ": feature rows (" + std::to_string(table.rows()) +
                      ") do not match the cloud (" + std::to_string(expected_n) +
                      ")");
  }
  return table;
}

void save_features(const std::string& path, const SemanticFeatureTable& table) {
  table.validate();
  const auto dot = path.find_last_of('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "csv") {
    write_matrix_csv(path, table.features);
  } else {
    write_matrix_bin(path, table.features);
  }
}

ConsistencyReport rotational_consistency(
    const std::vector<SemanticFeatureTable>& tables,
    const std::vector<std::vector<int>>& correspondence) {
  if (tables.size() < 2) {
    throw input_error("rotational consistency needs at least two captures");
  }
  const int n = tables[0].rows();
  const int dim = tables[0].dim();
  for (const auto& t : tables) {
    t.validate();
    if (t.dim() != dim) throw input_error("feature widths differ across captures");
  }
  if (!correspondence.empty() && correspondence.size() != tables.size()) {
    throw input_error("one correspondence list per capture is required");
  }

  auto row_of = [&](std::size_t t, int r) -> int {
    if (correspondence.empty()) return r;
    const auto& rows = correspondence[t];
    if (r >= static_cast<int>(rows.size())) {
      throw input_error("correspondence list is shorter than the reference");
    }
    return rows[r];
  };

  std::vector<double> cosines;
  int zero_excluded = 0;
  for (int r = 0; r < n; ++r) {
    for (std::size_t a = 0; a < tables.size(); ++a) {
      const int ra = row_of(a, r);
      if (ra < 0 || ra >= tables[a].rows()) {
        throw input_error("correspondence row out of range");
      }
      for (std::size_t b = a + 1; b < tables.size(); ++b) {
        const int rb = row_of(b, r);
        if (rb < 0 || rb >= tables[b].rows()) {
          throw input_error("correspondence row out of range");
        }
        const Eigen::VectorXd va = tables[a].features.row(ra);
        const Eigen::VectorXd vb = tables[b].features.row(rb);
        const double na = va.norm(), nb = vb.norm();
        if (na == 0 || nb == 0) {
          ++zero_excluded;
          continue;
        }
        cosines.push_back(va.dot(vb) / (na * nb));
      }
    }
  }

  ConsistencyReport report;
  report.cosines = static_cast<long>(cosines.size());
  report.zero_rows_excluded = zero_excluded;
  if (cosines.empty()) return report;

  double sum = 0;
  for (double c : cosines) sum += c;
  report.mean = sum / cosines.size();

  std::sort(cosines.begin(), cosines.end());
  const std::size_t m = cosines.size();
  report.median = m % 2 ? cosines[m / 2]
                        : 0.5 * (cosines[m / 2 - 1] + cosines[m / 2]);
  // nearest-rank percentile: value at rank ceil(0.05 * m), 1-based
  const auto rank = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(m))));
  report.p05 = cosines[rank - 1];
  return report;
}

}  // namespace hpppf
