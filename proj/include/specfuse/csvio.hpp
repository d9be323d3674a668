#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace specfuse {

// Small CSV helpers for the kernel/weight/abundance dumps and the band
// grouping table. Numbers are written with %.17g; readers tolerate header
// lines, blank lines, and surrounding whitespace.

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);  // must be rectangular

// Band grouping rows: msi_band, lambda_low_nm, lambda_high_nm, optionally
// followed by per-covered-band weights. Rows are sorted by the band index,
// which must be 0..n-1 exactly once each.
struct SrfTable {
    std::vector<std::pair<double, double>> intervals;
    std::vector<Eigen::VectorXd> weights;  // empty when the file has no weight columns
};
SrfTable read_srf_table(const std::string& path);
void write_coverage_csv(const std::string& path,
                        const std::vector<std::pair<double, double>>& intervals);

// One row per band: msi_band, then the covered-band weights.
void write_srf_weights_csv(const std::string& path,
                           const std::vector<Eigen::VectorXd>& weights);

}  // namespace specfuse
