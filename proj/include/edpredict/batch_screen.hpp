#pragma once

#include "edpredict/cohort.hpp"

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace edpredict {

struct PcaResult {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;          // column standard deviations
    std::vector<Eigen::Index> kept;  // columns of the input that were not constant
    Eigen::MatrixXd scores;          // rows x components
    Eigen::MatrixXd loadings;        // kept columns x components
    Eigen::VectorXd explained;       // variance ratio per component
};

/// PCA of the column-standardized matrix. Constant columns are dropped.
/// `components` is clamped to the rank bound min(rows, kept columns).
PcaResult pca(const Eigen::MatrixXd &data, Eigen::Index components);

/// Standardized matrix rebuilt from the retained components.
Eigen::MatrixXd reconstruct(const PcaResult &result);

/// A grouping variable to test against the principal component scores.
/// Empty labels are treated as missing and left out of the test.
struct BatchCandidate {
    std::string name;
    std::vector<std::string> labels;
};

struct BatchScreenRow {
    std::string candidate;
    int component = 0; // 1-based
    double variance_explained = 0.0;
    double statistic = 0.0; // Kruskal-Wallis H
    double p_value = 1.0;
    double q_value = 1.0;
    bool flagged = false;
};

struct BatchScreenReport {
    std::vector<BatchScreenRow> rows;
    std::vector<std::string> warnings;

    bool flagged(const std::string &candidate) const;
};

/// Kruskal-Wallis of each candidate's groups on each of the first `k`
/// component scores; BH across all rows; flagged when q < alpha.
/// Throws TooFewRecords below 10 rows.
BatchScreenReport pca_batch_screen(const Eigen::MatrixXd &features,
                                   const std::vector<BatchCandidate> &candidates, int k = 2,
                                   double alpha = 0.05);

/// Cohort form: each candidate is screened against the PCA of the cohort's
/// model variables with the candidate itself removed. "hospital_id" is a
/// valid candidate; numeric candidates with more than 10 distinct values
/// are grouped into quartiles.
BatchScreenReport pca_batch_screen(const Cohort &cohort,
                                   const std::vector<std::string> &candidate_vars, int k = 2,
                                   double alpha = 0.05);

void write_batch_screen_csv(const BatchScreenReport &report, std::ostream &out);

/// The candidate list screened by the pipeline.
const std::vector<std::string> &default_batch_candidates();

} // namespace edpredict
