#pragma once

#include "edpredict/logistic.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace edpredict {

struct RfeResult {
    /// Most important first; the first eliminated variable comes last.
    std::vector<std::string> ranking;
    std::size_t selected_size = 0;
    /// Mean out-of-bag accuracy (threshold 0.5) per model size.
    std::map<std::size_t, double> oob_accuracy_by_size;
    /// Top `selected_size` of the ranking, in design-column order.
    std::vector<std::string> selected;
    /// Refit on all rows using the selected columns.
    FitResult final_model;
    std::size_t replicates = 0;
    std::size_t skipped_replicates = 0;
};

inline constexpr double kMaxSkippedReplicateFraction = 0.20;

/// Seed for bootstrap replicate `replicate`, derived only from the base seed
/// and the index so results do not depend on scheduling.
std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t replicate);

/// Bootstrapped recursive feature elimination around fit_logistic.
///
/// Each replicate resamples rows with replacement, then repeatedly fits on
/// the remaining columns, scores the fit on the out-of-bag rows and drops
/// the column with the smallest |beta| * sd. Columns are ranked by their
/// mean elimination position across replicates; the selected size maximizes
/// mean out-of-bag accuracy (ties go to the smaller size). Replicates whose
/// fit fails are skipped; more than 20% skipped throws
/// TooManySkippedReplicates. Output is identical for any `threads`.
RfeResult bootstrap_rfe(const Eigen::MatrixXd &features, const Eigen::VectorXd &labels,
                        const std::vector<std::string> &names, const FitConfig &config);

} // namespace edpredict
