#include "edpredict/rfe.hpp"

#include "edpredict/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace edpredict {

namespace {

struct ReplicateOutcome {
    bool ok = false;
    std::vector<std::size_t> elimination_order; // first eliminated first
    std::vector<double> accuracy_by_size;       // index = size - 1
};

Eigen::MatrixXd take(const Eigen::MatrixXd &m, const std::vector<Eigen::Index> &rows,
                     const std::vector<std::size_t> &cols) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                m(rows[i], static_cast<Eigen::Index>(cols[j]));
        }
    }
    return out;
}

ReplicateOutcome run_replicate(const Eigen::MatrixXd &features, const Eigen::VectorXd &labels,
                               const FitConfig &config, std::uint64_t replicate) {
    const Eigen::Index n = features.rows();
    const auto p = static_cast<std::size_t>(features.cols());
    boost::random::mt19937_64 rng(replicate_seed(config.rng_seed, replicate));
    boost::random::uniform_int_distribution<Eigen::Index> draw(0, n - 1);

    std::vector<Eigen::Index> in_bag(static_cast<std::size_t>(n));
    std::vector<char> drawn(static_cast<std::size_t>(n), 0);
    for (auto &idx : in_bag) {
        idx = draw(rng);
        drawn[static_cast<std::size_t>(idx)] = 1;
    }
    std::vector<Eigen::Index> out_of_bag;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!drawn[static_cast<std::size_t>(i)]) {
            out_of_bag.push_back(i);
        }
    }
    ReplicateOutcome outcome;
    if (out_of_bag.empty()) {
        return outcome;
    }
    Eigen::VectorXd bag_labels(static_cast<Eigen::Index>(in_bag.size()));
    for (std::size_t i = 0; i < in_bag.size(); ++i) {
        bag_labels(static_cast<Eigen::Index>(i)) = labels(in_bag[i]);
    }

    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), 0);
    const Eigen::MatrixXd bag_all = take(features, in_bag, all);
    Eigen::VectorXd sd(static_cast<Eigen::Index>(p));
    for (Eigen::Index j = 0; j < bag_all.cols(); ++j) {
        const double mean = bag_all.col(j).mean();
        sd(j) = std::sqrt((bag_all.col(j).array() - mean).square().sum() /
                          static_cast<double>(std::max<Eigen::Index>(bag_all.rows() - 1, 1)));
    }

    outcome.accuracy_by_size.assign(p, 0.0);
    std::vector<std::size_t> current = all;
    try {
        while (!current.empty()) {
            const Eigen::MatrixXd bag = take(features, in_bag, current);
            const FitResult fit = fit_logistic(bag, bag_labels, config);
            const Eigen::MatrixXd oob = take(features, out_of_bag, current);
            const Eigen::VectorXd prob = predict_probability(oob, fit.coefficients);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < out_of_bag.size(); ++i) {
                const double predicted = prob(static_cast<Eigen::Index>(i)) >= 0.5 ? 1.0 : 0.0;
                correct += predicted == labels(out_of_bag[i]) ? 1 : 0;
            }
            outcome.accuracy_by_size[current.size() - 1] =
                static_cast<double>(correct) / static_cast<double>(out_of_bag.size());

            // weakest standardized coefficient; later columns lose ties
            std::size_t weakest = 0;
            double weakest_importance = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < current.size(); ++j) {
                const double importance =
                    std::abs(fit.coefficients(static_cast<Eigen::Index>(j) + 1)) *
                    sd(static_cast<Eigen::Index>(current[j]));
                if (importance <= weakest_importance) {
                    weakest_importance = importance;
                    weakest = j;
                }
            }
            outcome.elimination_order.push_back(current[weakest]);
            current.erase(current.begin() + static_cast<std::ptrdiff_t>(weakest));
        }
    } catch (const Error &) {
        return ReplicateOutcome{};
    }
    outcome.ok = true;
    return outcome;
}

} // namespace

std::uint64_t replicate_seed(std::uint64_t base_seed, std::uint64_t replicate) {
    // splitmix64 finalizer over the combined key
    std::uint64_t z = base_seed + 0x9E3779B97F4A7C15ULL * (replicate + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RfeResult bootstrap_rfe(const Eigen::MatrixXd &features, const Eigen::VectorXd &labels,
                        const std::vector<std::string> &names, const FitConfig &config) {
    const auto p = static_cast<std::size_t>(features.cols());
    if (p == 0 || names.size() != p) {
        throw Error(ErrorCode::InvalidArgument, "bootstrap_rfe needs one name per feature column");
    }
    if (labels.size() != features.rows()) {
        throw Error(ErrorCode::InvalidArgument, "feature rows and label count differ");
    }
    const double positives = labels.sum();
    if (positives <= 0.0 || positives >= static_cast<double>(labels.size())) {
        throw Error(ErrorCode::SingleClass, "bootstrap_rfe needs both outcome classes");
    }
    if (config.bootstrap_replicates <= 0) {
        throw Error(ErrorCode::InvalidArgument, "bootstrap_replicates must be positive");
    }

    const auto replicates = static_cast<std::size_t>(config.bootstrap_replicates);
    std::vector<ReplicateOutcome> outcomes(replicates);
    const auto workers = static_cast<std::size_t>(std::max(1, config.threads));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < replicates; r = next++) {
            outcomes[r] = run_replicate(features, labels, config, r);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(workers, replicates); ++t) {
            pool.emplace_back(worker);
        }
    }

    RfeResult result;
    result.replicates = replicates;
    std::vector<double> position_sum(p, 0.0);
    std::vector<double> accuracy_sum(p, 0.0);
    std::size_t used = 0;
    for (const auto &outcome : outcomes) { // replicate-index order
        if (!outcome.ok) {
            ++result.skipped_replicates;
            continue;
        }
        ++used;
        for (std::size_t pos = 0; pos < outcome.elimination_order.size(); ++pos) {
            position_sum[outcome.elimination_order[pos]] += static_cast<double>(pos);
        }
        for (std::size_t s = 0; s < p; ++s) {
            accuracy_sum[s] += outcome.accuracy_by_size[s];
        }
    }
    if (static_cast<double>(result.skipped_replicates) >
        kMaxSkippedReplicateFraction * static_cast<double>(replicates)) {
        throw Error(ErrorCode::TooManySkippedReplicates,
                    std::to_string(result.skipped_replicates) + " of " +
                        std::to_string(replicates) + " bootstrap replicates failed");
    }

    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return position_sum[a] > position_sum[b];
    });
    for (auto j : order) {
        result.ranking.push_back(names[j]);
    }

    double best = -1.0;
    for (std::size_t s = 0; s < p; ++s) {
        const double mean = accuracy_sum[s] / static_cast<double>(used);
        result.oob_accuracy_by_size[s + 1] = mean;
        if (mean > best) {
            best = mean;
            result.selected_size = s + 1;
        }
    }

    std::vector<std::size_t> chosen(order.begin(),
                                    order.begin() + static_cast<std::ptrdiff_t>(result.selected_size));
    std::sort(chosen.begin(), chosen.end());
    for (auto j : chosen) {
        result.selected.push_back(names[j]);
    }
    std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(features.rows()));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    result.final_model = fit_logistic(take(features, all_rows, chosen), labels, config);
    return result;
}

} // namespace edpredict
