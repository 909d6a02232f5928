#include "edpredict/batch_screen.hpp"

#include "edpredict/csv.hpp"
#include "edpredict/error.hpp"
#include "edpredict/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace edpredict {

namespace {

constexpr double kConstantTolerance = 1e-12;
constexpr std::size_t kMaxDistinctForGrouping = 10;

std::vector<BatchScreenRow> screen_one(const Eigen::MatrixXd &features,
                                       const BatchCandidate &candidate, int k,
                                       std::vector<std::string> &warnings) {
    const PcaResult result = pca(features, k);
    if (result.kept.size() < static_cast<std::size_t>(features.cols())) {
        warnings.push_back(candidate.name + ": dropped " +
                           std::to_string(features.cols() -
                                          static_cast<Eigen::Index>(result.kept.size())) +
                           " constant feature(s)");
    }
    std::vector<BatchScreenRow> rows;
    if (result.kept.size() < 3) {
        warnings.push_back(candidate.name +
                           ": fewer than 3 non-constant features, nothing to screen");
        for (int c = 0; c < k; ++c) {
            rows.push_back({candidate.name, c + 1, 0.0, 0.0, 1.0, 1.0, false});
        }
        return rows;
    }

    std::map<std::string, std::vector<Eigen::Index>> members;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const auto &label = candidate.labels[static_cast<std::size_t>(i)];
        if (!label.empty()) {
            members[label].push_back(i);
        }
    }
    for (int c = 0; c < k; ++c) {
        BatchScreenRow row;
        row.candidate = candidate.name;
        row.component = c + 1;
        if (c < result.scores.cols()) {
            row.variance_explained = result.explained(c);
            std::vector<std::vector<double>> groups;
            for (const auto &[label, idx] : members) {
                std::vector<double> g;
                g.reserve(idx.size());
                for (auto i : idx) {
                    g.push_back(result.scores(i, c));
                }
                groups.push_back(std::move(g));
            }
            const auto kw = stats::kruskal_wallis(groups);
            row.statistic = kw.statistic;
            row.p_value = kw.p_value;
        }
        rows.push_back(row);
    }
    return rows;
}

void finish(BatchScreenReport &report, double alpha) {
    std::vector<double> p;
    for (const auto &row : report.rows) {
        p.push_back(row.p_value);
    }
    const auto q = stats::bh_fdr(p);
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        report.rows[i].q_value = q[i];
        report.rows[i].flagged = q[i] < alpha;
    }
}

} // namespace

PcaResult pca(const Eigen::MatrixXd &data, Eigen::Index components) {
    const Eigen::Index n = data.rows();
    PcaResult out;
    out.means = data.colwise().mean();
    out.scales = Eigen::VectorXd::Zero(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double ss = (data.col(j).array() - out.means(j)).square().sum();
        out.scales(j) = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (out.scales(j) > kConstantTolerance) {
            out.kept.push_back(j);
        }
    }
    const auto p = static_cast<Eigen::Index>(out.kept.size());
    if (p == 0 || n < 2) {
        out.scores.resize(n, 0);
        out.loadings.resize(p, 0);
        out.explained.resize(0);
        return out;
    }
    Eigen::MatrixXd z(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = out.kept[static_cast<std::size_t>(j)];
        z.col(j) = (data.col(col).array() - out.means(col)) / out.scales(col);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const double total = s.squaredNorm();
    const Eigen::Index keep = std::clamp<Eigen::Index>(components, 0, s.size());
    out.scores = svd.matrixU().leftCols(keep) * s.head(keep).asDiagonal();
    out.loadings = svd.matrixV().leftCols(keep);
    out.explained = total > 0.0 ? Eigen::VectorXd(s.head(keep).array().square() / total)
                                : Eigen::VectorXd::Zero(keep);
    return out;
}

Eigen::MatrixXd reconstruct(const PcaResult &result) {
    return result.scores * result.loadings.transpose();
}

bool BatchScreenReport::flagged(const std::string &candidate) const {
    return std::any_of(rows.begin(), rows.end(), [&](const BatchScreenRow &r) {
        return r.candidate == candidate && r.flagged;
    });
}

BatchScreenReport pca_batch_screen(const Eigen::MatrixXd &features,
                                   const std::vector<BatchCandidate> &candidates, int k,
                                   double alpha) {
    if (features.rows() < 10) {
        throw Error(ErrorCode::TooFewRecords, "batch screen needs at least 10 records");
    }
    BatchScreenReport report;
    for (const auto &candidate : candidates) {
        if (candidate.labels.size() != static_cast<std::size_t>(features.rows())) {
            throw Error(ErrorCode::InvalidArgument,
                        "candidate '" + candidate.name + "' has the wrong number of labels",
                        candidate.name);
        }
        auto rows = screen_one(features, candidate, k, report.warnings);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    finish(report, alpha);
    return report;
}

BatchScreenReport pca_batch_screen(const Cohort &cohort,
                                   const std::vector<std::string> &candidate_vars, int k,
                                   double alpha) {
    const auto n = static_cast<Eigen::Index>(cohort.records.size());
    if (n < 10) {
        throw Error(ErrorCode::TooFewRecords, "batch screen needs at least 10 records");
    }
    BatchScreenReport report;
    for (const auto &name : candidate_vars) {
        BatchCandidate candidate{name, {}};
        candidate.labels.reserve(cohort.records.size());
        if (name == "hospital_id") {
            for (const auto &r : cohort.records) {
                candidate.labels.push_back(r.hospital_id);
            }
        } else if (name == "tumor_n_stage") {
            for (const auto &r : cohort.records) {
                candidate.labels.push_back(r.tumor_n_stage);
            }
        } else {
            const FieldInfo *field = find_field(name);
            if (field == nullptr) {
                throw Error(ErrorCode::UnknownVariable, "unknown batch candidate '" + name + "'",
                            name);
            }
            std::vector<double> present;
            for (const auto &r : cohort.records) {
                if (!field->is_missing(r)) {
                    present.push_back(*field->get(r));
                }
            }
            const std::set<double> distinct(present.begin(), present.end());
            std::vector<double> cuts;
            if (distinct.size() > kMaxDistinctForGrouping) {
                for (double pct : {25.0, 50.0, 75.0}) {
                    cuts.push_back(nearest_rank_percentile(present, pct));
                }
            }
            for (const auto &r : cohort.records) {
                if (field->is_missing(r)) {
                    candidate.labels.emplace_back();
                    continue;
                }
                const double v = *field->get(r);
                if (cuts.empty()) {
                    candidate.labels.push_back(csv::number(v));
                } else {
                    const auto bin = std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin();
                    candidate.labels.push_back("Q" + std::to_string(bin + 1));
                }
            }
        }

        std::vector<const FieldInfo *> columns;
        for (const auto &var : cohort.variables) {
            if (var != name) {
                columns.push_back(find_field(var));
            }
        }
        Eigen::MatrixXd features(n, static_cast<Eigen::Index>(columns.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < columns.size(); ++j) {
                features(i, static_cast<Eigen::Index>(j)) =
                    columns[j]->get(cohort.records[static_cast<std::size_t>(i)]).value_or(0.0);
            }
        }
        auto rows = screen_one(features, candidate, k, report.warnings);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    finish(report, alpha);
    return report;
}

void write_batch_screen_csv(const BatchScreenReport &report, std::ostream &out) {
    csv::write_row(out, {"candidate", "component", "variance_explained", "kruskal_wallis_h",
                         "p_value", "q_value", "flagged"});
    for (const auto &row : report.rows) {
        csv::write_row(out, {row.candidate, std::to_string(row.component),
                             csv::number(row.variance_explained), csv::number(row.statistic),
                             csv::number(row.p_value), csv::number(row.q_value),
                             row.flagged ? "true" : "false"});
    }
}

const std::vector<std::string> &default_batch_candidates() {
    static const std::vector<std::string> candidates{
        "hospital_id", "age_years", "tumor_t_stage", "psa_at_diagnosis", "treatment_group",
        "diabetes",    "cvd",       "alcohol",       "smoking"};
    return candidates;
}

} // namespace edpredict
