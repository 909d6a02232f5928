#include "edpredict/pipeline.hpp"

#include "edpredict/batch_screen.hpp"
#include "edpredict/cohort.hpp"
#include "edpredict/csv.hpp"
#include "edpredict/evaluation.hpp"
#include "edpredict/model_card.hpp"
#include "edpredict/rfe.hpp"
#include "edpredict/split.hpp"
#include "edpredict/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace edpredict {

namespace {

template <typename Fn>
auto stage(const char *name, Fn &&fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError &) {
        throw;
    } catch (const Error &e) {
        throw StageError(name, e);
    } catch (const std::exception &e) {
        throw StageError(name, Error(ErrorCode::InvalidArgument, e.what()));
    }
}

std::ofstream open_output(const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    return out;
}

void write_json(const nlohmann::ordered_json &value, const std::filesystem::path &path) {
    auto out = open_output(path);
    out << value.dump(2) << '\n';
}

Eigen::MatrixXd design_matrix(const std::vector<PatientRecord> &records,
                              const std::vector<std::string> &variables) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()),
                      static_cast<Eigen::Index>(variables.size()));
    for (std::size_t j = 0; j < variables.size(); ++j) {
        const FieldInfo &field = *find_field(variables[j]);
        for (std::size_t i = 0; i < records.size(); ++i) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                field.get(records[i]).value_or(0.0);
        }
    }
    return x;
}

std::vector<double> column(const std::vector<PatientRecord> &records, const FieldInfo &field) {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto &r : records) {
        out.push_back(field.get(r).value_or(0.0));
    }
    return out;
}

Term term_for(const FieldInfo &field, double coefficient,
              const std::vector<PatientRecord> &records) {
    Term term;
    term.variable = std::string(field.name);
    term.coefficient = coefficient;
    if (field.kind == FieldKind::Integer || field.kind == FieldKind::Real) {
        // continuous variables get the observed range
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto &r : records) {
            const double v = field.get(r).value_or(0.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        term.min_code = static_cast<int>(std::floor(lo));
        term.max_code = static_cast<int>(std::ceil(hi));
    } else {
        term.missing_code = field.missing_code;
        term.min_code = field.missing_code && field.name != "treatment_group" &&
                                field.name != "tumor_t_stage"
                            ? *field.missing_code
                            : static_cast<int>(field.min_value);
        term.max_code = static_cast<int>(field.max_value);
    }
    return term;
}

} // namespace

PipelineSummary run_pipeline(const PipelineConfig &config) {
    PipelineSummary summary;
    std::filesystem::create_directories(config.out_dir);
    const auto artifact = [&](const std::string &name) {
        summary.artifacts.push_back(name);
        return config.out_dir / name;
    };

    const RawCohort raw = stage("ingest", [&] { return ingest(config.cohort_csv); });
    const Cohort cohort = stage("map", [&] { return build_cohort(raw, map_treatments(raw)); });
    const Cohort modeling = stage("missing", [&] {
        return apply_missingness_policy(cohort, config.variable_missing_threshold,
                                        config.horizon);
    });
    stage("missing", [&] {
        write_exclusions_csv(modeling.exclusions, artifact("exclusions.csv"));
        return 0;
    });
    summary.records = modeling.records.size();

    const std::vector<int> retained = stage("binarize", [&] {
        std::vector<int> labels;
        labels.reserve(modeling.records.size());
        for (const auto &r : modeling.records) {
            labels.push_back(binarize_outcome(r, config.horizon) == BinaryOutcome::Function ? 1
                                                                                            : 0);
        }
        return labels;
    });

    stage("screen", [&] {
        const auto report = pca_batch_screen(modeling, default_batch_candidates(), 2, config.alpha);
        auto out = open_output(artifact("batch_screen.csv"));
        write_batch_screen_csv(report, out);
        for (const auto &row : report.rows) {
            if (row.flagged) {
                summary.warnings.push_back("batch effect flagged: " + row.candidate + " on PC" +
                                           std::to_string(row.component));
            }
        }
        for (const auto &w : report.warnings) {
            summary.warnings.push_back("batch screen: " + w);
        }
        return 0;
    });

    const SplitAssignment split = stage("split", [&] {
        auto s = split_hospitals(modeling, config.train_target, config.split_tolerance,
                                 config.fit.rng_seed);
        write_split_csv(s, artifact("split.csv"));
        return s;
    });
    if (split.warning) {
        summary.warnings.push_back("train fraction " + csv::number(split.train_fraction) +
                                   " outside target tolerance");
    }
    summary.train_fraction = split.train_fraction;

    std::vector<PatientRecord> train_records;
    std::vector<PatientRecord> test_records;
    std::vector<int> train_labels;
    std::vector<int> test_labels;
    for (std::size_t i = 0; i < modeling.records.size(); ++i) {
        const bool train = split.is_train(modeling.records[i].hospital_id);
        (train ? train_records : test_records).push_back(modeling.records[i]);
        (train ? train_labels : test_labels).push_back(retained[i]);
    }
    summary.train_records = train_records.size();
    summary.test_records = test_records.size();

    stage("split", [&] {
        auto out = open_output(artifact("split_tests.csv"));
        csv::write_row(out, {"variable", "test_used", "statistic", "p_value"});
        std::vector<std::string> n_levels;
        for (const auto &r : modeling.records) {
            n_levels.push_back(r.tumor_n_stage);
        }
        std::sort(n_levels.begin(), n_levels.end());
        n_levels.erase(std::unique(n_levels.begin(), n_levels.end()), n_levels.end());
        auto n_code = [&](const PatientRecord &r) {
            return static_cast<double>(
                std::lower_bound(n_levels.begin(), n_levels.end(), r.tumor_n_stage) -
                n_levels.begin());
        };
        for (const char *name :
             {"age_years", "tumor_t_stage", "tumor_n_stage", "psa_at_diagnosis", "isup_grade_group"}) {
            std::vector<double> a;
            std::vector<double> b;
            for (const auto &r : train_records) {
                const FieldInfo *f = find_field(name);
                a.push_back(f ? f->get(r).value_or(0.0) : n_code(r));
            }
            for (const auto &r : test_records) {
                const FieldInfo *f = find_field(name);
                b.push_back(f ? f->get(r).value_or(0.0) : n_code(r));
            }
            if (a.empty() || b.empty()) {
                continue;
            }
            const auto w = stats::wilcoxon_rank_sum(a, b);
            csv::write_row(out, {name, "wilcoxon", csv::number(w.u), csv::number(w.p_value)});
        }
        return 0;
    });

    stage("univariate", [&] {
        std::vector<stats::UnivariateResult> results;
        for (const auto &name : modeling.variables) {
            const FieldInfo &field = *find_field(name);
            std::vector<double> ed;
            std::vector<double> function;
            const auto values = column(modeling.records, field);
            for (std::size_t i = 0; i < values.size(); ++i) {
                (retained[i] ? function : ed).push_back(values[i]);
            }
            if (ed.size() < 2 || function.size() < 2) {
                throw Error(ErrorCode::SingleClass, "univariate screen needs both outcome groups");
            }
            results.push_back(stats::compare_groups(name, ed, function, config.alpha));
        }
        stats::assign_q_values(results);
        auto out = open_output(artifact("univariate.csv"));
        csv::write_row(out, {"variable", "test_used", "statistic", "p_value", "q_value"});
        for (const auto &r : results) {
            csv::write_row(out, {r.variable, stats::to_string(r.test_used),
                                 csv::number(r.statistic), csv::number(r.p_value),
                                 csv::number(r.q_value)});
        }
        return 0;
    });

    // constant columns cannot be fitted; leave them out of the candidate set
    std::vector<std::string> candidates;
    for (const auto &name : modeling.variables) {
        const auto values = column(train_records, *find_field(name));
        if (!values.empty() &&
            *std::max_element(values.begin(), values.end()) !=
                *std::min_element(values.begin(), values.end())) {
            candidates.push_back(name);
        } else {
            summary.warnings.push_back(name + " is constant in the training set");
        }
    }

    const RfeResult rfe = stage("train", [&] {
        const Eigen::MatrixXd x = design_matrix(train_records, candidates);
        Eigen::VectorXd y(static_cast<Eigen::Index>(train_labels.size()));
        for (std::size_t i = 0; i < train_labels.size(); ++i) {
            y(static_cast<Eigen::Index>(i)) = train_labels[i];
        }
        return bootstrap_rfe(x, y, candidates, config.fit);
    });
    summary.selected = rfe.selected;

    ModelCard card;
    card.name = "pipeline-ed-" + std::to_string(static_cast<int>(config.horizon)) + "m";
    card.version = "seed-" + std::to_string(config.fit.rng_seed);
    card.horizon = config.horizon;
    card.intercept = round_significant(rfe.final_model.coefficients(0));
    for (std::size_t j = 0; j < rfe.selected.size(); ++j) {
        card.terms.push_back(term_for(*find_field(rfe.selected[j]),
                                      round_significant(rfe.final_model.coefficients(
                                          static_cast<Eigen::Index>(j) + 1)),
                                      modeling.records));
    }

    auto predictions = [&](const ModelCard &c, const std::vector<PatientRecord> &records) {
        std::vector<double> p;
        p.reserve(records.size());
        for (const auto &r : records) {
            p.push_back(evaluate(c, r).p_retained);
        }
        return p;
    };

    const EvalReport train_report = stage("evaluate", [&] {
        return evaluate_predictions(predictions(card, train_records), train_labels, 0.5,
                                    config.calibration_bins);
    });
    const EvalReport test_report = stage("evaluate", [&] {
        return evaluate_predictions(predictions(card, test_records), test_labels, 0.5,
                                    config.calibration_bins);
    });
    summary.train_auc = train_report.roc.auc;
    summary.test_auc = test_report.roc.auc;

    stage("evaluate", [&] {
        auto train_json = to_json(train_report);
        train_json["kind"] = "apparent";
        const auto oob = rfe.oob_accuracy_by_size.find(rfe.selected_size);
        train_json["bootstrap_oob_accuracy"] = round_significant(oob->second);
        write_json(train_json, artifact("eval_train.json"));
        auto test_json = to_json(test_report);
        test_json["kind"] = "external (hospital-disjoint)";
        write_json(test_json, artifact("eval_test.json"));
        write_roc_csv(test_report.roc, artifact("roc.csv"));

        nlohmann::ordered_json rfe_json;
        rfe_json["replicates"] = rfe.replicates;
        rfe_json["skipped_replicates"] = rfe.skipped_replicates;
        rfe_json["ranking_metric"] = "|beta| * sd(x) on the in-bag rows";
        rfe_json["size_rule"] = "max mean out-of-bag accuracy at threshold 0.5, ties to smaller";
        rfe_json["rng_seed"] = config.fit.rng_seed;
        rfe_json["ranking"] = rfe.ranking;
        rfe_json["selected_size"] = rfe.selected_size;
        rfe_json["selected"] = rfe.selected;
        nlohmann::ordered_json by_size;
        for (const auto &[size, acc] : rfe.oob_accuracy_by_size) {
            by_size[std::to_string(size)] = round_significant(acc);
        }
        rfe_json["oob_accuracy_by_size"] = std::move(by_size);
        rfe_json["final_model_converged"] = rfe.final_model.converged;
        rfe_json["final_model_separation_flag"] = rfe.final_model.separation_flag;
        write_json(rfe_json, artifact("rfe.json"));
        return 0;
    });

    stage("calibrate", [&] {
        const double delta = round_significant(calibrate_in_the_large(card, test_records, test_labels));
        card.recalibrated_offset = delta;
        summary.recalibrated_offset = delta;
        const ModelCard recalibrated = apply_calibration_offset(card, delta);
        const std::size_t bins = std::min(config.calibration_bins, test_records.size());
        write_calibration_csv(
            {{"original", calibration_curve(predictions(card, test_records), test_labels, bins)},
             {"recalibrated",
              calibration_curve(predictions(recalibrated, test_records), test_labels, bins)}},
            artifact("calibration.csv"));
        save_card(card, artifact("model_card.json"));
        return 0;
    });
    return summary;
}

nlohmann::ordered_json to_json(const PipelineSummary &summary) {
    nlohmann::ordered_json out;
    out["records"] = summary.records;
    out["train_records"] = summary.train_records;
    out["test_records"] = summary.test_records;
    out["train_fraction"] = round_significant(summary.train_fraction);
    out["selected"] = summary.selected;
    out["train_auc"] = round_significant(summary.train_auc);
    out["test_auc"] = round_significant(summary.test_auc);
    out["recalibrated_offset"] = round_significant(summary.recalibrated_offset);
    out["artifacts"] = summary.artifacts;
    out["warnings"] = summary.warnings;
    return out;
}

} // namespace edpredict
