// edpredict: command-line front end for the ED risk models and the
// development pipeline. Data goes to stdout, diagnostics to stderr.

#include "edpredict/batch_screen.hpp"
#include "edpredict/cohort.hpp"
#include "edpredict/csv.hpp"
#include "edpredict/evaluation.hpp"
#include "edpredict/model_card.hpp"
#include "edpredict/pipeline.hpp"
#include "edpredict/service.hpp"
#include "edpredict/split.hpp"
#include "edpredict/synth.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using namespace edpredict;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 1;

int report(const Error &error) {
    std::cerr << error_to_json(error).dump() << '\n';
    return kExitValidation;
}

nlohmann::json read_json_file(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
}

/// Output stream for `--out`; "-" or empty means stdout.
class Output {
public:
    explicit Output(const std::string &path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) {
                throw Error(ErrorCode::UnreadableFile, "cannot write " + path);
            }
        }
    }
    std::ostream &stream() { return file_.is_open() ? file_ : std::cout; }
    bool is_stdout() const { return !file_.is_open(); }

private:
    std::ofstream file_;
};

HorizonMonths parse_horizon(int months) {
    return horizon_from_months(months);
}

// ---------------------------------------------------------------- predict

struct PredictOptions {
    std::string cards;
    std::string model;
    std::string input;
    bool apply_calibration = false;
    std::map<std::string, double> fields;
    std::string n_stage;
};

int cmd_predict(const PredictOptions &opt) {
    const auto service = PredictionService::from_directory(resolve_cards_dir(opt.cards));
    nlohmann::json record = nlohmann::json::object();
    if (!opt.input.empty()) {
        record = read_json_file(opt.input);
        // accept either a bare record or a full request body
        if (record.is_object() && record.contains("record")) {
            record = record.at("record");
        }
    }
    for (const auto &[name, value] : opt.fields) {
        const FieldInfo *field = find_field(name);
        if (field->kind != FieldKind::Real && value == std::floor(value)) {
            record[name] = static_cast<long long>(value);
        } else {
            record[name] = value;
        }
    }
    if (!opt.n_stage.empty()) {
        record["tumor_n_stage"] = opt.n_stage;
    }
    const nlohmann::json request = {
        {"model", opt.model}, {"record", record}, {"apply_calibration", opt.apply_calibration}};
    std::cout << service.predict(request, true).dump(2) << '\n';
    return 0;
}

// --------------------------------------------------------------- pipeline

struct PipelineOptions {
    PipelineConfig config;
    int horizon = 12;
    std::uint64_t seed = 42;
};

int cmd_pipeline(PipelineOptions opt) {
    opt.config.horizon = parse_horizon(opt.horizon);
    opt.config.fit.rng_seed = opt.seed;
    try {
        const PipelineSummary summary = run_pipeline(opt.config);
        for (const auto &w : summary.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        std::cout << to_json(summary).dump(2) << '\n';
        return 0;
    } catch (const StageError &e) {
        auto body = error_to_json(e);
        body["stage"] = e.stage();
        std::cerr << body.dump() << '\n';
        return kExitStage;
    }
}

// --------------------------------------------------------------- nomogram

int cmd_nomogram(const std::string &cards, const std::string &model, const std::string &out,
                 std::size_t samples) {
    const auto service = PredictionService::from_directory(resolve_cards_dir(cards));
    const ModelCard card = service.resolve(model, true);
    const NomogramTable table = nomogram(card, samples);
    Output output(out);
    auto &os = output.stream();
    // one CSV, three row kinds: per-variable span, per-code tick, total-points scale
    csv::write_row(os, {"section", "variable", "code", "points", "eta", "p_retained"});
    for (const auto &axis : table.axes) {
        csv::write_row(os, {"axis", axis.variable, "", csv::number(axis.max_points), "", ""});
    }
    for (const auto &axis : table.axes) {
        for (const auto &[code, points] : axis.ticks) {
            csv::write_row(os,
                           {"tick", axis.variable, std::to_string(code), csv::number(points), "", ""});
        }
    }
    for (const auto &m : table.mapping) {
        csv::write_row(os, {"total", "", "", csv::number(m.total_points), csv::number(m.eta),
                            csv::number(m.p_retained)});
    }
    return 0;
}

// ------------------------------------------------------------------ synth

struct SynthOptions {
    std::string cards;
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n;
    std::optional<std::size_t> n_hospitals;
    std::string out;
    bool dump_spec = false;
};

int cmd_synth(const SynthOptions &opt) {
    const fs::path cards_dir = resolve_cards_dir(opt.cards);
    SynthSpec spec = opt.spec.empty() ? default_synth_spec(cards_dir)
                                      : spec_from_json(read_json_file(opt.spec), cards_dir);
    if (opt.seed) {
        spec.rng_seed = *opt.seed;
    }
    if (opt.n) {
        spec.n_patients = *opt.n;
    }
    if (opt.n_hospitals) {
        spec.n_hospitals = *opt.n_hospitals;
    }
    validate(spec);
    if (opt.dump_spec) {
        Output output(opt.out);
        output.stream() << spec_to_json(spec).dump(2) << '\n';
        return 0;
    }
    const SyntheticCohort cohort = generate(spec);
    Output output(opt.out);
    write_cohort_csv(cohort.records, cohort.treatment_text, output.stream());
    (output.is_stdout() ? std::cerr : std::cout) << summary_table(cohort.records);
    return 0;
}

// ------------------------------------------------------------ split/screen

int cmd_split(const std::string &cohort_csv, double target, double tolerance,
              std::uint64_t seed, const std::string &out) {
    const Cohort cohort = load_cohort(cohort_csv);
    const SplitAssignment split = split_hospitals(cohort, target, tolerance, seed);
    if (split.warning) {
        std::cerr << "warning: train fraction " << split.train_fraction << " outside "
                  << target << " +/- " << tolerance << '\n';
    }
    Output output(out);
    write_split_csv(split, output.stream());
    std::cerr << "train fraction " << split.train_fraction << " (" << split.train_hospitals.size()
              << " train / " << split.test_hospitals.size() << " test hospitals)\n";
    return 0;
}

int cmd_screen(const std::string &cohort_csv, int horizon, double threshold, double alpha,
               int components, std::vector<std::string> candidates, const std::string &out) {
    const Cohort modeling =
        apply_missingness_policy(load_cohort(cohort_csv), threshold, parse_horizon(horizon));
    if (candidates.empty()) {
        candidates = default_batch_candidates();
    }
    const BatchScreenReport report = pca_batch_screen(modeling, candidates, components, alpha);
    for (const auto &w : report.warnings) {
        std::cerr << "warning: " << w << '\n';
    }
    Output output(out);
    write_batch_screen_csv(report, output.stream());
    return 0;
}

// ------------------------------------------------------------------ serve

int cmd_serve(const std::string &cards, const std::string &host, int port) {
    const fs::path dir = resolve_cards_dir(cards);
    const auto service = PredictionService::from_directory(dir);
    httplib::Server server;
    mount_routes(server, service);
    std::cerr << "serving " << service.cards().size() << " model(s) from " << dir.string()
              << " on " << host << ':' << port << std::endl;
    if (!server.listen(host, port)) {
        std::cerr << "cannot listen on " << host << ':' << port << '\n';
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Erectile dysfunction risk models: prediction, nomograms and model development"};
    app.require_subcommand(1);
    std::function<int()> action;

    // predict
    PredictOptions predict;
    auto *p = app.add_subcommand("predict", "Predict retained erectile function for one patient");
    p->add_option("--cards", predict.cards, "Model card directory");
    p->add_option("--model", predict.model, "Card name (ed-1y, ed-2y) or card JSON path")->required();
    p->add_option("--input", predict.input, "JSON file holding the patient record");
    p->add_flag("--apply-calibration", predict.apply_calibration,
                "Add the card's recalibrated intercept offset");
    for (const auto &field : model_fields()) {
        const std::string name(field.name);
        p->add_option_function<double>(
            "--" + name, [&predict, name](double v) { predict.fields[name] = v; }, name);
    }
    p->add_option("--tumor_n_stage", predict.n_stage, "Nodal stage label");
    p->callback([&] { action = [&] { return cmd_predict(predict); }; });

    // pipeline
    PipelineOptions pipeline;
    pipeline.config.out_dir = "pipeline_out";
    auto *pl = app.add_subcommand("pipeline", "Develop, evaluate and calibrate a model from a cohort");
    pl->add_option("--cohort", pipeline.config.cohort_csv, "Cohort CSV")->required();
    pl->add_option("--horizon", pipeline.horizon, "Outcome horizon in months")
        ->check(CLI::IsMember({12, 24}));
    pl->add_option("--seed", pipeline.seed, "Bootstrap seed");
    pl->add_option("--out", pipeline.config.out_dir, "Artifact directory");
    pl->add_option("--threads", pipeline.config.fit.threads, "Bootstrap worker threads")
        ->check(CLI::PositiveNumber);
    pl->add_option("--bootstrap", pipeline.config.fit.bootstrap_replicates, "Bootstrap replicates")
        ->check(CLI::PositiveNumber);
    pl->add_option("--missing-threshold", pipeline.config.variable_missing_threshold,
                   "Drop variables missing in more than this share of records")
        ->check(CLI::Range(0.0, 1.0));
    pl->add_option("--train-target", pipeline.config.train_target)->check(CLI::Range(0.0, 1.0));
    pl->add_option("--split-tolerance", pipeline.config.split_tolerance);
    pl->add_option("--alpha", pipeline.config.alpha, "FDR level")->check(CLI::Range(0.0, 1.0));
    pl->add_option("--bins", pipeline.config.calibration_bins, "Calibration bins")
        ->check(CLI::PositiveNumber);
    pl->callback([&] { action = [&] { return cmd_pipeline(pipeline); }; });

    // nomogram
    std::string nomo_cards, nomo_model, nomo_out;
    std::size_t nomo_samples = 256;
    auto *n = app.add_subcommand("nomogram", "Write a model's point scales as CSV");
    n->add_option("--cards", nomo_cards);
    n->add_option("--model", nomo_model)->required();
    n->add_option("--out", nomo_out, "Output file (default stdout)");
    n->add_option("--samples", nomo_samples, "Rows in the total-points table")
        ->check(CLI::Range(2, 100000));
    n->callback([&] {
        action = [&] { return cmd_nomogram(nomo_cards, nomo_model, nomo_out, nomo_samples); };
    });

    // synth
    SynthOptions synth;
    auto *s = app.add_subcommand("synth", "Generate a synthetic cohort CSV");
    s->add_option("--cards", synth.cards);
    s->add_option("--spec", synth.spec, "Synthesis spec JSON (default: built-in)");
    s->add_option("--seed", synth.seed);
    s->add_option("--n", synth.n, "Number of patients");
    s->add_option("--n-hospitals", synth.n_hospitals);
    s->add_option("--out", synth.out, "Output CSV (default stdout)");
    s->add_flag("--dump-spec", synth.dump_spec, "Print the effective spec as JSON instead");
    s->callback([&] { action = [&] { return cmd_synth(synth); }; });

    // split
    std::string split_cohort, split_out;
    double split_target = 0.75, split_tolerance = 0.05;
    std::uint64_t split_seed = 0;
    auto *sp = app.add_subcommand("split", "Hospital-disjoint train/test split");
    sp->add_option("--cohort", split_cohort)->required();
    sp->add_option("--train-target", split_target)->check(CLI::Range(0.0, 1.0));
    sp->add_option("--tolerance", split_tolerance);
    sp->add_option("--seed", split_seed, "Tie-break seed for equal-size hospitals");
    sp->add_option("--out", split_out);
    sp->callback([&] {
        action = [&] {
            return cmd_split(split_cohort, split_target, split_tolerance, split_seed, split_out);
        };
    });

    // screen
    std::string screen_cohort, screen_out;
    int screen_horizon = 12, screen_components = 2;
    double screen_threshold = kDefaultMissingVariableThreshold, screen_alpha = 0.05;
    std::vector<std::string> screen_candidates;
    auto *sc = app.add_subcommand("screen", "PCA batch-effect screen");
    sc->add_option("--cohort", screen_cohort)->required();
    sc->add_option("--horizon", screen_horizon)->check(CLI::IsMember({12, 24}));
    sc->add_option("--missing-threshold", screen_threshold)->check(CLI::Range(0.0, 1.0));
    sc->add_option("--alpha", screen_alpha)->check(CLI::Range(0.0, 1.0));
    sc->add_option("--components", screen_components)->check(CLI::PositiveNumber);
    sc->add_option("--candidate", screen_candidates, "Grouping variable (repeatable)");
    sc->add_option("--out", screen_out);
    sc->callback([&] {
        action = [&] {
            return cmd_screen(screen_cohort, screen_horizon, screen_threshold, screen_alpha,
                              screen_components, screen_candidates, screen_out);
        };
    });

    // serve
    std::string serve_cards, serve_host = "127.0.0.1";
    int serve_port = 8080;
    auto *sv = app.add_subcommand("serve", "Serve the prediction HTTP API");
    sv->add_option("--cards", serve_cards);
    sv->add_option("--host", serve_host);
    sv->add_option("--port", serve_port)->check(CLI::Range(1, 65535));
    sv->callback([&] { action = [&] { return cmd_serve(serve_cards, serve_host, serve_port); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }
    try {
        return action();
    } catch (const Error &e) {
        return report(e);
    } catch (const std::exception &e) {
        std::cerr << nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}
