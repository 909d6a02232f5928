#include "edpredict/service.hpp"

#include "edpredict/evaluation.hpp"

#include <cstdlib>

#include <httplib.h>

namespace edpredict {

namespace {

constexpr const char *kJson = "application/json; charset=utf-8";

nlohmann::json number(double value) { return round_significant(value, 10); }

} // namespace

std::filesystem::path resolve_cards_dir(const std::string &flag_value) {
    if (!flag_value.empty()) {
        return flag_value;
    }
    if (const char *env = std::getenv("ED_PREDICT_CARDS"); env != nullptr && *env != '\0') {
        return env;
    }
    return ED_DEFAULT_CARDS_DIR;
}

PredictionService::PredictionService(std::map<std::string, ModelCard> cards)
    : cards_(std::move(cards)) {}

PredictionService PredictionService::from_directory(const std::filesystem::path &dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::UnreadableFile, "card directory " + dir.string() + " not found");
    }
    std::vector<std::filesystem::path> files;
    for (const auto &entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, ModelCard> cards;
    for (const auto &file : files) {
        ModelCard card = load_card(file);
        const std::string name = card.name;
        if (!cards.emplace(name, std::move(card)).second) {
            throw Error(ErrorCode::InvalidCard, "duplicate card name '" + name + "'", name);
        }
    }
    return PredictionService(std::move(cards));
}

ModelCard PredictionService::resolve(const std::string &model, bool allow_paths) const {
    if (const auto it = cards_.find(model); it != cards_.end()) {
        return it->second;
    }
    if (allow_paths && std::filesystem::path(model).extension() == ".json") {
        return load_card(model);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model '" + model + "'", "model");
}

nlohmann::ordered_json PredictionService::predict(const nlohmann::json &request,
                                                  bool allow_paths) const {
    if (!request.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
    }
    if (!request.contains("model") || !request.at("model").is_string()) {
        throw Error(ErrorCode::MissingField, "request needs a 'model' name", "model");
    }
    if (!request.contains("record")) {
        throw Error(ErrorCode::MissingField, "request needs a 'record' object", "record");
    }
    bool calibrate = false;
    if (request.contains("apply_calibration")) {
        if (!request.at("apply_calibration").is_boolean()) {
            throw Error(ErrorCode::InvalidArgument, "apply_calibration must be a boolean",
                        "apply_calibration");
        }
        calibrate = request.at("apply_calibration").get<bool>();
    }
    ModelCard card = resolve(request.at("model").get<std::string>(), allow_paths);
    if (calibrate) {
        if (!card.recalibrated_offset) {
            throw Error(ErrorCode::InvalidArgument,
                        "model '" + card.name + "' has no recalibrated offset",
                        "apply_calibration");
        }
        card = apply_calibration_offset(card, *card.recalibrated_offset);
    }
    const PatientRecord record = record_from_json(request.at("record"));
    return prediction_to_json(card, evaluate(card, record), calibrate);
}

nlohmann::ordered_json PredictionService::models() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto &[name, card] : cards_) {
        nlohmann::ordered_json variables = nlohmann::ordered_json::array();
        for (const auto &term : card.terms) {
            nlohmann::ordered_json labels = nlohmann::ordered_json::array();
            for (const auto &[code, label] : code_labels(term.variable)) {
                if ((code >= term.min_code && code <= term.max_code) ||
                    (term.missing_code && code == *term.missing_code)) {
                    labels.push_back({{"code", code}, {"label", label}});
                }
            }
            variables.push_back({{"name", term.variable},
                                 {"min_code", term.min_code},
                                 {"max_code", term.max_code},
                                 {"missing_code", term.missing_code
                                                      ? nlohmann::ordered_json(*term.missing_code)
                                                      : nlohmann::ordered_json()},
                                 {"labels", std::move(labels)}});
        }
        out.push_back({{"name", name},
                       {"version", card.version},
                       {"horizon_months", static_cast<int>(card.horizon)},
                       {"variables", std::move(variables)}});
    }
    return out;
}

nlohmann::ordered_json PredictionService::nomogram_json(const std::string &model) const {
    const ModelCard card = resolve(model);
    return nomogram_to_json(card, nomogram(card));
}

nlohmann::ordered_json prediction_to_json(const ModelCard &card, const Prediction &prediction,
                                          bool calibration_applied) {
    nlohmann::ordered_json points = nlohmann::ordered_json::array();
    for (const auto &p : prediction.points) {
        points.push_back({{"variable", p.variable}, {"points", number(p.points)}});
    }
    nlohmann::ordered_json out;
    out["model_name"] = card.name;
    out["model_version"] = card.version;
    out["horizon_months"] = static_cast<int>(card.horizon);
    out["outcome_semantics"] = kOutcomeSemantics;
    out["calibration_applied"] = calibration_applied;
    out["eta"] = number(prediction.eta);
    out["p_retained"] = number(prediction.p_retained);
    out["p_ed"] = number(prediction.p_ed);
    out["points"] = std::move(points);
    out["total_points"] = number(prediction.total_points);
    return out;
}

nlohmann::ordered_json nomogram_to_json(const ModelCard &card, const NomogramTable &table) {
    nlohmann::ordered_json axes = nlohmann::ordered_json::array();
    for (const auto &axis : table.axes) {
        nlohmann::ordered_json ticks = nlohmann::ordered_json::array();
        for (const auto &[code, points] : axis.ticks) {
            ticks.push_back({{"code", code}, {"points", number(points)}});
        }
        axes.push_back({{"variable", axis.variable},
                        {"coefficient", axis.coefficient},
                        {"min_code", axis.min_code},
                        {"max_code", axis.max_code},
                        {"reference_code", axis.reference_code},
                        {"max_points", number(axis.max_points)},
                        {"ticks", std::move(ticks)}});
    }
    nlohmann::ordered_json mapping = nlohmann::ordered_json::array();
    for (const auto &m : table.mapping) {
        mapping.push_back({{"total_points", number(m.total_points)},
                           {"eta", number(m.eta)},
                           {"p_retained", number(m.p_retained)}});
    }
    nlohmann::ordered_json out;
    out["model"] = card.name;
    out["horizon_months"] = static_cast<int>(card.horizon);
    out["points_per_eta"] = number(table.points_per_eta);
    out["eta_at_zero_points"] = number(table.eta_at_zero_points);
    out["max_total_points"] = number(table.max_total_points);
    out["axes"] = std::move(axes);
    out["mapping"] = std::move(mapping);
    return out;
}

nlohmann::ordered_json error_to_json(const Error &error) {
    nlohmann::ordered_json out;
    out["error"] = std::string(to_string(error.code()));
    out["message"] = error.what();
    if (!error.field().empty()) {
        out["field"] = error.field();
    }
    return out;
}

void mount_routes(httplib::Server &server, const PredictionService &service) {
    server.Get("/healthz", [](const httplib::Request &, httplib::Response &res) {
        res.set_content("ok", "text/plain; charset=utf-8");
    });

    server.Get("/api/v1/models", [&service](const httplib::Request &, httplib::Response &res) {
        res.set_content(service.models().dump(), kJson);
    });

    server.Get(R"(/api/v1/nomogram/([A-Za-z0-9._-]+))",
               [&service](const httplib::Request &req, httplib::Response &res) {
                   const std::string model = req.matches[1];
                   if (!service.cards().contains(model)) {
                       res.status = 404;
                       res.set_content(
                           error_to_json(Error(ErrorCode::InvalidArgument,
                                               "unknown model '" + model + "'", "model"))
                               .dump(),
                           kJson);
                       return;
                   }
                   try {
                       res.set_content(service.nomogram_json(model).dump(), kJson);
                   } catch (const Error &e) {
                       res.status = 400;
                       res.set_content(error_to_json(e).dump(), kJson);
                   }
               });

    server.Post("/api/v1/predict", [&service](const httplib::Request &req, httplib::Response &res) {
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error &e) {
            res.status = 400;
            res.set_content(
                error_to_json(Error(ErrorCode::InvalidArgument,
                                    std::string("request body is not JSON: ") + e.what()))
                    .dump(),
                kJson);
            return;
        }
        try {
            res.set_content(service.predict(body).dump(), kJson);
        } catch (const Error &e) {
            res.status = 400;
            res.set_content(error_to_json(e).dump(), kJson);
        }
    });
}

} // namespace edpredict
