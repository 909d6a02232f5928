#pragma once

#include "edpredict/error.hpp"
#include "edpredict/model_card.hpp"

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace httplib {
class Server;
}

namespace edpredict {

/// Card directory: explicit flag, then $ED_PREDICT_CARDS, then the bundled one.
std::filesystem::path resolve_cards_dir(const std::string &flag_value = {});

/// Immutable set of model cards answering predict / models / nomogram
/// queries. Safe to share across threads.
class PredictionService {
public:
    explicit PredictionService(std::map<std::string, ModelCard> cards);

    /// Loads every *.json card in the directory; throws on any unparseable card.
    static PredictionService from_directory(const std::filesystem::path &dir);

    /// Name lookup; with `allow_paths`, values naming a .json file are loaded.
    ModelCard resolve(const std::string &model, bool allow_paths = false) const;

    /// {model, record, apply_calibration} -> PredictResponse JSON.
    nlohmann::ordered_json predict(const nlohmann::json &request, bool allow_paths = false) const;
    nlohmann::ordered_json models() const;
    nlohmann::ordered_json nomogram_json(const std::string &model) const;

    const std::map<std::string, ModelCard> &cards() const { return cards_; }

private:
    std::map<std::string, ModelCard> cards_;
};

nlohmann::ordered_json prediction_to_json(const ModelCard &card, const Prediction &prediction,
                                          bool calibration_applied);
nlohmann::ordered_json nomogram_to_json(const ModelCard &card, const NomogramTable &table);
nlohmann::ordered_json error_to_json(const Error &error);

/// Registers the HTTP routes on `server`. The service must outlive it.
void mount_routes(httplib::Server &server, const PredictionService &service);

} // namespace edpredict
