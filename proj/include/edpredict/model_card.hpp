#pragma once

#include "edpredict/patient_record.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace edpredict {

/// One variable of a linear model: a single ordinal code times a coefficient.
struct Term {
    std::string variable;
    double coefficient = 0.0;
    int min_code = 0;
    int max_code = 0;
    std::optional<int> missing_code;

    bool operator==(const Term &) const = default;
};

inline constexpr std::string_view kOutcomeSemantics =
    "probability of retained erectile function (EPIC-26 Q10 answer 2-5)";

/// A named, versioned logistic model over PatientRecord fields.
///
/// `calibration_offset` is added to the linear predictor. Cards may also
/// carry a `recalibrated_offset` that is only applied on request.
struct ModelCard {
    std::string name;
    std::string version = "1";
    HorizonMonths horizon = HorizonMonths::OneYear;
    double intercept = 0.0;
    double calibration_offset = 0.0;
    std::optional<double> recalibrated_offset;
    std::vector<Term> terms;

    const Term *find_term(std::string_view variable) const;
    bool operator==(const ModelCard &) const = default;
};

struct TermPoints {
    std::string variable;
    double points = 0.0;
};

struct Prediction {
    double eta = 0.0;
    double p_retained = 0.0;
    double p_ed = 0.0;
    std::vector<TermPoints> points;
    double total_points = 0.0;
};

struct NomogramAxis {
    std::string variable;
    double coefficient = 0.0;
    int min_code = 0;
    int max_code = 0;
    int reference_code = 0;
    std::vector<std::pair<int, double>> ticks; // (code, points) for min_code..max_code
    double max_points = 0.0;
};

struct NomogramMapping {
    double total_points = 0.0;
    double eta = 0.0;
    double p_retained = 0.0;
};

/// Point scales for every term plus the total-points to probability table.
/// total_points = points_per_eta * (eta - eta_at_zero_points).
struct NomogramTable {
    std::vector<NomogramAxis> axes;
    double points_per_eta = 0.0;
    double eta_at_zero_points = 0.0;
    double max_total_points = 0.0;
    std::vector<NomogramMapping> mapping;
};

double sigmoid(double eta);
double logit(double p);

/// Linear predictor, logistic link and nomogram points for one record.
/// Throws UnknownVariable, MissingField or OutOfRangeCode.
Prediction evaluate(const ModelCard &card, const PatientRecord &record);

/// Copy of `card` with calibration_offset = delta. Throws NonFiniteDelta.
ModelCard apply_calibration_offset(const ModelCard &card, double delta);

/// Throws DegenerateCard when no term has a nonzero span.
NomogramTable nomogram(const ModelCard &card, std::size_t mapping_samples = 256);

/// Throws InvalidCard / UnknownVariable on schema violations.
ModelCard card_from_json(const nlohmann::json &object);
nlohmann::json card_to_json(const ModelCard &card);
ModelCard load_card(const std::filesystem::path &path);
void save_card(const ModelCard &card, const std::filesystem::path &path);

/// Answer labels for a variable's codes, as shown on the nomogram legends.
std::vector<std::pair<int, std::string>> code_labels(std::string_view variable);

/// Shortest decimal string that round-trips the double.
std::string format_decimal(double value);

} // namespace edpredict
