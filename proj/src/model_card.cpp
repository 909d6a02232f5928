#include "edpredict/model_card.hpp"

#include "edpredict/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace edpredict {

namespace {

// Axes wider than this are ticked at evenly spaced codes instead of every code.
constexpr int kMaxTicksPerAxis = 51;

double span_of(const Term &term) {
    return std::abs(term.coefficient) * static_cast<double>(term.max_code - term.min_code);
}

int reference_code(const Term &term) {
    return term.coefficient >= 0.0 ? term.min_code : term.max_code;
}

double read_number(const nlohmann::json &object, const char *key, const std::string &where) {
    if (!object.contains(key) || !object.at(key).is_number()) {
        throw Error(ErrorCode::InvalidCard, where + ": '" + key + "' must be a number", key);
    }
    return object.at(key).get<double>();
}

int read_int(const nlohmann::json &object, const char *key, const std::string &where) {
    if (!object.contains(key) || !object.at(key).is_number_integer()) {
        throw Error(ErrorCode::InvalidCard, where + ": '" + key + "' must be an integer", key);
    }
    return object.at(key).get<int>();
}

} // namespace

const Term *ModelCard::find_term(std::string_view variable) const {
    const auto it = std::find_if(terms.begin(), terms.end(),
                                 [&](const Term &t) { return t.variable == variable; });
    return it == terms.end() ? nullptr : &*it;
}

double sigmoid(double eta) {
    if (eta >= 0.0) {
        return 1.0 / (1.0 + std::exp(-eta));
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Prediction evaluate(const ModelCard &card, const PatientRecord &record) {
    std::vector<double> codes;
    codes.reserve(card.terms.size());
    double eta = card.intercept + card.calibration_offset;
    for (const auto &term : card.terms) {
        const FieldInfo *field = find_field(term.variable);
        if (field == nullptr) {
            throw Error(ErrorCode::UnknownVariable,
                        "card term '" + term.variable + "' is not a patient record field",
                        term.variable);
        }
        const auto value = field->get(record);
        if (!value) {
            throw Error(ErrorCode::MissingField, "record has no value for '" + term.variable + "'",
                        term.variable);
        }
        const bool is_missing_code =
            term.missing_code && *value == static_cast<double>(*term.missing_code);
        if (!is_missing_code && (*value < term.min_code || *value > term.max_code)) {
            throw Error(ErrorCode::OutOfRangeCode,
                        term.variable + " = " + format_decimal(*value) + " outside [" +
                            std::to_string(term.min_code) + ", " + std::to_string(term.max_code) +
                            "]",
                        term.variable);
        }
        codes.push_back(*value);
        eta += term.coefficient * *value;
    }

    Prediction out;
    out.eta = eta;
    out.p_retained = sigmoid(eta);
    out.p_ed = 1.0 - out.p_retained;

    double scale = 0.0;
    for (const auto &term : card.terms) {
        scale = std::max(scale, span_of(term));
    }
    out.points.reserve(card.terms.size());
    for (std::size_t j = 0; j < card.terms.size(); ++j) {
        const auto &term = card.terms[j];
        const double points =
            scale > 0.0 ? term.coefficient * (codes[j] - reference_code(term)) * 100.0 / scale
                        : 0.0;
        out.points.push_back({term.variable, points + 0.0}); // no "-0" at the reference code
        out.total_points += points;
    }
    return out;
}

ModelCard apply_calibration_offset(const ModelCard &card, double delta) {
    if (!std::isfinite(delta)) {
        throw Error(ErrorCode::NonFiniteDelta, "calibration offset must be finite");
    }
    ModelCard out = card;
    out.calibration_offset = delta;
    return out;
}

NomogramTable nomogram(const ModelCard &card, std::size_t mapping_samples) {
    double scale = 0.0;
    for (const auto &term : card.terms) {
        scale = std::max(scale, span_of(term));
    }
    if (!(scale > 0.0)) {
        throw Error(ErrorCode::DegenerateCard,
                    "card '" + card.name + "' has no term with a nonzero point span");
    }

    NomogramTable table;
    table.points_per_eta = 100.0 / scale;
    table.eta_at_zero_points = card.intercept + card.calibration_offset;
    for (const auto &term : card.terms) {
        NomogramAxis axis;
        axis.variable = term.variable;
        axis.coefficient = term.coefficient;
        axis.min_code = term.min_code;
        axis.max_code = term.max_code;
        axis.reference_code = reference_code(term);
        const int width = term.max_code - term.min_code;
        const int stride = width + 1 > kMaxTicksPerAxis ? (width + kMaxTicksPerAxis - 2) / (kMaxTicksPerAxis - 1) : 1;
        for (int code = term.min_code; code <= term.max_code; code += stride) {
            axis.ticks.emplace_back(
                code, term.coefficient * (code - axis.reference_code) * table.points_per_eta + 0.0);
        }
        if (axis.ticks.back().first != term.max_code) {
            axis.ticks.emplace_back(term.max_code, term.coefficient *
                                                       (term.max_code - axis.reference_code) *
                                                       table.points_per_eta + 0.0);
        }
        axis.max_points = span_of(term) * table.points_per_eta;
        table.max_total_points += axis.max_points;
        table.eta_at_zero_points += term.coefficient * axis.reference_code;
        table.axes.push_back(std::move(axis));
    }

    const std::size_t samples = std::max<std::size_t>(mapping_samples, 2);
    const double eta_span = table.max_total_points / table.points_per_eta;
    table.mapping.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double fraction = static_cast<double>(i) / static_cast<double>(samples - 1);
        const double eta = table.eta_at_zero_points + fraction * eta_span;
        table.mapping.push_back({fraction * table.max_total_points, eta, sigmoid(eta)});
    }
    return table;
}

ModelCard card_from_json(const nlohmann::json &object) {
    if (!object.is_object()) {
        throw Error(ErrorCode::InvalidCard, "model card must be a JSON object");
    }
    ModelCard card;
    if (!object.contains("name") || !object.at("name").is_string() ||
        object.at("name").get<std::string>().empty()) {
        throw Error(ErrorCode::InvalidCard, "model card needs a nonempty 'name'", "name");
    }
    card.name = object.at("name").get<std::string>();
    const std::string where = "card '" + card.name + "'";
    if (object.contains("version")) {
        const auto &v = object.at("version");
        card.version = v.is_string() ? v.get<std::string>() : v.dump();
    }
    const int months = read_int(object, "horizon_months", where);
    if (months != 12 && months != 24) {
        throw Error(ErrorCode::InvalidCard, where + ": horizon_months must be 12 or 24",
                    "horizon_months");
    }
    card.horizon = horizon_from_months(months);
    card.intercept = read_number(object, "intercept", where);
    if (object.contains("calibration_offset")) {
        card.calibration_offset = read_number(object, "calibration_offset", where);
    }
    if (object.contains("recalibrated_offset") && !object.at("recalibrated_offset").is_null()) {
        card.recalibrated_offset = read_number(object, "recalibrated_offset", where);
    }
    if (!object.contains("terms") || !object.at("terms").is_array()) {
        throw Error(ErrorCode::InvalidCard, where + ": 'terms' must be an array", "terms");
    }
    std::set<std::string> seen;
    for (const auto &item : object.at("terms")) {
        if (!item.is_object() || !item.contains("variable") || !item.at("variable").is_string()) {
            throw Error(ErrorCode::InvalidCard, where + ": each term needs a 'variable'",
                        "terms");
        }
        Term term;
        term.variable = item.at("variable").get<std::string>();
        if (find_field(term.variable) == nullptr) {
            throw Error(ErrorCode::UnknownVariable,
                        where + ": term '" + term.variable + "' is not a patient record field",
                        term.variable);
        }
        if (!seen.insert(term.variable).second) {
            throw Error(ErrorCode::InvalidCard,
                        where + ": duplicate term '" + term.variable + "'", term.variable);
        }
        term.coefficient = read_number(item, "coefficient", where);
        term.min_code = read_int(item, "min_code", where);
        term.max_code = read_int(item, "max_code", where);
        if (term.min_code > term.max_code) {
            throw Error(ErrorCode::InvalidCard,
                        where + ": term '" + term.variable + "' has min_code > max_code",
                        term.variable);
        }
        if (item.contains("missing_code") && !item.at("missing_code").is_null()) {
            const int missing = read_int(item, "missing_code", where);
            if (missing != 0) {
                throw Error(ErrorCode::InvalidCard,
                            where + ": missing_code must be 0 or null", term.variable);
            }
            term.missing_code = missing;
        }
        if (!std::isfinite(term.coefficient)) {
            throw Error(ErrorCode::InvalidCard, where + ": non-finite coefficient",
                        term.variable);
        }
        card.terms.push_back(std::move(term));
    }
    return card;
}

namespace {

nlohmann::ordered_json card_to_ordered_json(const ModelCard &card) {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto &term : card.terms) {
        nlohmann::ordered_json t;
        t["variable"] = term.variable;
        t["coefficient"] = term.coefficient;
        t["min_code"] = term.min_code;
        t["max_code"] = term.max_code;
        t["missing_code"] = term.missing_code ? nlohmann::ordered_json(*term.missing_code)
                                              : nlohmann::ordered_json();
        terms.push_back(std::move(t));
    }
    nlohmann::ordered_json out;
    out["name"] = card.name;
    out["version"] = card.version;
    out["horizon_months"] = static_cast<int>(card.horizon);
    out["outcome_semantics"] = kOutcomeSemantics;
    out["intercept"] = card.intercept;
    out["calibration_offset"] = card.calibration_offset;
    out["recalibrated_offset"] = card.recalibrated_offset
                                     ? nlohmann::ordered_json(*card.recalibrated_offset)
                                     : nlohmann::ordered_json();
    out["terms"] = std::move(terms);
    return out;
}

} // namespace

nlohmann::json card_to_json(const ModelCard &card) {
    return nlohmann::json::parse(card_to_ordered_json(card).dump());
}

ModelCard load_card(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::UnreadableFile, "cannot open model card " + path.string());
    }
    nlohmann::json object;
    try {
        object = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
        throw Error(ErrorCode::InvalidCard, path.string() + ": " + e.what());
    }
    return card_from_json(object);
}

void save_card(const ModelCard &card, const std::filesystem::path &path) {
    std::ofstream file(path);
    if (!file) {
        throw Error(ErrorCode::UnreadableFile, "cannot write model card " + path.string());
    }
    file << card_to_ordered_json(card).dump(2) << '\n';
}

std::vector<std::pair<int, std::string>> code_labels(std::string_view variable) {
    using Labels = std::vector<std::pair<int, std::string>>;
    const Labels problem_scale{{0, "missing value"},    {1, "no problem"},
                               {2, "very small problem"}, {3, "small problem"},
                               {4, "moderate problem"}, {5, "big problem"}};
    const Labels yes_no{{0, "no"}, {1, "yes"}};
    if (variable == "treatment_group") {
        return {{0, "missing value"}, {1, "RP"}, {2, "EBRT"}, {3, "BT"}, {4, "NAT"}};
    }
    if (variable == "erection_quality_baseline") {
        return {{0, "missing value"},
                {1, "none at all"},
                {2, "not firm enough for sexual activity"},
                {3, "firm enough for masturbation/foreplay"},
                {4, "firm enough for intercourse"}};
    }
    if (variable == "erection_frequency_baseline") {
        return {{0, "missing value"},
                {1, "never"},
                {2, "less than half the time"},
                {3, "about half the time"},
                {4, "more than half the time"},
                {5, "whenever wanted"}};
    }
    if (variable == "isup_grade_group") {
        return {{0, "missing value"}, {1, "grade group 1"}, {2, "grade group 2"},
                {3, "grade group 3"}, {4, "grade group 4"}, {5, "grade group 5"}};
    }
    if (variable == "tumor_t_stage") {
        return {{0, "missing value"}, {1, "T1"}, {2, "T2"}, {3, "T3"}};
    }
    if (variable == "lack_of_energy" || variable == "abd_pelvic_rectal_pain") {
        return problem_scale;
    }
    if (variable == "alcohol") {
        return {{0, "missing"}, {1, "no"}, {2, "previously"}, {3, "yes"}};
    }
    if (variable == "smoking") {
        return {{0, "missing"}, {1, "never"}, {2, "former"}, {3, "current"}};
    }
    if (variable == "charlson_simplified") {
        return {{0, "missing value"}, {1, "no comorbidities"}, {2, "1 point"}, {3, ">=2 point"}};
    }
    if (variable == "hormone_therapy" || variable == "cvd" || variable == "diabetes") {
        return yes_no;
    }
    return {};
}

std::string format_decimal(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

} // namespace edpredict
