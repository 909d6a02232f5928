#include "edpredict/patient_record.hpp"

#include "edpredict/error.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace edpredict {

namespace {

using PR = PatientRecord;

constexpr double kMaxPsa = 1.0e5;

const std::array<FieldInfo, 15> kFields{{
    {"age_years", FieldKind::Integer, 0, 130, std::nullopt, &PR::age_years},
    {"treatment_group", FieldKind::Ordinal, 1, 4, 0, &PR::treatment_group},
    {"hormone_therapy", FieldKind::Binary, 0, 1, std::nullopt, &PR::hormone_therapy},
    {"tumor_t_stage", FieldKind::Ordinal, 1, 3, 0, &PR::tumor_t_stage},
    {"psa_at_diagnosis", FieldKind::Real, 0, kMaxPsa, std::nullopt, nullptr, &PR::psa_at_diagnosis},
    {"isup_grade_group", FieldKind::Ordinal, 1, 5, 0, &PR::isup_grade_group},
    {"cvd", FieldKind::Binary, 0, 1, std::nullopt, &PR::cvd},
    {"diabetes", FieldKind::Binary, 0, 1, std::nullopt, &PR::diabetes},
    {"charlson_simplified", FieldKind::Ordinal, 1, 3, 0, &PR::charlson_simplified},
    {"smoking", FieldKind::Ordinal, 1, 3, 0, &PR::smoking},
    {"alcohol", FieldKind::Ordinal, 1, 3, 0, &PR::alcohol},
    {"erection_frequency_baseline", FieldKind::Ordinal, 1, 5, 0, &PR::erection_frequency_baseline},
    {"erection_quality_baseline", FieldKind::Ordinal, 1, 4, 0, &PR::erection_quality_baseline},
    {"lack_of_energy", FieldKind::Ordinal, 1, 5, 0, &PR::lack_of_energy},
    {"abd_pelvic_rectal_pain", FieldKind::Ordinal, 1, 5, 0, &PR::abd_pelvic_rectal_pain},
}};

std::optional<int> parse_outcome(const nlohmann::json &value, std::string_view name) {
    if (value.is_null()) {
        return std::nullopt;
    }
    if (!value.is_number_integer()) {
        throw Error(ErrorCode::OutOfRangeCode, std::string(name) + " must be an integer 1..5",
                    std::string(name));
    }
    const int answer = value.get<int>();
    if (answer < 1 || answer > 5) {
        throw Error(ErrorCode::OutOfRangeCode, std::string(name) + " must be in 1..5",
                    std::string(name));
    }
    return answer;
}

} // namespace

HorizonMonths horizon_from_months(int months) {
    if (months == 12) {
        return HorizonMonths::OneYear;
    }
    if (months == 24) {
        return HorizonMonths::TwoYears;
    }
    throw Error(ErrorCode::InvalidArgument,
                "horizon must be 12 or 24 months, got " + std::to_string(months), "horizon");
}

std::optional<double> FieldInfo::get(const PatientRecord &record) const {
    if (int_member != nullptr) {
        const auto &v = record.*int_member;
        return v ? std::optional<double>(*v) : std::nullopt;
    }
    return record.*real_member;
}

void FieldInfo::set(PatientRecord &record, std::optional<double> value) const {
    if (int_member != nullptr) {
        record.*int_member =
            value ? std::optional<int>(static_cast<int>(std::lround(*value))) : std::nullopt;
    } else {
        record.*real_member = value;
    }
}

bool FieldInfo::is_missing(const PatientRecord &record) const {
    const auto v = get(record);
    return !v || (missing_code && *v == static_cast<double>(*missing_code));
}

bool FieldInfo::in_domain(double value) const {
    if (!std::isfinite(value)) {
        return false;
    }
    if (kind != FieldKind::Real && value != std::floor(value)) {
        return false;
    }
    if (missing_code && value == static_cast<double>(*missing_code)) {
        return true;
    }
    return value >= min_value && value <= max_value;
}

std::span<const FieldInfo> model_fields() { return kFields; }

const FieldInfo *find_field(std::string_view name) {
    for (const auto &field : kFields) {
        if (field.name == name) {
            return &field;
        }
    }
    return nullptr;
}

const std::vector<std::string> &cohort_columns() {
    static const std::vector<std::string> columns = [] {
        std::vector<std::string> out{"patient_id", "hospital_id"};
        for (const auto &field : kFields) {
            out.emplace_back(field.name);
            if (field.name == "tumor_t_stage") {
                out.emplace_back("tumor_n_stage");
            }
        }
        out.emplace_back("outcome_1y");
        out.emplace_back("outcome_2y");
        return out;
    }();
    return columns;
}

void validate(const PatientRecord &record) {
    for (const auto &field : kFields) {
        const auto v = field.get(record);
        if (v && !field.in_domain(*v)) {
            throw Error(ErrorCode::OutOfRangeCode,
                        std::string(field.name) + " value " + std::to_string(*v) +
                            " is outside its declared range",
                        std::string(field.name));
        }
    }
    for (const auto &[name, outcome] :
         {std::pair{"outcome_1y", record.outcome_1y}, std::pair{"outcome_2y", record.outcome_2y}}) {
        if (outcome && (*outcome < 1 || *outcome > 5)) {
            throw Error(ErrorCode::OutOfRangeCode, std::string(name) + " must be in 1..5", name);
        }
    }
}

PatientRecord record_from_json(const nlohmann::json &object) {
    if (!object.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "record must be a JSON object");
    }
    PatientRecord record;
    for (const auto &[key, value] : object.items()) {
        if (key == "patient_id" || key == "hospital_id" || key == "tumor_n_stage") {
            std::string text = value.is_string() ? value.get<std::string>()
                               : value.is_null() ? std::string{}
                                                 : value.dump();
            if (key == "patient_id") {
                record.patient_id = std::move(text);
            } else if (key == "hospital_id") {
                record.hospital_id = std::move(text);
            } else {
                record.tumor_n_stage = std::move(text);
            }
            continue;
        }
        if (key == "outcome_1y") {
            record.outcome_1y = parse_outcome(value, key);
            continue;
        }
        if (key == "outcome_2y") {
            record.outcome_2y = parse_outcome(value, key);
            continue;
        }
        const FieldInfo *field = find_field(key);
        if (field == nullptr) {
            throw Error(ErrorCode::UnknownVariable, "unknown record field '" + key + "'", key);
        }
        if (value.is_null()) {
            continue;
        }
        if (!value.is_number()) {
            throw Error(ErrorCode::OutOfRangeCode, key + " must be numeric", key);
        }
        const double v = value.get<double>();
        if (!field->in_domain(v)) {
            throw Error(ErrorCode::OutOfRangeCode,
                        key + " value " + value.dump() + " is outside its declared range", key);
        }
        field->set(record, v);
    }
    return record;
}

nlohmann::json record_to_json(const PatientRecord &record) {
    nlohmann::json out = nlohmann::json::object();
    out["patient_id"] = record.patient_id;
    out["hospital_id"] = record.hospital_id;
    for (const auto &field : kFields) {
        const auto v = field.get(record);
        if (!v) {
            out[std::string(field.name)] = nullptr;
        } else if (field.kind == FieldKind::Real) {
            out[std::string(field.name)] = *v;
        } else {
            out[std::string(field.name)] = static_cast<int>(*v);
        }
    }
    out["tumor_n_stage"] = record.tumor_n_stage;
    out["outcome_1y"] = record.outcome_1y ? nlohmann::json(*record.outcome_1y) : nlohmann::json();
    out["outcome_2y"] = record.outcome_2y ? nlohmann::json(*record.outcome_2y) : nlohmann::json();
    return out;
}

} // namespace edpredict
