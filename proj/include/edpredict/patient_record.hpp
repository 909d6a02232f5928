#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace edpredict {

enum class HorizonMonths : int { OneYear = 12, TwoYears = 24 };

HorizonMonths horizon_from_months(int months);

/// One patient's baseline clinical and PROM variables plus observed outcomes.
///
/// Ordinal fields with a declared missing code store that code (0) when the
/// source cell is empty. `std::nullopt` means the value was never supplied,
/// which is distinct from "recorded as missing".
struct PatientRecord {
    std::string patient_id;
    std::string hospital_id;
    std::optional<int> age_years;
    std::optional<int> treatment_group;
    std::optional<int> hormone_therapy;
    std::optional<int> tumor_t_stage;
    std::string tumor_n_stage;
    std::optional<double> psa_at_diagnosis;
    std::optional<int> isup_grade_group;
    std::optional<int> cvd;
    std::optional<int> diabetes;
    std::optional<int> charlson_simplified;
    std::optional<int> smoking;
    std::optional<int> alcohol;
    std::optional<int> erection_frequency_baseline;
    std::optional<int> erection_quality_baseline;
    std::optional<int> lack_of_energy;
    std::optional<int> abd_pelvic_rectal_pain;
    std::optional<int> outcome_1y;
    std::optional<int> outcome_2y;

    std::optional<int> outcome(HorizonMonths horizon) const {
        return horizon == HorizonMonths::OneYear ? outcome_1y : outcome_2y;
    }

    bool operator==(const PatientRecord &) const = default;
};

enum class FieldKind { Integer, Real, Ordinal, Binary };

/// Static description of a numeric PatientRecord field.
struct FieldInfo {
    std::string_view name;
    FieldKind kind;
    double min_value;
    double max_value;
    std::optional<int> missing_code;
    std::optional<int> PatientRecord::*int_member = nullptr;
    std::optional<double> PatientRecord::*real_member = nullptr;

    /// Numeric value, or nullopt when absent.
    std::optional<double> get(const PatientRecord &record) const;
    void set(PatientRecord &record, std::optional<double> value) const;
    /// Absent, or equal to the declared missing code.
    bool is_missing(const PatientRecord &record) const;
    bool in_domain(double value) const;
};

/// Numeric baseline fields that may enter a model, in schema order.
std::span<const FieldInfo> model_fields();

const FieldInfo *find_field(std::string_view name);

/// Column names of the cohort CSV, in order.
const std::vector<std::string> &cohort_columns();

/// Throws Error{OutOfRangeCode} naming the first field outside its domain.
void validate(const PatientRecord &record);

/// Flat JSON object keyed by field name. Unknown keys are rejected with
/// UnknownVariable; values are range-checked.
PatientRecord record_from_json(const nlohmann::json &object);
nlohmann::json record_to_json(const PatientRecord &record);

} // namespace edpredict
