#pragma once

#include "edpredict/patient_record.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edpredict {

/// One row of the cohort CSV, cells reordered to `cohort_columns()`.
struct RawRow {
    std::size_t line = 0;
    std::vector<std::string> cells;

    const std::string &cell(std::string_view column) const;
};

struct MalformedRow {
    std::size_t line = 0;
    std::string text;
    std::string reason;
};

struct RawCohort {
    std::filesystem::path source;
    std::vector<RawRow> rows;
    std::vector<MalformedRow> malformed;
};

struct Exclusion {
    std::string patient_id;
    std::string reason;

    bool operator==(const Exclusion &) const = default;
};

/// Loads a cohort CSV whose header names exactly the cohort columns.
/// Rows with the wrong cell count are collected in `malformed`.
/// Throws UnreadableFile, EmptyFile or MissingColumn.
RawCohort ingest(const std::filesystem::path &path);

struct TreatmentCategory {
    std::optional<int> group; // 1=RP 2=EBRT 3=BT 4=NAT; empty when excluded
    bool hormone_therapy = false;
    std::string exclusion_reason;
};

/// Maps a treatment description such as "RP+LND+HT" or a numeric code to
/// one of the four categories plus a separate hormone-therapy flag.
TreatmentCategory map_treatment(std::string_view text);

struct TreatmentMapping {
    std::vector<std::optional<int>> treatment;      // per raw row
    std::vector<std::optional<int>> hormone_therapy; // per raw row
    std::vector<Exclusion> exclusions;
};

TreatmentMapping map_treatments(const RawCohort &raw);

struct Cohort {
    std::vector<PatientRecord> records;
    std::optional<HorizonMonths> horizon;
    std::vector<Exclusion> exclusions;
    /// Candidate model variables still in play, in schema order.
    std::vector<std::string> variables;
    std::vector<std::string> dropped_variables;

    bool operator==(const Cohort &) const = default;
};

/// Parses mapped rows into records. Invalid cells, malformed rows and
/// duplicate ids become exclusions.
Cohort build_cohort(const RawCohort &raw, const TreatmentMapping &mapping);

/// ingest + map_treatments + build_cohort.
Cohort load_cohort(const std::filesystem::path &path);

inline constexpr double kDefaultMissingVariableThreshold = 0.30;

/// Horizon-specific modeling cohort: drops records without the horizon's
/// outcome, variables whose missing fraction exceeds `variable_threshold`,
/// patients whose missing count exceeds the nearest-rank 95th percentile,
/// and records lacking a value that has no missing code. The steps repeat
/// until nothing changes. Throws AllPatientsExcluded.
Cohort apply_missingness_policy(const Cohort &cohort, double variable_threshold,
                                HorizonMonths horizon);

/// Nearest-rank percentile of a sample (pct in (0, 100]).
double nearest_rank_percentile(std::vector<double> values, double pct);

enum class BinaryOutcome { ED, Function, Missing };

/// EPIC-26 Q10 answer 1 is ED, answers 2..5 retained function.
/// Throws OutOfRangeAnswer.
BinaryOutcome binarize_outcome(const PatientRecord &record, HorizonMonths horizon);

void write_exclusions_csv(const std::vector<Exclusion> &exclusions,
                          const std::filesystem::path &path);
void write_cohort_csv(const std::vector<PatientRecord> &records,
                      const std::filesystem::path &path);
void write_cohort_csv(const std::vector<PatientRecord> &records,
                      const std::vector<std::string> &treatment_text, std::ostream &out);

} // namespace edpredict
