#pragma once

#include "edpredict/model_card.hpp"
#include "edpredict/patient_record.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace edpredict {

struct NormalMarginal {
    double mean = 0.0;
    double sd = 1.0;
};

/// Distribution of a synthetic cohort. Variables are drawn independently
/// except hormone therapy, which depends on the treatment category.
struct SynthSpec {
    std::size_t n_patients = 848;
    std::size_t n_hospitals = 69;
    std::uint64_t rng_seed = 1;
    double zipf_exponent = 1.0;
    /// code -> probability for every ordinal/binary field
    std::map<std::string, std::map<int, double>> categorical;
    std::map<std::string, double> n_stage; // label -> probability
    NormalMarginal age_years{68.4, 6.7};
    NormalMarginal psa_at_diagnosis{10.9, 13.9}; // moments of a lognormal
    std::map<int, double> hormone_by_treatment;
    /// Share of rows given an unmappable treatment combination.
    double combination_rate = 0.0;
    std::map<std::string, double> missingness_rates;
    ModelCard generating_card;
    std::optional<ModelCard> generating_card_2y;
};

/// Table-1-shaped defaults with the bundled cards as outcome generators.
SynthSpec default_synth_spec(const std::filesystem::path &cards_dir);

/// Throws InfeasibleSpec.
void validate(const SynthSpec &spec);

SynthSpec spec_from_json(const nlohmann::json &object, const std::filesystem::path &cards_dir);
nlohmann::ordered_json spec_to_json(const SynthSpec &spec);

struct SyntheticCohort {
    std::vector<PatientRecord> records;
    std::vector<std::string> treatment_text; // per record, as written to CSV
};

/// Deterministic for a given spec (including seed).
SyntheticCohort generate(const SynthSpec &spec);

/// Monte Carlo share of 1-year ED (answer 1) over `samples` draws.
double expected_prevalence(const SynthSpec &spec, std::size_t samples = 100000);

/// Human-readable table of counts and shares, one line per level.
std::string summary_table(const std::vector<PatientRecord> &records);

/// Hospital sizes summing to n_patients, each at least one, Zipf-shaped.
std::vector<std::size_t> zipf_hospital_sizes(std::size_t n_patients, std::size_t n_hospitals,
                                             double exponent);

} // namespace edpredict
