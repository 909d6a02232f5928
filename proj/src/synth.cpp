#include "edpredict/synth.hpp"

#include "edpredict/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace edpredict {

namespace {

using Rng = boost::random::mt19937_64;

const std::vector<std::string> &categorical_fields() {
    static const std::vector<std::string> fields{
        "treatment_group", "tumor_t_stage", "isup_grade_group",
        "cvd",             "diabetes",      "charlson_simplified",
        "smoking",         "alcohol",       "erection_frequency_baseline",
        "erection_quality_baseline", "lack_of_energy", "abd_pelvic_rectal_pain"};
    return fields;
}

double uniform(Rng &rng) { return boost::random::uniform_01<double>()(rng); }

template <typename Key>
Key draw(const std::map<Key, double> &weights, Rng &rng) {
    const double u = uniform(rng);
    double cumulative = 0.0;
    for (const auto &[key, p] : weights) {
        cumulative += p;
        if (u < cumulative) {
            return key;
        }
    }
    return std::prev(weights.end())->first;
}

void check_distribution(const std::map<std::string, double> &weights, const std::string &name) {
    double sum = 0.0;
    for (const auto &[k, p] : weights) {
        if (!(p >= 0.0)) {
            throw Error(ErrorCode::InfeasibleSpec, name + " has a negative probability", name);
        }
        sum += p;
    }
    if (weights.empty() || std::abs(sum - 1.0) > 1e-6) {
        throw Error(ErrorCode::InfeasibleSpec, name + " probabilities must sum to 1", name);
    }
}

std::map<std::string, double> keyed(const std::map<int, double> &weights) {
    std::map<std::string, double> out;
    for (const auto &[k, p] : weights) {
        out[std::to_string(k)] = p;
    }
    return out;
}

std::string pad(std::size_t value, int width) {
    std::string digits = std::to_string(value);
    if (static_cast<int>(digits.size()) < width) {
        digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    }
    return digits;
}

std::string treatment_description(int group, bool hormone, Rng &rng) {
    const bool variant = uniform(rng) < 0.5;
    std::string text;
    switch (group) {
    case 1: text = variant ? "RP+LND" : "RP"; break;
    case 2: text = variant ? "EBRT+LND" : "EBRT"; break;
    case 3: text = "BT"; break;
    default: return variant ? "WW" : "AS";
    }
    if (hormone) {
        text += "+HT";
    }
    return text;
}

ModelCard card_from_spec_value(const nlohmann::json &value,
                               const std::filesystem::path &cards_dir) {
    if (value.is_object()) {
        return card_from_json(value);
    }
    if (!value.is_string()) {
        throw Error(ErrorCode::InfeasibleSpec, "generating card must be a name, path or object");
    }
    const std::string ref = value.get<std::string>();
    const std::filesystem::path as_path(ref);
    if (as_path.has_extension()) {
        return load_card(as_path.is_absolute() ? as_path : cards_dir / as_path);
    }
    return load_card(cards_dir / (ref + ".json"));
}

} // namespace

SynthSpec default_synth_spec(const std::filesystem::path &cards_dir) {
    SynthSpec spec;
    spec.categorical = {
        {"treatment_group", {{1, 0.329}, {2, 0.196}, {3, 0.061}, {4, 0.414}}},
        {"tumor_t_stage", {{1, 0.457}, {2, 0.414}, {3, 0.129}}},
        {"isup_grade_group",
         {{0, 0.018}, {1, 0.555}, {2, 0.233}, {3, 0.088}, {4, 0.072}, {5, 0.034}}},
        {"cvd", {{0, 0.48}, {1, 0.52}}},
        {"diabetes", {{0, 0.887}, {1, 0.113}}},
        {"charlson_simplified", {{0, 0.03}, {1, 0.55}, {2, 0.27}, {3, 0.15}}},
        {"smoking", {{0, 0.117}, {1, 0.433}, {2, 0.391}, {3, 0.059}}},
        {"alcohol", {{0, 0.114}, {1, 0.098}, {2, 0.051}, {3, 0.737}}},
        {"erection_frequency_baseline",
         {{0, 0.04}, {1, 0.57}, {2, 0.12}, {3, 0.08}, {4, 0.08}, {5, 0.11}}},
        {"erection_quality_baseline", {{0, 0.04}, {1, 0.60}, {2, 0.16}, {3, 0.10}, {4, 0.10}}},
        {"lack_of_energy", {{0, 0.03}, {1, 0.35}, {2, 0.20}, {3, 0.18}, {4, 0.14}, {5, 0.10}}},
        {"abd_pelvic_rectal_pain",
         {{0, 0.03}, {1, 0.70}, {2, 0.12}, {3, 0.08}, {4, 0.05}, {5, 0.02}}},
    };
    spec.n_stage = {{"N1", 0.579}, {"NX", 0.421}};
    spec.hormone_by_treatment = {{1, 0.05}, {2, 0.45}, {3, 0.10}, {4, 0.0}};
    spec.combination_rate = 0.016;
    spec.missingness_rates = {{"outcome_2y", 0.21}};
    spec.generating_card = load_card(cards_dir / "ed-1y.json");
    spec.generating_card_2y = load_card(cards_dir / "ed-2y.json");
    return spec;
}

void validate(const SynthSpec &spec) {
    if (spec.n_hospitals < 2) {
        throw Error(ErrorCode::InfeasibleSpec, "need at least two hospitals", "n_hospitals");
    }
    if (spec.n_hospitals > spec.n_patients) {
        throw Error(ErrorCode::InfeasibleSpec, "more hospitals than patients", "n_hospitals");
    }
    if (!(spec.zipf_exponent >= 0.0)) {
        throw Error(ErrorCode::InfeasibleSpec, "zipf_exponent must be >= 0", "zipf_exponent");
    }
    for (const auto &name : categorical_fields()) {
        const auto it = spec.categorical.find(name);
        if (it == spec.categorical.end()) {
            throw Error(ErrorCode::InfeasibleSpec, "no marginal for " + name, name);
        }
        check_distribution(keyed(it->second), name);
        const FieldInfo &field = *find_field(name);
        for (const auto &[code, p] : it->second) {
            if (!field.in_domain(code)) {
                throw Error(ErrorCode::InfeasibleSpec,
                            name + " code " + std::to_string(code) + " is out of range", name);
            }
        }
    }
    check_distribution(spec.n_stage, "tumor_n_stage");
    for (const auto &[group, p] : spec.hormone_by_treatment) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorCode::InfeasibleSpec, "hormone_by_treatment must be in [0, 1]",
                        "hormone_by_treatment");
        }
    }
    if (!(spec.combination_rate >= 0.0 && spec.combination_rate < 1.0)) {
        throw Error(ErrorCode::InfeasibleSpec, "combination_rate must be in [0, 1)",
                    "combination_rate");
    }
    for (const auto &[name, rate] : spec.missingness_rates) {
        if (!(rate >= 0.0 && rate <= 1.0)) {
            throw Error(ErrorCode::InfeasibleSpec, "missingness rate must be in [0, 1]", name);
        }
        if (name != "outcome_1y" && name != "outcome_2y" && find_field(name) == nullptr) {
            throw Error(ErrorCode::InfeasibleSpec, "missingness for unknown field " + name, name);
        }
    }
    if (!(spec.age_years.sd > 0.0) || !(spec.psa_at_diagnosis.mean > 0.0) ||
        !(spec.psa_at_diagnosis.sd > 0.0)) {
        throw Error(ErrorCode::InfeasibleSpec, "continuous marginals need positive moments");
    }
}

std::vector<std::size_t> zipf_hospital_sizes(std::size_t n_patients, std::size_t n_hospitals,
                                             double exponent) {
    std::vector<double> weights(n_hospitals);
    for (std::size_t k = 0; k < n_hospitals; ++k) {
        weights[k] = std::pow(static_cast<double>(k + 1), -exponent);
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const std::size_t spare = n_patients - n_hospitals; // one patient reserved per hospital
    std::vector<std::size_t> sizes(n_hospitals, 1);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < n_hospitals; ++k) {
        const double share = static_cast<double>(spare) * weights[k] / total;
        const auto whole = static_cast<std::size_t>(std::floor(share));
        sizes[k] += whole;
        assigned += whole;
        remainders.emplace_back(share - static_cast<double>(whole), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < spare; ++i, ++assigned) {
        ++sizes[remainders[i % remainders.size()].second];
    }
    return sizes;
}

SyntheticCohort generate(const SynthSpec &spec) {
    validate(spec);
    Rng rng(spec.rng_seed);
    boost::random::normal_distribution<double> normal(0.0, 1.0);

    const double psa_sigma2 = std::log(1.0 + std::pow(spec.psa_at_diagnosis.sd /
                                                          spec.psa_at_diagnosis.mean, 2));
    const double psa_mu = std::log(spec.psa_at_diagnosis.mean) - 0.5 * psa_sigma2;

    const auto sizes = zipf_hospital_sizes(spec.n_patients, spec.n_hospitals, spec.zipf_exponent);
    const int hospital_width = static_cast<int>(std::to_string(spec.n_hospitals).size());
    const int patient_width = std::max(5, static_cast<int>(std::to_string(spec.n_patients).size()));
    static const std::vector<std::string> combinations{"RP+EBRT", "EBRT+BT", "RP+BT", "HT"};

    SyntheticCohort out;
    out.records.reserve(spec.n_patients);
    out.treatment_text.reserve(spec.n_patients);
    std::size_t patient = 0;
    for (std::size_t h = 0; h < sizes.size(); ++h) {
        for (std::size_t i = 0; i < sizes[h]; ++i) {
            PatientRecord r;
            r.patient_id = "P" + pad(++patient, patient_width);
            r.hospital_id = "H" + pad(h + 1, hospital_width);
            const int treatment = draw(spec.categorical.at("treatment_group"), rng);
            r.treatment_group = treatment;
            const auto hp = spec.hormone_by_treatment.find(treatment);
            const bool hormone =
                uniform(rng) < (hp == spec.hormone_by_treatment.end() ? 0.0 : hp->second);
            r.hormone_therapy = hormone ? 1 : 0;
            const double age = spec.age_years.mean + spec.age_years.sd * normal(rng);
            r.age_years = static_cast<int>(std::clamp(std::lround(age), 18L, 110L));
            r.tumor_t_stage = draw(spec.categorical.at("tumor_t_stage"), rng);
            r.tumor_n_stage = draw(spec.n_stage, rng);
            r.psa_at_diagnosis =
                std::round(std::exp(psa_mu + std::sqrt(psa_sigma2) * normal(rng)) * 100.0) / 100.0;
            r.isup_grade_group = draw(spec.categorical.at("isup_grade_group"), rng);
            r.cvd = draw(spec.categorical.at("cvd"), rng);
            r.diabetes = draw(spec.categorical.at("diabetes"), rng);
            r.charlson_simplified = draw(spec.categorical.at("charlson_simplified"), rng);
            r.smoking = draw(spec.categorical.at("smoking"), rng);
            r.alcohol = draw(spec.categorical.at("alcohol"), rng);
            r.erection_frequency_baseline =
                draw(spec.categorical.at("erection_frequency_baseline"), rng);
            r.erection_quality_baseline =
                draw(spec.categorical.at("erection_quality_baseline"), rng);
            r.lack_of_energy = draw(spec.categorical.at("lack_of_energy"), rng);
            r.abd_pelvic_rectal_pain = draw(spec.categorical.at("abd_pelvic_rectal_pain"), rng);

            std::string text;
            if (uniform(rng) < spec.combination_rate) {
                const auto pick = static_cast<std::size_t>(uniform(rng) *
                                                           static_cast<double>(combinations.size()));
                text = combinations[std::min(pick, combinations.size() - 1)];
            } else {
                text = treatment_description(treatment, hormone, rng);
            }

            auto draw_answer = [&](const ModelCard &card) {
                const double p = evaluate(card, r).p_retained;
                if (uniform(rng) < p) {
                    return 2 + std::min(3, static_cast<int>(uniform(rng) * 4.0));
                }
                return 1;
            };
            r.outcome_1y = draw_answer(spec.generating_card);
            if (spec.generating_card_2y) {
                r.outcome_2y = draw_answer(*spec.generating_card_2y);
            }

            for (const auto &[name, rate] : spec.missingness_rates) {
                if (rate <= 0.0 || !(uniform(rng) < rate)) {
                    continue;
                }
                if (name == "outcome_1y") {
                    r.outcome_1y.reset();
                } else if (name == "outcome_2y") {
                    r.outcome_2y.reset();
                } else {
                    const FieldInfo &field = *find_field(name);
                    field.set(r, field.missing_code
                                     ? std::optional<double>(*field.missing_code)
                                     : std::nullopt);
                }
            }
            out.records.push_back(std::move(r));
            out.treatment_text.push_back(std::move(text));
        }
    }
    return out;
}

double expected_prevalence(const SynthSpec &spec, std::size_t samples) {
    SynthSpec mc = spec;
    mc.n_patients = samples;
    mc.n_hospitals = std::min(spec.n_hospitals, samples);
    mc.combination_rate = 0.0;
    mc.missingness_rates.clear();
    mc.generating_card_2y.reset();
    const auto cohort = generate(mc);
    const auto ed = std::count_if(cohort.records.begin(), cohort.records.end(),
                                  [](const PatientRecord &r) { return r.outcome_1y == 1; });
    return static_cast<double>(ed) / static_cast<double>(samples);
}

SynthSpec spec_from_json(const nlohmann::json &object, const std::filesystem::path &cards_dir) {
    SynthSpec spec = default_synth_spec(cards_dir);
    if (!object.is_object()) {
        throw Error(ErrorCode::InfeasibleSpec, "synth spec must be a JSON object");
    }
    try {
        if (object.contains("n_patients")) {
            spec.n_patients = object.at("n_patients").get<std::size_t>();
        }
        if (object.contains("n_hospitals")) {
            spec.n_hospitals = object.at("n_hospitals").get<std::size_t>();
        }
        if (object.contains("rng_seed")) {
            spec.rng_seed = object.at("rng_seed").get<std::uint64_t>();
        }
        if (object.contains("zipf_exponent")) {
            spec.zipf_exponent = object.at("zipf_exponent").get<double>();
        }
        if (object.contains("marginals")) {
            for (const auto &[name, table] : object.at("marginals").items()) {
                std::map<int, double> weights;
                for (const auto &[code, p] : table.items()) {
                    weights[std::stoi(code)] = p.get<double>();
                }
                spec.categorical[name] = std::move(weights);
            }
        }
        if (object.contains("tumor_n_stage")) {
            spec.n_stage = object.at("tumor_n_stage").get<std::map<std::string, double>>();
        }
        for (auto [key, target] : {std::pair{"age_years", &spec.age_years},
                                   std::pair{"psa_at_diagnosis", &spec.psa_at_diagnosis}}) {
            if (object.contains(key)) {
                target->mean = object.at(key).at("mean").get<double>();
                target->sd = object.at(key).at("sd").get<double>();
            }
        }
        if (object.contains("hormone_by_treatment")) {
            spec.hormone_by_treatment.clear();
            for (const auto &[code, p] : object.at("hormone_by_treatment").items()) {
                spec.hormone_by_treatment[std::stoi(code)] = p.get<double>();
            }
        }
        if (object.contains("combination_rate")) {
            spec.combination_rate = object.at("combination_rate").get<double>();
        }
        if (object.contains("missingness_rates")) {
            spec.missingness_rates =
                object.at("missingness_rates").get<std::map<std::string, double>>();
        }
        if (object.contains("generating_card")) {
            spec.generating_card = card_from_spec_value(object.at("generating_card"), cards_dir);
        }
        if (object.contains("generating_card_2y")) {
            const auto &v = object.at("generating_card_2y");
            if (v.is_null()) {
                spec.generating_card_2y.reset();
            } else {
                spec.generating_card_2y = card_from_spec_value(v, cards_dir);
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::InfeasibleSpec, std::string("malformed synth spec: ") + e.what());
    } catch (const std::invalid_argument &) {
        throw Error(ErrorCode::InfeasibleSpec, "marginal codes must be integers");
    }
    validate(spec);
    return spec;
}

nlohmann::ordered_json spec_to_json(const SynthSpec &spec) {
    nlohmann::ordered_json out;
    out["n_patients"] = spec.n_patients;
    out["n_hospitals"] = spec.n_hospitals;
    out["rng_seed"] = spec.rng_seed;
    out["zipf_exponent"] = spec.zipf_exponent;
    nlohmann::ordered_json marginals;
    for (const auto &[name, weights] : spec.categorical) {
        nlohmann::ordered_json table;
        for (const auto &[code, p] : weights) {
            table[std::to_string(code)] = p;
        }
        marginals[name] = std::move(table);
    }
    out["marginals"] = std::move(marginals);
    out["tumor_n_stage"] = spec.n_stage;
    out["age_years"] = {{"mean", spec.age_years.mean}, {"sd", spec.age_years.sd}};
    out["psa_at_diagnosis"] = {{"mean", spec.psa_at_diagnosis.mean},
                               {"sd", spec.psa_at_diagnosis.sd}};
    nlohmann::ordered_json hormone;
    for (const auto &[code, p] : spec.hormone_by_treatment) {
        hormone[std::to_string(code)] = p;
    }
    out["hormone_by_treatment"] = std::move(hormone);
    out["combination_rate"] = spec.combination_rate;
    out["missingness_rates"] = spec.missingness_rates;
    out["generating_card"] = spec.generating_card.name;
    out["generating_card_2y"] = spec.generating_card_2y
                                    ? nlohmann::ordered_json(spec.generating_card_2y->name)
                                    : nlohmann::ordered_json();
    return out;
}

std::string summary_table(const std::vector<PatientRecord> &records) {
    std::ostringstream out;
    const double n = static_cast<double>(records.size());
    char line[128];
    auto row = [&](const std::string &label, std::size_t count) {
        std::snprintf(line, sizeof(line), "  %-28s %6zu (%4.1f)\n", label.c_str(), count,
                      n > 0 ? 100.0 * static_cast<double>(count) / n : 0.0);
        out << line;
    };
    auto count_if = [&](auto pred) {
        return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), pred));
    };
    out << "Number of patients              " << records.size() << "\n";
    out << "Treatments (n (%))\n";
    const char *treatments[] = {"RP", "EBRT", "BT", "NAT"};
    for (int t = 1; t <= 4; ++t) {
        row(treatments[t - 1], count_if([t](const PatientRecord &r) { return r.treatment_group == t; }));
    }
    double age_sum = 0.0;
    double age_ss = 0.0;
    std::size_t age_n = 0;
    for (const auto &r : records) {
        if (r.age_years) {
            age_sum += *r.age_years;
            age_ss += static_cast<double>(*r.age_years) * *r.age_years;
            ++age_n;
        }
    }
    if (age_n > 1) {
        const double mean = age_sum / static_cast<double>(age_n);
        const double sd = std::sqrt((age_ss - static_cast<double>(age_n) * mean * mean) /
                                    static_cast<double>(age_n - 1));
        std::snprintf(line, sizeof(line), "Age (mean +- sd)                %.1f +- %.1f\n", mean, sd);
        out << line;
    }
    out << "Tumor T stage (n (%))\n";
    for (int t = 1; t <= 3; ++t) {
        row("T" + std::to_string(t),
            count_if([t](const PatientRecord &r) { return r.tumor_t_stage == t; }));
    }
    out << "ISUP grade group (n (%))\n";
    for (int g = 1; g <= 5; ++g) {
        row("Grade " + std::to_string(g),
            count_if([g](const PatientRecord &r) { return r.isup_grade_group == g; }));
    }
    row("missing", count_if([](const PatientRecord &r) { return r.isup_grade_group.value_or(0) == 0; }));
    out << "Comorbidities (n (%))\n";
    row("Cardiovascular disease", count_if([](const PatientRecord &r) { return r.cvd == 1; }));
    row("Diabetes", count_if([](const PatientRecord &r) { return r.diabetes == 1; }));
    out << "1-year outcome (n (%))\n";
    row("ED (never)", count_if([](const PatientRecord &r) { return r.outcome_1y == 1; }));
    row("retained (2-5)", count_if([](const PatientRecord &r) { return r.outcome_1y.value_or(0) >= 2; }));
    return out.str();
}

} // namespace edpredict
