#include "edpredict/cohort.hpp"
#include "edpredict/synth.hpp"
#include "test_support.hpp"

#include <numeric>
#include <set>
#include <sstream>

#include <doctest.h>

using namespace edpredict;
using testing::error_code_of;

namespace {

SynthSpec defaults() { return default_synth_spec(testing::kCardsDir); }

std::string as_csv(const SyntheticCohort &c) {
    std::ostringstream out;
    write_cohort_csv(c.records, c.treatment_text, out);
    return out.str();
}

ModelCard constant_card(double intercept) {
    ModelCard card;
    card.name = "constant";
    card.intercept = intercept;
    return card;
}

} // namespace

TEST_CASE("default cohort shape") {
    SynthSpec spec = defaults();
    spec.rng_seed = 1;
    const auto cohort = generate(spec);
    CHECK(cohort.records.size() == 848);
    std::set<std::string> hospitals;
    std::set<std::string> ids;
    for (const auto &r : cohort.records) {
        hospitals.insert(r.hospital_id);
        ids.insert(r.patient_id);
        CHECK_NOTHROW(validate(r));
    }
    CHECK(hospitals.size() == 69);
    CHECK(ids.size() == 848);
}

TEST_CASE("same seed, same bytes; different seed, different cohort") {
    SynthSpec spec = defaults();
    spec.rng_seed = 9;
    const std::string a = as_csv(generate(spec));
    CHECK(a == as_csv(generate(spec)));
    spec.rng_seed = 10;
    CHECK(a != as_csv(generate(spec)));
}

TEST_CASE("no-active-therapy share tracks the published marginal") {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SynthSpec spec = defaults();
        spec.rng_seed = seed;
        const auto cohort = generate(spec);
        const auto nat = std::count_if(cohort.records.begin(), cohort.records.end(),
                                       [](const PatientRecord &r) { return r.treatment_group == 4; });
        total += static_cast<double>(nat) / static_cast<double>(cohort.records.size());
    }
    CHECK(std::fabs(total / 50.0 - 0.414) <= 0.03);
}

TEST_CASE("outcome prevalence follows the generating card") {
    SynthSpec spec = defaults();
    CHECK(std::fabs(expected_prevalence(spec) - 0.46) <= 0.02);

    spec.generating_card = constant_card(10.0);
    spec.n_patients = 100000;
    spec.n_hospitals = 100;
    const auto cohort = generate(spec);
    const auto retained = std::count_if(cohort.records.begin(), cohort.records.end(),
                                        [](const PatientRecord &r) { return r.outcome_1y != 1; });
    CHECK(static_cast<double>(retained) / 100000.0 > 0.9999);

    spec.n_patients = 848;
    spec.n_hospitals = 69;
    spec.generating_card = constant_card(-30.0);
    CHECK(expected_prevalence(spec, 20000) == doctest::Approx(1.0));
    spec.generating_card = constant_card(30.0);
    CHECK(expected_prevalence(spec, 20000) == doctest::Approx(0.0));
}

TEST_CASE("Zipf hospital sizes") {
    const auto sizes = zipf_hospital_sizes(848, 69, 1.0);
    CHECK(sizes.size() == 69);
    CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == 848);
    CHECK(*std::min_element(sizes.begin(), sizes.end()) >= 1);
    CHECK(std::is_sorted(sizes.rbegin(), sizes.rend()));
    const auto flat = zipf_hospital_sizes(100, 10, 0.0);
    CHECK(std::all_of(flat.begin(), flat.end(), [](std::size_t s) { return s == 10; }));
}

TEST_CASE("infeasible specs are rejected") {
    SynthSpec spec = defaults();
    spec.categorical["cvd"] = {{0, 0.7}, {1, 0.7}};
    CHECK(error_code_of([&] { validate(spec); }) == ErrorCode::InfeasibleSpec);
    spec = defaults();
    spec.n_hospitals = 1;
    CHECK(error_code_of([&] { validate(spec); }) == ErrorCode::InfeasibleSpec);
    spec = defaults();
    spec.n_patients = 10;
    CHECK(error_code_of([&] { generate(spec); }) == ErrorCode::InfeasibleSpec);
}

TEST_CASE("spec JSON round trip") {
    SynthSpec spec = defaults();
    spec.rng_seed = 77;
    spec.combination_rate = 0.1;
    const SynthSpec back = spec_from_json(spec_to_json(spec), testing::kCardsDir);
    CHECK(spec_to_json(back).dump() == spec_to_json(spec).dump());
    CHECK(as_csv(generate(back)) == as_csv(generate(spec)));

    // the checked-in spec file describes the built-in defaults
    std::ifstream in(testing::kDataDir / "default_synth_spec.json");
    const SynthSpec file = spec_from_json(nlohmann::json::parse(in), testing::kCardsDir);
    CHECK(spec_to_json(file).dump() == spec_to_json(defaults()).dump());
}

TEST_CASE("written cohort reloads to the same records") {
    SynthSpec spec = defaults();
    spec.rng_seed = 5;
    spec.missingness_rates["psa_at_diagnosis"] = 0.1;
    spec.missingness_rates["erection_quality_baseline"] = 0.1;
    const auto cohort = generate(spec);
    const auto dir = testing::scratch_dir("synth");
    {
        std::ofstream out(dir / "c.csv");
        write_cohort_csv(cohort.records, cohort.treatment_text, out);
    }
    const Cohort loaded = load_cohort(dir / "c.csv");
    std::size_t matched = 0;
    for (const auto &r : loaded.records) {
        const auto it = std::find_if(cohort.records.begin(), cohort.records.end(),
                                     [&](const PatientRecord &g) { return g.patient_id == r.patient_id; });
        REQUIRE(it != cohort.records.end());
        CHECK(*it == r);
        ++matched;
    }
    CHECK(matched + loaded.exclusions.size() == cohort.records.size());
    for (const auto &e : loaded.exclusions) {
        CHECK((e.reason == "combination of treatments" || e.reason == "none of the treatment options"));
    }
}

TEST_CASE("summary table") {
    SynthSpec spec = defaults();
    const std::string table = summary_table(generate(spec).records);
    CHECK(table.find("NAT") != std::string::npos);
    CHECK(table.find("848") != std::string::npos);
}
