#pragma once

#include "edpredict/error.hpp"
#include "edpredict/model_card.hpp"
#include "edpredict/patient_record.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace testing {

inline const std::filesystem::path kCardsDir = ED_TEST_CARDS_DIR;
inline const std::filesystem::path kDataDir = ED_TEST_DATA_DIR;
inline const std::filesystem::path kFixtureDir = ED_TEST_FIXTURE_DIR;

/// Code of the Error thrown by `fn`, or nullopt if it returns normally.
template <typename Fn>
std::optional<edpredict::ErrorCode> error_code_of(Fn &&fn) {
    try {
        fn();
    } catch (const edpredict::Error &e) {
        return e.code();
    }
    return std::nullopt;
}

inline edpredict::PatientRecord record_with_all(int code) {
    edpredict::PatientRecord r;
    for (const auto &field : edpredict::model_fields()) {
        field.set(r, code);
    }
    return r;
}

/// No active therapy, good baseline function, low-risk tumour.
inline edpredict::PatientRecord healthy_nat_record() {
    edpredict::PatientRecord r = record_with_all(0);
    r.treatment_group = 4;
    r.erection_quality_baseline = 4;
    r.erection_frequency_baseline = 5;
    r.isup_grade_group = 1;
    r.tumor_t_stage = 1;
    r.hormone_therapy = 0;
    r.cvd = 0;
    r.diabetes = 0;
    r.lack_of_energy = 1;
    r.alcohol = 3;
    return r;
}

inline std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::filesystem::path scratch_dir(const std::string &name) {
    auto dir = std::filesystem::temp_directory_path() / ("edpredict-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing
