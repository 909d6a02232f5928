#pragma once

#include "edpredict/error.hpp"
#include "edpredict/logistic.hpp"
#include "edpredict/patient_record.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace edpredict {

struct PipelineConfig {
    std::filesystem::path cohort_csv;
    std::filesystem::path out_dir;
    HorizonMonths horizon = HorizonMonths::OneYear;
    double variable_missing_threshold = 0.30;
    double train_target = 0.75;
    double split_tolerance = 0.05;
    double alpha = 0.05;
    std::size_t calibration_bins = 10;
    FitConfig fit;
};

/// Failure inside a named pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const Error &cause)
        : Error(cause.code(), cause.what(), cause.field()), stage_(std::move(stage)) {}
    const std::string &stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineSummary {
    std::size_t records = 0;
    std::size_t train_records = 0;
    std::size_t test_records = 0;
    double train_fraction = 0.0;
    std::vector<std::string> selected;
    double train_auc = 0.0;
    double test_auc = 0.0;
    double recalibrated_offset = 0.0;
    std::vector<std::string> artifacts;
    std::vector<std::string> warnings;
};

/// ingest -> map treatments -> missingness -> binarize -> batch screen ->
/// split -> univariate -> bootstrap RFE -> evaluate -> calibrate, writing
/// every artifact into `out_dir`. Throws StageError.
PipelineSummary run_pipeline(const PipelineConfig &config);

nlohmann::ordered_json to_json(const PipelineSummary &summary);

} // namespace edpredict
