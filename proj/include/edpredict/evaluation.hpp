#pragma once

#include "edpredict/model_card.hpp"

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace edpredict {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0; // score at or above which rows count as positive
};

struct RocResult {
    std::vector<RocPoint> points; // from (0,0) to (1,1)
    double auc = 0.5;
};

/// ROC sweep over distinct score thresholds (descending). The area is the
/// Mann-Whitney pair count with ties scored 0.5, accumulated exactly in
/// integers along the sweep. Labels: 1 positive, 0 negative.
/// Throws SingleClass.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Trapezoidal area under a point sequence.
double trapezoid_area(std::span<const RocPoint> points);

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

/// Positive class is ED: a row is predicted positive when p_ed >= threshold.
/// `ed_labels` is 1 for observed ED. Throws SingleClass.
Confusion confusion_at(std::span<const double> p_ed, std::span<const int> ed_labels,
                       double threshold = 0.5);

struct CalibrationBin {
    double mean_predicted = 0.0;
    double observed_rate = 0.0;
    std::size_t n = 0;
};

/// Equal-count bins over sorted predictions; equal predictions are never
/// split across bins. Throws TooFewRecords when fewer rows than bins.
std::vector<CalibrationBin> calibration_curve(std::span<const double> predicted,
                                              std::span<const int> labels,
                                              std::size_t bins = 10);

/// Maximum-likelihood additive offset delta for sigmoid(eta_i + delta):
/// mean predicted probability equals the observed rate of label 1 at the
/// solution. Throws SingleClass or NonConvergence (over 100 Newton steps).
double calibrate_offset(std::span<const double> eta, std::span<const int> labels);

/// Offset making `card` calibrated in the large on the records. Labels are
/// 1 for retained function. The card's own calibration offset is ignored.
double calibrate_in_the_large(const ModelCard &card, std::span<const PatientRecord> records,
                              std::span<const int> retained_labels);

struct EvalReport {
    double threshold = 0.5;
    Confusion confusion;
    RocResult roc;
    std::vector<CalibrationBin> calibration;
};

/// Full report from retention probabilities and retention labels; the ED
/// orientation is applied internally (p_ed = 1 - p_retained).
EvalReport evaluate_predictions(std::span<const double> p_retained,
                                std::span<const int> retained_labels, double threshold = 0.5,
                                std::size_t bins = 10);

nlohmann::ordered_json to_json(const EvalReport &report);
void write_roc_csv(const RocResult &roc, const std::filesystem::path &path);
void write_calibration_csv(const std::vector<std::pair<std::string, std::vector<CalibrationBin>>> &curves,
                           const std::filesystem::path &path);

/// Rounds to the given number of significant digits for stable serialization.
double round_significant(double value, int digits = 10);

} // namespace edpredict
