#include "edpredict/evaluation.hpp"

#include "edpredict/csv.hpp"
#include "edpredict/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

namespace edpredict {

namespace {

void require_both_classes(std::span<const int> labels) {
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
        throw Error(ErrorCode::SingleClass, "evaluation needs both outcome classes");
    }
}

void require_same_size(std::size_t a, std::size_t b) {
    if (a != b) {
        throw Error(ErrorCode::InvalidArgument, "scores and labels differ in length");
    }
}

} // namespace

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
    require_same_size(scores.size(), labels.size());
    require_both_classes(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto positives = static_cast<std::uint64_t>(std::count(labels.begin(), labels.end(), 1));
    const std::uint64_t negatives = labels.size() - positives;

    RocResult out;
    out.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    // twice the concordant pair count; ties contribute one half-pair
    std::uint64_t doubled_area = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::uint64_t group_tp = 0;
        std::uint64_t group_fp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? group_tp : group_fp) += 1;
            ++j;
        }
        doubled_area += group_fp * (2 * tp + group_tp);
        tp += group_tp;
        fp += group_fp;
        out.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                              static_cast<double>(tp) / static_cast<double>(positives),
                              scores[order[i]]});
        i = j;
    }
    out.auc = static_cast<double>(doubled_area) /
              (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
    return out;
}

double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
    }
    return area;
}

Confusion confusion_at(std::span<const double> p_ed, std::span<const int> ed_labels,
                       double threshold) {
    require_same_size(p_ed.size(), ed_labels.size());
    require_both_classes(ed_labels);
    Confusion c;
    for (std::size_t i = 0; i < p_ed.size(); ++i) {
        const bool predicted = p_ed[i] >= threshold;
        const bool actual = ed_labels[i] == 1;
        if (predicted && actual) {
            ++c.tp;
        } else if (predicted) {
            ++c.fp;
        } else if (actual) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    c.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    c.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(p_ed.size());
    return c;
}

std::vector<CalibrationBin> calibration_curve(std::span<const double> predicted,
                                              std::span<const int> labels, std::size_t bins) {
    require_same_size(predicted.size(), labels.size());
    if (bins == 0 || predicted.size() < bins) {
        throw Error(ErrorCode::TooFewRecords, "calibration curve needs at least one row per bin");
    }
    const std::size_t n = predicted.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });

    std::vector<CalibrationBin> out;
    std::size_t start = 0;
    for (std::size_t b = 1; b <= bins && start < n; ++b) {
        std::size_t end = b == bins ? n : (b * n + bins / 2) / bins;
        end = std::max(end, start + 1);
        // extend through ties so equal predictions share a bin
        while (end < n && predicted[order[end]] == predicted[order[end - 1]]) {
            ++end;
        }
        if (end <= start) {
            continue;
        }
        CalibrationBin bin;
        double sum_p = 0.0;
        std::size_t events = 0;
        for (std::size_t k = start; k < end; ++k) {
            sum_p += predicted[order[k]];
            events += labels[order[k]] == 1 ? 1 : 0;
        }
        bin.n = end - start;
        bin.mean_predicted = sum_p / static_cast<double>(bin.n);
        bin.observed_rate = static_cast<double>(events) / static_cast<double>(bin.n);
        out.push_back(bin);
        start = end;
    }
    return out;
}

double calibrate_offset(std::span<const double> eta, std::span<const int> labels) {
    require_same_size(eta.size(), labels.size());
    require_both_classes(labels);
    const double observed = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double n = static_cast<double>(labels.size());

    // score(delta) = sum(y) - sum(sigmoid(eta + delta)) is strictly decreasing
    auto score = [&](double delta, double *slope) {
        double expected = 0.0;
        double weight = 0.0;
        for (double e : eta) {
            const double p = sigmoid(e + delta);
            expected += p;
            weight += p * (1.0 - p);
        }
        if (slope != nullptr) {
            *slope = -weight;
        }
        return observed - expected;
    };

    const double mean_eta = std::accumulate(eta.begin(), eta.end(), 0.0) / n;
    double delta = std::log(observed / (n - observed)) - mean_eta;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        double slope = 0.0;
        const double s = score(delta, &slope);
        if (std::abs(s) <= 1e-12 * n) {
            return delta;
        }
        (s > 0.0 ? lo : hi) = delta;
        double next = slope < 0.0 ? delta - s / slope : std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(next) || next <= lo || next >= hi) {
            // bisection inside the bracket, or expansion when one side is open
            if (std::isfinite(lo) && std::isfinite(hi)) {
                next = 0.5 * (lo + hi);
            } else {
                next = s > 0.0 ? delta + 1.0 + std::abs(delta) : delta - 1.0 - std::abs(delta);
            }
        }
        if (next == delta) {
            return delta;
        }
        delta = next;
    }
    throw Error(ErrorCode::NonConvergence, "calibration offset did not converge in 100 steps");
}

double calibrate_in_the_large(const ModelCard &card, std::span<const PatientRecord> records,
                              std::span<const int> retained_labels) {
    const ModelCard base = apply_calibration_offset(card, 0.0);
    std::vector<double> eta;
    eta.reserve(records.size());
    for (const auto &record : records) {
        eta.push_back(evaluate(base, record).eta);
    }
    return calibrate_offset(eta, retained_labels);
}

EvalReport evaluate_predictions(std::span<const double> p_retained,
                                std::span<const int> retained_labels, double threshold,
                                std::size_t bins) {
    require_same_size(p_retained.size(), retained_labels.size());
    std::vector<double> p_ed(p_retained.size());
    std::vector<int> ed(p_retained.size());
    for (std::size_t i = 0; i < p_retained.size(); ++i) {
        p_ed[i] = 1.0 - p_retained[i];
        ed[i] = retained_labels[i] == 1 ? 0 : 1;
    }
    EvalReport report;
    report.threshold = threshold;
    report.confusion = confusion_at(p_ed, ed, threshold);
    report.roc = roc_auc(p_ed, ed);
    report.calibration =
        calibration_curve(p_retained, retained_labels, std::min(bins, p_retained.size()));
    return report;
}

double round_significant(double value, int digits) {
    if (!std::isfinite(value) || value == 0.0) {
        return value;
    }
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.*g", digits, value);
    return std::strtod(buffer, nullptr);
}

nlohmann::ordered_json to_json(const EvalReport &report) {
    nlohmann::ordered_json out;
    out["positive_class"] = "ED";
    out["threshold"] = report.threshold;
    const auto &c = report.confusion;
    out["tp"] = c.tp;
    out["fp"] = c.fp;
    out["tn"] = c.tn;
    out["fn"] = c.fn;
    out["sensitivity"] = round_significant(c.sensitivity);
    out["specificity"] = round_significant(c.specificity);
    out["accuracy"] = round_significant(c.accuracy);
    out["auc"] = round_significant(report.roc.auc);
    nlohmann::ordered_json roc = nlohmann::ordered_json::array();
    for (const auto &p : report.roc.points) {
        roc.push_back({round_significant(p.fpr), round_significant(p.tpr)});
    }
    out["roc_points"] = std::move(roc);
    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    for (const auto &b : report.calibration) {
        bins.push_back({{"mean_predicted", round_significant(b.mean_predicted)},
                        {"observed_rate", round_significant(b.observed_rate)},
                        {"n", b.n}});
    }
    out["calibration_bins"] = std::move(bins);
    return out;
}

void write_roc_csv(const RocResult &roc, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    csv::write_row(out, {"fpr", "tpr", "threshold"});
    for (const auto &p : roc.points) {
        csv::write_row(out, {csv::number(p.fpr), csv::number(p.tpr), csv::number(p.threshold)});
    }
}

void write_calibration_csv(
    const std::vector<std::pair<std::string, std::vector<CalibrationBin>>> &curves,
    const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    }
    csv::write_row(out, {"model", "bin", "mean_predicted", "observed_rate", "n"});
    for (const auto &[name, bins] : curves) {
        for (std::size_t i = 0; i < bins.size(); ++i) {
            csv::write_row(out, {name, std::to_string(i + 1), csv::number(bins[i].mean_predicted),
                                 csv::number(bins[i].observed_rate), std::to_string(bins[i].n)});
        }
    }
}

} // namespace edpredict
