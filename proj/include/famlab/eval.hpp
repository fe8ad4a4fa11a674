#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "famlab/scoring.hpp"

namespace famlab::eval {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Novel images are the positive class throughout.
struct RocResult {
    double auroc = 0.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::vector<RocPoint> curve;
    std::size_t n_known = 0;
    std::size_t n_novel = 0;
};

struct ReplicationSummary {
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> values;
};

/// Mann-Whitney statistic: fraction of (novel, known) pairs where the novel
/// score is larger, ties counted 1/2.
double mann_whitney(std::span<const double> novel, std::span<const double> known);

/// AUROC and the ROC curve from a threshold sweep over distinct scores.
RocResult auroc(std::span<const double> scores, std::span<const std::int64_t> groups);
RocResult auroc(const scoring::NoveltyScores& scores, std::span<const std::int64_t> groups);

double trapezoid_area(std::span<const RocPoint> curve);

/// Percentile bootstrap (2.5 / 97.5) resampling each group independently with
/// replacement. Resample r draws from rng::stream(seed, r).
RocResult bootstrap_ci(std::span<const double> scores, std::span<const std::int64_t> groups, int resamples,
                       std::uint64_t seed);
RocResult bootstrap_ci(const scoring::NoveltyScores& scores, std::span<const std::int64_t> groups, int resamples,
                       std::uint64_t seed);

/// Mean and sample standard deviation (n - 1); sd is 0 for a single value.
ReplicationSummary aggregate_replications(std::span<const double> values);

/// Threshold tau with a fraction id_fpr of known scores above it: the type-7
/// (1 - id_fpr) quantile of the known scores.
double novelty_threshold(std::span<const double> known_scores, double id_fpr);

struct AccuracyPoint {
    std::size_t rank = 0;
    std::size_t image = 0;
    double score = 0.0;
    double raw = 0.0;
    double smoothed = 0.0;
};

struct AccuracyCurve {
    double threshold = 0.0;
    double id_fpr = 0.05;
    double lowess_f = 0.25;
    std::vector<AccuracyPoint> points;
};

/// Novel images sorted by ascending score; raw accuracy is 1 when score > tau,
/// smoothed with LOWESS over the rank index.
AccuracyCurve accuracy_curve(std::span<const double> scores, std::span<const std::int64_t> groups,
                             double id_fpr = 0.05, double lowess_f = 0.25, int lowess_iterations = 3);

}  // namespace famlab::eval
