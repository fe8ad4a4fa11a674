#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "famlab/bundle.hpp"

namespace famlab::activity {

struct NormStat {
    std::int64_t group = kKnownGroup;
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0;
};

/// Euclidean norm of each z row summarized per nonempty group (known first).
std::vector<NormStat> norm_stats(const Bundle& bundle);

struct GroupCurve {
    std::int64_t group = kKnownGroup;
    std::size_t images = 0;
    std::vector<double> mean_counts;  // one per theta
};

struct ThresholdCurve {
    std::vector<double> thetas;
    std::vector<GroupCurve> groups;
    std::vector<std::string> warnings;
};

/// Mean number of features with z(i, j) > theta, per group.
ThresholdCurve activation_curve(const Bundle& bundle, std::span<const double> thetas);

/// Mean number of features with |w(j, k) z(i, j)| > theta over images assigned
/// to class k (argmax prediction by default; ground truth covers known images
/// only). Groups without such images are omitted and noted in `warnings`.
ThresholdCurve contribution_curve(const Bundle& bundle, Eigen::Index cls, std::span<const double> thetas,
                                  Reference reference = Reference::predicted);

struct ActivityHistogram {
    double q = 0.6;
    double theta = 0.0;
    std::size_t n_known = 0;
    std::vector<double> fractions;  // per feature
};

/// theta is the type-7 q-quantile of all known-image activations pooled over
/// features; fractions count z(i, j) >= theta over known images.
ActivityHistogram activity_histogram(const Bundle& bundle, double q);

/// Mean |z(i, j)| over known images and all features.
double mean_activation_magnitude(const Bundle& bundle);

/// Evenly spaced grid from start to stop inclusive, computed as start + i * step.
std::vector<double> theta_grid(double start, double stop, double step);

}  // namespace famlab::activity
