#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "famlab/bundle.hpp"

namespace famlab::familiarity {

/// be(i, j) = z(i, j) - z_blur(i, j): positive when blurring the object
/// lowered feature j on image i.
struct BlurEffects {
    Matrix be;  // N x D
};

/// Class-averaged blurring effect over known images of each ground-truth class.
struct OnObjectScores {
    Matrix oo;  // D x K
    std::vector<std::size_t> n_per_class;
};

/// Sign of OO(j, k) crossed with the sign of w(j, k). Features whose |OO| is
/// within the threshold, or whose weight is zero, are neutral.
enum class FeatureType : std::uint8_t {
    positive_presence,
    negative_presence,
    positive_absence,
    negative_absence,
    neutral,
};

inline constexpr std::size_t kFeatureTypeCount = 5;

std::string to_string(FeatureType type);

struct FeatureTaxonomy {
    Eigen::Matrix<FeatureType, Eigen::Dynamic, Eigen::Dynamic> type;  // D x K
    double threshold = 0.02;

    FeatureType at(Eigen::Index feature, Eigen::Index cls) const { return type(feature, cls); }
    /// Number of features of each type for one class, indexed by FeatureType.
    std::array<std::size_t, kFeatureTypeCount> counts(Eigen::Index cls) const;
};

/// Shortfall of one image's class-k* logit from the reference mean, split by
/// the feature type of each term. Sums of delta(j) = cbar(j, k*) - w(j, k*) z(i, j).
struct DecompositionRecord {
    std::size_t image = 0;
    Eigen::Index cls = 0;
    double max_logit = 0.0;
    double pp = 0.0;
    double na = 0.0;
    double pa = 0.0;
    double np = 0.0;
    double neutral = 0.0;

    double total() const { return pp + na + pa + np + neutral; }
};

struct Contributions {
    Matrix mean;  // D x K, cbar
    Reference reference = Reference::ground_truth;
    std::vector<std::size_t> n_per_class;
};

BlurEffects blur_effects(const Bundle& bundle);

OnObjectScores on_object_scores(const Bundle& bundle);

FeatureTaxonomy classify_features(const OnObjectScores& oo, const ClassifierHead& head, double threshold = 0.02);

FeatureType classify(double oo, double weight, double threshold);

Contributions contributions(const Bundle& bundle, Reference reference = Reference::ground_truth);

/// c(i, j, k) = w(j, k) z(i, j) for one image and class, length D.
Vector contribution_row(const Bundle& bundle, Eigen::Index image, Eigen::Index cls);

/// Mean class-k logit over the reference images used for cbar.
double mean_reference_logit(const Bundle& bundle, const Contributions& c, Eigen::Index cls);

/// One record per selected image; the decomposition class is the argmax-logit
/// class (ties to the lower index). Records keep the order of `images`.
std::vector<DecompositionRecord> decompose(const Bundle& bundle, const FeatureTaxonomy& taxonomy,
                                           const Matrix& c_mean, std::span<const std::size_t> images);

/// Convenience: all novel images, or every image when include_known is set.
std::vector<std::size_t> select_images(const Bundle& bundle, bool include_known);

}  // namespace famlab::familiarity
