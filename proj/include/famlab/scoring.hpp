#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "famlab/bundle.hpp"

namespace famlab::scoring {

enum class Method { max_logit, max_softmax, mahalanobis, dice };

std::string to_string(Method method);
Method parse_method(const std::string& text);

/// Per-image novelty scores. Orientation is fixed: higher means more novel.
struct NoveltyScores {
    Method method = Method::max_logit;
    Vector scores;
};

/// N x K logits, row i column k = sum_j w(j, k) z(i, j) + b(k), summed over j
/// in increasing order.
Matrix logits(const Bundle& bundle);

/// Argmax-logit class per image, ties to the lower class index.
std::vector<std::int64_t> predicted_labels(const Bundle& bundle);

/// Class assignment used for per-class means: ground-truth labels or argmax
/// predictions for known images, kNovelLabel for novel images.
std::vector<std::int64_t> reference_labels(const Bundle& bundle, Reference reference);

/// D x K mean contributions: entry (j, k) is the mean of w(j, k) z(i, j) over
/// known images whose reference class is k. Throws on an empty class.
Matrix mean_contributions(const Bundle& bundle, Reference reference);

NoveltyScores max_logit_score(const Bundle& bundle);
NoveltyScores max_softmax_score(const Bundle& bundle);

/// Class means and tied covariance of the known images.
struct GaussianModel {
    Matrix means;                     // K x D
    Eigen::MatrixXd cov;              // D x D, ridge included
    Eigen::LLT<Eigen::MatrixXd> factor;
    double ridge = 0.0;
};

/// Pooled maximum-likelihood covariance (1/N_known) plus ridge * I, with
/// ridge = ridge_scale * trace(raw) / D, or ridge_scale itself when the raw
/// covariance has zero trace.
GaussianModel fit_gaussian(const Bundle& bundle, double ridge_scale = 1e-6);

/// Minimum over classes of the squared Mahalanobis distance.
NoveltyScores mahalanobis_score(const Bundle& bundle, const GaussianModel& model);

struct DiceMask {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;  // D x K
    double keep_fraction = 0.10;
    Matrix mean_contributions;  // D x K
};

/// Number of weights kept per class: ceil(keep_fraction * D), at least 1.
Eigen::Index dice_keep_count(double keep_fraction, Eigen::Index features);

DiceMask dice_mask(const Bundle& bundle, double keep_fraction = 0.10, Reference reference = Reference::ground_truth);

/// Negated log-sum-exp of the sparsified logits.
NoveltyScores dice_score(const Bundle& bundle, const DiceMask& mask);

struct ScoreParams {
    Method method = Method::max_logit;
    double keep_fraction = 0.10;
    double ridge_scale = 1e-6;
    Reference reference = Reference::ground_truth;
};

/// Runs `params.method` on `target`. Mahalanobis means/covariance and the DICE
/// mask are estimated from the known images of `fit`.
NoveltyScores score(const Bundle& fit, const Bundle& target, const ScoreParams& params);

}  // namespace famlab::scoring
