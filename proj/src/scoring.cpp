#include "famlab/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "famlab/error.hpp"
#include "famlab/parallel.hpp"

namespace famlab::scoring {

namespace {

std::size_t as_size(Eigen::Index i) { return static_cast<std::size_t>(i); }

double log_sum_exp(const double* values, Eigen::Index count) {
    double peak = values[0];
    for (Eigen::Index k = 1; k < count; ++k) peak = std::max(peak, values[k]);
    double total = 0.0;
    for (Eigen::Index k = 0; k < count; ++k) total += std::exp(values[k] - peak);
    return peak + std::log(total);
}

}  // namespace

std::string to_string(Method method) {
    switch (method) {
        case Method::max_logit: return "maxlogit";
        case Method::max_softmax: return "maxsoftmax";
        case Method::mahalanobis: return "mahalanobis";
        case Method::dice: return "dice";
    }
    return "unknown";
}

Method parse_method(const std::string& text) {
    if (text == "maxlogit" || text == "max_logit") return Method::max_logit;
    if (text == "maxsoftmax" || text == "max_softmax") return Method::max_softmax;
    if (text == "mahalanobis") return Method::mahalanobis;
    if (text == "dice") return Method::dice;
    throw ValidationError("unknown method \"" + text + "\"");
}

Matrix logits(const Bundle& bundle) {
    const Eigen::Index n = bundle.images();
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    Matrix out(n, k);
    parallel_for(as_size(n), [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        for (Eigen::Index c = 0; c < k; ++c) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) sum += bundle.head.w(j, c) * bundle.z(i, j);
            out(i, c) = sum + bundle.head.b(c);
        }
    });
    return out;
}

std::vector<std::int64_t> predicted_labels(const Bundle& bundle) {
    const Matrix l = logits(bundle);
    std::vector<std::int64_t> out(as_size(l.rows()));
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < l.cols(); ++c)
            if (l(i, c) > l(i, best)) best = c;
        out[as_size(i)] = best;
    }
    return out;
}

std::vector<std::int64_t> reference_labels(const Bundle& bundle, Reference reference) {
    std::vector<std::int64_t> out = reference == Reference::ground_truth ? bundle.labels : predicted_labels(bundle);
    for (Eigen::Index i = 0; i < bundle.images(); ++i)
        if (!bundle.is_known(i)) out[as_size(i)] = kNovelLabel;
    return out;
}

Matrix mean_contributions(const Bundle& bundle, Reference reference) {
    const auto classes = reference_labels(bundle, reference);
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    Matrix sums = Matrix::Zero(d, k);
    std::vector<std::size_t> counts(as_size(k), 0);
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        const auto c = classes[as_size(i)];
        if (c < 0) continue;
        ++counts[as_size(c)];
        for (Eigen::Index j = 0; j < d; ++j) sums(j, c) += bundle.head.w(j, c) * bundle.z(i, j);
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[as_size(c)] == 0)
            throw ValidationError("empty reference class " + std::to_string(c) + " (" +
                                  (reference == Reference::ground_truth ? "ground_truth" : "predicted") + ")");
        sums.col(c) /= static_cast<double>(counts[as_size(c)]);
    }
    return sums;
}

NoveltyScores max_logit_score(const Bundle& bundle) {
    const Matrix l = logits(bundle);
    NoveltyScores out{Method::max_logit, Vector(l.rows())};
    for (Eigen::Index i = 0; i < l.rows(); ++i) out.scores(i) = -l.row(i).maxCoeff();
    return out;
}

NoveltyScores max_softmax_score(const Bundle& bundle) {
    const Matrix l = logits(bundle);
    NoveltyScores out{Method::max_softmax, Vector(l.rows())};
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double peak = l.row(i).maxCoeff();
        double total = 0.0;
        for (Eigen::Index c = 0; c < l.cols(); ++c) total += std::exp(l(i, c) - peak);
        // The top class contributes exp(0) = 1 to the shifted denominator.
        out.scores(i) = -1.0 / total;
    }
    return out;
}

GaussianModel fit_gaussian(const Bundle& bundle, double ridge_scale) {
    if (!(ridge_scale >= 0.0) || !std::isfinite(ridge_scale)) throw ValidationError("ridge_scale must be >= 0");
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();

    GaussianModel model;
    model.means = Matrix::Zero(k, d);
    std::vector<std::size_t> counts(as_size(k), 0);
    std::size_t known = 0;
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        const auto c = bundle.labels[as_size(i)];
        ++counts[as_size(c)];
        ++known;
        model.means.row(c) += bundle.z.row(i);
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[as_size(c)] < 2)
            throw ValidationError("class with < 2 samples: class " + std::to_string(c) + " has " +
                                  std::to_string(counts[as_size(c)]));
        model.means.row(c) /= static_cast<double>(counts[as_size(c)]);
    }

    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd centered(d);
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        centered = (bundle.z.row(i) - model.means.row(bundle.labels[as_size(i)])).transpose();
        raw.noalias() += centered * centered.transpose();
    }
    raw /= static_cast<double>(known);
    raw = 0.5 * (raw + raw.transpose());

    const double mean_variance = raw.trace() / static_cast<double>(d);
    model.ridge = mean_variance > 0.0 ? ridge_scale * mean_variance : ridge_scale;
    model.cov = raw;
    model.cov.diagonal().array() += model.ridge;
    model.factor.compute(model.cov);
    if (model.factor.info() != Eigen::Success)
        throw NumericalError("covariance factorization failed (ridge " + std::to_string(model.ridge) + ")");
    return model;
}

NoveltyScores mahalanobis_score(const Bundle& bundle, const GaussianModel& model) {
    const Eigen::Index d = bundle.features();
    if (model.means.cols() != d || model.cov.rows() != d)
        throw ValidationError("mahalanobis: model dimension " + std::to_string(model.means.cols()) +
                              " does not match bundle D=" + std::to_string(d));
    NoveltyScores out{Method::mahalanobis, Vector(bundle.images())};
    const auto lower = model.factor.matrixL();
    parallel_for(as_size(bundle.images()), [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        double best = std::numeric_limits<double>::infinity();
        Eigen::VectorXd diff(d);
        for (Eigen::Index c = 0; c < model.means.rows(); ++c) {
            diff = (bundle.z.row(i) - model.means.row(c)).transpose();
            lower.solveInPlace(diff);
            best = std::min(best, diff.squaredNorm());
        }
        out.scores(i) = best;
    });
    return out;
}

Eigen::Index dice_keep_count(double keep_fraction, Eigen::Index features) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ValidationError("keep_fraction must lie in (0, 1]");
    // The slack absorbs representation error such as 0.1 * 30 = 3.0000000000000004.
    auto count = static_cast<Eigen::Index>(std::ceil(keep_fraction * static_cast<double>(features) - 1e-9));
    return std::clamp<Eigen::Index>(count, 1, features);
}

DiceMask dice_mask(const Bundle& bundle, double keep_fraction, Reference reference) {
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    DiceMask out;
    out.keep_fraction = keep_fraction;
    const Eigen::Index keep = dice_keep_count(keep_fraction, d);
    out.mean_contributions = mean_contributions(bundle, reference);
    out.mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, k);

    std::vector<Eigen::Index> order(as_size(d));
    for (Eigen::Index c = 0; c < k; ++c) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return out.mean_contributions(a, c) > out.mean_contributions(b, c);
        });
        for (Eigen::Index r = 0; r < keep; ++r) out.mask(order[as_size(r)], c) = 1;
    }
    return out;
}

NoveltyScores dice_score(const Bundle& bundle, const DiceMask& mask) {
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    if (mask.mask.rows() != d || mask.mask.cols() != k) throw ValidationError("dice: mask shape does not match bundle");
    NoveltyScores out{Method::dice, Vector(bundle.images())};
    parallel_for(as_size(bundle.images()), [&](std::size_t row) {
        const auto i = static_cast<Eigen::Index>(row);
        std::vector<double> sparse(as_size(k));
        for (Eigen::Index c = 0; c < k; ++c) {
            double sum = 0.0;
            for (Eigen::Index j = 0; j < d; ++j)
                if (mask.mask(j, c)) sum += bundle.head.w(j, c) * bundle.z(i, j);
            sparse[as_size(c)] = sum + bundle.head.b(c);
        }
        out.scores(i) = -log_sum_exp(sparse.data(), k);
    });
    return out;
}

NoveltyScores score(const Bundle& fit, const Bundle& target, const ScoreParams& params) {
    switch (params.method) {
        case Method::max_logit: return max_logit_score(target);
        case Method::max_softmax: return max_softmax_score(target);
        case Method::mahalanobis: return mahalanobis_score(target, fit_gaussian(fit, params.ridge_scale));
        case Method::dice: return dice_score(target, dice_mask(fit, params.keep_fraction, params.reference));
    }
    throw ValidationError("unknown method");
}

}  // namespace famlab::scoring
