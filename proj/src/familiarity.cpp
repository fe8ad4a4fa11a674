#include "famlab/familiarity.hpp"

#include <cmath>
#include <limits>

#include "famlab/error.hpp"
#include "famlab/parallel.hpp"
#include "famlab/scoring.hpp"

namespace famlab::familiarity {

namespace {

std::size_t as_size(Eigen::Index i) { return static_cast<std::size_t>(i); }

const Matrix& require_blur(const Bundle& bundle) {
    if (!bundle.z_blur) throw ValidationError("z_blur: bundle \"" + bundle.name + "\" has no blurred activations");
    return *bundle.z_blur;
}

}  // namespace

std::string to_string(FeatureType type) {
    switch (type) {
        case FeatureType::positive_presence: return "positive_presence";
        case FeatureType::negative_presence: return "negative_presence";
        case FeatureType::positive_absence: return "positive_absence";
        case FeatureType::negative_absence: return "negative_absence";
        case FeatureType::neutral: return "neutral";
    }
    return "neutral";
}

std::array<std::size_t, kFeatureTypeCount> FeatureTaxonomy::counts(Eigen::Index cls) const {
    std::array<std::size_t, kFeatureTypeCount> out{};
    for (Eigen::Index j = 0; j < type.rows(); ++j) ++out[static_cast<std::size_t>(type(j, cls))];
    return out;
}

BlurEffects blur_effects(const Bundle& bundle) { return {bundle.z - require_blur(bundle)}; }

OnObjectScores on_object_scores(const Bundle& bundle) {
    const Matrix& blurred = require_blur(bundle);
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    OnObjectScores out{Matrix::Zero(d, k), std::vector<std::size_t>(as_size(k), 0)};
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        const auto c = bundle.labels[as_size(i)];
        ++out.n_per_class[as_size(c)];
        for (Eigen::Index j = 0; j < d; ++j) out.oo(j, c) += bundle.z(i, j) - blurred(i, j);
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (out.n_per_class[as_size(c)] == 0)
            throw ValidationError("on-object scores: class " + std::to_string(c) + " has no known images");
        out.oo.col(c) /= static_cast<double>(out.n_per_class[as_size(c)]);
    }
    return out;
}

FeatureType classify(double oo, double weight, double threshold) {
    if (weight == 0.0 || std::abs(oo) <= threshold) return FeatureType::neutral;
    if (oo > 0.0) return weight > 0.0 ? FeatureType::positive_presence : FeatureType::negative_presence;
    return weight > 0.0 ? FeatureType::positive_absence : FeatureType::negative_absence;
}

FeatureTaxonomy classify_features(const OnObjectScores& oo, const ClassifierHead& head, double threshold) {
    if (!(threshold >= 0.0)) throw ValidationError("taxonomy threshold must be >= 0");
    if (oo.oo.rows() != head.w.rows() || oo.oo.cols() != head.w.cols())
        throw ValidationError("on-object scores and head weights differ in shape");
    FeatureTaxonomy taxonomy;
    taxonomy.threshold = threshold;
    taxonomy.type.resize(oo.oo.rows(), oo.oo.cols());
    for (Eigen::Index j = 0; j < oo.oo.rows(); ++j)
        for (Eigen::Index c = 0; c < oo.oo.cols(); ++c) taxonomy.type(j, c) = classify(oo.oo(j, c), head.w(j, c), threshold);
    return taxonomy;
}

Contributions contributions(const Bundle& bundle, Reference reference) {
    Contributions out;
    out.reference = reference;
    out.mean = scoring::mean_contributions(bundle, reference);
    out.n_per_class.assign(as_size(bundle.classes()), 0);
    for (auto c : scoring::reference_labels(bundle, reference))
        if (c >= 0) ++out.n_per_class[as_size(c)];
    return out;
}

Vector contribution_row(const Bundle& bundle, Eigen::Index image, Eigen::Index cls) {
    return bundle.head.w.col(cls).cwiseProduct(bundle.z.row(image).transpose());
}

double mean_reference_logit(const Bundle& bundle, const Contributions& c, Eigen::Index cls) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < c.mean.rows(); ++j) total += c.mean(j, cls);
    return total + bundle.head.b(cls);
}

std::vector<DecompositionRecord> decompose(const Bundle& bundle, const FeatureTaxonomy& taxonomy, const Matrix& c_mean,
                                           std::span<const std::size_t> images) {
    const Eigen::Index d = bundle.features();
    const Eigen::Index k = bundle.classes();
    if (taxonomy.type.rows() != d || taxonomy.type.cols() != k || c_mean.rows() != d || c_mean.cols() != k)
        throw ValidationError("decompose: taxonomy or mean contributions do not match bundle shape");
    for (auto i : images)
        if (i >= as_size(bundle.images())) throw ValidationError("decompose: image index " + std::to_string(i) + " out of range");

    std::vector<DecompositionRecord> records(images.size());
    parallel_for(images.size(), [&](std::size_t r) {
        const auto i = static_cast<Eigen::Index>(images[r]);
        Eigen::Index best = 0;
        double best_logit = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < k; ++c) {
            double logit = 0.0;
            for (Eigen::Index j = 0; j < d; ++j) logit += bundle.head.w(j, c) * bundle.z(i, j);
            logit += bundle.head.b(c);
            if (logit > best_logit) {
                best_logit = logit;
                best = c;
            }
        }

        DecompositionRecord& rec = records[r];
        rec.image = images[r];
        rec.cls = best;
        rec.max_logit = best_logit;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double delta = c_mean(j, best) - bundle.head.w(j, best) * bundle.z(i, j);
            switch (taxonomy.type(j, best)) {
                case FeatureType::positive_presence: rec.pp += delta; break;
                case FeatureType::negative_absence: rec.na += delta; break;
                case FeatureType::positive_absence: rec.pa += delta; break;
                case FeatureType::negative_presence: rec.np += delta; break;
                case FeatureType::neutral: rec.neutral += delta; break;
            }
        }
    }, 16);
    return records;
}

std::vector<std::size_t> select_images(const Bundle& bundle, bool include_known) {
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < bundle.images(); ++i)
        if (include_known || bundle.is_novel(i)) out.push_back(as_size(i));
    return out;
}

}  // namespace famlab::familiarity
