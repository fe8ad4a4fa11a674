#include "famlab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "famlab/error.hpp"
#include "famlab/rng.hpp"

namespace famlab::synth {

namespace {

void infeasible(const std::string& why) { throw ValidationError("infeasible spec: " + why); }

std::size_t as_size(Eigen::Index i) { return static_cast<std::size_t>(i); }

}  // namespace

std::pair<Eigen::Index, Eigen::Index> SyntheticSpec::presence_set(Eigen::Index cls) const {
    return {cls * features_per_class, (cls + 1) * features_per_class};
}

Eigen::Index SyntheticSpec::novel_active_count() const {
    return static_cast<Eigen::Index>(std::llround(novel_activation_rate * static_cast<double>(features_per_class)));
}

void validate(const SyntheticSpec& spec) {
    if (spec.classes < 2) infeasible("K must be >= 2");
    if (spec.features_per_class < 1) infeasible("features_per_class must be >= 1");
    if (spec.features < 1) infeasible("D must be >= 1");
    if (spec.classes * spec.features_per_class > spec.features)
        infeasible("K * features_per_class = " + std::to_string(spec.classes * spec.features_per_class) +
                   " exceeds D = " + std::to_string(spec.features));
    if (spec.n_known < 0 || spec.n_novel < 0) infeasible("image counts must be >= 0");
    if (!(spec.on_activation > 0.0) || !std::isfinite(spec.on_activation)) infeasible("on_activation must be > 0");
    if (!(spec.noise_sd >= 0.0 && spec.noise_sd < 0.01))
        infeasible("noise_sd must lie in [0, 0.01) (half the taxonomy threshold)");
    if (!(spec.novel_activation_rate >= 0.0 && spec.novel_activation_rate <= 1.0))
        infeasible("novel_activation_rate must lie in [0, 1]");
    if (!(spec.blur_retention >= 0.0 && spec.blur_retention <= 1.0)) infeasible("blur_retention must lie in [0, 1]");
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("synthetic spec: expected a JSON object");
    static const char* const kKeys[] = {"seed",     "K",           "D",        "features_per_class",
                                        "n_known",  "n_novel",     "on_activation", "noise_sd",
                                        "novel_activation_rate",   "blur_retention"};
    for (const auto& item : j.items())
        if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return item.key() == k; }) ==
            std::end(kKeys))
            throw ValidationError("synthetic spec: unknown key \"" + item.key() + "\"");
    SyntheticSpec spec;
    try {
        spec.seed = j.value("seed", spec.seed);
        spec.classes = j.value("K", spec.classes);
        spec.features = j.value("D", spec.features);
        spec.features_per_class = j.value("features_per_class", spec.features_per_class);
        spec.n_known = j.value("n_known", spec.n_known);
        spec.n_novel = j.value("n_novel", spec.n_novel);
        spec.on_activation = j.value("on_activation", spec.on_activation);
        spec.noise_sd = j.value("noise_sd", spec.noise_sd);
        spec.novel_activation_rate = j.value("novel_activation_rate", spec.novel_activation_rate);
        spec.blur_retention = j.value("blur_retention", spec.blur_retention);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("synthetic spec: ") + e.what());
    }
    return spec;
}

nlohmann::json spec_to_json(const SyntheticSpec& spec) {
    return {{"seed", spec.seed},
            {"K", spec.classes},
            {"D", spec.features},
            {"features_per_class", spec.features_per_class},
            {"n_known", spec.n_known},
            {"n_novel", spec.n_novel},
            {"on_activation", spec.on_activation},
            {"noise_sd", spec.noise_sd},
            {"novel_activation_rate", spec.novel_activation_rate},
            {"blur_retention", spec.blur_retention}};
}

Bundle generate(const SyntheticSpec& spec) {
    validate(spec);
    const Eigen::Index k = spec.classes;
    const Eigen::Index d = spec.features;
    const Eigen::Index n = spec.n_known + spec.n_novel;
    const Eigen::Index per_class = spec.features_per_class;

    Bundle bundle;
    bundle.name = "synth-seed" + std::to_string(spec.seed);
    bundle.z = Matrix::Zero(n, d);
    bundle.z_blur = Matrix::Zero(n, d);
    bundle.labels.resize(as_size(n));
    bundle.groups.resize(as_size(n));
    for (Eigen::Index c = 0; c < k; ++c) bundle.class_names.push_back("class" + std::to_string(c));

    bundle.head.w = Matrix::Zero(d, k);
    bundle.head.b = Vector::Zero(k);
    const double off_class = -1.0 / static_cast<double>(k - 1);
    for (Eigen::Index owner = 0; owner < k; ++owner) {
        const auto [begin, end] = spec.presence_set(owner);
        for (Eigen::Index j = begin; j < end; ++j)
            for (Eigen::Index c = 0; c < k; ++c) bundle.head.w(j, c) = c == owner ? 1.0 : off_class;
    }

    auto engine = rng::stream(spec.seed, 0);
    std::vector<Eigen::Index> members(as_size(per_class));
    std::vector<bool> active(as_size(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(active.begin(), active.end(), false);
        if (i < spec.n_known) {
            const Eigen::Index cls = i % k;
            bundle.labels[as_size(i)] = cls;
            bundle.groups[as_size(i)] = kKnownGroup;
            const auto [begin, end] = spec.presence_set(cls);
            for (Eigen::Index j = begin; j < end; ++j) active[as_size(j)] = true;
        } else {
            bundle.labels[as_size(i)] = kNovelLabel;
            bundle.groups[as_size(i)] = kNovelGroup;
            const auto cls = static_cast<Eigen::Index>(rng::uniform_index(engine, static_cast<std::uint64_t>(k)));
            const auto begin = spec.presence_set(cls).first;
            std::iota(members.begin(), members.end(), begin);
            // Partial Fisher-Yates: the first `count` entries form the subset.
            const Eigen::Index count = spec.novel_active_count();
            for (Eigen::Index s = 0; s < count; ++s) {
                const auto pick = s + static_cast<Eigen::Index>(
                                          rng::uniform_index(engine, static_cast<std::uint64_t>(per_class - s)));
                std::swap(members[as_size(s)], members[as_size(pick)]);
                active[as_size(members[as_size(s)])] = true;
            }
        }
        for (Eigen::Index j = 0; j < d; ++j) {
            const double noise = spec.noise_sd * rng::standard_normal(engine);
            if (active[as_size(j)]) {
                const double on = std::max(0.0, spec.on_activation + noise);
                bundle.z(i, j) = on;
                (*bundle.z_blur)(i, j) = spec.blur_retention * on;
            } else {
                bundle.z(i, j) = std::abs(noise);
                (*bundle.z_blur)(i, j) = std::abs(noise);
            }
        }
    }
    validate(bundle);
    return bundle;
}

std::vector<familiarity::DecompositionRecord> oracle_decomposition(const SyntheticSpec& spec, const Bundle& bundle,
                                                                   double threshold) {
    if (bundle.features() != spec.features || bundle.classes() != spec.classes ||
        bundle.images() != spec.n_known + spec.n_novel || !bundle.z_blur)
        throw ValidationError("spec/bundle mismatch");
    const auto n = as_size(bundle.images());
    const auto d = as_size(bundle.features());
    const auto k = as_size(bundle.classes());
    const auto& z = bundle.z;
    const auto& zb = *bundle.z_blur;
    const auto& w = bundle.head.w;

    std::vector<std::vector<double>> oo(d, std::vector<double>(k, 0.0));
    std::vector<std::vector<double>> cbar(d, std::vector<double>(k, 0.0));
    std::vector<double> count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (bundle.groups[i] != kKnownGroup) continue;
        const auto y = static_cast<std::size_t>(bundle.labels[i]);
        count[y] += 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            oo[j][y] += z(i, j) - zb(i, j);
            cbar[j][y] += w(j, y) * z(i, j);
        }
    }
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t c = 0; c < k; ++c) {
            oo[j][c] /= count[c];
            cbar[j][c] /= count[c];
        }

    std::vector<familiarity::DecompositionRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_logit = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double logit = bundle.head.b(static_cast<Eigen::Index>(c));
            for (std::size_t j = 0; j < d; ++j) logit += w(j, c) * z(i, j);
            if (c == 0 || logit > best_logit) {
                best_logit = logit;
                best = c;
            }
        }
        familiarity::DecompositionRecord rec;
        rec.image = i;
        rec.cls = static_cast<Eigen::Index>(best);
        rec.max_logit = best_logit;
        for (std::size_t j = 0; j < d; ++j) {
            const double delta = cbar[j][best] - w(j, best) * z(i, j);
            const double o = oo[j][best];
            const double wt = w(j, best);
            if (wt == 0.0 || !(o > threshold || o < -threshold))
                rec.neutral += delta;
            else if (o > threshold && wt > 0.0)
                rec.pp += delta;
            else if (o > threshold)
                rec.np += delta;
            else if (wt > 0.0)
                rec.pa += delta;
            else
                rec.na += delta;
        }
        out.push_back(rec);
    }
    return out;
}

}  // namespace famlab::synth
