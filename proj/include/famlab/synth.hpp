#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "famlab/bundle.hpp"
#include "famlab/familiarity.hpp"

namespace famlab::synth {

/// Generative story for a bundle with known ground truth: class k owns the
/// presence features [k * features_per_class, (k + 1) * features_per_class).
struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::int64_t classes = 4;
    std::int64_t features = 32;
    std::int64_t features_per_class = 6;
    std::int64_t n_known = 400;
    std::int64_t n_novel = 400;
    double on_activation = 2.0;
    double noise_sd = 0.005;
    double novel_activation_rate = 0.4;
    double blur_retention = 0.0;

    /// Presence-feature range of class k as [begin, end).
    std::pair<Eigen::Index, Eigen::Index> presence_set(Eigen::Index cls) const;
    /// Number of presence features a novel image activates.
    Eigen::Index novel_active_count() const;
};

/// Throws ValidationError("infeasible spec: ...") on violated constraints.
void validate(const SyntheticSpec& spec);

SyntheticSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const SyntheticSpec& spec);

/// Known image i belongs to class i mod K and comes first; novel images
/// follow. All draws come from one rng::stream(seed, 0).
Bundle generate(const SyntheticSpec& spec);

/// Brute-force recomputation of on-object scores, taxonomy, mean
/// contributions and effect sums for every image, by plain loops.
std::vector<familiarity::DecompositionRecord> oracle_decomposition(const SyntheticSpec& spec, const Bundle& bundle,
                                                                   double threshold = 0.02);

}  // namespace famlab::synth
