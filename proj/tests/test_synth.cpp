#include <cmath>

#include "doctest.h"

#include "famlab/error.hpp"
#include "famlab/eval.hpp"
#include "famlab/familiarity.hpp"
#include "famlab/scoring.hpp"
#include "famlab/synth.hpp"
#include "support/fixtures.hpp"

using namespace famlab;
using namespace famlab::synth;
using famlab::familiarity::FeatureType;

namespace {

std::string error_text(const SyntheticSpec& spec) {
    try {
        generate(spec);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

void check_taxonomy_recovered(const SyntheticSpec& spec, const Bundle& b) {
    const auto tax = familiarity::classify_features(familiarity::on_object_scores(b), b.head);
    for (Eigen::Index k = 0; k < spec.classes; ++k) {
        const auto [begin, end] = spec.presence_set(k);
        for (Eigen::Index j = 0; j < spec.features; ++j) {
            const auto expected = (j >= begin && j < end) ? FeatureType::positive_presence : FeatureType::neutral;
            CHECK(tax.at(j, k) == expected);
        }
    }
}

}  // namespace

TEST_CASE("frozen seed-7 bundle digest") {
    auto dir = famlab::testing::scratch_dir("synth_digest");
    const auto manifest = write_bundle(generate({}), dir);
    CHECK(bundle_digest(manifest) == "1638455d5751080c402fab39567a26f76b249b97acc3bdd05995daefe3a452fe");
}

TEST_CASE("generation is deterministic") {
    SyntheticSpec spec;
    spec.seed = 99;
    CHECK(generate(spec) == generate(spec));
    auto a = famlab::testing::scratch_dir("synth_det_a");
    auto b = famlab::testing::scratch_dir("synth_det_b");
    CHECK(bundle_digest(write_bundle(generate(spec), a)) == bundle_digest(write_bundle(generate(spec), b)));
    SyntheticSpec other = spec;
    other.seed = 100;
    CHECK_FALSE(generate(other) == generate(spec));
}

TEST_CASE("infeasible specs are rejected") {
    SyntheticSpec s;
    s.features_per_class = 9;
    CHECK(error_text(s).find("infeasible spec") == 0);
    s = {};
    s.noise_sd = 0.01;
    CHECK(error_text(s).find("infeasible spec") == 0);
    s = {};
    s.novel_activation_rate = 1.5;
    CHECK(error_text(s).find("infeasible spec") == 0);
    s = {};
    s.blur_retention = -0.1;
    CHECK(error_text(s).find("infeasible spec") == 0);
    s = {};
    s.classes = 1;
    CHECK(error_text(s).find("infeasible spec") == 0);
}

TEST_CASE("spec JSON round trip") {
    SyntheticSpec s;
    s.seed = 3;
    s.blur_retention = 0.25;
    const auto back = spec_from_json(spec_to_json(s));
    CHECK(spec_to_json(back) == spec_to_json(s));
    const auto partial = spec_from_json(nlohmann::json{{"K", 3}, {"D", 20}});
    CHECK(partial.classes == 3);
    CHECK(partial.features == 20);
    CHECK(partial.n_known == 400);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"k", 3}}), ValidationError);
    CHECK_THROWS_AS(spec_from_json(nlohmann::json{{"K", "three"}}), ValidationError);
}

TEST_CASE("generated structure") {
    const SyntheticSpec spec;
    const Bundle b = generate(spec);
    CHECK(b.images() == 800);
    CHECK(b.features() == 32);
    CHECK(b.classes() == 4);
    CHECK(b.count_known() == 400);
    CHECK(b.head.b.isZero(0));
    CHECK((b.z.array() >= 0).all());
    for (Eigen::Index i = 0; i < 400; ++i) CHECK(b.labels[static_cast<std::size_t>(i)] == i % 4);
    for (Eigen::Index j = 0; j < 32; ++j) {
        // -1/(K-1) is not dyadic for K = 4, so the row sum is zero up to rounding.
        CHECK(std::abs(b.head.w.row(j).sum()) <= 4 * std::numeric_limits<double>::epsilon());
        if (j >= 24) CHECK(b.head.w.row(j).isZero(0));
    }
    SyntheticSpec three = spec;
    three.classes = 3;
    three.features = 20;
    const Bundle b3 = generate(three);
    for (Eigen::Index j = 0; j < 20; ++j) CHECK(b3.head.w.row(j).sum() == 0.0);
}

TEST_CASE("novel images activate the rounded share of one presence set") {
    SyntheticSpec spec;
    spec.noise_sd = 0.0;
    const Bundle b = generate(spec);
    for (Eigen::Index i = spec.n_known; i < b.images(); ++i) {
        const auto active = (b.z.row(i).array() > 0).count();
        CHECK(active == spec.novel_active_count());
        Eigen::Index first = -1;
        for (Eigen::Index j = 0; j < spec.features; ++j)
            if (b.z(i, j) > 0) {
                if (first < 0) first = j;
                CHECK(j / spec.features_per_class == first / spec.features_per_class);
                CHECK(b.z(i, j) == spec.on_activation);
            }
    }
}

TEST_CASE("taxonomy recovery without noise and with the noise bound") {
    for (double noise : {0.0, 0.005, 0.0099}) {
        SyntheticSpec spec;
        spec.noise_sd = noise;
        spec.seed = 11;
        const Bundle b = generate(spec);
        check_taxonomy_recovered(spec, b);
        if (noise == 0.0) {
            const auto oo = familiarity::on_object_scores(b).oo;
            for (Eigen::Index k = 0; k < spec.classes; ++k) {
                const auto [begin, end] = spec.presence_set(k);
                for (Eigen::Index j = 0; j < spec.features; ++j)
                    CHECK(oo(j, k) == ((j >= begin && j < end) ? spec.on_activation : 0.0));
            }
        }
    }
}

TEST_CASE("fully active novel images are indistinguishable") {
    SyntheticSpec spec;
    spec.noise_sd = 0.0;
    spec.novel_activation_rate = 1.0;
    const Bundle b = generate(spec);
    CHECK(eval::auroc(scoring::max_logit_score(b), b.groups).auroc == 0.5);
}

TEST_CASE("oracle decomposition agrees with the pipeline") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_known = 120;
        spec.n_novel = 80;
        spec.blur_retention = 0.1 * static_cast<double>(seed);
        const Bundle b = generate(spec);
        const auto tax = familiarity::classify_features(familiarity::on_object_scores(b), b.head);
        const auto c = familiarity::contributions(b);
        const auto images = familiarity::select_images(b, true);
        const auto got = familiarity::decompose(b, tax, c.mean, images);
        const auto want = oracle_decomposition(spec, b);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].cls == want[i].cls);
            for (auto [x, y] : {std::pair{got[i].pp, want[i].pp}, {got[i].na, want[i].na}, {got[i].pa, want[i].pa},
                                {got[i].np, want[i].np}, {got[i].neutral, want[i].neutral}})
                CHECK(std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)}));
        }
    }
    SyntheticSpec spec;
    SyntheticSpec other = spec;
    other.features = 40;
    CHECK_THROWS_AS(oracle_decomposition(other, generate(spec)), ValidationError);
}

TEST_CASE("noise-free micro spec effect sums by hand") {
    SyntheticSpec spec;
    spec.classes = 2;
    spec.features = 4;
    spec.features_per_class = 2;
    spec.n_known = 4;
    spec.n_novel = 6;
    spec.noise_sd = 0.0;
    spec.novel_activation_rate = 0.5;
    const Bundle b = generate(spec);
    const auto rec = oracle_decomposition(spec, b);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rec[i].pp == 0);
        CHECK(rec[i].na == 0);
        CHECK(rec[i].pa == 0);
        CHECK(rec[i].np == 0);
        CHECK(rec[i].neutral == 0);
    }
    // A novel image with one of two presence features on: the class mean
    // contributes 2 + 2 and the image 2 + 0, so the whole gap of 2 is positive presence.
    for (std::size_t i = 4; i < 10; ++i) {
        CHECK(rec[i].max_logit == 2.0);
        CHECK(rec[i].pp == 2.0);
        CHECK(rec[i].na == 0);
        CHECK(rec[i].pa == 0);
        CHECK(rec[i].np == 0);
        CHECK(rec[i].neutral == 0);
    }
}

TEST_CASE("full blur retention leaves only neutral features") {
    SyntheticSpec spec;
    spec.blur_retention = 1.0;
    spec.n_known = 80;
    spec.n_novel = 40;
    const Bundle b = generate(spec);
    const auto tax = familiarity::classify_features(familiarity::on_object_scores(b), b.head);
    for (Eigen::Index k = 0; k < 4; ++k) CHECK(tax.counts(k)[static_cast<std::size_t>(FeatureType::neutral)] == 32);
    for (const auto& r : oracle_decomposition(spec, b)) {
        CHECK(r.pp == 0);
        CHECK(r.na == 0);
        CHECK(r.pa == 0);
        CHECK(r.np == 0);
    }
}
