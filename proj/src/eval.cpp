#include "famlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "famlab/error.hpp"
#include "famlab/numerics.hpp"
#include "famlab/parallel.hpp"
#include "famlab/rng.hpp"

namespace famlab::eval {

namespace {

void split(std::span<const double> scores, std::span<const std::int64_t> groups, std::vector<double>& novel,
           std::vector<double>& known) {
    if (scores.size() != groups.size())
        throw ValidationError("scores and groups differ in length (" + std::to_string(scores.size()) + " vs " +
                              std::to_string(groups.size()) + ")");
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (groups[i] == kNovelGroup)
            novel.push_back(scores[i]);
        else if (groups[i] == kKnownGroup)
            known.push_back(scores[i]);
        else
            throw ValidationError("groups: value at index " + std::to_string(i) + " is not 0 or 1");
    }
    if (novel.empty()) throw ValidationError("novel group is empty");
    if (known.empty()) throw ValidationError("known group is empty");
}

std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

double mann_whitney(std::span<const double> novel, std::span<const double> known) {
    if (novel.empty() || known.empty()) throw ValidationError("mann_whitney: a group is empty");
    struct Entry {
        double score;
        bool novel;
    };
    std::vector<Entry> all;
    all.reserve(novel.size() + known.size());
    for (double s : novel) all.push_back({s, true});
    for (double s : known) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Pairs won by novel: for each tie block, novel items beat every known item
    // below the block and split the known items inside it.
    double wins = 0.0;
    std::size_t known_below = 0;
    for (std::size_t start = 0; start < all.size();) {
        std::size_t end = start;
        std::size_t block_novel = 0;
        std::size_t block_known = 0;
        while (end < all.size() && all[end].score == all[start].score) {
            (all[end].novel ? block_novel : block_known) += 1;
            ++end;
        }
        wins += static_cast<double>(block_novel) *
                (static_cast<double>(known_below) + 0.5 * static_cast<double>(block_known));
        known_below += block_known;
        start = end;
    }
    return wins / (static_cast<double>(novel.size()) * static_cast<double>(known.size()));
}

RocResult auroc(std::span<const double> scores, std::span<const std::int64_t> groups) {
    std::vector<double> novel;
    std::vector<double> known;
    split(scores, groups, novel, known);

    RocResult result;
    result.n_novel = novel.size();
    result.n_known = known.size();
    result.auroc = mann_whitney(novel, known);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    result.curve.push_back({0.0, 0.0});
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) {
            (groups[order[end]] == kNovelGroup ? tp : fp) += 1;
            ++end;
        }
        result.curve.push_back({static_cast<double>(fp) / static_cast<double>(result.n_known),
                                static_cast<double>(tp) / static_cast<double>(result.n_novel)});
        start = end;
    }
    return result;
}

RocResult auroc(const scoring::NoveltyScores& scores, std::span<const std::int64_t> groups) {
    return auroc(as_span(scores.scores), groups);
}

double trapezoid_area(std::span<const RocPoint> curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
    return area;
}

RocResult bootstrap_ci(std::span<const double> scores, std::span<const std::int64_t> groups, int resamples,
                       std::uint64_t seed) {
    if (resamples < 1) throw ValidationError("resamples must be >= 1");
    RocResult result = auroc(scores, groups);
    std::vector<double> novel;
    std::vector<double> known;
    split(scores, groups, novel, known);

    std::vector<double> values(static_cast<std::size_t>(resamples));
    parallel_for(values.size(), [&](std::size_t r) {
        auto engine = rng::stream(seed, r);
        std::vector<double> novel_draw(novel.size());
        std::vector<double> known_draw(known.size());
        for (auto& v : novel_draw) v = novel[rng::uniform_index(engine, novel.size())];
        for (auto& v : known_draw) v = known[rng::uniform_index(engine, known.size())];
        values[r] = mann_whitney(novel_draw, known_draw);
    }, 8);
    std::sort(values.begin(), values.end());
    result.ci_low = numerics::sorted_quantile(values, 0.025);
    result.ci_high = numerics::sorted_quantile(values, 0.975);
    return result;
}

RocResult bootstrap_ci(const scoring::NoveltyScores& scores, std::span<const std::int64_t> groups, int resamples,
                       std::uint64_t seed) {
    return bootstrap_ci(as_span(scores.scores), groups, resamples, seed);
}

ReplicationSummary aggregate_replications(std::span<const double> values) {
    if (values.empty()) throw ValidationError("aggregate_replications: no values");
    ReplicationSummary summary;
    summary.values.assign(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    summary.mean = std::clamp(std::accumulate(values.begin(), values.end(), 0.0) / n,
                              *std::min_element(values.begin(), values.end()),
                              *std::max_element(values.begin(), values.end()));
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - summary.mean) * (v - summary.mean);
        summary.sd = std::sqrt(ss / (n - 1.0));
    }
    return summary;
}

double novelty_threshold(std::span<const double> known_scores, double id_fpr) {
    if (!(id_fpr > 0.0 && id_fpr < 1.0)) throw ValidationError("id_fpr must lie in (0, 1)");
    return numerics::quantile(known_scores, 1.0 - id_fpr);
}

AccuracyCurve accuracy_curve(std::span<const double> scores, std::span<const std::int64_t> groups, double id_fpr,
                             double lowess_f, int lowess_iterations) {
    std::vector<double> novel;
    std::vector<double> known;
    split(scores, groups, novel, known);

    AccuracyCurve curve;
    curve.id_fpr = id_fpr;
    curve.lowess_f = lowess_f;
    curve.threshold = novelty_threshold(known, id_fpr);

    std::vector<std::size_t> novel_images;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (groups[i] == kNovelGroup) novel_images.push_back(i);
    std::stable_sort(novel_images.begin(), novel_images.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<double> ranks(novel_images.size());
    std::vector<double> raw(novel_images.size());
    for (std::size_t r = 0; r < novel_images.size(); ++r) {
        ranks[r] = static_cast<double>(r);
        raw[r] = scores[novel_images[r]] > curve.threshold ? 1.0 : 0.0;
    }
    const auto fit = numerics::lowess(ranks, raw, lowess_f, lowess_iterations);
    for (std::size_t r = 0; r < novel_images.size(); ++r)
        curve.points.push_back({r, novel_images[r], scores[novel_images[r]], raw[r], fit.fitted[r]});
    return curve;
}

}  // namespace famlab::eval
