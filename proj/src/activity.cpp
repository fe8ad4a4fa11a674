#include "famlab/activity.hpp"

#include <algorithm>
#include <cmath>

#include "famlab/error.hpp"
#include "famlab/numerics.hpp"
#include "famlab/scoring.hpp"

namespace famlab::activity {

namespace {

std::size_t as_size(Eigen::Index i) { return static_cast<std::size_t>(i); }

void require_sorted(std::span<const double> thetas) {
    for (std::size_t t = 1; t < thetas.size(); ++t)
        if (thetas[t] < thetas[t - 1]) throw ValidationError("thetas must be sorted ascending");
}

// Counts per theta of values strictly above it, accumulated into `counts`.
void accumulate_exceed(std::vector<double>& values, std::span<const double> thetas, std::vector<double>& counts) {
    std::sort(values.begin(), values.end());
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        const auto above = values.end() - std::upper_bound(values.begin(), values.end(), thetas[t]);
        counts[t] += static_cast<double>(above);
    }
}

}  // namespace

std::vector<NormStat> norm_stats(const Bundle& bundle) {
    std::vector<NormStat> out;
    for (const auto group : {kKnownGroup, kNovelGroup}) {
        std::vector<double> norms;
        for (Eigen::Index i = 0; i < bundle.images(); ++i)
            if (bundle.groups[as_size(i)] == group) norms.push_back(bundle.z.row(i).norm());
        if (norms.empty()) continue;
        NormStat stat{group, norms.size(), 0.0, 0.0};
        for (double v : norms) stat.mean += v;
        stat.mean /= static_cast<double>(norms.size());
        if (norms.size() > 1) {
            double ss = 0.0;
            for (double v : norms) ss += (v - stat.mean) * (v - stat.mean);
            stat.sd = std::sqrt(ss / static_cast<double>(norms.size() - 1));
        }
        out.push_back(stat);
    }
    return out;
}

ThresholdCurve activation_curve(const Bundle& bundle, std::span<const double> thetas) {
    require_sorted(thetas);
    ThresholdCurve curve;
    curve.thetas.assign(thetas.begin(), thetas.end());
    std::vector<double> row(as_size(bundle.features()));
    for (const auto group : {kKnownGroup, kNovelGroup}) {
        GroupCurve gc{group, 0, std::vector<double>(thetas.size(), 0.0)};
        for (Eigen::Index i = 0; i < bundle.images(); ++i) {
            if (bundle.groups[as_size(i)] != group) continue;
            ++gc.images;
            for (Eigen::Index j = 0; j < bundle.features(); ++j) row[as_size(j)] = bundle.z(i, j);
            accumulate_exceed(row, thetas, gc.mean_counts);
        }
        if (gc.images == 0) {
            curve.warnings.push_back(std::string(group == kKnownGroup ? "known" : "novel") + " group is empty");
            continue;
        }
        for (auto& c : gc.mean_counts) c /= static_cast<double>(gc.images);
        curve.groups.push_back(std::move(gc));
    }
    return curve;
}

ThresholdCurve contribution_curve(const Bundle& bundle, Eigen::Index cls, std::span<const double> thetas,
                                  Reference reference) {
    require_sorted(thetas);
    if (cls < 0 || cls >= bundle.classes()) throw ValidationError("contribution curve: class " + std::to_string(cls) + " out of range");
    const std::vector<std::int64_t> assigned =
        reference == Reference::predicted ? scoring::predicted_labels(bundle) : bundle.labels;

    ThresholdCurve curve;
    curve.thetas.assign(thetas.begin(), thetas.end());
    std::vector<double> row(as_size(bundle.features()));
    for (const auto group : {kKnownGroup, kNovelGroup}) {
        GroupCurve gc{group, 0, std::vector<double>(thetas.size(), 0.0)};
        for (Eigen::Index i = 0; i < bundle.images(); ++i) {
            if (bundle.groups[as_size(i)] != group || assigned[as_size(i)] != cls) continue;
            ++gc.images;
            for (Eigen::Index j = 0; j < bundle.features(); ++j)
                row[as_size(j)] = std::abs(bundle.head.w(j, cls) * bundle.z(i, j));
            accumulate_exceed(row, thetas, gc.mean_counts);
        }
        if (gc.images == 0) {
            curve.warnings.push_back(std::string("no ") + (group == kKnownGroup ? "known" : "novel") +
                                     " images assigned to class " + std::to_string(cls) + "; group omitted");
            continue;
        }
        for (auto& c : gc.mean_counts) c /= static_cast<double>(gc.images);
        curve.groups.push_back(std::move(gc));
    }
    return curve;
}

ActivityHistogram activity_histogram(const Bundle& bundle, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("q must lie in [0, 1]");
    std::vector<double> pooled;
    std::size_t known = 0;
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        ++known;
        for (Eigen::Index j = 0; j < bundle.features(); ++j) pooled.push_back(bundle.z(i, j));
    }
    if (known == 0) throw ValidationError("activity histogram: known group is empty");
    if (pooled.empty()) throw ValidationError("activity histogram: bundle has no features");

    ActivityHistogram hist;
    hist.q = q;
    hist.n_known = known;
    hist.theta = numerics::quantile(pooled, q);
    hist.fractions.assign(as_size(bundle.features()), 0.0);
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        for (Eigen::Index j = 0; j < bundle.features(); ++j)
            if (bundle.z(i, j) >= hist.theta) hist.fractions[as_size(j)] += 1.0;
    }
    for (auto& f : hist.fractions) f /= static_cast<double>(known);
    return hist;
}

double mean_activation_magnitude(const Bundle& bundle) {
    double total = 0.0;
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < bundle.images(); ++i) {
        if (!bundle.is_known(i)) continue;
        for (Eigen::Index j = 0; j < bundle.features(); ++j) total += std::abs(bundle.z(i, j));
        count += as_size(bundle.features());
    }
    if (count == 0) throw ValidationError("mean activation magnitude: known group is empty");
    return total / static_cast<double>(count);
}

std::vector<double> theta_grid(double start, double stop, double step) {
    if (!(step > 0.0) || !(stop >= start)) throw ValidationError("theta grid: need step > 0 and stop >= start");
    const auto steps = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    std::vector<double> grid(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) grid[i] = start + static_cast<double>(i) * step;
    return grid;
}

}  // namespace famlab::activity
