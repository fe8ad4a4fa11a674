#pragma once

// Deliberately naive reimplementations used as test oracles. They share no
// code with the library beyond the Bundle container and the RNG stream
// contract, and they favour plain loops and extended precision over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "famlab/bundle.hpp"
#include "famlab/rng.hpp"

namespace famlab::oracle {

using LMatrix = std::vector<std::vector<long double>>;

inline LMatrix logits(const Bundle& b) {
    const auto n = static_cast<std::size_t>(b.images());
    const auto d = static_cast<std::size_t>(b.features());
    const auto k = static_cast<std::size_t>(b.classes());
    LMatrix out(n, std::vector<long double>(k, 0.0L));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) {
            long double s = 0.0L;
            for (std::size_t j = 0; j < d; ++j)
                s += static_cast<long double>(b.head.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c))) *
                     b.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out[i][c] = s + b.head.b(static_cast<Eigen::Index>(c));
        }
    return out;
}

inline std::vector<double> max_logit(const Bundle& b) {
    std::vector<double> out;
    for (const auto& row : logits(b)) out.push_back(static_cast<double>(-*std::max_element(row.begin(), row.end())));
    return out;
}

inline std::vector<double> max_softmax(const Bundle& b) {
    std::vector<double> out;
    for (const auto& row : logits(b)) {
        long double total = 0.0L;
        long double best = 0.0L;
        for (auto v : row) total += std::exp(v);
        for (auto v : row) best = std::max(best, std::exp(v) / total);
        out.push_back(static_cast<double>(-best));
    }
    return out;
}

/// Gauss-Jordan inverse with partial pivoting.
inline LMatrix invert(LMatrix a) {
    const std::size_t n = a.size();
    LMatrix inv(n, std::vector<long double>(n, 0.0L));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0L;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(inv[col], inv[pivot]);
        const long double p = a[col][col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col][c] /= p;
            inv[col][c] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const long double factor = a[r][col];
            for (std::size_t c = 0; c < n; ++c) {
                a[r][c] -= factor * a[col][c];
                inv[r][c] -= factor * inv[col][c];
            }
        }
    }
    return inv;
}

inline std::vector<double> mahalanobis(const Bundle& b, double ridge_scale) {
    const auto n = static_cast<std::size_t>(b.images());
    const auto d = static_cast<std::size_t>(b.features());
    const auto k = static_cast<std::size_t>(b.classes());
    const auto z = [&](std::size_t i, std::size_t j) {
        return static_cast<long double>(b.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    };
    LMatrix mean(k, std::vector<long double>(d, 0.0L));
    std::vector<long double> count(k, 0.0L);
    long double known = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        if (b.groups[i] != kKnownGroup) continue;
        const auto y = static_cast<std::size_t>(b.labels[i]);
        count[y] += 1.0L;
        known += 1.0L;
        for (std::size_t j = 0; j < d; ++j) mean[y][j] += z(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) mean[c][j] /= count[c];
    LMatrix cov(d, std::vector<long double>(d, 0.0L));
    for (std::size_t i = 0; i < n; ++i) {
        if (b.groups[i] != kKnownGroup) continue;
        const auto y = static_cast<std::size_t>(b.labels[i]);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = 0; c < d; ++c) cov[r][c] += (z(i, r) - mean[y][r]) * (z(i, c) - mean[y][c]);
    }
    long double trace = 0.0L;
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = 0; c < d; ++c) cov[r][c] /= known;
        trace += cov[r][r];
    }
    const long double ridge = trace > 0.0L ? ridge_scale * trace / static_cast<long double>(d) : ridge_scale;
    for (std::size_t r = 0; r < d; ++r) cov[r][r] += ridge;
    const LMatrix precision = invert(cov);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double best = INFINITY;
        for (std::size_t c = 0; c < k; ++c) {
            long double q = 0.0L;
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t s = 0; s < d; ++s) q += (z(i, r) - mean[c][r]) * precision[r][s] * (z(i, s) - mean[c][s]);
            best = std::min(best, q);
        }
        out[i] = static_cast<double>(best);
    }
    return out;
}

/// DICE with ground-truth reference: sort-and-cut mask, explicit exponentials.
inline std::vector<double> dice(const Bundle& b, double keep_fraction) {
    const auto n = static_cast<std::size_t>(b.images());
    const auto d = static_cast<std::size_t>(b.features());
    const auto k = static_cast<std::size_t>(b.classes());
    const auto w = [&](std::size_t j, std::size_t c) {
        return static_cast<long double>(b.head.w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)));
    };
    const auto z = [&](std::size_t i, std::size_t j) {
        return static_cast<long double>(b.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    };
    auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(d) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, d);

    std::vector<std::vector<bool>> mask(d, std::vector<bool>(k, false));
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::pair<long double, std::size_t>> ranked;
        for (std::size_t j = 0; j < d; ++j) {
            long double total = 0.0L, count = 0.0L;
            for (std::size_t i = 0; i < n; ++i)
                if (b.groups[i] == kKnownGroup && b.labels[i] == static_cast<std::int64_t>(c)) {
                    total += w(j, c) * z(i, j);
                    count += 1.0L;
                }
            // Round the mean to double, as the ranking key is a double.
            ranked.push_back({static_cast<double>(total / count), j});
        }
        std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b2) {
            return a.first != b2.first ? a.first > b2.first : a.second < b2.second;
        });
        for (std::size_t r = 0; r < keep; ++r) mask[ranked[r].second][c] = true;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double denom = 0.0L;
        for (std::size_t c = 0; c < k; ++c) {
            long double logit = b.head.b(static_cast<Eigen::Index>(c));
            for (std::size_t j = 0; j < d; ++j)
                if (mask[j][c]) logit += w(j, c) * z(i, j);
            denom += std::exp(logit);
        }
        out[i] = static_cast<double>(-std::log(denom));
    }
    return out;
}

/// All-pairs Mann-Whitney AUROC, novel positive.
inline double auroc(const std::vector<double>& scores, const std::vector<std::int64_t>& groups) {
    long double wins = 0.0L, pairs = 0.0L;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (groups[a] != kNovelGroup) continue;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (groups[b] != kKnownGroup) continue;
            pairs += 1.0L;
            if (scores[a] > scores[b]) wins += 1.0L;
            else if (scores[a] == scores[b]) wins += 0.5L;
        }
    }
    return static_cast<double>(wins / pairs);
}

inline double type7(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const double lo = std::floor(h);
    const double hi = std::ceil(h);
    return v[static_cast<std::size_t>(lo)] + (h - lo) * (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]);
}

/// Percentile bootstrap following the library's stream contract: resample r
/// draws the novel indices then the known indices from rng::stream(seed, r).
inline std::pair<double, double> bootstrap(const std::vector<double>& scores, const std::vector<std::int64_t>& groups,
                                           int resamples, std::uint64_t seed) {
    std::vector<double> novel, known;
    for (std::size_t i = 0; i < scores.size(); ++i) (groups[i] == kNovelGroup ? novel : known).push_back(scores[i]);
    std::vector<double> values;
    for (int r = 0; r < resamples; ++r) {
        auto engine = rng::stream(seed, static_cast<std::uint64_t>(r));
        std::vector<double> s;
        std::vector<std::int64_t> g;
        for (std::size_t t = 0; t < novel.size(); ++t) {
            s.push_back(novel[rng::uniform_index(engine, novel.size())]);
            g.push_back(kNovelGroup);
        }
        for (std::size_t t = 0; t < known.size(); ++t) {
            s.push_back(known[rng::uniform_index(engine, known.size())]);
            g.push_back(kKnownGroup);
        }
        values.push_back(auroc(s, g));
    }
    return {type7(values, 0.025), type7(values, 0.975)};
}

/// Classic robust LOWESS by brute force: for every point, all distances are
/// sorted to find the bandwidth. Weight cut-offs follow the original
/// Fortran/C formulation (unit weight below 0.001 h, zero above 0.999 h).
/// The weighted-mean fallback applies only when all weighted x coincide.
inline std::vector<double> lowess(const std::vector<double>& x, const std::vector<double>& y, double f, int iterations) {
    const std::size_t n = x.size();
    const auto ns = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9)));
    std::vector<double> fitted(n), robust(n, 1.0), res(n);
    for (int it = 0; it <= iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> dist(n);
            for (std::size_t j = 0; j < n; ++j) dist[j] = std::abs(x[j] - x[i]);
            std::vector<double> sorted = dist;
            std::sort(sorted.begin(), sorted.end());
            const double h = sorted[ns - 1];
            std::vector<double> wts(n, 0.0);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double wj = 0.0;
                if (dist[j] <= 0.001 * h) wj = 1.0;
                else if (dist[j] <= 0.999 * h) wj = std::pow(1.0 - std::pow(dist[j] / h, 3), 3);
                wts[j] = wj * robust[j];
                sum += wts[j];
            }
            if (sum <= 0.0) {
                fitted[i] = y[i];
                continue;
            }
            double a = 0.0;
            for (std::size_t j = 0; j < n; ++j) a += wts[j] / sum * x[j];
            double c = 0.0;
            for (std::size_t j = 0; j < n; ++j) c += wts[j] / sum * (x[j] - a) * (x[j] - a);
            bool spread = false;
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) spread |= wts[j] > 0.0 && wts[k] > 0.0 && x[j] != x[k];
            double value = 0.0;
            if (spread) {
                // Weighted least-squares line evaluated at x[i].
                double sxy = 0.0, sy = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    sxy += wts[j] / sum * (x[j] - a) * y[j];
                    sy += wts[j] / sum * y[j];
                }
                value = sy + (x[i] - a) * sxy / c;
            } else {
                for (std::size_t j = 0; j < n; ++j) value += wts[j] / sum * y[j];
            }
            fitted[i] = value;
        }
        if (it == iterations) break;
        double sc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            res[i] = std::abs(y[i] - fitted[i]);
            sc += res[i];
        }
        sc /= static_cast<double>(n);
        const double cmad = 6.0 * type7(res, 0.5);
        if (cmad == 0.0 || cmad < 1e-7 * sc) break;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = res[i] / cmad;
            robust[i] = u <= 0.001 ? 1.0 : (u <= 0.999 ? std::pow(1.0 - u * u, 2) : 0.0);
        }
    }
    return fitted;
}

}  // namespace famlab::oracle
