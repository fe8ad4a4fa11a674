#include "famlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "famlab/error.hpp"

namespace famlab::numerics {

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile: q must lie in [0, 1]");
    const double position = static_cast<double>(sorted.size() - 1) * q;
    const auto lower = static_cast<std::size_t>(std::floor(position));
    if (lower + 1 >= sorted.size()) return sorted.back();
    const double frac = position - static_cast<double>(lower);
    if (frac == 0.0) return sorted[lower];
    return sorted[lower] + frac * (sorted[lower + 1] - sorted[lower]);
}

double quantile(std::span<const double> values, double q) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return sorted_quantile(sorted, q);
}

namespace {

double tricube(double u) {
    const double t = 1.0 - u * u * u;
    return t * t * t;
}

double bisquare(double u) {
    const double t = 1.0 - u * u;
    return t * t;
}

// One local fit at index i using neighbour window [left, right].
double local_fit(std::span<const double> x, std::span<const double> y, std::span<const double> robustness,
                 std::size_t i, std::size_t left, std::size_t right, std::vector<double>& weights) {
    const std::size_t n = x.size();
    const double xi = x[i];
    const double h = std::max(xi - x[left], x[right] - xi);

    std::size_t lo = left;
    std::size_t hi = right;
    if (h == 0.0) {
        while (lo > 0 && x[lo - 1] == xi) --lo;
        while (hi + 1 < n && x[hi + 1] == xi) ++hi;
    }

    double total = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double d = std::abs(x[j] - xi);
        double w = 0.0;
        if (h == 0.0)
            w = 1.0;
        else if (d < h)
            w = tricube(d / h);
        w *= robustness[j];
        weights[j - lo] = w;
        total += w;
    }
    if (total <= 0.0) return y[i];

    double mean_x = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) mean_x += weights[j - lo] / total * x[j];
    double spread = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
        const double dx = x[j] - mean_x;
        spread += weights[j - lo] / total * dx * dx;
    }

    double x_min = INFINITY, x_max = -INFINITY;
    for (std::size_t j = lo; j <= hi; ++j)
        if (weights[j - lo] > 0.0) {
            x_min = std::min(x_min, x[j]);
            x_max = std::max(x_max, x[j]);
        }

    double fitted = 0.0;
    if (x_max > x_min && spread > 0.0) {
        const double slope_factor = (xi - mean_x) / spread;
        for (std::size_t j = lo; j <= hi; ++j)
            fitted += weights[j - lo] / total * (1.0 + slope_factor * (x[j] - mean_x)) * y[j];
    } else {
        for (std::size_t j = lo; j <= hi; ++j) fitted += weights[j - lo] / total * y[j];
    }
    return fitted;
}

}  // namespace

LowessFit lowess(std::span<const double> x, std::span<const double> y, double f, int iterations) {
    const std::size_t n = x.size();
    if (y.size() != n)
        throw ValidationError("lowess: x has " + std::to_string(n) + " values but y has " + std::to_string(y.size()));
    if (n < 3) throw ValidationError("lowess: need at least 3 points");
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("lowess: f must lie in (0, 1]");
    if (iterations < 0) throw ValidationError("lowess: iterations must be nonnegative");
    for (std::size_t i = 1; i < n; ++i)
        if (x[i] < x[i - 1]) throw ValidationError("lowess: x must be sorted ascending");
    const auto span_points =
        std::min(n, static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9)));
    if (span_points < 2) throw ValidationError("lowess: f * n must cover at least 2 points");

    LowessFit fit;
    fit.x.assign(x.begin(), x.end());
    fit.y.assign(y.begin(), y.end());
    fit.f = f;
    fit.iterations = iterations;
    fit.fitted.assign(n, 0.0);

    std::vector<double> robustness(n, 1.0);
    std::vector<double> weights(n);
    std::vector<double> residuals(n);

    for (int pass = 0; pass <= iterations; ++pass) {
        std::size_t left = 0;
        std::size_t right = span_points - 1;
        for (std::size_t i = 0; i < n; ++i) {
            while (right + 1 < n && x[right + 1] - x[i] < x[i] - x[left]) {
                ++left;
                ++right;
            }
            fit.fitted[i] = local_fit(x, y, robustness, i, left, right, weights);
        }
        if (pass == iterations) break;

        double mean_abs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            residuals[i] = std::abs(y[i] - fit.fitted[i]);
            mean_abs += residuals[i];
        }
        mean_abs /= static_cast<double>(n);
        std::vector<double> sorted = residuals;
        std::sort(sorted.begin(), sorted.end());
        const double median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        const double scale = 6.0 * median;
        if (scale == 0.0 || scale < 1e-7 * mean_abs) break;
        for (std::size_t i = 0; i < n; ++i)
            robustness[i] = residuals[i] < scale ? bisquare(residuals[i] / scale) : 0.0;
    }
    return fit;
}

}  // namespace famlab::numerics
