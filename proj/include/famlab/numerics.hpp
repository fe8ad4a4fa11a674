#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace famlab::numerics {

/// Type-7 quantile: linear interpolation between order statistics at
/// position (n - 1) * q. Copies and sorts its input.
double quantile(std::span<const double> values, double q);

/// Same convention on input already sorted ascending.
double sorted_quantile(std::span<const double> sorted, double q);

struct LowessFit {
    std::vector<double> x;
    std::vector<double> y;
    double f = 0.25;
    int iterations = 3;
    std::vector<double> fitted;
};

/// Cleveland's robust locally weighted linear regression evaluated at the
/// input abscissae.
///
/// Each point is fitted from its ceil(f * n) nearest neighbours (counting the
/// point itself) with tricube weights on distance scaled by the distance to
/// the farthest of them; neighbours tied at that distance get zero weight, as
/// do points beyond it. When every neighbour shares the point's abscissa the
/// scale is zero and they are weighted uniformly. A local design in which
/// every positively weighted neighbour shares one abscissa falls back to the
/// weighted mean of y.
///
/// After the initial fit, `iterations` robustness passes reweight points by
/// bisquare(residual / (6 * median |residual|)). Iteration stops early once
/// that scale is zero or below 1e-7 of the mean absolute residual.
LowessFit lowess(std::span<const double> x, std::span<const double> y, double f = 0.25, int iterations = 3);

}  // namespace famlab::numerics
