#pragma once

// Bundle builders shared by the unit and acceptance suites.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "famlab/bundle.hpp"
#include "famlab/rng.hpp"

namespace famlab::testing {

inline Bundle make_bundle(const Matrix& z, const Matrix& w, const Vector& b, std::vector<std::int64_t> labels) {
    Bundle bundle;
    bundle.name = "fixture";
    bundle.z = z;
    bundle.head.w = w;
    bundle.head.b = b;
    bundle.labels = std::move(labels);
    for (auto y : bundle.labels) bundle.groups.push_back(y == kNovelLabel ? kNovelGroup : kKnownGroup);
    for (Eigen::Index c = 0; c < w.cols(); ++c) bundle.class_names.push_back("c" + std::to_string(c));
    return bundle;
}

inline Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
    const auto r = static_cast<Eigen::Index>(values.size());
    const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(values.begin()->size());
    Matrix m(r, c);
    Eigen::Index i = 0;
    for (const auto& row : values) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

inline Vector vec(std::initializer_list<double> values) {
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

struct RandomBundleOptions {
    Eigen::Index n = 24;
    Eigen::Index d = 6;
    Eigen::Index k = 3;
    double novel_fraction = 0.3;
    bool blur = true;
    bool zero_bias = false;
};

/// Random valid bundle: every class gets at least two known images and there
/// is at least one novel image when novel_fraction > 0.
inline Bundle random_bundle(std::uint64_t seed, const RandomBundleOptions& opt = {}) {
    auto engine = rng::stream(seed, 9001);
    const auto unit = [&] { return rng::uniform_unit(engine); };
    const auto normal = [&] { return rng::standard_normal(engine); };
    const Eigen::Index n = opt.n;
    Matrix z(n, opt.d);
    Matrix w(opt.d, opt.k);
    Vector b(opt.k);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = unit() < 0.2 ? 0.0 : 3.0 * unit();
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unit() < 0.1 ? 0.0 : normal();
    for (Eigen::Index c = 0; c < opt.k; ++c) b(c) = opt.zero_bias ? 0.0 : 0.5 * normal();

    std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
    const auto guaranteed = 2 * opt.k;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i < guaranteed)
            labels[static_cast<std::size_t>(i)] = i % opt.k;
        else if (i == guaranteed && opt.novel_fraction > 0.0)
            labels[static_cast<std::size_t>(i)] = kNovelLabel;
        else if (unit() < opt.novel_fraction)
            labels[static_cast<std::size_t>(i)] = kNovelLabel;
        else
            labels[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(rng::uniform_index(engine, static_cast<std::uint64_t>(opt.k)));
    }
    Bundle bundle = make_bundle(z, w, b, std::move(labels));
    bundle.name = "random-" + std::to_string(seed);
    if (opt.blur) {
        Matrix zb = z;
        for (Eigen::Index i = 0; i < zb.size(); ++i) zb.data()[i] *= unit() < 0.5 ? unit() : 1.0 + 0.2 * unit();
        bundle.z_blur = zb;
    }
    return bundle;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("famlab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace famlab::testing
