#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "famlab/npy.hpp"

namespace famlab {

using Matrix = npy::Matrix;
using Vector = Eigen::VectorXd;

/// Group flag values stored in Bundle::groups.
inline constexpr std::int64_t kKnownGroup = 0;
inline constexpr std::int64_t kNovelGroup = 1;
inline constexpr std::int64_t kNovelLabel = -1;

/// Which class assignment defines "the images of class k" for per-class means.
enum class Reference { ground_truth, predicted };

/// Linear logit head: logit_k = sum_j w(j, k) * z_j + b(k).
struct ClassifierHead {
    Matrix w;  // D x K
    Vector b;  // K

    Eigen::Index features() const { return w.rows(); }
    Eigen::Index classes() const { return w.cols(); }

    bool operator==(const ClassifierHead& other) const;
};

/// Penultimate-layer activations of N images plus the head that consumed them.
/// Immutable after construction by read_bundle/validate.
struct Bundle {
    std::string name;
    Matrix z;                      // N x D
    std::optional<Matrix> z_blur;  // N x D
    std::vector<std::int64_t> labels;
    std::vector<std::int64_t> groups;
    ClassifierHead head;
    std::vector<std::string> class_names;

    Eigen::Index images() const { return z.rows(); }
    Eigen::Index features() const { return z.cols(); }
    Eigen::Index classes() const { return head.classes(); }

    bool is_known(Eigen::Index i) const { return groups[static_cast<std::size_t>(i)] == kKnownGroup; }
    bool is_novel(Eigen::Index i) const { return groups[static_cast<std::size_t>(i)] == kNovelGroup; }
    std::size_t count_known() const;
    std::size_t count_novel() const;

    bool operator==(const Bundle& other) const;
};

/// Throws ValidationError naming the offending field when an invariant fails.
void validate(const Bundle& bundle);

Bundle read_bundle(const std::filesystem::path& manifest_path);

/// Writes `<dir>/manifest.json` and one .npy per array; returns the manifest path.
std::filesystem::path write_bundle(const Bundle& bundle, const std::filesystem::path& dir);

/// Copy in which every known image's z row is replaced by its z_blur row
/// (occlusion comparison). Requires z_blur.
Bundle with_blurred_known(const Bundle& bundle);

/// Copy with z and z_blur exchanged. Requires z_blur.
Bundle swap_blurred(const Bundle& bundle);

/// SHA-256 (hex) over the manifest followed by each referenced array file in
/// manifest order: z, z_blur, labels, groups, w, b.
std::string bundle_digest(const std::filesystem::path& manifest_path);

}  // namespace famlab
