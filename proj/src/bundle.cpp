#include "famlab/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include <openssl/evp.h>

#include "famlab/error.hpp"
#include "famlab/fileio.hpp"

namespace famlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_finite(const Matrix& m, const std::string& field) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (!std::isfinite(m(r, c)))
                throw ValidationError(field + ": non-finite entry at (" + std::to_string(r) + ", " +
                                      std::to_string(c) + ")");
}

std::string string_field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError("manifest: missing \"" + where + key + "\"");
    if (!obj.at(key).is_string()) throw ValidationError("manifest: \"" + where + key + "\" must be a string");
    return obj.at(key).get<std::string>();
}

fs::path resolve(const fs::path& base, const std::string& rel) {
    const fs::path p(rel);
    return p.is_absolute() ? p : base / p;
}

npy::Array load_array(const fs::path& path, const std::string& field) {
    if (!fs::exists(path)) throw IoError(field + ": missing file " + path.string());
    try {
        return npy::read(path);
    } catch (const ValidationError& e) {
        throw ValidationError(field + ": " + e.what());
    }
}

}  // namespace

bool ClassifierHead::operator==(const ClassifierHead& other) const {
    return w.rows() == other.w.rows() && w.cols() == other.w.cols() && b.size() == other.b.size() &&
           w == other.w && b == other.b;
}

std::size_t Bundle::count_known() const { return static_cast<std::size_t>(std::count(groups.begin(), groups.end(), kKnownGroup)); }

std::size_t Bundle::count_novel() const { return static_cast<std::size_t>(std::count(groups.begin(), groups.end(), kNovelGroup)); }

bool Bundle::operator==(const Bundle& other) const {
    const auto same_shape = [](const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
    if (name != other.name || labels != other.labels || groups != other.groups || class_names != other.class_names)
        return false;
    if (!same_shape(z, other.z) || z != other.z) return false;
    if (z_blur.has_value() != other.z_blur.has_value()) return false;
    if (z_blur && (!same_shape(*z_blur, *other.z_blur) || *z_blur != *other.z_blur)) return false;
    return head == other.head;
}

void validate(const Bundle& bundle) {
    const auto n = static_cast<std::size_t>(bundle.z.rows());
    const auto d = bundle.z.cols();
    const auto k = bundle.head.w.cols();

    if (bundle.head.w.rows() != d)
        throw ValidationError("head.w: shape " + std::to_string(bundle.head.w.rows()) + "x" + std::to_string(k) +
                              " does not match D=" + std::to_string(d));
    if (k < 2) throw ValidationError("head.w: need at least 2 classes, got " + std::to_string(k));
    if (bundle.head.b.size() != k)
        throw ValidationError("head.b: length " + std::to_string(bundle.head.b.size()) + " does not match K=" +
                              std::to_string(k));
    if (bundle.z_blur && (bundle.z_blur->rows() != bundle.z.rows() || bundle.z_blur->cols() != d))
        throw ValidationError("z_blur: shape does not match z");
    if (bundle.labels.size() != n)
        throw ValidationError("labels: length " + std::to_string(bundle.labels.size()) + " does not match N=" +
                              std::to_string(n));
    if (bundle.groups.size() != n)
        throw ValidationError("groups: length " + std::to_string(bundle.groups.size()) + " does not match N=" +
                              std::to_string(n));
    if (bundle.class_names.size() != static_cast<std::size_t>(k))
        throw ValidationError("class_names: " + std::to_string(bundle.class_names.size()) +
                              " names for K=" + std::to_string(k));

    for (std::size_t i = 0; i < n; ++i) {
        const auto g = bundle.groups[i];
        const auto y = bundle.labels[i];
        if (g != kKnownGroup && g != kNovelGroup)
            throw ValidationError("groups: value " + std::to_string(g) + " at index " + std::to_string(i) +
                                  " is not 0 or 1");
        if ((y == kNovelLabel) != (g == kNovelGroup))
            throw ValidationError("label/group inconsistency at index " + std::to_string(i));
        if (g == kKnownGroup && (y < 0 || y >= k))
            throw ValidationError("labels: label " + std::to_string(y) + " out of range at index " +
                                  std::to_string(i));
    }

    require_finite(bundle.z, "z");
    if (bundle.z_blur) require_finite(*bundle.z_blur, "z_blur");
    require_finite(bundle.head.w, "head.w");
    for (Eigen::Index c = 0; c < k; ++c)
        if (!std::isfinite(bundle.head.b(c))) throw ValidationError("head.b: non-finite entry at " + std::to_string(c));
}

Bundle read_bundle(const fs::path& manifest_path) {
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw ValidationError("manifest: invalid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object()) throw ValidationError("manifest: top level must be an object");
    const fs::path base = manifest_path.parent_path();

    Bundle bundle;
    bundle.name = string_field(manifest, "name", "");
    if (!manifest.contains("arrays") || !manifest["arrays"].is_object())
        throw ValidationError("manifest: missing \"arrays\" object");
    if (!manifest.contains("head") || !manifest["head"].is_object())
        throw ValidationError("manifest: missing \"head\" object");
    const json& arrays = manifest["arrays"];
    const json& head = manifest["head"];

    bundle.z = npy::to_matrix(load_array(resolve(base, string_field(arrays, "z", "arrays.")), "z"), "z");
    if (arrays.contains("z_blur"))
        bundle.z_blur = npy::to_matrix(
            load_array(resolve(base, string_field(arrays, "z_blur", "arrays.")), "z_blur"), "z_blur");
    bundle.labels =
        npy::to_integers(load_array(resolve(base, string_field(arrays, "labels", "arrays.")), "labels"), "labels");
    bundle.groups =
        npy::to_integers(load_array(resolve(base, string_field(arrays, "groups", "arrays.")), "groups"), "groups");
    bundle.head.w = npy::to_matrix(load_array(resolve(base, string_field(head, "w", "head.")), "head.w"), "head.w");
    const auto b = npy::to_doubles(load_array(resolve(base, string_field(head, "b", "head.")), "head.b"), "head.b");
    bundle.head.b = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));

    if (!manifest.contains("class_names") || !manifest["class_names"].is_array())
        throw ValidationError("manifest: missing \"class_names\" array");
    for (const auto& entry : manifest["class_names"]) {
        if (!entry.is_string()) throw ValidationError("class_names: entries must be strings");
        bundle.class_names.push_back(entry.get<std::string>());
    }

    validate(bundle);
    return bundle;
}

fs::path write_bundle(const Bundle& bundle, const fs::path& dir) {
    validate(bundle);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string());

    json arrays = json::object();
    arrays["z"] = "z.npy";
    npy::write(dir / "z.npy", npy::from_matrix(bundle.z));
    if (bundle.z_blur) {
        arrays["z_blur"] = "z_blur.npy";
        npy::write(dir / "z_blur.npy", npy::from_matrix(*bundle.z_blur));
    } else if (fs::exists(dir / "z_blur.npy")) {
        fs::remove(dir / "z_blur.npy", ec);
    }
    arrays["labels"] = "labels.npy";
    npy::write(dir / "labels.npy", npy::from_integers(bundle.labels));
    arrays["groups"] = "groups.npy";
    npy::write(dir / "groups.npy", npy::from_integers(bundle.groups));
    npy::write(dir / "w.npy", npy::from_matrix(bundle.head.w));
    const std::vector<double> b(bundle.head.b.data(), bundle.head.b.data() + bundle.head.b.size());
    npy::write(dir / "b.npy", npy::from_doubles(b));

    json manifest = json::object();
    manifest["name"] = bundle.name;
    manifest["arrays"] = arrays;
    manifest["head"] = {{"w", "w.npy"}, {"b", "b.npy"}};
    manifest["class_names"] = bundle.class_names;
    const fs::path manifest_path = dir / "manifest.json";
    write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

Bundle with_blurred_known(const Bundle& bundle) {
    if (!bundle.z_blur) throw ValidationError("z_blur: required for blurred known activations");
    Bundle out = bundle;
    for (Eigen::Index i = 0; i < bundle.images(); ++i)
        if (bundle.is_known(i)) out.z.row(i) = bundle.z_blur->row(i);
    return out;
}

Bundle swap_blurred(const Bundle& bundle) {
    if (!bundle.z_blur) throw ValidationError("z_blur: required to swap activations");
    Bundle out = bundle;
    std::swap(out.z, *out.z_blur);
    return out;
}

std::string bundle_digest(const fs::path& manifest_path) {
    const std::string manifest_bytes = read_file(manifest_path);
    const json manifest = json::parse(manifest_bytes);
    const fs::path base = manifest_path.parent_path();

    std::vector<std::string> parts{manifest_bytes};
    for (const char* key : {"z", "z_blur", "labels", "groups"})
        if (manifest["arrays"].contains(key))
            parts.push_back(read_file(resolve(base, manifest["arrays"][key].get<std::string>())));
    for (const char* key : {"w", "b"}) parts.push_back(read_file(resolve(base, manifest["head"][key].get<std::string>())));

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw NumericalError("sha256: context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    for (const auto& part : parts) EVP_DigestUpdate(ctx, part.data(), part.size());
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);

    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace famlab
