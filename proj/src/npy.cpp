#include "famlab/npy.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>

#include "famlab/error.hpp"
#include "famlab/fileio.hpp"

static_assert(std::endian::native == std::endian::little, "npy payloads are read in place");

namespace famlab::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicSize = 6;
constexpr std::size_t kAlignment = 64;

struct DTypeInfo {
    DType dtype;
    const char* descr;
    std::size_t size;
};

constexpr DTypeInfo kDTypes[] = {
    {DType::float32, "<f4", 4}, {DType::float64, "<f8", 8}, {DType::int8, "|i1", 1},
    {DType::int32, "<i4", 4},   {DType::int64, "<i8", 8},   {DType::uint8, "|u1", 1},
    {DType::boolean, "|b1", 1},
};

const DTypeInfo& info(DType dtype) {
    for (const auto& entry : kDTypes)
        if (entry.dtype == dtype) return entry;
    throw ValidationError("unknown dtype");
}

DType parse_descr(const std::string& descr) {
    for (const auto& entry : kDTypes)
        if (descr == entry.descr) return entry.dtype;
    // Single-byte types are sometimes written with '<' instead of '|'.
    if (descr == "<i1") return DType::int8;
    if (descr == "<u1") return DType::uint8;
    if (descr == "<b1") return DType::boolean;
    if (!descr.empty() && descr[0] == '>') throw ValidationError("big-endian npy payload not supported: " + descr);
    throw ValidationError("unsupported npy dtype " + descr);
}

std::size_t skip_space(const std::string& s, std::size_t pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos;
}

// Position just past the ':' following key, or npos.
std::size_t find_value(const std::string& dict, const std::string& key) {
    for (const char quote : {'\'', '"'}) {
        const std::string token = std::string(1, quote) + key + quote;
        auto pos = dict.find(token);
        if (pos == std::string::npos) continue;
        pos = skip_space(dict, pos + token.size());
        if (pos < dict.size() && dict[pos] == ':') return skip_space(dict, pos + 1);
    }
    return std::string::npos;
}

template <typename T>
T load(const unsigned char* p) {
    T value;
    std::memcpy(&value, p, sizeof(T));
    return value;
}

double element_as_double(const Array& array, std::size_t index) {
    const auto* p = array.payload.data() + index * dtype_size(array.header.dtype);
    switch (array.header.dtype) {
        case DType::float32: return static_cast<double>(load<float>(p));
        case DType::float64: return load<double>(p);
        default: return 0.0;
    }
}

std::int64_t element_as_integer(const Array& array, std::size_t index) {
    const auto* p = array.payload.data() + index * dtype_size(array.header.dtype);
    switch (array.header.dtype) {
        case DType::int8: return load<std::int8_t>(p);
        case DType::int32: return load<std::int32_t>(p);
        case DType::int64: return load<std::int64_t>(p);
        case DType::uint8: return load<std::uint8_t>(p);
        case DType::boolean: return load<std::uint8_t>(p) != 0 ? 1 : 0;
        default: return 0;
    }
}

bool is_float(DType dtype) { return dtype == DType::float32 || dtype == DType::float64; }

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

}  // namespace

std::size_t Header::element_count() const {
    std::size_t count = 1;
    for (auto dim : shape) count *= dim;
    return count;
}

std::size_t dtype_size(DType dtype) { return info(dtype).size; }

std::string dtype_descr(DType dtype) { return info(dtype).descr; }

std::string encode_header(DType dtype, std::span<const std::size_t> shape) {
    std::string dict = "{'descr': '" + dtype_descr(dtype) + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) dict += ", ";
        dict += std::to_string(shape[i]);
    }
    if (shape.size() == 1) dict += ",";
    dict += "), }";
    const std::size_t preamble = kMagicSize + 2 + 2;
    std::size_t total = preamble + dict.size() + 1;
    total = (total + kAlignment - 1) / kAlignment * kAlignment;
    dict.append(total - preamble - dict.size() - 1, ' ');
    dict += '\n';
    if (dict.size() > 0xFFFF) throw ValidationError("npy header too long for version 1.0");

    std::string out(kMagic, kMagicSize);
    out += '\x01';
    out += '\x00';
    out += static_cast<char>(dict.size() & 0xFF);
    out += static_cast<char>((dict.size() >> 8) & 0xFF);
    out += dict;
    return out;
}

Header parse_header_dict(const std::string& dict) {
    Header header;

    auto pos = find_value(dict, "descr");
    if (pos == std::string::npos || pos >= dict.size() || (dict[pos] != '\'' && dict[pos] != '"'))
        throw ValidationError("npy header missing 'descr'");
    const auto close = dict.find(dict[pos], pos + 1);
    if (close == std::string::npos) throw ValidationError("npy header: unterminated descr");
    header.dtype = parse_descr(dict.substr(pos + 1, close - pos - 1));

    pos = find_value(dict, "fortran_order");
    if (pos == std::string::npos) throw ValidationError("npy header missing 'fortran_order'");
    if (dict.compare(pos, 4, "True") == 0)
        header.fortran_order = true;
    else if (dict.compare(pos, 5, "False") == 0)
        header.fortran_order = false;
    else
        throw ValidationError("npy header: bad fortran_order");

    pos = find_value(dict, "shape");
    if (pos == std::string::npos || pos >= dict.size() || dict[pos] != '(')
        throw ValidationError("npy header missing 'shape'");
    const auto end = dict.find(')', pos);
    if (end == std::string::npos) throw ValidationError("npy header: unterminated shape");
    std::size_t i = pos + 1;
    while (i < end) {
        i = skip_space(dict, i);
        if (i >= end) break;
        if (!std::isdigit(static_cast<unsigned char>(dict[i]))) throw ValidationError("npy header: bad shape");
        std::size_t dim = 0;
        while (i < end && std::isdigit(static_cast<unsigned char>(dict[i]))) dim = dim * 10 + (dict[i++] - '0');
        header.shape.push_back(dim);
        i = skip_space(dict, i);
        if (i < end && dict[i] == ',') ++i;
    }
    return header;
}

Array read(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const auto fail = [&](const std::string& why) { return ValidationError(path.string() + ": " + why); };
    if (bytes.size() < kMagicSize + 4 || bytes.compare(0, kMagicSize, kMagic, kMagicSize) != 0)
        throw fail("not an npy file");
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw fail("truncated header");
        for (int b = 3; b >= 0; --b) header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + b]);
        offset = 12;
    } else {
        throw fail("unsupported npy version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) throw fail("truncated header");

    Array array;
    try {
        array.header = parse_header_dict(bytes.substr(offset, header_len));
    } catch (const ValidationError& e) {
        throw fail(e.what());
    }
    const std::size_t payload_size = array.header.element_count() * dtype_size(array.header.dtype);
    const std::size_t start = offset + header_len;
    if (bytes.size() - start != payload_size)
        throw fail("payload size " + std::to_string(bytes.size() - start) + " does not match shape " +
                   shape_string(array.header.shape));
    array.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
    return array;
}

void write(const std::filesystem::path& path, const Array& array) {
    if (array.header.fortran_order) throw ValidationError("writer emits C-order arrays only");
    if (array.payload.size() != array.header.element_count() * dtype_size(array.header.dtype))
        throw ValidationError("payload does not match header shape");
    std::string bytes = encode_header(array.header.dtype, array.header.shape);
    bytes.append(reinterpret_cast<const char*>(array.payload.data()), array.payload.size());
    write_file_atomic(path, bytes);
}

Matrix to_matrix(const Array& array, const std::string& field) {
    if (!is_float(array.header.dtype)) throw ValidationError(field + ": expected float32 or float64 array");
    if (array.header.shape.size() != 2)
        throw ValidationError(field + ": expected a 2-D array, got shape " + shape_string(array.header.shape));
    const auto rows = static_cast<Eigen::Index>(array.header.shape[0]);
    const auto cols = static_cast<Eigen::Index>(array.header.shape[1]);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const auto index = array.header.fortran_order ? static_cast<std::size_t>(c * rows + r)
                                                          : static_cast<std::size_t>(r * cols + c);
            m(r, c) = element_as_double(array, index);
        }
    }
    return m;
}

std::vector<double> to_doubles(const Array& array, const std::string& field) {
    if (!is_float(array.header.dtype)) throw ValidationError(field + ": expected float32 or float64 array");
    const auto& shape = array.header.shape;
    if (!(shape.size() == 1 || (shape.size() == 2 && shape[1] == 1)))
        throw ValidationError(field + ": expected a 1-D array, got shape " + shape_string(shape));
    std::vector<double> out(array.header.element_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = element_as_double(array, i);
    return out;
}

std::vector<std::int64_t> to_integers(const Array& array, const std::string& field) {
    if (is_float(array.header.dtype)) throw ValidationError(field + ": expected an integer array");
    const auto& shape = array.header.shape;
    if (!(shape.size() == 1 || (shape.size() == 2 && shape[1] == 1)))
        throw ValidationError(field + ": expected a 1-D array, got shape " + shape_string(shape));
    std::vector<std::int64_t> out(array.header.element_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = element_as_integer(array, i);
    return out;
}

Array from_matrix(const Matrix& m) {
    Array array;
    array.header.dtype = DType::float64;
    array.header.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
    array.payload.resize(static_cast<std::size_t>(m.size()) * sizeof(double));
    if (m.size() > 0) std::memcpy(array.payload.data(), m.data(), array.payload.size());
    return array;
}

Array from_doubles(std::span<const double> values) {
    Array array;
    array.header.dtype = DType::float64;
    array.header.shape = {values.size()};
    array.payload.resize(values.size_bytes());
    if (!values.empty()) std::memcpy(array.payload.data(), values.data(), values.size_bytes());
    return array;
}

Array from_integers(std::span<const std::int64_t> values) {
    Array array;
    array.header.dtype = DType::int64;
    array.header.shape = {values.size()};
    array.payload.resize(values.size_bytes());
    if (!values.empty()) std::memcpy(array.payload.data(), values.data(), values.size_bytes());
    return array;
}

}  // namespace famlab::npy
