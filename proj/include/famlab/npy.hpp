#pragma once

// Reader/writer for the .npy array format (version 1.0 on write; 1.0, 2.0
// and 3.0 on read). Only little-endian numeric payloads are accepted.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace famlab::npy {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class DType { float32, float64, int8, int32, int64, uint8, boolean };

struct Header {
    DType dtype = DType::float64;
    bool fortran_order = false;
    std::vector<std::size_t> shape;

    std::size_t element_count() const;
};

/// Raw array: header plus payload bytes exactly as stored on disk.
struct Array {
    Header header;
    std::vector<unsigned char> payload;
};

std::size_t dtype_size(DType dtype);
std::string dtype_descr(DType dtype);

/// Full preamble (magic, version, length, padded dict) for a C-order array.
std::string encode_header(DType dtype, std::span<const std::size_t> shape);
Header parse_header_dict(const std::string& dict);

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, const Array& array);

// Typed views. `field` names the array in diagnostics.
Matrix to_matrix(const Array& array, const std::string& field);
std::vector<double> to_doubles(const Array& array, const std::string& field);
std::vector<std::int64_t> to_integers(const Array& array, const std::string& field);

Array from_matrix(const Matrix& m);
Array from_doubles(std::span<const double> values);
Array from_integers(std::span<const std::int64_t> values);

}  // namespace famlab::npy
