// Reader for the big-endian IDX image/label archives (MNIST layout).
#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sle/common.hpp"

namespace sle {

struct ImageTensor {
    std::size_t count = 0, rows = 0, cols = 0;
    std::vector<double> pixels;  // count*rows*cols values in [0,1]

    std::size_t image_size() const { return rows * cols; }
    const double* image(std::size_t i) const { return pixels.data() + i * image_size(); }
};

namespace detail {

inline std::uint32_t read_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
           std::uint32_t(p[3]);
}

}  // namespace detail

// magic 0x00000803: images with dims (count, rows, cols), pixels / 255.
inline ImageTensor read_idx_images(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4) throw DataError("idx: truncated header");
    const std::uint32_t magic = detail::read_be32(bytes.data());
    if (magic == 0x00000801) throw DataError("idx: label archive passed where images expected");
    if (magic != 0x00000803) throw DataError("idx: unsupported magic " + std::to_string(magic));
    if (bytes.size() < 16) throw DataError("idx: truncated dimension header");
    ImageTensor tensor;
    tensor.count = detail::read_be32(bytes.data() + 4);
    tensor.rows = detail::read_be32(bytes.data() + 8);
    tensor.cols = detail::read_be32(bytes.data() + 12);
    const std::size_t expected = tensor.count * tensor.rows * tensor.cols;
    if (bytes.size() != 16 + expected) throw DataError("idx: truncated payload");
    tensor.pixels.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        tensor.pixels[i] = static_cast<double>(bytes[16 + i]) / 255.0;
    }
    return tensor;
}

// magic 0x00000801: labels as integers 0-9.
inline std::vector<int> read_idx_labels(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 4) throw DataError("idx: truncated header");
    const std::uint32_t magic = detail::read_be32(bytes.data());
    if (magic == 0x00000803) throw DataError("idx: image archive passed where labels expected");
    if (magic != 0x00000801) throw DataError("idx: unsupported magic " + std::to_string(magic));
    if (bytes.size() < 8) throw DataError("idx: truncated dimension header");
    const std::size_t count = detail::read_be32(bytes.data() + 4);
    if (bytes.size() != 8 + count) throw DataError("idx: truncated payload");
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(bytes[8 + i]);
    return labels;
}

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace sle
