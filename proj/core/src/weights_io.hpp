#pragma once

// Shared bundle plumbing: the "LTPW" tensor container used by predictor and
// topic bundles, SHA-256 checksum files, and small filesystem helpers.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lowml::io {

struct F32Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> data;
};

// Layout: magic "LTPW", u32 version, u32 tensor count, then per tensor:
// u32 name length + bytes, u32 rank, u32 dims..., f32 payload. All
// little-endian.
std::string encode_weights(const std::vector<F32Tensor>& tensors, std::uint32_t version);
std::vector<F32Tensor> decode_weights(const std::string& bytes, std::uint32_t max_version);

std::string sha256_hex(const std::string& bytes);

std::string read_file(const std::string& path);           // throws DataError
void write_file(const std::string& path, const std::string& bytes);

// "checksum" file: one "<hex>  <name>" line per bundle file, in the given
// order. Verification throws BundleChecksumError / BundleMissingFileError.
std::string checksum_lines(const std::string& dir, const std::vector<std::string>& names);
void verify_checksums(const std::string& dir, const std::string& checksum_file);

}  // namespace lowml::io
