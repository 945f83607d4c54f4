#include "weights_io.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lowml/errors.hpp"

namespace fs = std::filesystem;

namespace lowml::io {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class ByteReader {
public:
    explicit ByteReader(const std::string& s) : s_(s) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == s_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > s_.size()) throw DataError("weights.bin: truncated payload");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

constexpr char kMagic[4] = {'L', 'T', 'P', 'W'};

}  // namespace

std::string encode_weights(const std::vector<F32Tensor>& tensors, std::uint32_t version) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, version);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        put_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.append(t.name);
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        std::size_t n = 1;
        for (std::size_t d : t.shape) {
            put_u32(out, static_cast<std::uint32_t>(d));
            n *= d;
        }
        if (n != t.data.size()) throw DataError("tensor '" + t.name + "': shape/data mismatch");
        for (float x : t.data) put_f32(out, x);
    }
    return out;
}

std::vector<F32Tensor> decode_weights(const std::string& bytes, std::uint32_t max_version) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError("weights.bin: bad magic (expected LTPW)");
    ByteReader r(bytes);
    r.bytes(4);
    std::uint32_t version = r.u32();
    if (version > max_version)
        throw BundleVersionError("weights.bin: format version " + std::to_string(version) +
                                 " unsupported (reader supports 1.." +
                                 std::to_string(max_version) + ")");
    std::uint32_t count = r.u32();
    std::vector<F32Tensor> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        F32Tensor t;
        std::uint32_t name_len = r.u32();
        t.name = r.bytes(name_len);
        std::uint32_t rank = r.u32();
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint32_t dim = r.u32();
            t.shape.push_back(dim);
            n *= dim;
        }
        t.data.reserve(n);
        for (std::size_t k = 0; k < n; ++k) t.data.push_back(r.f32());
        out.push_back(std::move(t));
    }
    if (!r.done()) throw DataError("weights.bin: trailing bytes after last tensor");
    return out;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * static_cast<std::size_t>(len));
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write: " + path);
}

std::string checksum_lines(const std::string& dir, const std::vector<std::string>& names) {
    std::string out;
    for (const auto& name : names) {
        out += sha256_hex(read_file((fs::path(dir) / name).string()));
        out += "  ";
        out += name;
        out += '\n';
    }
    return out;
}

void verify_checksums(const std::string& dir, const std::string& checksum_file) {
    fs::path cpath = fs::path(dir) / checksum_file;
    if (!fs::exists(cpath))
        throw BundleMissingFileError("bundle missing file: " + checksum_file);
    std::istringstream in(read_file(cpath.string()));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto sep = line.find("  ");
        if (sep == std::string::npos || sep != 64)
            throw BundleChecksumError("malformed checksum line: " + line);
        std::string expected = line.substr(0, sep);
        std::string name = line.substr(sep + 2);
        fs::path fpath = fs::path(dir) / name;
        if (!fs::exists(fpath)) throw BundleMissingFileError("bundle missing file: " + name);
        std::string actual = sha256_hex(read_file(fpath.string()));
        if (actual != expected)
            throw BundleChecksumError("checksum mismatch for " + name + ": expected " +
                                      expected + ", got " + actual);
    }
}

}  // namespace lowml::io
