#include "gafcnn/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>

#include "gafcnn/errors.hpp"

namespace gafcnn {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'F', '1'};
constexpr std::uint32_t kMaxRank = 8;

void write_u32_le(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v),
        static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 24),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw FormatError(std::string("tensor stream truncated reading ") + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& out, const std::vector<std::uint32_t>& dims,
                  const std::vector<float>& data) {
    std::uint64_t count = 1;
    for (const auto d : dims) count *= d;
    if (count != data.size()) {
        throw ArgError("write_tensor: dims product " + std::to_string(count) +
                       " != data length " + std::to_string(data.size()));
    }
    out.write(kMagic, 4);
    write_u32_le(out, static_cast<std::uint32_t>(dims.size()));
    for (const auto d : dims) write_u32_le(out, d);
    for (const float v : data) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        write_u32_le(out, bits);
    }
    if (!out) {
        throw IoError("write_tensor: stream failure");
    }
}

void write_tensor_file(const std::string& path, const std::vector<std::uint32_t>& dims,
                       const std::vector<float>& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open for writing: " + path);
    }
    write_tensor(f, dims, data);
}

TensorFile read_tensor(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a GAF1 tensor stream (bad magic)");
    }
    const std::uint32_t rank = read_u32_le(in, "rank");
    if (rank == 0 || rank > kMaxRank) {
        throw FormatError("tensor rank " + std::to_string(rank) + " outside [1, " +
                          std::to_string(kMaxRank) + "]");
    }
    TensorFile t;
    t.dims.resize(rank);
    std::uint64_t count = 1;
    for (auto& d : t.dims) {
        d = read_u32_le(in, "dims");
        if (d == 0 || count > std::numeric_limits<std::uint32_t>::max()) {
            throw FormatError("tensor dims invalid or oversized");
        }
        count *= d;
    }
    t.data.resize(count);
    for (auto& v : t.data) {
        const std::uint32_t bits = read_u32_le(in, "payload");
        std::memcpy(&v, &bits, 4);
    }
    return t;
}

TensorFile read_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw IoError("cannot open tensor file: " + path);
    }
    return read_tensor(f);
}

}  // namespace gafcnn
