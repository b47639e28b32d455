#include "gafcnn/png_io.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>

#include "gafcnn/errors.hpp"

namespace gafcnn {

namespace {

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
    put_be32(out, crc);
}

}  // namespace

void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<unsigned char>& pixels) {
    if (width <= 0 || height <= 0 ||
        pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw ArgError("write_png_gray8: pixel buffer does not match dimensions");
    }

    // Raw image stream: one filter byte (0 = none) before each scanline.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(height) * (static_cast<std::size_t>(width) + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const auto* row = pixels.data() + static_cast<std::size_t>(y) * width;
        raw.insert(raw.end(), row, row + width);
    }

    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, raw.data(), static_cast<uLong>(raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
        throw IoError("write_png_gray8: deflate failed");
    }
    compressed.resize(compressed_size);

    std::vector<unsigned char> out;
    static const unsigned char signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    out.insert(out.end(), signature, signature + 8);

    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(0);  // color type: grayscale
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open for writing: " + path);
    }
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw IoError("short write: " + path);
    }
}

}  // namespace gafcnn
