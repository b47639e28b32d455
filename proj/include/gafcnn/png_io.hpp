#ifndef GAFCNN_PNG_IO_HPP
#define GAFCNN_PNG_IO_HPP

#include <string>
#include <vector>

namespace gafcnn {

/// Writes an 8-bit grayscale PNG (color type 0, no interlace).
/// `pixels` is row-major, width * height bytes. Throws IoError on failure.
void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<unsigned char>& pixels);

}  // namespace gafcnn

#endif
