#ifndef GAFCNN_TENSOR_IO_HPP
#define GAFCNN_TENSOR_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gafcnn {

/// Raw tensor file: magic "GAF1", u32 little-endian rank, u32 dims, then the
/// f32 little-endian payload in row-major order.
struct TensorFile {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

void write_tensor(std::ostream& out, const std::vector<std::uint32_t>& dims,
                  const std::vector<float>& data);
void write_tensor_file(const std::string& path, const std::vector<std::uint32_t>& dims,
                       const std::vector<float>& data);

/// Throws FormatError on a bad magic, absurd rank, or truncated payload.
TensorFile read_tensor(std::istream& in);
TensorFile read_tensor_file(const std::string& path);

}  // namespace gafcnn

#endif
