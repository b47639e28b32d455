#ifndef GAFCNN_GAF_HPP
#define GAFCNN_GAF_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gafcnn/signal_io.hpp"

namespace gafcnn {

/// A series mapped to the polar encoding: values rescaled to [-1, 1],
/// angles arccos(value) in [0, pi], radii (i+1)/N. Radii are carried for
/// completeness; the Gramian entries depend on the angles only.
struct NormalizedSeries {
    std::vector<double> values;
    std::vector<double> angles;
    std::vector<double> radii;

    std::size_t length() const { return values.size(); }
};

enum class GafKind { Gasf, Gadf };

/// Square Gramian field over the polar angles. Gasf entries are
/// cos(phi_i + phi_j) (symmetric, diagonal 2*v_i^2 - 1); Gadf entries are
/// sin(phi_i - phi_j) (antisymmetric, zero diagonal). All entries in [-1, 1].
struct GafMatrix {
    int n = 0;
    GafKind kind = GafKind::Gasf;
    std::vector<float> entries;  // row-major n*n

    float at(int i, int j) const { return entries[static_cast<std::size_t>(i) * n + j]; }
};

/// H x W x C image with all pixels in [-1, 1], row-major (H, W, C).
struct GafImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    float at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

enum class Reduction { ImageBilinear, SeriesPaa };

struct EncoderConfig {
    GafKind kind = GafKind::Gasf;
    Reduction reduction = Reduction::ImageBilinear;
    int target_size = 32;
    int channels = 3;
};

/// Min-max rescale to [-1, 1] followed by the polar mapping. A constant
/// series maps to all zeros (angle pi/2) rather than dividing by zero.
NormalizedSeries rescale(const std::vector<double>& series);
NormalizedSeries rescale(const std::vector<float>& series);

GafMatrix gasf(const NormalizedSeries& ns);
GafMatrix gadf(const NormalizedSeries& ns);

/// Piecewise aggregate approximation with fractional segment overlap:
/// output j is the overlap-weighted mean of the samples covered by segment
/// [j*N/m, (j+1)*N/m). Preserves the global mean. Throws ArgError unless
/// 1 <= m <= N.
std::vector<double> paa(const std::vector<double>& series, int m);

/// Bilinear resampling with half-pixel-centered coordinates (align-corners
/// false). Output values stay within [min(input), max(input)].
std::vector<float> resize_bilinear(const std::vector<float>& image, int h, int w, int out_h,
                                   int out_w);

/// Full record-to-image pipeline: rescale, optional series reduction (PAA),
/// Gramian field, optional image reduction (bilinear), channel replication.
GafImage encode(const HeartbeatRecord& record, const EncoderConfig& cfg);

/// Encodes every record, optionally in parallel; output is independent of
/// the thread count. Returns images in record order.
std::vector<GafImage> encode_dataset(const Dataset& ds, const EncoderConfig& cfg,
                                     int threads = 1);

/// Writes channel 0 as an 8-bit grayscale PNG; pixel = round((v+1)/2 * 255).
void export_image(const GafImage& img, const std::string& path);

std::string to_string(GafKind kind);
std::string to_string(Reduction reduction);

}  // namespace gafcnn

#endif
