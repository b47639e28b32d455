#include "gafcnn/gaf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gafcnn/errors.hpp"
#include "gafcnn/parallel.hpp"
#include "gafcnn/png_io.hpp"

namespace gafcnn {

NormalizedSeries rescale(const std::vector<double>& series) {
    if (series.empty()) {
        throw ArgError("rescale: empty series");
    }
    double lo = series[0], hi = series[0];
    for (const double v : series) {
        if (!std::isfinite(v)) {
            throw ArgError("rescale: non-finite sample");
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    NormalizedSeries ns;
    const std::size_t n = series.size();
    ns.values.resize(n);
    ns.angles.resize(n);
    ns.radii.resize(n);
    const double span = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
        // Constant series: amplitude vanishes, take the midpoint value 0.
        double v = span == 0.0 ? 0.0 : ((series[i] - hi) + (series[i] - lo)) / span;
        v = std::clamp(v, -1.0, 1.0);
        ns.values[i] = v;
        ns.angles[i] = std::acos(v);
        ns.radii[i] = static_cast<double>(i + 1) / static_cast<double>(n);
    }
    return ns;
}

NormalizedSeries rescale(const std::vector<float>& series) {
    return rescale(std::vector<double>(series.begin(), series.end()));
}

GafMatrix gasf(const NormalizedSeries& ns) {
    const int n = static_cast<int>(ns.length());
    GafMatrix g;
    g.n = n;
    g.kind = GafKind::Gasf;
    g.entries.resize(static_cast<std::size_t>(n) * n);
    // Upper triangle once, mirrored; symmetry is exact by construction.
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const auto v = static_cast<float>(std::cos(ns.angles[i] + ns.angles[j]));
            g.entries[static_cast<std::size_t>(i) * n + j] = v;
            g.entries[static_cast<std::size_t>(j) * n + i] = v;
        }
    }
    return g;
}

GafMatrix gadf(const NormalizedSeries& ns) {
    const int n = static_cast<int>(ns.length());
    GafMatrix g;
    g.n = n;
    g.kind = GafKind::Gadf;
    g.entries.assign(static_cast<std::size_t>(n) * n, 0.0f);  // diagonal stays exactly zero
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const auto v = static_cast<float>(std::sin(ns.angles[i] - ns.angles[j]));
            g.entries[static_cast<std::size_t>(i) * n + j] = v;
            g.entries[static_cast<std::size_t>(j) * n + i] = -v;
        }
    }
    return g;
}

std::vector<double> paa(const std::vector<double>& series, int m) {
    const int n = static_cast<int>(series.size());
    if (m < 1 || m > n) {
        throw ArgError("paa: output length " + std::to_string(m) + " outside [1, " +
                       std::to_string(n) + "]");
    }
    if (m == n) return series;

    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    const double seg = static_cast<double>(n) / static_cast<double>(m);
    for (int j = 0; j < m; ++j) {
        const double start = seg * j;
        const double end = seg * (j + 1);
        double acc = 0.0;
        // Sample i occupies the unit frame [i, i+1); weight by overlap.
        for (int i = static_cast<int>(std::floor(start)); i < n && i < end; ++i) {
            const double overlap =
                std::min(end, static_cast<double>(i + 1)) - std::max(start, static_cast<double>(i));
            if (overlap > 0.0) acc += overlap * series[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(j)] = acc / seg;
    }
    return out;
}

std::vector<float> resize_bilinear(const std::vector<float>& image, int h, int w, int out_h,
                                   int out_w) {
    if (h < 2 || w < 2) {
        throw ArgError("resize_bilinear: input must be at least 2x2");
    }
    if (out_h < 1 || out_w < 1) {
        throw ArgError("resize_bilinear: output size must be positive");
    }
    std::vector<float> out(static_cast<std::size_t>(out_h) * out_w);
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, h - 1);
        const double wy = fy - y0;
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, w - 1);
            const double wx = fx - x0;

            const double top = (1.0 - wx) * image[static_cast<std::size_t>(y0) * w + x0] +
                               wx * image[static_cast<std::size_t>(y0) * w + x1];
            const double bot = (1.0 - wx) * image[static_cast<std::size_t>(y1) * w + x0] +
                               wx * image[static_cast<std::size_t>(y1) * w + x1];
            out[static_cast<std::size_t>(oy) * out_w + ox] =
                static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

GafImage encode(const HeartbeatRecord& record, const EncoderConfig& cfg) {
    if (cfg.target_size < 2) {
        throw ArgError("encoder target_size must be >= 2");
    }
    if (cfg.channels < 1) {
        throw ArgError("encoder channels must be >= 1");
    }

    NormalizedSeries ns = rescale(record.samples);
    if (cfg.reduction == Reduction::SeriesPaa &&
        cfg.target_size < static_cast<int>(ns.length())) {
        // Reduce in series space, then re-derive the polar encoding.
        std::vector<double> reduced = paa(ns.values, cfg.target_size);
        const std::size_t n = reduced.size();
        ns.values = std::move(reduced);
        ns.angles.resize(n);
        ns.radii.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            ns.angles[i] = std::acos(std::clamp(ns.values[i], -1.0, 1.0));
            ns.radii[i] = static_cast<double>(i + 1) / static_cast<double>(n);
        }
    }

    GafMatrix g = cfg.kind == GafKind::Gasf ? gasf(ns) : gadf(ns);

    std::vector<float> plane;
    int side = g.n;
    if (cfg.reduction == Reduction::ImageBilinear && cfg.target_size != g.n) {
        plane = resize_bilinear(g.entries, g.n, g.n, cfg.target_size, cfg.target_size);
        side = cfg.target_size;
    } else {
        plane = std::move(g.entries);
    }

    GafImage img;
    img.height = side;
    img.width = side;
    img.channels = cfg.channels;
    img.pixels.resize(static_cast<std::size_t>(side) * side * cfg.channels);
    for (std::size_t p = 0; p < plane.size(); ++p) {
        for (int c = 0; c < cfg.channels; ++c) {
            img.pixels[p * cfg.channels + c] = plane[p];
        }
    }
    return img;
}

std::vector<GafImage> encode_dataset(const Dataset& ds, const EncoderConfig& cfg, int threads) {
    std::vector<GafImage> images(ds.size());
    parallel_for(static_cast<std::int64_t>(ds.size()), threads,
                 [&](std::int64_t begin, std::int64_t end) {
                     for (std::int64_t i = begin; i < end; ++i) {
                         images[static_cast<std::size_t>(i)] =
                             encode(ds.records[static_cast<std::size_t>(i)], cfg);
                     }
                 });
    return images;
}

void export_image(const GafImage& img, const std::string& path) {
    std::vector<unsigned char> bytes(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double v = std::clamp(static_cast<double>(img.at(y, x, 0)), -1.0, 1.0);
            bytes[static_cast<std::size_t>(y) * img.width + x] =
                static_cast<unsigned char>(std::llround((v + 1.0) / 2.0 * 255.0));
        }
    }
    write_png_gray8(path, img.width, img.height, bytes);
}

std::string to_string(GafKind kind) { return kind == GafKind::Gasf ? "gasf" : "gadf"; }

std::string to_string(Reduction reduction) {
    return reduction == Reduction::ImageBilinear ? "bilinear" : "paa";
}

}  // namespace gafcnn
