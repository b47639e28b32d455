#include "gafcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gafcnn/errors.hpp"
#include "gafcnn/rng.hpp"

namespace gafcnn::synth {

namespace {

struct Bump {
    double center;     // sample index
    double width;      // gaussian sigma in samples
    double amplitude;  // signed
};

void add_bump(std::vector<double>& wave, const Bump& b) {
    const int lo = std::max(0, static_cast<int>(b.center - 4.0 * b.width));
    const int hi = std::min<int>(static_cast<int>(wave.size()) - 1,
                                 static_cast<int>(b.center + 4.0 * b.width) + 1);
    for (int i = lo; i <= hi; ++i) {
        const double d = (i - b.center) / b.width;
        wave[static_cast<std::size_t>(i)] += b.amplitude * std::exp(-0.5 * d * d);
    }
}

double jit(Rng& rng, double base, double spread) { return base + rng.uniform(-spread, spread); }

/// Beat morphologies, one family per class id. 0 is a plain sinus-like
/// shape; the others vary timing, QRS width, and repolarization the way the
/// arrhythmia families crudely do.
void build_beat(std::vector<double>& wave, int family, Rng& rng, int segment_len) {
    const double L = segment_len;
    switch (family) {
        case 0: {  // narrow QRS, normal P and T
            add_bump(wave, {jit(rng, 0.10 * L, 2.0), jit(rng, 3.2, 0.5), jit(rng, 0.18, 0.04)});
            add_bump(wave, {jit(rng, 0.22 * L, 1.5), jit(rng, 1.6, 0.3), jit(rng, 1.00, 0.10)});
            add_bump(wave, {jit(rng, 0.25 * L, 1.5), jit(rng, 2.2, 0.4), jit(rng, -0.28, 0.06)});
            add_bump(wave, {jit(rng, 0.45 * L, 3.0), jit(rng, 6.0, 1.0), jit(rng, 0.30, 0.06)});
            break;
        }
        case 1: {  // premature: early narrow QRS, no P, early T
            add_bump(wave, {jit(rng, 0.12 * L, 2.0), jit(rng, 1.4, 0.3), jit(rng, 0.95, 0.12)});
            add_bump(wave, {jit(rng, 0.15 * L, 1.5), jit(rng, 2.0, 0.4), jit(rng, -0.22, 0.06)});
            add_bump(wave, {jit(rng, 0.32 * L, 3.0), jit(rng, 5.0, 1.0), jit(rng, 0.24, 0.06)});
            break;
        }
        case 2: {  // ventricular: wide QRS, deep S, discordant T
            add_bump(wave, {jit(rng, 0.22 * L, 2.5), jit(rng, 5.5, 0.8), jit(rng, 1.00, 0.10)});
            add_bump(wave, {jit(rng, 0.30 * L, 2.5), jit(rng, 5.0, 0.8), jit(rng, -0.55, 0.10)});
            add_bump(wave, {jit(rng, 0.52 * L, 3.0), jit(rng, 7.0, 1.2), jit(rng, -0.30, 0.08)});
            break;
        }
        case 3: {  // fusion: intermediate QRS width, damped T
            add_bump(wave, {jit(rng, 0.11 * L, 2.0), jit(rng, 3.0, 0.5), jit(rng, 0.10, 0.03)});
            add_bump(wave, {jit(rng, 0.23 * L, 2.0), jit(rng, 3.4, 0.5), jit(rng, 0.85, 0.10)});
            add_bump(wave, {jit(rng, 0.29 * L, 2.0), jit(rng, 3.2, 0.5), jit(rng, -0.35, 0.08)});
            add_bump(wave, {jit(rng, 0.48 * L, 3.0), jit(rng, 6.0, 1.0), jit(rng, 0.16, 0.05)});
            break;
        }
        default: {  // paced/unknown: low double-humped complex, flat T
            add_bump(wave, {jit(rng, 0.20 * L, 2.0), jit(rng, 2.6, 0.4), jit(rng, 0.60, 0.08)});
            add_bump(wave, {jit(rng, 0.27 * L, 2.0), jit(rng, 2.6, 0.4), jit(rng, 0.55, 0.08)});
            add_bump(wave, {jit(rng, 0.36 * L, 2.0), jit(rng, 3.0, 0.5), jit(rng, -0.18, 0.05)});
            add_bump(wave, {jit(rng, 0.60 * L, 4.0), jit(rng, 8.0, 1.5), jit(rng, 0.10, 0.04)});
            break;
        }
    }
}

HeartbeatRecord synth_record(int family, int segment_lo, int segment_hi, Rng& rng) {
    const int segment_len = segment_lo + static_cast<int>(rng.bounded(
                                static_cast<std::uint32_t>(segment_hi - segment_lo + 1)));
    std::vector<double> wave(static_cast<std::size_t>(segment_len), 0.0);
    build_beat(wave, family, rng, segment_len);

    // Baseline wander plus measurement noise.
    const double drift_phase = rng.uniform(0.0, 6.283185307179586);
    const double drift_amp = rng.uniform(0.01, 0.05);
    for (int i = 0; i < segment_len; ++i) {
        wave[static_cast<std::size_t>(i)] +=
            drift_amp * std::sin(6.283185307179586 * i / segment_len + drift_phase) +
            0.02 * rng.normal();
    }

    // Per-record min-max to [0, 1], matching the interchange convention.
    double lo = wave[0], hi = wave[0];
    for (const double v : wave) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;

    HeartbeatRecord rec;
    rec.samples.assign(static_cast<std::size_t>(kSegmentLength), 0.0f);
    for (int i = 0; i < segment_len; ++i) {
        rec.samples[static_cast<std::size_t>(i)] =
            static_cast<float>((wave[static_cast<std::size_t>(i)] - lo) / span);
    }
    return rec;
}

int draw_class(const std::vector<double>& priors, Rng& rng) {
    const double u = rng.next_unit();
    double cum = 0.0;
    for (std::size_t c = 0; c < priors.size(); ++c) {
        cum += priors[c];
        if (u < cum) return static_cast<int>(c);
    }
    return static_cast<int>(priors.size()) - 1;
}

}  // namespace

Dataset make_arrhythmia_like(std::size_t n, std::uint32_t seed) {
    const std::vector<double> priors = {0.828, 0.025, 0.066, 0.007, 0.074};
    Rng rng(seed);
    Dataset ds;
    ds.num_classes = 5;
    ds.name = "synth-arrhythmia";
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Guarantee one record per class up front so stratification never
        // sees an empty class on small corpora.
        const int label = i < priors.size() ? static_cast<int>(i) : draw_class(priors, rng);
        const int lo = label == 1 ? 95 : 110;
        const int hi = label == 1 ? 140 : kSegmentLength;
        HeartbeatRecord rec = synth_record(label, lo, hi, rng);
        rec.label = label;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Dataset make_binary_like(std::size_t n, std::uint32_t seed) {
    const std::vector<double> priors = {0.278, 0.722};
    Rng rng(seed);
    Dataset ds;
    ds.num_classes = 2;
    ds.name = "synth-binary";
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i < 2 ? static_cast<int>(i) : draw_class(priors, rng);
        // Abnormal records borrow the wide-QRS and fusion families.
        const int family = label == 0 ? 0 : (rng.next_unit() < 0.5 ? 2 : 3);
        HeartbeatRecord rec = synth_record(family, 110, kSegmentLength, rng);
        rec.label = label;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

HeartbeatRecord make_record(int label, int num_classes, std::uint32_t seed) {
    if (label < 0 || label >= num_classes) {
        throw ArgError("make_record: label outside [0, num_classes)");
    }
    Rng rng(seed);
    HeartbeatRecord rec = synth_record(label, 110, kSegmentLength, rng);
    rec.label = label;
    return rec;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw IoError("cannot write dataset csv: " + path);
    }
    char buf[32];
    for (const auto& rec : ds.records) {
        std::string line;
        line.reserve(kSegmentLength * 10 + 8);
        for (const float v : rec.samples) {
            std::snprintf(buf, sizeof(buf), "%.6g", static_cast<double>(v));
            line += buf;
            line += ',';
        }
        std::snprintf(buf, sizeof(buf), "%d.0", rec.label);
        line += buf;
        line += '\n';
        f << line;
    }
    if (!f) {
        throw IoError("short write: " + path);
    }
}

}  // namespace gafcnn::synth
