#ifndef GAFCNN_SYNTH_HPP
#define GAFCNN_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gafcnn/signal_io.hpp"

namespace gafcnn::synth {

/// Deterministic synthetic heartbeat corpora in the same shape as the real
/// segment files: 187 samples in [0, 1] with a zero-padded tail and an
/// integer label. Five morphology families mimic an imbalanced arrhythmia
/// mix (priors roughly 83/2.5/6.6/0.7/7.3 percent); the binary corpus mimics
/// a normal/abnormal diagnostic mix (28/72). Waveforms are sums of Gaussian
/// bumps (P/QRS/T-like) with per-record jitter, drift and noise, so classes
/// are learnable but not trivially separable.
Dataset make_arrhythmia_like(std::size_t n, std::uint32_t seed);
Dataset make_binary_like(std::size_t n, std::uint32_t seed);

/// One record of a given class, for fixed fixtures.
HeartbeatRecord make_record(int label, int num_classes, std::uint32_t seed);

/// Writes a dataset in the 188-field CSV interchange format.
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace gafcnn::synth

#endif
