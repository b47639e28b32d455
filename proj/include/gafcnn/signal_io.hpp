#ifndef GAFCNN_SIGNAL_IO_HPP
#define GAFCNN_SIGNAL_IO_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gafcnn {

inline constexpr int kSegmentLength = 187;

/// One pre-segmented heartbeat: a fixed-length amplitude vector (zero-padded
/// tail) plus a 0-based class label.
struct HeartbeatRecord {
    std::vector<float> samples;  // length kSegmentLength, finite, ~[0, 1]
    int label = 0;
};

struct Dataset {
    std::vector<HeartbeatRecord> records;
    int num_classes = 0;
    std::string name;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

/// Loads a headerless CSV with 188 numeric fields per row: 187 samples then
/// an integral-valued label. Rows are kept in file order. Throws CsvError on
/// a bad field count (naming the 1-based row), a non-finite value, a
/// non-integral label, or a label outside [0, num_classes).
Dataset load_csv(const std::string& path, int num_classes);

/// Loads two single-class CSVs (e.g. normal/abnormal) into one 2-class
/// dataset: file A becomes label 0, file B label 1, concatenated in order.
Dataset load_binary_pair(const std::string& path_label0, const std::string& path_label1);

/// Stratified train/test split. Per class, round(train_fraction * count)
/// records go to the train side; membership is drawn with a seeded shuffle
/// and both sides keep ascending original order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction,
                                             std::uint32_t seed);

/// Per-class record counts; length num_classes, sums to size().
std::vector<std::int64_t> class_histogram(const Dataset& ds);

/// Seeded stratified subsample: per class, round(fraction * count) records,
/// no duplicates, output order shuffled. Throws ArgError if the fraction is
/// outside (0, 1] or would empty a class present in the dataset.
Dataset stratified_subsample(const Dataset& ds, double fraction, std::uint32_t seed);

/// FNV-1a 64-bit checksum of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::string& path);

}  // namespace gafcnn

#endif
