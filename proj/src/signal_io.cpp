#include "gafcnn/signal_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gafcnn/errors.hpp"
#include "gafcnn/rng.hpp"

namespace gafcnn {

namespace {

double parse_field(const char* first, const char* last, std::size_t row, int column) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw CsvError("row " + std::to_string(row) + ", field " + std::to_string(column + 1) +
                       ": not a number: '" + std::string(first, last) + "'");
    }
    return value;
}

}  // namespace

Dataset load_csv(const std::string& path, int num_classes) {
    if (num_classes < 2) {
        throw ArgError("num_classes must be >= 2, got " + std::to_string(num_classes));
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset file: " + path);
    }

    Dataset ds;
    ds.num_classes = num_classes;
    ds.name = std::filesystem::path(path).stem().string();

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        HeartbeatRecord rec;
        rec.samples.reserve(kSegmentLength);

        const char* p = line.data();
        const char* end = p + line.size();
        int column = 0;
        double label_value = 0.0;
        while (true) {
            const char* comma = std::find(p, end, ',');
            if (column > kSegmentLength) break;  // too many fields, reported below
            const double v = parse_field(p, comma, row, column);
            if (!std::isfinite(v)) {
                throw CsvError("row " + std::to_string(row) + ", field " +
                               std::to_string(column + 1) + ": non-finite value");
            }
            if (column < kSegmentLength) {
                rec.samples.push_back(static_cast<float>(v));
            } else {
                label_value = v;
            }
            ++column;
            if (comma == end) break;
            p = comma + 1;
        }
        if (column != kSegmentLength + 1) {
            throw CsvError("row " + std::to_string(row) + ": expected " +
                           std::to_string(kSegmentLength + 1) + " fields, got " +
                           (column > kSegmentLength ? std::string("more") : std::to_string(column)));
        }

        // Labels are distributed as floats ("1.0"); demand integrality.
        const double rounded = std::nearbyint(label_value);
        if (std::abs(label_value - rounded) > 1e-9) {
            throw CsvError("row " + std::to_string(row) + ": label " + std::to_string(label_value) +
                           " is not integral");
        }
        rec.label = static_cast<int>(rounded);
        if (rec.label < 0 || rec.label >= num_classes) {
            throw CsvError("row " + std::to_string(row) + ": label " + std::to_string(rec.label) +
                           " outside [0, " + std::to_string(num_classes) + ")");
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

Dataset load_binary_pair(const std::string& path_label0, const std::string& path_label1) {
    // Source files carry their own single-class labels; rewrite to 0/1.
    Dataset a = load_csv(path_label0, 2);
    Dataset b = load_csv(path_label1, 2);
    Dataset out;
    out.num_classes = 2;
    out.name = a.name + "+" + b.name;
    out.records.reserve(a.size() + b.size());
    for (auto& r : a.records) {
        r.label = 0;
        out.records.push_back(std::move(r));
    }
    for (auto& r : b.records) {
        r.label = 1;
        out.records.push_back(std::move(r));
    }
    return out;
}

std::vector<std::int64_t> class_histogram(const Dataset& ds) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(ds.num_classes), 0);
    for (const auto& r : ds.records) counts[static_cast<std::size_t>(r.label)]++;
    return counts;
}

namespace {

std::vector<std::vector<std::uint32_t>> indices_by_class(const Dataset& ds) {
    std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(ds.num_classes));
    for (std::uint32_t i = 0; i < ds.records.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.records[i].label)].push_back(i);
    }
    return by_class;
}

}  // namespace

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction,
                                             std::uint32_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ArgError("train_fraction must lie in (0, 1)");
    }
    Rng rng(seed);
    std::vector<char> in_train(ds.size(), 0);
    for (auto& idx : indices_by_class(ds)) {
        rng.shuffle(idx);
        const auto take = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < take && i < idx.size(); ++i) in_train[idx[i]] = 1;
    }

    Dataset train, test;
    train.num_classes = test.num_classes = ds.num_classes;
    train.name = ds.name + ":train";
    test.name = ds.name + ":test";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        (in_train[i] ? train : test).records.push_back(ds.records[i]);
    }
    return {std::move(train), std::move(test)};
}

Dataset stratified_subsample(const Dataset& ds, double fraction, std::uint32_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ArgError("subsample fraction must lie in (0, 1], got " + std::to_string(fraction));
    }
    Rng rng(seed);
    std::vector<std::uint32_t> chosen;
    for (auto& idx : indices_by_class(ds)) {
        if (idx.empty()) continue;
        if (fraction * static_cast<double>(idx.size()) < 1.0) {
            throw ArgError("subsample fraction " + std::to_string(fraction) +
                           " would empty a class with " + std::to_string(idx.size()) + " records");
        }
        rng.shuffle(idx);
        const auto take = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(idx.size())));
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + take);
    }
    rng.shuffle(chosen);

    Dataset out;
    out.num_classes = ds.num_classes;
    out.name = ds.name + ":sub";
    out.records.reserve(chosen.size());
    for (const auto i : chosen) out.records.push_back(ds.records[i]);
    return out;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for checksum: " + path);
    }
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

}  // namespace gafcnn
