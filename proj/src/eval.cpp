#include "gafcnn/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "gafcnn/errors.hpp"
#include "gafcnn/rng.hpp"

namespace gafcnn {

using nn::Tensor;

namespace {

Tensor gather_batch(const Tensor& images, const std::vector<std::uint32_t>& order,
                    std::size_t begin, std::size_t end) {
    const auto& dims = images.dims();
    const std::int64_t stride = images.numel() / dims[0];
    std::vector<int> bdims = dims;
    bdims[0] = static_cast<int>(end - begin);
    Tensor batch(bdims);
    for (std::size_t i = begin; i < end; ++i) {
        const float* src = images.values().data() + order[i] * stride;
        float* dst = batch.values().data() + static_cast<std::int64_t>(i - begin) * stride;
        std::copy(src, src + stride, dst);
    }
    return batch;
}

int argmax_row(const float* row, int k) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

}  // namespace

TrainTrace train(Model& model, const Tensor& images, const std::vector<int>& labels,
                 const TrainConfig& cfg, const ProgressSink& progress) {
    if (images.rank() != 4 || images.dim(0) == 0) {
        throw ArgError("train: images must be a non-empty (n,h,w,c) tensor");
    }
    const auto n = static_cast<std::size_t>(images.dim(0));
    if (labels.size() != n) {
        throw ArgError("train: " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(n) + " images");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw ArgError("train: epochs and batch_size must be >= 1");
    }
    if (cfg.learning_rate < 0.0f) {
        throw ArgError("train: learning rate must be >= 0");
    }

    nn::OptimizerConfig ocfg;
    ocfg.kind = cfg.optimizer;
    ocfg.learning_rate = cfg.learning_rate;
    nn::Optimizer opt(ocfg);
    const auto params = model.parameters();

    Rng rng(cfg.seed);
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    TrainTrace trace;
    std::int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        if (cfg.shuffle) rng.shuffle(order);

        double loss_sum = 0.0;
        std::int64_t correct = 0;
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
            const Tensor batch = gather_batch(images, order, begin, end);
            std::vector<int> batch_labels(end - begin);
            for (std::size_t i = begin; i < end; ++i) batch_labels[i - begin] = labels[order[i]];

            const Tensor logits = model.forward(batch);
            const auto sce = nn::softmax_cross_entropy(logits, batch_labels);
            ++step;
            if (!std::isfinite(sce.loss)) {
                throw TrainError("loss diverged (non-finite) at optimizer step " +
                                 std::to_string(step));
            }
            loss_sum += sce.loss * static_cast<double>(end - begin);
            const int k = logits.dim(1);
            for (std::size_t i = 0; i < end - begin; ++i) {
                const float* row = logits.values().data() + static_cast<std::int64_t>(i) * k;
                if (argmax_row(row, k) == batch_labels[i]) ++correct;
            }

            model.backward(sce.grad_logits);
            opt.step(params);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / static_cast<double>(n);
        stats.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        trace.epochs.push_back(stats);
        if (progress) progress(stats);
    }
    return trace;
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), static_cast<std::int64_t>(0));
}

std::int64_t ConfusionMatrix::correct() const {
    std::int64_t trace = 0;
    for (int c = 0; c < num_classes; ++c) trace += at(c, c);
    return trace;
}

namespace {

ClassRoc roc_one_vs_rest(const std::vector<int>& truth, const Tensor& probabilities,
                         int class_id) {
    const int k = probabilities.dim(1);
    const auto n = static_cast<std::size_t>(probabilities.dim(0));

    std::vector<std::pair<float, bool>> scored(n);
    std::int64_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool is_pos = truth[i] == class_id;
        scored[i] = {probabilities.values()[i * static_cast<std::size_t>(k) +
                                            static_cast<std::size_t>(class_id)],
                     is_pos};
        pos += is_pos;
    }
    const std::int64_t neg = static_cast<std::int64_t>(n) - pos;
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    ClassRoc roc;
    const double inf = std::numeric_limits<double>::infinity();
    roc.points.push_back({0.0, 0.0, inf});

    std::int64_t tp = 0, fp = 0;
    std::int64_t area2 = 0;  // twice the trapezoid area, in integer counts
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::int64_t dtp = 0, dfp = 0;
        while (j < n && scored[j].first == scored[i].first) {
            (scored[j].second ? dtp : dfp)++;
            ++j;
        }
        area2 += dfp * (2 * tp + dtp);
        tp += dtp;
        fp += dfp;
        roc.points.push_back({neg > 0 ? static_cast<double>(fp) / neg : 0.0,
                              pos > 0 ? static_cast<double>(tp) / pos : 0.0,
                              static_cast<double>(scored[i].first)});
        i = j;
    }
    roc.points.push_back({neg > 0 ? static_cast<double>(fp) / neg : 0.0,
                          pos > 0 ? static_cast<double>(tp) / pos : 0.0, -inf});

    if (pos > 0 && neg > 0) {
        roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(pos) *
                                                static_cast<double>(neg));
    } else {
        roc.auc = std::numeric_limits<double>::quiet_NaN();
    }
    return roc;
}

}  // namespace

EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                const Tensor& probabilities, int num_classes) {
    if (truth.empty() || truth.size() != predicted.size()) {
        throw ArgError("evaluate: truth and prediction lists must be non-empty and equal length");
    }
    const bool with_roc = probabilities.numel() > 0;
    if (with_roc && (probabilities.rank() != 2 ||
                     static_cast<std::size_t>(probabilities.dim(0)) != truth.size() ||
                     probabilities.dim(1) != num_classes)) {
        throw ShapeError("evaluate: probabilities must be (" + std::to_string(truth.size()) + "," +
                         std::to_string(num_classes) + "), got " + probabilities.shape_str());
    }

    EvalReport report;
    report.confusion.num_classes = num_classes;
    report.confusion.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw ArgError("evaluate: class id outside [0, " + std::to_string(num_classes) + ")");
        }
        report.confusion.counts[static_cast<std::size_t>(t) * num_classes + p]++;
    }

    const std::int64_t total = report.confusion.total();
    report.accuracy = static_cast<double>(report.confusion.correct()) / static_cast<double>(total);

    report.precision.resize(static_cast<std::size_t>(num_classes));
    report.recall.resize(static_cast<std::size_t>(num_classes));
    report.f1.resize(static_cast<std::size_t>(num_classes));
    report.support.resize(static_cast<std::size_t>(num_classes));

    double macro_sum = 0.0;
    int macro_count = 0;
    double weighted_sum = 0.0;
    std::int64_t weighted_support = 0;
    for (int c = 0; c < num_classes; ++c) {
        const std::int64_t tp = report.confusion.at(c, c);
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < num_classes; ++j) {
            row += report.confusion.at(c, j);
            col += report.confusion.at(j, c);
        }
        const std::int64_t fn = row - tp, fp = col - tp;
        const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;

        const auto ci = static_cast<std::size_t>(c);
        report.precision[ci] = precision;
        report.recall[ci] = recall;
        report.f1[ci] = f1;
        report.support[ci] = row;

        if (row == 0 && col == 0) {
            report.warnings.push_back("class " + std::to_string(c) +
                                      " absent from truth and predictions; excluded from macro F1");
        } else {
            macro_sum += f1;
            ++macro_count;
        }
        weighted_sum += static_cast<double>(row) * f1;
        weighted_support += row;
    }
    report.f1_macro = macro_count > 0 ? macro_sum / macro_count : 0.0;
    report.f1_weighted =
        weighted_support > 0 ? weighted_sum / static_cast<double>(weighted_support) : 0.0;

    if (with_roc) {
        report.roc.reserve(static_cast<std::size_t>(num_classes));
        for (int c = 0; c < num_classes; ++c) {
            report.roc.push_back(roc_one_vs_rest(truth, probabilities, c));
            if (!std::isfinite(report.roc.back().auc)) {
                report.warnings.push_back("class " + std::to_string(c) +
                                          " has no positives or no negatives; AUC undefined");
            }
        }
    }
    return report;
}

EvalReport evaluate(Model& model, const Tensor& images, const std::vector<int>& labels,
                    int batch_size) {
    if (images.rank() != 4 || images.dim(0) == 0) {
        throw ArgError("evaluate: images must be a non-empty (n,h,w,c) tensor");
    }
    const auto n = static_cast<std::size_t>(images.dim(0));
    if (labels.size() != n) {
        throw ArgError("evaluate: " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(n) + " images");
    }
    const int k = model.config().head();

    std::vector<int> predicted(n);
    Tensor probabilities({static_cast<int>(n), k});
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);

    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(n, begin + static_cast<std::size_t>(batch_size));
        const Tensor batch = gather_batch(images, order, begin, end);
        const Prediction pred = model.predict(batch);
        for (std::size_t i = begin; i < end; ++i) {
            predicted[i] = pred.classes[i - begin];
            const float* src =
                pred.probabilities.values().data() + static_cast<std::int64_t>(i - begin) * k;
            std::copy(src, src + k, probabilities.values().data() + static_cast<std::int64_t>(i) * k);
        }
    }
    return evaluate_predictions(labels, predicted, probabilities, k);
}

namespace {

std::string fmt(double v, const char* spec = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string fmt_threshold(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt(v, "%.9g");
}

}  // namespace

void export_report(const EvalReport& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create report directory " + out_dir + ": " + ec.message());
    }
    const int k = report.confusion.num_classes;

    {
        std::ofstream f(fs::path(out_dir) / "metrics.txt", std::ios::trunc);
        if (!f) throw IoError("cannot write metrics.txt in " + out_dir);
        f << "accuracy=" << fmt(report.accuracy) << '\n';
        f << "f1_macro=" << fmt(report.f1_macro) << '\n';
        f << "f1_weighted=" << fmt(report.f1_weighted) << '\n';
        f << "total_samples=" << report.confusion.total() << '\n';
        f << "num_classes=" << k << '\n';
        for (int c = 0; c < k; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            f << "precision_class_" << c << "=" << fmt(report.precision[ci]) << '\n';
            f << "recall_class_" << c << "=" << fmt(report.recall[ci]) << '\n';
            f << "f1_class_" << c << "=" << fmt(report.f1[ci]) << '\n';
            f << "support_class_" << c << "=" << report.support[ci] << '\n';
            if (!report.roc.empty()) {
                f << "auc_class_" << c << "=" << fmt(report.roc[ci].auc) << '\n';
            }
        }
    }

    {
        std::ofstream f(fs::path(out_dir) / "confusion.csv", std::ios::trunc);
        if (!f) throw IoError("cannot write confusion.csv in " + out_dir);
        f << "true_class";
        for (int c = 0; c < k; ++c) f << ",pred_" << c;
        f << '\n';
        for (int t = 0; t < k; ++t) {
            f << t;
            for (int p = 0; p < k; ++p) f << ',' << report.confusion.at(t, p);
            f << '\n';
        }
    }

    for (std::size_t c = 0; c < report.roc.size(); ++c) {
        std::ofstream f(fs::path(out_dir) / ("roc_class_" + std::to_string(c) + ".csv"),
                        std::ios::trunc);
        if (!f) throw IoError("cannot write roc csv in " + out_dir);
        f << "fpr,tpr,threshold\n";
        for (const auto& p : report.roc[c].points) {
            f << fmt(p.fpr, "%.9g") << ',' << fmt(p.tpr, "%.9g") << ','
              << fmt_threshold(p.threshold) << '\n';
        }
    }
}

void export_trace(const TrainTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw IoError("cannot write trace file: " + path);
    }
    f << "epoch,loss,accuracy\n";
    for (const auto& e : trace.epochs) {
        f << e.epoch << ',' << fmt(e.loss) << ',' << fmt(e.accuracy) << '\n';
    }
}

}  // namespace gafcnn
