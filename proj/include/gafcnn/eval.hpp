#ifndef GAFCNN_EVAL_HPP
#define GAFCNN_EVAL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gafcnn/model.hpp"
#include "gafcnn/nn.hpp"

namespace gafcnn {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    float learning_rate = 1e-3f;
    nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
    std::uint32_t seed = 0;
    bool shuffle = true;
};

struct EpochStats {
    int epoch = 0;         // 1-based
    double loss = 0.0;     // mean over samples
    double accuracy = 0.0; // train accuracy during the pass
    double wall_ms = 0.0;
};

struct TrainTrace {
    std::vector<EpochStats> epochs;
};

using ProgressSink = std::function<void(const EpochStats&)>;

/// Mini-batch training with softmax cross-entropy. Deterministic given the
/// config seed: shuffle order and updates replay identically. Throws
/// TrainError with the step index if the loss goes non-finite.
TrainTrace train(Model& model, const nn::Tensor& images, const std::vector<int>& labels,
                 const TrainConfig& cfg, const ProgressSink& progress = nullptr);

struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // row-major, rows = true class

    std::int64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * num_classes + pred];
    }
    std::int64_t total() const;
    std::int64_t correct() const;  // trace
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // +/-inf at the sentinel endpoints
};

/// One-vs-rest curve for a single class; auc is NaN when the class has no
/// positives or no negatives in the truth.
struct ClassRoc {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

struct EvalReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double f1_weighted = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::int64_t> support;
    std::vector<ClassRoc> roc;
    std::vector<std::string> warnings;
};

/// Metrics from raw predictions. `probabilities` may be empty, which skips
/// the ROC curves. F1 uses the 0/0 -> 0 convention; classes absent from both
/// truth and prediction are excluded from the macro mean with a warning.
/// AUC is the trapezoid rule over the exact threshold sweep (observed scores
/// plus +/-inf sentinels), accumulated in integer arithmetic.
EvalReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                const nn::Tensor& probabilities, int num_classes);

/// Batched predict + evaluate_predictions.
EvalReport evaluate(Model& model, const nn::Tensor& images, const std::vector<int>& labels,
                    int batch_size = 64);

/// Writes metrics.txt, confusion.csv and roc_class_<k>.csv into out_dir.
/// Re-exporting the same report is byte-identical.
void export_report(const EvalReport& report, const std::string& out_dir);

/// Writes a loss_trace.csv-style file: header epoch,loss,accuracy.
void export_trace(const TrainTrace& trace, const std::string& path);

}  // namespace gafcnn

#endif
