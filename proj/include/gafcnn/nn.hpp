#ifndef GAFCNN_NN_HPP
#define GAFCNN_NN_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gafcnn/rng.hpp"

namespace gafcnn::nn {

/// Dense row-major float32 tensor, rank 1..4, with an optional gradient
/// buffer of the same shape. Reductions that feed its values accumulate in
/// float64 before the final cast.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims);

    int rank() const { return static_cast<int>(dims_.size()); }
    const std::vector<int>& dims() const { return dims_; }
    int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    bool has_grad() const { return !grad_.empty(); }
    void ensure_grad();
    void zero_grad();
    std::span<float> grad();
    std::span<const float> grad() const;

    std::string shape_str() const;

private:
    std::vector<int> dims_;
    std::vector<float> data_;
    std::vector<float> grad_;
};

std::string shape_str(const std::vector<int>& dims);

enum class LayerKind : std::uint32_t {
    Conv2D = 1,
    MaxPool2D = 2,
    Flatten = 3,
    Dense = 4,
    ReLU = 5,
};

/// One step of the network. forward() caches whatever backward() needs;
/// backward() returns the input gradient and accumulates into parameter
/// gradients (they are += targets, zeroed by the optimizer step).
class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual std::string name() const = 0;
    virtual Tensor forward(const Tensor& input) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<Tensor*> parameters() { return {}; }
    virtual std::vector<int> output_dims(const std::vector<int>& input) const = 0;
};

/// 2-D convolution in cross-correlation convention, stride 1, valid padding,
/// channels-last layout [n, h, w, c]. Weights are [out_ch, in_ch, kh, kw].
class Conv2D final : public Layer {
public:
    Conv2D(int in_channels, int out_channels, int kernel);

    LayerKind kind() const override { return LayerKind::Conv2D; }
    std::string name() const override;
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> parameters() override { return {&weights, &bias}; }
    std::vector<int> output_dims(const std::vector<int>& input) const override;

    void init_parameters(Rng& rng);

    int in_channels() const { return in_channels_; }
    int out_channels() const { return out_channels_; }
    int kernel() const { return kernel_; }

    Tensor weights;  // [out_ch, in_ch, kh, kw]
    Tensor bias;     // [out_ch]

private:
    int in_channels_;
    int out_channels_;
    int kernel_;
    Tensor saved_input_;
    std::vector<float> packed_;  // weights repacked [dy][dx][in][out]
    void repack_weights();
};

/// Non-overlapping max pooling, stride = pool size, trailing remainder rows
/// and columns dropped. Ties go to the first element in row-major window
/// order, which fixes the backward routing.
class MaxPool2D final : public Layer {
public:
    explicit MaxPool2D(int pool = 2);

    LayerKind kind() const override { return LayerKind::MaxPool2D; }
    std::string name() const override;
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<int> output_dims(const std::vector<int>& input) const override;

    int pool() const { return pool_; }

private:
    int pool_;
    std::vector<int> saved_input_dims_;
    std::vector<std::int64_t> argmax_;  // flat input index per output element
};

/// [n, h, w, c] -> [n, h*w*c]; rank-2 input passes through.
class Flatten final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::Flatten; }
    std::string name() const override { return "flatten"; }
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<int> output_dims(const std::vector<int>& input) const override;

private:
    std::vector<int> saved_input_dims_;
};

/// Fully connected layer: out = input * W^T + bias. Weights are [out, in].
class Dense final : public Layer {
public:
    Dense(int in_width, int out_width);

    LayerKind kind() const override { return LayerKind::Dense; }
    std::string name() const override;
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<Tensor*> parameters() override { return {&weights, &bias}; }
    std::vector<int> output_dims(const std::vector<int>& input) const override;

    void init_parameters(Rng& rng);

    int in_width() const { return in_width_; }
    int out_width() const { return out_width_; }

    Tensor weights;  // [out, in]
    Tensor bias;     // [out]

private:
    int in_width_;
    int out_width_;
    Tensor saved_input_;
};

/// max(0, x). Backward passes the gradient where x > 0 and zeroes it
/// where x <= 0.
class ReLU final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::ReLU; }
    std::string name() const override { return "relu"; }
    Tensor forward(const Tensor& input) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<int> output_dims(const std::vector<int>& input) const override;

private:
    Tensor saved_input_;
};

struct SoftmaxCrossEntropy {
    double loss = 0.0;
    Tensor grad_logits;  // (softmax - onehot) / n
};

/// Mean negative log softmax likelihood over the batch, computed with
/// max-subtraction. Throws ArgError for a label outside [0, classes).
SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

/// In-place parameter updates. Every parameter must carry a populated
/// gradient buffer (TrainError otherwise); gradients are zeroed after the
/// step. Adam keeps per-tensor first/second moments with bias correction.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(const std::vector<Tensor*>& params);
    std::int64_t step_count() const { return step_count_; }
    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::int64_t step_count_ = 0;
    std::vector<std::vector<float>> m_;
    std::vector<std::vector<float>> v_;
};

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind kind);

/// Checkpoint container: magic "CNN1", u32 layer count, then per layer a
/// u32 kind tag, kind-specific hyperparameters, and parameter tensors in
/// the GAF1 tensor encoding. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const std::vector<Layer*>& layers);
std::vector<std::unique_ptr<Layer>> load_checkpoint(const std::string& path);

}  // namespace gafcnn::nn

#endif
