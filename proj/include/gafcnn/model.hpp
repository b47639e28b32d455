#ifndef GAFCNN_MODEL_HPP
#define GAFCNN_MODEL_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gafcnn/nn.hpp"

namespace gafcnn {

/// Fixed architecture, configurable widths:
///   Conv2D(32,3x3)+ReLU -> MaxPool(2) -> Conv2D(64,3x3)+ReLU -> MaxPool(2)
///   -> Conv2D(64,3x3)+ReLU -> Flatten -> Dense(dense_units)+ReLU
///   -> Dense(head_units), no terminal activation.
struct ModelConfig {
    int input_size = 32;
    int input_channels = 3;
    int num_classes = 5;
    int dense_units = 64;
    // 0 means num_classes. A wider head than the class count is allowed
    // (surplus logits simply never win training labels).
    int head_units = 0;

    int head() const { return head_units > 0 ? head_units : num_classes; }
};

struct Prediction {
    std::vector<int> classes;    // argmax per row, lowest index on ties
    nn::Tensor probabilities;    // softmax rows, [n, head]
};

class Model {
public:
    Model() = default;

    /// Builds the layer stack with seeded Glorot-uniform weights.
    /// Throws ConfigError if the shape chain collapses (input_size < 18
    /// for the 3-conv/2-pool stack).
    static Model build(const ModelConfig& cfg, std::uint32_t seed);

    static Model load(const std::string& path);
    void save(const std::string& path) const;

    /// Adopts a different input size with the same flatten width. Pool
    /// flooring makes several sizes share one chain (18..21 for the default
    /// stack), so a loaded checkpoint only pins the width, not the size.
    /// Throws ConfigError when the chain does not land on the stored width.
    void set_input_size(int size);

    /// Logits, no terminal activation. Input must be
    /// [n, input_size, input_size, input_channels].
    nn::Tensor forward(const nn::Tensor& batch);

    Prediction predict(const nn::Tensor& batch);

    /// Runs backward through the stack; parameter gradients accumulate.
    void backward(const nn::Tensor& grad_logits);

    std::vector<nn::Tensor*> parameters();
    std::int64_t parameter_count() const;

    /// Intermediate shapes for a batch of one, starting at the input and
    /// skipping shape-preserving activations:
    /// input, conv1, pool1, conv2, pool2, conv3, flatten, dense1, dense2.
    std::vector<std::vector<int>> shape_chain() const;
    std::string shape_chain_str() const;

    const ModelConfig& config() const { return cfg_; }
    const std::vector<std::unique_ptr<nn::Layer>>& layers() const { return layers_; }

private:
    ModelConfig cfg_;
    std::vector<std::unique_ptr<nn::Layer>> layers_;
};

}  // namespace gafcnn

#endif
