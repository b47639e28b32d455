#include "gafcnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gafcnn/errors.hpp"

namespace gafcnn {

using nn::Conv2D;
using nn::Dense;
using nn::Flatten;
using nn::Layer;
using nn::MaxPool2D;
using nn::ReLU;
using nn::Tensor;

namespace {

// Spatial extent after conv(3) -> pool(2) -> conv(3) -> pool(2) -> conv(3).
int final_spatial(int input_size) {
    int s = input_size - 2;
    s /= 2;
    s -= 2;
    s /= 2;
    s -= 2;
    return s;
}

}  // namespace

Model Model::build(const ModelConfig& cfg, std::uint32_t seed) {
    if (cfg.num_classes < 2) {
        throw ConfigError("num_classes must be >= 2, got " + std::to_string(cfg.num_classes));
    }
    if (cfg.input_channels < 1 || cfg.dense_units < 1) {
        throw ConfigError("input_channels and dense_units must be positive");
    }
    if (cfg.head() < cfg.num_classes) {
        throw ConfigError("head_units " + std::to_string(cfg.head()) +
                          " narrower than num_classes " + std::to_string(cfg.num_classes));
    }
    const int spatial = final_spatial(cfg.input_size);
    if (spatial < 1) {
        throw ConfigError("input_size " + std::to_string(cfg.input_size) +
                          " collapses the shape chain; need >= 18");
    }
    const int flat = spatial * spatial * 64;

    Model m;
    m.cfg_ = cfg;
    m.layers_.push_back(std::make_unique<Conv2D>(cfg.input_channels, 32, 3));
    m.layers_.push_back(std::make_unique<ReLU>());
    m.layers_.push_back(std::make_unique<MaxPool2D>(2));
    m.layers_.push_back(std::make_unique<Conv2D>(32, 64, 3));
    m.layers_.push_back(std::make_unique<ReLU>());
    m.layers_.push_back(std::make_unique<MaxPool2D>(2));
    m.layers_.push_back(std::make_unique<Conv2D>(64, 64, 3));
    m.layers_.push_back(std::make_unique<ReLU>());
    m.layers_.push_back(std::make_unique<Flatten>());
    m.layers_.push_back(std::make_unique<Dense>(flat, cfg.dense_units));
    m.layers_.push_back(std::make_unique<ReLU>());
    m.layers_.push_back(std::make_unique<Dense>(cfg.dense_units, cfg.head()));

    Rng rng(seed);
    for (auto& layer : m.layers_) {
        if (auto* conv = dynamic_cast<Conv2D*>(layer.get())) conv->init_parameters(rng);
        if (auto* dense = dynamic_cast<Dense*>(layer.get())) dense->init_parameters(rng);
    }
    return m;
}

void Model::save(const std::string& path) const {
    std::vector<Layer*> raw;
    raw.reserve(layers_.size());
    for (const auto& l : layers_) raw.push_back(l.get());
    nn::save_checkpoint(path, raw);
}

Model Model::load(const std::string& path) {
    Model m;
    m.layers_ = nn::load_checkpoint(path);

    // Reconstruct the configuration from the layer stack.
    const Conv2D* first_conv = nullptr;
    const Dense* first_dense = nullptr;
    const Dense* last_dense = nullptr;
    for (const auto& l : m.layers_) {
        if (!first_conv) first_conv = dynamic_cast<const Conv2D*>(l.get());
        if (const auto* d = dynamic_cast<const Dense*>(l.get())) {
            if (!first_dense) first_dense = d;
            last_dense = d;
        }
    }
    if (!first_conv || !first_dense || !last_dense || first_dense == last_dense) {
        throw FormatError("checkpoint does not contain the expected layer stack: " + path);
    }
    m.cfg_.input_channels = first_conv->in_channels();
    m.cfg_.dense_units = first_dense->out_width();
    m.cfg_.num_classes = last_dense->out_width();
    m.cfg_.head_units = last_dense->out_width();
    // Smallest input size whose chain lands on the stored flatten width.
    m.cfg_.input_size = 0;
    for (int s = 18; s <= 4096; ++s) {
        const int sp = final_spatial(s);
        if (sp >= 1 && sp * sp * 64 == first_dense->in_width()) {
            m.cfg_.input_size = s;
            break;
        }
    }
    if (m.cfg_.input_size == 0) {
        throw FormatError("checkpoint dense width " + std::to_string(first_dense->in_width()) +
                          " matches no supported input size");
    }
    return m;
}

void Model::set_input_size(int size) {
    const Dense* first_dense = nullptr;
    for (const auto& l : layers_) {
        if ((first_dense = dynamic_cast<const Dense*>(l.get()))) break;
    }
    const int sp = final_spatial(size);
    if (!first_dense || sp < 1 || sp * sp * 64 != first_dense->in_width()) {
        throw ConfigError("input size " + std::to_string(size) +
                          " is incompatible with the model's flatten width " +
                          (first_dense ? std::to_string(first_dense->in_width()) : "?"));
    }
    cfg_.input_size = size;
}

nn::Tensor Model::forward(const Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != cfg_.input_size || batch.dim(2) != cfg_.input_size ||
        batch.dim(3) != cfg_.input_channels) {
        throw ShapeError("model expects (n," + std::to_string(cfg_.input_size) + "," +
                         std::to_string(cfg_.input_size) + "," +
                         std::to_string(cfg_.input_channels) + "), got " + batch.shape_str());
    }
    Tensor x = batch;
    for (auto& layer : layers_) x = layer->forward(x);
    return x;
}

Prediction Model::predict(const Tensor& batch) {
    const Tensor logits = forward(batch);
    const int n = logits.dim(0), k = logits.dim(1);

    Prediction pred;
    pred.classes.resize(static_cast<std::size_t>(n));
    pred.probabilities = Tensor({n, k});
    const float* l = logits.values().data();
    float* p = pred.probabilities.values().data();
    for (int s = 0; s < n; ++s) {
        const float* row = l + static_cast<std::int64_t>(s) * k;
        double m = row[0];
        int best = 0;
        for (int j = 1; j < k; ++j) {
            if (row[j] > m) {  // strict: ties keep the lowest index
                m = row[j];
                best = j;
            }
        }
        pred.classes[static_cast<std::size_t>(s)] = best;
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - m);
        float* prow = p + static_cast<std::int64_t>(s) * k;
        for (int j = 0; j < k; ++j) {
            prow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - m) / z);
        }
    }
    return pred;
}

void Model::backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
}

std::vector<nn::Tensor*> Model::parameters() {
    std::vector<Tensor*> params;
    for (auto& layer : layers_) {
        for (Tensor* t : layer->parameters()) params.push_back(t);
    }
    return params;
}

std::int64_t Model::parameter_count() const {
    std::int64_t count = 0;
    for (const auto& layer : layers_) {
        for (const Tensor* t : const_cast<nn::Layer*>(layer.get())->parameters()) {
            count += t->numel();
        }
    }
    return count;
}

std::vector<std::vector<int>> Model::shape_chain() const {
    std::vector<std::vector<int>> chain;
    std::vector<int> dims = {1, cfg_.input_size, cfg_.input_size, cfg_.input_channels};
    chain.push_back({dims[1], dims[2], dims[3]});
    for (const auto& layer : layers_) {
        dims = layer->output_dims(dims);
        if (layer->kind() == nn::LayerKind::ReLU) continue;
        if (dims.size() == 4) {
            chain.push_back({dims[1], dims[2], dims[3]});
        } else {
            chain.push_back({dims[1]});
        }
    }
    return chain;
}

std::string Model::shape_chain_str() const {
    std::ostringstream os;
    const auto chain = shape_chain();
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (i) os << " -> ";
        os << nn::shape_str(chain[i]);
    }
    return os.str();
}

}  // namespace gafcnn
