#include "gafcnn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "gafcnn/errors.hpp"
#include "gafcnn/parallel.hpp"
#include "gafcnn/tensor_io.hpp"

namespace gafcnn::nn {

namespace {

std::int64_t product(const std::vector<int>& dims) {
    std::int64_t p = 1;
    for (const int d : dims) p *= d;
    return p;
}

#ifndef NDEBUG
void debug_check_finite(const Tensor& t, const char* where) {
    for (const float v : t.values()) {
        if (!std::isfinite(v)) {
            throw Error(std::string("non-finite value produced in ") + where);
        }
    }
}
#else
void debug_check_finite(const Tensor&, const char*) {}
#endif

float glorot_limit(std::int64_t fan_in, std::int64_t fan_out) {
    return static_cast<float>(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

void fill_uniform(Tensor& t, float limit, Rng& rng) {
    for (float& v : t.values()) {
        v = static_cast<float>(rng.uniform(-limit, limit));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > 4) {
        throw ShapeError("tensor rank must be 1..4, got " + nn::shape_str(dims_));
    }
    for (const int d : dims_) {
        if (d <= 0) {
            throw ShapeError("tensor dims must be positive, got " + nn::shape_str(dims_));
        }
    }
    data_.assign(static_cast<std::size_t>(product(dims_)), 0.0f);
}

void Tensor::ensure_grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0f);
}

void Tensor::zero_grad() {
    if (!grad_.empty()) std::fill(grad_.begin(), grad_.end(), 0.0f);
}

std::span<float> Tensor::grad() {
    ensure_grad();
    return grad_;
}

std::span<const float> Tensor::grad() const {
    if (grad_.empty()) {
        throw TrainError("gradient requested but never allocated for tensor " + shape_str());
    }
    return grad_;
}

std::string Tensor::shape_str() const { return nn::shape_str(dims_); }

std::string shape_str(const std::vector<int>& dims) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ',';
        os << dims[i];
    }
    os << ')';
    return os.str();
}

// ---------------------------------------------------------------------------
// Conv2D

Conv2D::Conv2D(int in_channels, int out_channels, int kernel)
    : weights(Tensor({out_channels, in_channels, kernel, kernel})),
      bias(Tensor({out_channels})),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1) {
        throw ArgError("conv2d: channels and kernel must be positive");
    }
    weights.ensure_grad();
    bias.ensure_grad();
}

std::string Conv2D::name() const {
    return "conv2d(" + std::to_string(out_channels_) + "x" + std::to_string(kernel_) + "x" +
           std::to_string(kernel_) + ")";
}

void Conv2D::init_parameters(Rng& rng) {
    const std::int64_t fan_in = static_cast<std::int64_t>(in_channels_) * kernel_ * kernel_;
    const std::int64_t fan_out = static_cast<std::int64_t>(out_channels_) * kernel_ * kernel_;
    fill_uniform(weights, glorot_limit(fan_in, fan_out), rng);
    std::fill(bias.values().begin(), bias.values().end(), 0.0f);
}

std::vector<int> Conv2D::output_dims(const std::vector<int>& in) const {
    if (in.size() != 4 || in[3] != in_channels_ || in[1] < kernel_ || in[2] < kernel_) {
        throw ShapeError("conv2d " + name() + " expects (n,h>=" + std::to_string(kernel_) +
                         ",w>=" + std::to_string(kernel_) + "," + std::to_string(in_channels_) +
                         "), got " + shape_str(in));
    }
    return {in[0], in[1] - kernel_ + 1, in[2] - kernel_ + 1, out_channels_};
}

void Conv2D::repack_weights() {
    // [o][i][dy][dx] -> [dy][dx][i][o]: makes the innermost loop over out
    // channels contiguous.
    const int k = kernel_, ci = in_channels_, co = out_channels_;
    packed_.resize(static_cast<std::size_t>(k) * k * ci * co);
    const float* w = weights.values().data();
    for (int o = 0; o < co; ++o) {
        for (int i = 0; i < ci; ++i) {
            for (int dy = 0; dy < k; ++dy) {
                for (int dx = 0; dx < k; ++dx) {
                    packed_[(((static_cast<std::size_t>(dy) * k + dx) * ci + i) * co) + o] =
                        w[((static_cast<std::size_t>(o) * ci + i) * k + dy) * k + dx];
                }
            }
        }
    }
}

Tensor Conv2D::forward(const Tensor& input) {
    const auto out_dims = output_dims(input.dims());
    saved_input_ = input;
    repack_weights();

    const int n = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int k = kernel_, ci = in_channels_, co = out_channels_;
    const int oh = out_dims[1], ow = out_dims[2];

    Tensor out(out_dims);
    const float* in = input.values().data();
    const float* wp = packed_.data();
    const float* b = bias.values().data();
    float* dst = out.values().data();

    parallel_for(n, default_threads(), [&](std::int64_t nb, std::int64_t ne) {
        std::vector<double> acc(static_cast<std::size_t>(co));
        for (std::int64_t s = nb; s < ne; ++s) {
            const float* in_s = in + s * h * w * ci;
            float* out_s = dst + s * static_cast<std::int64_t>(oh) * ow * co;
            for (int y = 0; y < oh; ++y) {
                for (int x = 0; x < ow; ++x) {
                    for (int o = 0; o < co; ++o) acc[static_cast<std::size_t>(o)] = b[o];
                    for (int dy = 0; dy < k; ++dy) {
                        const float* row = in_s + (static_cast<std::int64_t>(y + dy) * w + x) * ci;
                        const float* wrow = wp + static_cast<std::size_t>(dy) * k * ci * co;
                        for (int dx = 0; dx < k; ++dx) {
                            for (int i = 0; i < ci; ++i) {
                                const double v = row[dx * ci + i];
                                const float* wv = wrow + (static_cast<std::size_t>(dx) * ci + i) * co;
                                for (int o = 0; o < co; ++o) {
                                    acc[static_cast<std::size_t>(o)] += v * wv[o];
                                }
                            }
                        }
                    }
                    float* out_px = out_s + (static_cast<std::int64_t>(y) * ow + x) * co;
                    for (int o = 0; o < co; ++o) {
                        out_px[o] = static_cast<float>(acc[static_cast<std::size_t>(o)]);
                    }
                }
            }
        }
    });
    debug_check_finite(out, "conv2d forward");
    return out;
}

Tensor Conv2D::backward(const Tensor& grad_out) {
    if (saved_input_.numel() == 0) {
        throw TrainError("conv2d backward before forward");
    }
    const auto expect = output_dims(saved_input_.dims());
    if (grad_out.dims() != expect) {
        throw ShapeError("conv2d backward expects " + shape_str(expect) + ", got " +
                         grad_out.shape_str());
    }
    repack_weights();

    const int n = saved_input_.dim(0), h = saved_input_.dim(1), w = saved_input_.dim(2);
    const int k = kernel_, ci = in_channels_, co = out_channels_;
    const int oh = expect[1], ow = expect[2];

    const float* in = saved_input_.values().data();
    const float* go = grad_out.values().data();
    const float* wp = packed_.data();

    Tensor grad_input(saved_input_.dims());
    float* gi = grad_input.values().data();

    // Input gradient: full gather per input position, 64-bit accumulators.
    parallel_for(n, default_threads(), [&](std::int64_t nb, std::int64_t ne) {
        std::vector<double> acc(static_cast<std::size_t>(ci));
        for (std::int64_t s = nb; s < ne; ++s) {
            const float* go_s = go + s * static_cast<std::int64_t>(oh) * ow * co;
            float* gi_s = gi + s * static_cast<std::int64_t>(h) * w * ci;
            for (int y = 0; y < h; ++y) {
                const int dy_lo = std::max(0, y - oh + 1);
                const int dy_hi = std::min(k - 1, y);
                for (int x = 0; x < w; ++x) {
                    const int dx_lo = std::max(0, x - ow + 1);
                    const int dx_hi = std::min(k - 1, x);
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int dy = dy_lo; dy <= dy_hi; ++dy) {
                        const int oy = y - dy;
                        for (int dx = dx_lo; dx <= dx_hi; ++dx) {
                            const int ox = x - dx;
                            const float* go_px = go_s + (static_cast<std::int64_t>(oy) * ow + ox) * co;
                            const float* wbase =
                                wp + (static_cast<std::size_t>(dy) * k + dx) * ci * co;
                            for (int i = 0; i < ci; ++i) {
                                const float* wv = wbase + static_cast<std::size_t>(i) * co;
                                double t = 0.0;
                                for (int o = 0; o < co; ++o) t += static_cast<double>(go_px[o]) * wv[o];
                                acc[static_cast<std::size_t>(i)] += t;
                            }
                        }
                    }
                    float* gi_px = gi_s + (static_cast<std::int64_t>(y) * w + x) * ci;
                    for (int i = 0; i < ci; ++i) {
                        gi_px[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
                    }
                }
            }
        }
    });

    // Parameter gradients: one worker owns each output channel, so the
    // accumulation order is fixed regardless of thread count.
    weights.ensure_grad();
    bias.ensure_grad();
    float* wg = weights.grad().data();
    float* bg = bias.grad().data();
    parallel_for(co, default_threads(), [&](std::int64_t ob, std::int64_t oe) {
        std::vector<double> wacc(static_cast<std::size_t>(k) * k * ci);
        for (std::int64_t o = ob; o < oe; ++o) {
            std::fill(wacc.begin(), wacc.end(), 0.0);
            double bacc = 0.0;
            for (int s = 0; s < n; ++s) {
                const float* in_s = in + static_cast<std::int64_t>(s) * h * w * ci;
                const float* go_s = go + (static_cast<std::int64_t>(s) * oh * ow + 0) * co;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = go_s[(static_cast<std::int64_t>(oy) * ow + ox) * co + o];
                        if (g == 0.0) continue;
                        bacc += g;
                        for (int dy = 0; dy < k; ++dy) {
                            const float* row =
                                in_s + (static_cast<std::int64_t>(oy + dy) * w + ox) * ci;
                            double* wrow = wacc.data() + static_cast<std::size_t>(dy) * k * ci;
                            for (int dx = 0; dx < k; ++dx) {
                                for (int i = 0; i < ci; ++i) {
                                    wrow[dx * ci + i] += g * row[dx * ci + i];
                                }
                            }
                        }
                    }
                }
            }
            bg[o] += static_cast<float>(bacc);
            for (int i = 0; i < ci; ++i) {
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        wg[((o * ci + i) * k + dy) * k + dx] += static_cast<float>(
                            wacc[(static_cast<std::size_t>(dy) * k + dx) * ci + i]);
                    }
                }
            }
        }
    });

    debug_check_finite(grad_input, "conv2d backward");
    return grad_input;
}

// ---------------------------------------------------------------------------
// MaxPool2D

MaxPool2D::MaxPool2D(int pool) : pool_(pool) {
    if (pool < 2) {
        throw ArgError("maxpool: pool size must be >= 2");
    }
}

std::string MaxPool2D::name() const {
    return "maxpool2d(" + std::to_string(pool_) + "x" + std::to_string(pool_) + ")";
}

std::vector<int> MaxPool2D::output_dims(const std::vector<int>& in) const {
    if (in.size() != 4 || in[1] < pool_ || in[2] < pool_) {
        throw ShapeError("maxpool " + std::to_string(pool_) + "x" + std::to_string(pool_) +
                         " expects (n,h,w,c) with h,w >= " + std::to_string(pool_) + ", got " +
                         shape_str(in));
    }
    return {in[0], in[1] / pool_, in[2] / pool_, in[3]};
}

Tensor MaxPool2D::forward(const Tensor& input) {
    const auto out_dims = output_dims(input.dims());
    saved_input_dims_ = input.dims();

    const int n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    const int oh = out_dims[1], ow = out_dims[2];
    Tensor out(out_dims);
    argmax_.assign(static_cast<std::size_t>(out.numel()), 0);

    const float* in = input.values().data();
    float* dst = out.values().data();
    std::int64_t* amax = argmax_.data();

    parallel_for(n, default_threads(), [&](std::int64_t nb, std::int64_t ne) {
        for (std::int64_t s = nb; s < ne; ++s) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    for (int ch = 0; ch < c; ++ch) {
                        std::int64_t best_idx = -1;
                        float best = -std::numeric_limits<float>::infinity();
                        for (int dy = 0; dy < pool_; ++dy) {
                            for (int dx = 0; dx < pool_; ++dx) {
                                const std::int64_t idx =
                                    ((s * h + (oy * pool_ + dy)) * w + (ox * pool_ + dx)) * c + ch;
                                // Strict > keeps the first of tied values.
                                if (in[idx] > best) {
                                    best = in[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        const std::int64_t out_idx = ((s * oh + oy) * ow + ox) * c + ch;
                        dst[out_idx] = best;
                        amax[out_idx] = best_idx;
                    }
                }
            }
        }
    });
    return out;
}

Tensor MaxPool2D::backward(const Tensor& grad_out) {
    if (saved_input_dims_.empty()) {
        throw TrainError("maxpool backward before forward");
    }
    const auto expect = output_dims(saved_input_dims_);
    if (grad_out.dims() != expect) {
        throw ShapeError("maxpool backward expects " + shape_str(expect) + ", got " +
                         grad_out.shape_str());
    }
    Tensor grad_input(saved_input_dims_);
    float* gi = grad_input.values().data();
    const float* go = grad_out.values().data();
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) {
        gi[argmax_[static_cast<std::size_t>(i)]] += go[i];
    }
    return grad_input;
}

// ---------------------------------------------------------------------------
// Flatten

std::vector<int> Flatten::output_dims(const std::vector<int>& in) const {
    if (in.size() == 2) return in;
    if (in.size() == 4) {
        return {in[0], in[1] * in[2] * in[3]};
    }
    throw ShapeError("flatten expects rank 2 or 4 input, got " + shape_str(in));
}

Tensor Flatten::forward(const Tensor& input) {
    const auto out_dims = output_dims(input.dims());
    saved_input_dims_ = input.dims();
    Tensor out(out_dims);
    std::copy(input.values().begin(), input.values().end(), out.values().begin());
    return out;
}

Tensor Flatten::backward(const Tensor& grad_out) {
    if (saved_input_dims_.empty()) {
        throw TrainError("flatten backward before forward");
    }
    if (grad_out.dims() != output_dims(saved_input_dims_)) {
        throw ShapeError("flatten backward expects " + shape_str(output_dims(saved_input_dims_)) +
                         ", got " + grad_out.shape_str());
    }
    Tensor grad_input(saved_input_dims_);
    std::copy(grad_out.values().begin(), grad_out.values().end(), grad_input.values().begin());
    return grad_input;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(int in_width, int out_width)
    : weights(Tensor({out_width, in_width})),
      bias(Tensor({out_width})),
      in_width_(in_width),
      out_width_(out_width) {
    if (in_width < 1 || out_width < 1) {
        throw ArgError("dense: widths must be positive");
    }
    weights.ensure_grad();
    bias.ensure_grad();
}

std::string Dense::name() const {
    return "dense(" + std::to_string(in_width_) + "->" + std::to_string(out_width_) + ")";
}

void Dense::init_parameters(Rng& rng) {
    fill_uniform(weights, glorot_limit(in_width_, out_width_), rng);
    std::fill(bias.values().begin(), bias.values().end(), 0.0f);
}

std::vector<int> Dense::output_dims(const std::vector<int>& in) const {
    if (in.size() != 2 || in[1] != in_width_) {
        throw ShapeError(name() + " expects (n," + std::to_string(in_width_) + "), got " +
                         shape_str(in));
    }
    return {in[0], out_width_};
}

Tensor Dense::forward(const Tensor& input) {
    const auto out_dims = output_dims(input.dims());
    saved_input_ = input;

    const int n = input.dim(0);
    Tensor out(out_dims);
    const float* in = input.values().data();
    const float* w = weights.values().data();
    const float* b = bias.values().data();
    float* dst = out.values().data();

    parallel_for(n, default_threads(), [&](std::int64_t nb, std::int64_t ne) {
        for (std::int64_t s = nb; s < ne; ++s) {
            const float* row = in + s * in_width_;
            float* out_row = dst + s * out_width_;
            for (int o = 0; o < out_width_; ++o) {
                const float* wrow = w + static_cast<std::int64_t>(o) * in_width_;
                double acc = b[o];
                for (int i = 0; i < in_width_; ++i) acc += static_cast<double>(row[i]) * wrow[i];
                out_row[o] = static_cast<float>(acc);
            }
        }
    });
    debug_check_finite(out, "dense forward");
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    if (saved_input_.numel() == 0) {
        throw TrainError("dense backward before forward");
    }
    const auto expect = output_dims(saved_input_.dims());
    if (grad_out.dims() != expect) {
        throw ShapeError("dense backward expects " + shape_str(expect) + ", got " +
                         grad_out.shape_str());
    }
    const int n = saved_input_.dim(0);
    const float* in = saved_input_.values().data();
    const float* go = grad_out.values().data();
    const float* w = weights.values().data();

    Tensor grad_input(saved_input_.dims());
    float* gi = grad_input.values().data();
    parallel_for(n, default_threads(), [&](std::int64_t nb, std::int64_t ne) {
        std::vector<double> acc(static_cast<std::size_t>(in_width_));
        for (std::int64_t s = nb; s < ne; ++s) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const float* go_row = go + s * out_width_;
            for (int o = 0; o < out_width_; ++o) {
                const double g = go_row[o];
                if (g == 0.0) continue;
                const float* wrow = w + static_cast<std::int64_t>(o) * in_width_;
                for (int i = 0; i < in_width_; ++i) acc[static_cast<std::size_t>(i)] += g * wrow[i];
            }
            float* gi_row = gi + s * in_width_;
            for (int i = 0; i < in_width_; ++i) {
                gi_row[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
            }
        }
    });

    weights.ensure_grad();
    bias.ensure_grad();
    float* wg = weights.grad().data();
    float* bg = bias.grad().data();
    parallel_for(out_width_, default_threads(), [&](std::int64_t ob, std::int64_t oe) {
        std::vector<double> wacc(static_cast<std::size_t>(in_width_));
        for (std::int64_t o = ob; o < oe; ++o) {
            std::fill(wacc.begin(), wacc.end(), 0.0);
            double bacc = 0.0;
            for (int s = 0; s < n; ++s) {
                const double g = go[static_cast<std::int64_t>(s) * out_width_ + o];
                if (g == 0.0) continue;
                bacc += g;
                const float* row = in + static_cast<std::int64_t>(s) * in_width_;
                for (int i = 0; i < in_width_; ++i) wacc[static_cast<std::size_t>(i)] += g * row[i];
            }
            bg[o] += static_cast<float>(bacc);
            float* wgrow = wg + o * in_width_;
            for (int i = 0; i < in_width_; ++i) {
                wgrow[i] += static_cast<float>(wacc[static_cast<std::size_t>(i)]);
            }
        }
    });
    return grad_input;
}

// ---------------------------------------------------------------------------
// ReLU

std::vector<int> ReLU::output_dims(const std::vector<int>& in) const { return in; }

Tensor ReLU::forward(const Tensor& input) {
    saved_input_ = input;
    Tensor out(input.dims());
    const float* in = input.values().data();
    float* dst = out.values().data();
    for (std::int64_t i = 0; i < input.numel(); ++i) dst[i] = in[i] > 0.0f ? in[i] : 0.0f;
    return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
    if (saved_input_.numel() == 0) {
        throw TrainError("relu backward before forward");
    }
    if (grad_out.dims() != saved_input_.dims()) {
        throw ShapeError("relu backward expects " + saved_input_.shape_str() + ", got " +
                         grad_out.shape_str());
    }
    Tensor grad_input(saved_input_.dims());
    const float* in = saved_input_.values().data();
    const float* go = grad_out.values().data();
    float* gi = grad_input.values().data();
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) gi[i] = in[i] > 0.0f ? go[i] : 0.0f;
    return grad_input;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy

SoftmaxCrossEntropy softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax_cross_entropy expects (n,k) logits, got " + logits.shape_str());
    }
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
    }

    SoftmaxCrossEntropy result;
    result.grad_logits = Tensor({n, k});
    const float* l = logits.values().data();
    float* g = result.grad_logits.values().data();

    double total = 0.0;
    std::vector<double> expd(static_cast<std::size_t>(k));
    for (int s = 0; s < n; ++s) {
        const int y = labels[static_cast<std::size_t>(s)];
        if (y < 0 || y >= k) {
            throw ArgError("label " + std::to_string(y) + " outside [0, " + std::to_string(k) +
                           ") at row " + std::to_string(s));
        }
        const float* row = l + static_cast<std::int64_t>(s) * k;
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double z = 0.0;
        for (int j = 0; j < k; ++j) {
            expd[static_cast<std::size_t>(j)] = std::exp(static_cast<double>(row[j]) - m);
            z += expd[static_cast<std::size_t>(j)];
        }
        total += -(static_cast<double>(row[y]) - m - std::log(z));
        float* grow = g + static_cast<std::int64_t>(s) * k;
        for (int j = 0; j < k; ++j) {
            const double p = expd[static_cast<std::size_t>(j)] / z;
            grow[j] = static_cast<float>((p - (j == y ? 1.0 : 0.0)) / n);
        }
    }
    result.loss = total / n;
    return result;
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (cfg_.learning_rate < 0.0f) {
        throw ArgError("learning rate must be >= 0");
    }
    if (!(cfg_.beta1 > 0.0f && cfg_.beta1 < 1.0f) || !(cfg_.beta2 > 0.0f && cfg_.beta2 < 1.0f)) {
        throw ArgError("adam betas must lie in (0, 1)");
    }
    if (cfg_.epsilon <= 0.0f) {
        throw ArgError("adam epsilon must be > 0");
    }
}

void Optimizer::step(const std::vector<Tensor*>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            m_[p].assign(static_cast<std::size_t>(params[p]->numel()), 0.0f);
            v_[p].assign(static_cast<std::size_t>(params[p]->numel()), 0.0f);
        }
    }
    if (m_.size() != params.size()) {
        throw TrainError("optimizer reused with a different parameter set");
    }
    for (const Tensor* p : params) {
        if (!p->has_grad()) {
            throw TrainError("parameter " + p->shape_str() +
                             " has no gradient; run backward before step");
        }
    }

    ++step_count_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(step_count_));

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p];
        if (static_cast<std::size_t>(t.numel()) != m_[p].size()) {
            throw TrainError("parameter " + t.shape_str() + " changed size under the optimizer");
        }
        float* theta = t.values().data();
        float* g = t.grad().data();
        if (cfg_.kind == OptimizerKind::Sgd) {
            for (std::int64_t i = 0; i < t.numel(); ++i) {
                theta[i] -= cfg_.learning_rate * g[i];
            }
        } else {
            float* m = m_[p].data();
            float* v = v_[p].data();
            for (std::int64_t i = 0; i < t.numel(); ++i) {
                const double gi = g[i];
                const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                m[i] = static_cast<float>(mi);
                v[i] = static_cast<float>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                theta[i] -= static_cast<float>(cfg_.learning_rate * mhat /
                                               (std::sqrt(vhat) + cfg_.epsilon));
            }
        }
        t.zero_grad();
    }
}

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "adam") return OptimizerKind::Adam;
    throw ArgError("unknown optimizer '" + s + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[4] = {'C', 'N', 'N', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v),
        static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 24),
    };
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) {
        throw FormatError(std::string("checkpoint truncated reading ") + what);
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_param(std::ostream& out, const Tensor& t) {
    std::vector<std::uint32_t> dims;
    for (const int d : t.dims()) dims.push_back(static_cast<std::uint32_t>(d));
    write_tensor(out, dims, std::vector<float>(t.values().begin(), t.values().end()));
}

void read_param(std::istream& in, Tensor& t, const char* what) {
    const TensorFile f = read_tensor(in);
    if (f.data.size() != static_cast<std::size_t>(t.numel())) {
        throw FormatError(std::string("checkpoint tensor size mismatch for ") + what);
    }
    std::copy(f.data.begin(), f.data.end(), t.values().begin());
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Layer*>& layers) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open checkpoint for writing: " + path);
    }
    out.write(kCheckpointMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(layers.size()));
    for (const Layer* layer : layers) {
        write_u32(out, static_cast<std::uint32_t>(layer->kind()));
        switch (layer->kind()) {
            case LayerKind::Conv2D: {
                const auto* conv = static_cast<const Conv2D*>(layer);
                write_u32(out, static_cast<std::uint32_t>(conv->in_channels()));
                write_u32(out, static_cast<std::uint32_t>(conv->out_channels()));
                write_u32(out, static_cast<std::uint32_t>(conv->kernel()));
                write_param(out, conv->weights);
                write_param(out, conv->bias);
                break;
            }
            case LayerKind::MaxPool2D:
                write_u32(out, static_cast<std::uint32_t>(
                                   static_cast<const MaxPool2D*>(layer)->pool()));
                break;
            case LayerKind::Dense: {
                const auto* dense = static_cast<const Dense*>(layer);
                write_u32(out, static_cast<std::uint32_t>(dense->in_width()));
                write_u32(out, static_cast<std::uint32_t>(dense->out_width()));
                write_param(out, dense->weights);
                write_param(out, dense->bias);
                break;
            }
            case LayerKind::Flatten:
            case LayerKind::ReLU:
                break;
        }
    }
    if (!out) {
        throw IoError("checkpoint write failed: " + path);
    }
}

std::vector<std::unique_ptr<Layer>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint: " + path);
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("not a CNN1 checkpoint (bad magic): " + path);
    }
    const std::uint32_t count = read_u32(in, "layer count");
    if (count == 0 || count > 256) {
        throw FormatError("checkpoint layer count " + std::to_string(count) + " out of range");
    }

    std::vector<std::unique_ptr<Layer>> layers;
    layers.reserve(count);
    for (std::uint32_t idx = 0; idx < count; ++idx) {
        const std::uint32_t kind = read_u32(in, "layer kind");
        switch (static_cast<LayerKind>(kind)) {
            case LayerKind::Conv2D: {
                const auto in_ch = static_cast<int>(read_u32(in, "conv in_channels"));
                const auto out_ch = static_cast<int>(read_u32(in, "conv out_channels"));
                const auto kernel = static_cast<int>(read_u32(in, "conv kernel"));
                if (in_ch < 1 || out_ch < 1 || kernel < 1 || kernel > 64) {
                    throw FormatError("checkpoint conv hyperparameters out of range");
                }
                auto conv = std::make_unique<Conv2D>(in_ch, out_ch, kernel);
                read_param(in, conv->weights, "conv weights");
                read_param(in, conv->bias, "conv bias");
                layers.push_back(std::move(conv));
                break;
            }
            case LayerKind::MaxPool2D: {
                const auto pool = static_cast<int>(read_u32(in, "pool size"));
                if (pool < 2 || pool > 64) {
                    throw FormatError("checkpoint pool size out of range");
                }
                layers.push_back(std::make_unique<MaxPool2D>(pool));
                break;
            }
            case LayerKind::Flatten:
                layers.push_back(std::make_unique<Flatten>());
                break;
            case LayerKind::Dense: {
                const auto in_w = static_cast<int>(read_u32(in, "dense in_width"));
                const auto out_w = static_cast<int>(read_u32(in, "dense out_width"));
                if (in_w < 1 || out_w < 1) {
                    throw FormatError("checkpoint dense widths out of range");
                }
                auto dense = std::make_unique<Dense>(in_w, out_w);
                read_param(in, dense->weights, "dense weights");
                read_param(in, dense->bias, "dense bias");
                layers.push_back(std::move(dense));
                break;
            }
            case LayerKind::ReLU:
                layers.push_back(std::make_unique<ReLU>());
                break;
            default:
                throw FormatError("checkpoint layer " + std::to_string(idx) +
                                  " has unknown kind tag " + std::to_string(kind));
        }
    }
    return layers;
}

}  // namespace gafcnn::nn
