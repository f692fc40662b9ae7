#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "vibfault/encoders.hpp"
#include "vibfault/nn_ops.hpp"

namespace vibfault::nn {

enum class LayerKind { Conv2d, MaxPool2d, Relu, Flatten, Dense };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    // Conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0; // square, stride 1, valid padding
    // Dense
    int in_features = 0;
    int out_features = 0;

    static LayerSpec conv2d(int in_ch, int out_ch, int k) {
        LayerSpec s;
        s.kind = LayerKind::Conv2d;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = k;
        return s;
    }
    static LayerSpec maxpool2() { return {LayerKind::MaxPool2d, 0, 0, 0, 0, 0}; }
    static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 0, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0, 0, 0}; }
    static LayerSpec dense(int in_f, int out_f) {
        LayerSpec s;
        s.kind = LayerKind::Dense;
        s.in_features = in_f;
        s.out_features = out_f;
        return s;
    }
};

int param_tensor_count(LayerKind kind);
std::size_t param_count(const std::vector<LayerSpec>& layers);

// Output shape of one layer; throws ValidationError on any incompatibility.
std::vector<std::size_t> shape_after(const LayerSpec& spec, const std::vector<std::size_t>& in);

struct Shape3 {
    int channels = 1;
    int height = 0;
    int width = 0;
    bool operator==(const Shape3&) const = default;
};

// Three 3x3 conv blocks (8/16/32 filters) with relu + 2x2 pooling, then
// dense(128) -> relu -> dense(num_classes). Blocks that no longer fit the
// remaining spatial extent are dropped, so small inputs still build.
std::vector<LayerSpec> default_architecture(Shape3 input, int num_classes);

struct CnnModel {
    std::vector<LayerSpec> layers;
    std::vector<Tensor> params; // conv/dense weights and biases in layer order
    Shape3 input_shape;
    int num_classes = 0;

    std::size_t param_count() const;
    Tensor forward(const Tensor& input) const; // returns logits
};

// Validates the layer stack against the input shape and initializes
// parameters (He-style uniform fan-in scaling) from the seed.
CnnModel build_model(Shape3 input, int num_classes, std::vector<LayerSpec> layers,
                     std::uint64_t seed);
CnnModel build_default_model(Shape3 input, int num_classes, std::uint64_t seed);

// ---- templated forward/backward over a layer stack ----
// The float instantiation is the runtime path; tests run the same code in
// double for finite-difference gradient checks.

template <typename T>
struct ForwardTrace {
    std::vector<TensorT<T>> inputs;                    // input of each layer
    std::vector<std::vector<std::uint32_t>> pool_idx;  // argmax per pool layer
};

template <typename T>
TensorT<T> forward_layers(const std::vector<LayerSpec>& specs,
                          const std::vector<TensorT<T>>& params, const TensorT<T>& input,
                          ForwardTrace<T>* trace = nullptr) {
    TensorT<T> cur = input;
    std::size_t pi = 0;
    if (trace) {
        trace->inputs.clear();
        trace->pool_idx.assign(specs.size(), {});
    }
    for (std::size_t li = 0; li < specs.size(); ++li) {
        const auto& spec = specs[li];
        if (trace) trace->inputs.push_back(cur);
        switch (spec.kind) {
            case LayerKind::Conv2d: {
                const auto& w = params[pi++];
                const auto& b = params[pi++];
                cur = conv2d_forward(cur, w, b);
                break;
            }
            case LayerKind::MaxPool2d: {
                auto r = maxpool2_forward(cur);
                if (trace) trace->pool_idx[li] = std::move(r.argmax);
                cur = std::move(r.output);
                break;
            }
            case LayerKind::Relu: cur = relu_forward(cur); break;
            case LayerKind::Flatten: {
                TensorT<T> flat;
                flat.dims = {cur.numel()};
                flat.data = std::move(cur.data);
                cur = std::move(flat);
                break;
            }
            case LayerKind::Dense: {
                const auto& w = params[pi++];
                const auto& b = params[pi++];
                cur = dense_forward(cur, w, b);
                break;
            }
        }
    }
    return cur;
}

// Returns gradients for every parameter tensor; optionally the gradient with
// respect to the network input.
template <typename T>
std::vector<TensorT<T>> backward_layers(const std::vector<LayerSpec>& specs,
                                        const std::vector<TensorT<T>>& params,
                                        const ForwardTrace<T>& trace,
                                        const TensorT<T>& grad_logits,
                                        TensorT<T>* grad_input = nullptr) {
    std::vector<TensorT<T>> grads(params.size());
    std::size_t pi = params.size();
    TensorT<T> g = grad_logits;
    for (std::size_t li = specs.size(); li-- > 0;) {
        const auto& spec = specs[li];
        const auto& x = trace.inputs[li];
        switch (spec.kind) {
            case LayerKind::Conv2d: {
                const auto& b = params[--pi];
                const auto& w = params[pi - 1];
                (void)b;
                auto cg = conv2d_backward(x, w, g);
                grads[pi] = std::move(cg.bias);
                grads[pi - 1] = std::move(cg.weights);
                --pi;
                g = std::move(cg.input);
                break;
            }
            case LayerKind::MaxPool2d:
                g = maxpool2_backward(g, trace.pool_idx[li], x.dims);
                break;
            case LayerKind::Relu: g = relu_backward(x, g); break;
            case LayerKind::Flatten: {
                TensorT<T> unflat;
                unflat.dims = x.dims;
                unflat.data = std::move(g.data);
                g = std::move(unflat);
                break;
            }
            case LayerKind::Dense: {
                const auto& b = params[--pi];
                const auto& w = params[pi - 1];
                (void)b;
                auto dg = dense_backward(x, w, g);
                grads[pi] = std::move(dg.bias);
                grads[pi - 1] = std::move(dg.weights);
                --pi;
                g = std::move(dg.input);
                break;
            }
        }
    }
    if (grad_input) *grad_input = std::move(g);
    return grads;
}

// Seeded parameter initialization shared by build_model and the gradient
// checks (which instantiate it in double).
template <typename T>
std::vector<TensorT<T>> init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// ---- training and inference ----

struct LabeledImages {
    std::vector<Tensor> images; // each [C,H,W]
    std::vector<int> labels;    // 0-based class indices
};

struct EpochLog {
    double loss = 0.0;     // mean cross entropy over the epoch
    double accuracy = 0.0; // training accuracy over the epoch
};

struct TrainOptions {
    int epochs = 150;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    double wall_seconds = 0.0;
};

// Mini-batch Adam over seeded shuffles; single-threaded and deterministic.
TrainResult train(CnnModel& model, const LabeledImages& data, const TrainOptions& opts);

struct Prediction {
    int class_index = 0; // 0-based; ties break toward the lowest index
    std::vector<double> probabilities; // softmax over the float logits, in double
    std::chrono::nanoseconds inference_time{0};
};

Tensor to_tensor(const encoders::EncodedImage& image);
Prediction predict(const CnnModel& model, const encoders::EncodedImage& image);
Prediction predict(const CnnModel& model, const Tensor& image);

// Bit-exact container: magic "VCNN", version, layer specs, f32 payloads.
void save_model(const CnnModel& model, const std::string& path);
CnnModel load_model(const std::string& path);

} // namespace vibfault::nn
