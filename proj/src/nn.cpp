#include "vibfault/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "vibfault/rng.hpp"

namespace vibfault::nn {

int param_tensor_count(LayerKind kind) {
    return (kind == LayerKind::Conv2d || kind == LayerKind::Dense) ? 2 : 0;
}

std::size_t param_count(const std::vector<LayerSpec>& layers) {
    std::size_t n = 0;
    for (const auto& l : layers) {
        if (l.kind == LayerKind::Conv2d) {
            n += static_cast<std::size_t>(l.out_channels) * l.in_channels * l.kernel * l.kernel;
            n += static_cast<std::size_t>(l.out_channels);
        } else if (l.kind == LayerKind::Dense) {
            n += static_cast<std::size_t>(l.out_features) * l.in_features;
            n += static_cast<std::size_t>(l.out_features);
        }
    }
    return n;
}

std::vector<std::size_t> shape_after(const LayerSpec& spec, const std::vector<std::size_t>& in) {
    switch (spec.kind) {
        case LayerKind::Conv2d: {
            if (in.size() != 3) throw ValidationError("conv layer expects a [C,H,W] input");
            if (in[0] != static_cast<std::size_t>(spec.in_channels))
                throw ValidationError("conv layer channel mismatch");
            if (in[1] < static_cast<std::size_t>(spec.kernel) ||
                in[2] < static_cast<std::size_t>(spec.kernel))
                throw ValidationError("conv layer input smaller than kernel");
            return {static_cast<std::size_t>(spec.out_channels),
                    in[1] - static_cast<std::size_t>(spec.kernel) + 1,
                    in[2] - static_cast<std::size_t>(spec.kernel) + 1};
        }
        case LayerKind::MaxPool2d: {
            if (in.size() != 3) throw ValidationError("pool layer expects a [C,H,W] input");
            if (in[1] < 2 || in[2] < 2)
                throw ValidationError("pool layer input smaller than window");
            return {in[0], in[1] / 2, in[2] / 2};
        }
        case LayerKind::Relu: return in;
        case LayerKind::Flatten: {
            std::size_t n = 1;
            for (auto d : in) n *= d;
            return {n};
        }
        case LayerKind::Dense: {
            if (in.size() != 1) throw ValidationError("dense layer expects a flattened input");
            if (in[0] != static_cast<std::size_t>(spec.in_features))
                throw ValidationError("dense layer input size mismatch");
            return {static_cast<std::size_t>(spec.out_features)};
        }
    }
    throw ValidationError("unknown layer kind");
}

std::vector<LayerSpec> default_architecture(Shape3 input, int num_classes) {
    if (num_classes < 2) throw ValidationError("need at least two classes");
    std::vector<LayerSpec> layers;
    int c = input.channels, h = input.height, w = input.width;
    for (int width : {8, 16, 32}) {
        if (h < 3 || w < 3) break;
        layers.push_back(LayerSpec::conv2d(c, width, 3));
        layers.push_back(LayerSpec::relu());
        c = width;
        h -= 2;
        w -= 2;
        if (h >= 2 && w >= 2) {
            layers.push_back(LayerSpec::maxpool2());
            h /= 2;
            w /= 2;
        }
    }
    layers.push_back(LayerSpec::flatten());
    const int flat = c * h * w;
    layers.push_back(LayerSpec::dense(flat, 128));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dense(128, num_classes));
    return layers;
}

template <typename T>
std::vector<TensorT<T>> init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<TensorT<T>> params;
    for (const auto& spec : specs) {
        if (spec.kind == LayerKind::Conv2d) {
            const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
            const double limit = std::sqrt(6.0 / fan_in);
            auto w = TensorT<T>::zeros({static_cast<std::size_t>(spec.out_channels),
                                        static_cast<std::size_t>(spec.in_channels),
                                        static_cast<std::size_t>(spec.kernel),
                                        static_cast<std::size_t>(spec.kernel)});
            for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
            params.push_back(std::move(w));
            params.push_back(TensorT<T>::zeros({static_cast<std::size_t>(spec.out_channels)}));
        } else if (spec.kind == LayerKind::Dense) {
            const double limit = std::sqrt(6.0 / spec.in_features);
            auto w = TensorT<T>::zeros({static_cast<std::size_t>(spec.out_features),
                                        static_cast<std::size_t>(spec.in_features)});
            for (auto& v : w.data) v = static_cast<T>(rng.uniform(-limit, limit));
            params.push_back(std::move(w));
            params.push_back(TensorT<T>::zeros({static_cast<std::size_t>(spec.out_features)}));
        }
    }
    return params;
}

template std::vector<TensorT<float>> init_params<float>(const std::vector<LayerSpec>&,
                                                        std::uint64_t);
template std::vector<TensorT<double>> init_params<double>(const std::vector<LayerSpec>&,
                                                          std::uint64_t);

namespace {

void validate_stack(const std::vector<LayerSpec>& layers, Shape3 input, int num_classes) {
    std::vector<std::size_t> shape = {static_cast<std::size_t>(input.channels),
                                      static_cast<std::size_t>(input.height),
                                      static_cast<std::size_t>(input.width)};
    for (const auto& l : layers) shape = shape_after(l, shape);
    if (shape.size() != 1 || shape[0] != static_cast<std::size_t>(num_classes))
        throw ValidationError("layer stack does not end in num_classes outputs");
}

} // namespace

CnnModel build_model(Shape3 input, int num_classes, std::vector<LayerSpec> layers,
                     std::uint64_t seed) {
    validate_stack(layers, input, num_classes);
    CnnModel model;
    model.layers = std::move(layers);
    model.params = init_params<float>(model.layers, seed);
    model.input_shape = input;
    model.num_classes = num_classes;
    return model;
}

CnnModel build_default_model(Shape3 input, int num_classes, std::uint64_t seed) {
    return build_model(input, num_classes, default_architecture(input, num_classes), seed);
}

std::size_t CnnModel::param_count() const { return nn::param_count(layers); }

Tensor CnnModel::forward(const Tensor& input) const {
    return forward_layers(layers, params, input);
}

namespace {

template <typename T>
int argmax_lowest(const std::vector<T>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return best;
}

} // namespace

TrainResult train(CnnModel& model, const LabeledImages& data, const TrainOptions& opts) {
    if (data.images.size() != data.labels.size())
        throw ValidationError("image/label count mismatch");
    if (data.images.empty()) throw ValidationError("empty training set");
    if (opts.batch_size < 1) throw ValidationError("batch size must be positive");
    if (opts.epochs < 0) throw ValidationError("epoch count must be >= 0");
    const std::vector<std::size_t> want = {static_cast<std::size_t>(model.input_shape.channels),
                                           static_cast<std::size_t>(model.input_shape.height),
                                           static_cast<std::size_t>(model.input_shape.width)};
    for (const auto& img : data.images)
        if (img.dims != want)
            throw ValidationError("encoded image shape does not match model input shape");
    for (int label : data.labels)
        if (label < 0 || label >= model.num_classes)
            throw ValidationError("label out of range");

    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    AdamState adam;
    adam.lr = opts.learning_rate;
    adam_init(adam, model.params);
    Rng rng(opts.seed);

    std::vector<std::size_t> order(data.images.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<Tensor> grad_accum;
    for (const auto& p : model.params) grad_accum.push_back(Tensor::zeros(p.dims));

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(opts.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
            for (auto& g : grad_accum) std::fill(g.data.begin(), g.data.end(), 0.0f);
            for (std::size_t s = start; s < stop; ++s) {
                const auto& img = data.images[order[s]];
                const int label = data.labels[order[s]];
                ForwardTrace<float> trace;
                const Tensor logits = forward_layers(model.layers, model.params, img, &trace);
                const Tensor probs = softmax(logits);
                loss_sum += cross_entropy(probs, label);
                if (argmax_lowest(probs.data) == label) ++correct;
                const Tensor grad_logits = softmax_xent_grad(probs, label);
                const auto grads =
                    backward_layers(model.layers, model.params, trace, grad_logits);
                for (std::size_t k = 0; k < grads.size(); ++k)
                    for (std::size_t i = 0; i < grads[k].numel(); ++i)
                        grad_accum[k].data[i] += grads[k].data[i];
            }
            const float inv = 1.0f / static_cast<float>(stop - start);
            for (auto& g : grad_accum)
                for (auto& v : g.data) v *= inv;
            adam_step(model.params, grad_accum, adam);
        }
        EpochLog log;
        log.loss = loss_sum / static_cast<double>(order.size());
        log.accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        result.epochs.push_back(log);
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Tensor to_tensor(const encoders::EncodedImage& image) {
    Tensor t;
    t.dims = {static_cast<std::size_t>(image.channels), static_cast<std::size_t>(image.side),
              static_cast<std::size_t>(image.side)};
    t.data = image.data;
    return t;
}

Prediction predict(const CnnModel& model, const Tensor& image) {
    const std::vector<std::size_t> want = {static_cast<std::size_t>(model.input_shape.channels),
                                           static_cast<std::size_t>(model.input_shape.height),
                                           static_cast<std::size_t>(model.input_shape.width)};
    if (image.dims != want)
        throw ValidationError("image shape does not match model input shape");
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor logits = model.forward(image);
    const TensorT<double> probs = softmax(logits.cast<double>());
    const auto t1 = std::chrono::steady_clock::now();
    Prediction p;
    p.probabilities = probs.data;
    p.class_index = argmax_lowest(p.probabilities);
    p.inference_time = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0);
    return p;
}

Prediction predict(const CnnModel& model, const encoders::EncodedImage& image) {
    return predict(model, to_tensor(image));
}

// ---- serialization ----

namespace {

constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    const char buf[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(buf, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    if (!is) throw ValidationError("corrupt model: truncated");
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

std::uint32_t kind_code(LayerKind k) { return static_cast<std::uint32_t>(k); }

LayerKind kind_from(std::uint32_t v) {
    if (v > static_cast<std::uint32_t>(LayerKind::Dense))
        throw ValidationError("corrupt model: unknown layer kind");
    return static_cast<LayerKind>(v);
}

} // namespace

void save_model(const CnnModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("VCNN", 4);
    put_u32(f, kModelVersion);
    put_u32(f, static_cast<std::uint32_t>(model.num_classes));
    put_u32(f, static_cast<std::uint32_t>(model.input_shape.channels));
    put_u32(f, static_cast<std::uint32_t>(model.input_shape.height));
    put_u32(f, static_cast<std::uint32_t>(model.input_shape.width));
    put_u32(f, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        put_u32(f, kind_code(l.kind));
        put_u32(f, static_cast<std::uint32_t>(l.in_channels));
        put_u32(f, static_cast<std::uint32_t>(l.out_channels));
        put_u32(f, static_cast<std::uint32_t>(l.kernel));
        put_u32(f, static_cast<std::uint32_t>(l.in_features));
        put_u32(f, static_cast<std::uint32_t>(l.out_features));
    }
    put_u32(f, static_cast<std::uint32_t>(model.params.size()));
    for (const auto& p : model.params) {
        put_u32(f, static_cast<std::uint32_t>(p.dims.size()));
        for (auto d : p.dims) put_u32(f, static_cast<std::uint32_t>(d));
        for (float v : p.data) put_u32(f, std::bit_cast<std::uint32_t>(v));
    }
    if (!f) throw IoError("write failed: " + path);
}

CnnModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "VCNN", 4) != 0)
        throw ValidationError("corrupt model: bad magic");
    if (get_u32(f) != kModelVersion)
        throw ValidationError("corrupt model: unsupported version");
    CnnModel model;
    model.num_classes = static_cast<int>(get_u32(f));
    model.input_shape.channels = static_cast<int>(get_u32(f));
    model.input_shape.height = static_cast<int>(get_u32(f));
    model.input_shape.width = static_cast<int>(get_u32(f));
    const std::uint32_t n_layers = get_u32(f);
    if (n_layers > 1024) throw ValidationError("corrupt model: layer count");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LayerSpec l;
        l.kind = kind_from(get_u32(f));
        l.in_channels = static_cast<int>(get_u32(f));
        l.out_channels = static_cast<int>(get_u32(f));
        l.kernel = static_cast<int>(get_u32(f));
        l.in_features = static_cast<int>(get_u32(f));
        l.out_features = static_cast<int>(get_u32(f));
        model.layers.push_back(l);
    }
    const std::uint32_t n_params = get_u32(f);
    std::size_t expected = 0;
    for (const auto& l : model.layers)
        expected += static_cast<std::size_t>(param_tensor_count(l.kind));
    if (n_params != expected) throw ValidationError("corrupt model: parameter tensor count");
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::uint32_t ndims = get_u32(f);
        if (ndims == 0 || ndims > 4) throw ValidationError("corrupt model: tensor rank");
        std::vector<std::size_t> dims(ndims);
        std::size_t numel = 1;
        for (auto& d : dims) {
            d = get_u32(f);
            numel *= d;
        }
        Tensor t;
        t.dims = std::move(dims);
        t.data.resize(numel);
        for (std::size_t e = 0; e < numel; ++e) t.data[e] = std::bit_cast<float>(get_u32(f));
        model.params.push_back(std::move(t));
    }
    validate_stack(model.layers, model.input_shape, model.num_classes);
    return model;
}

} // namespace vibfault::nn
