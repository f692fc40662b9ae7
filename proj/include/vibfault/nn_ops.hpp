#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vibfault/errors.hpp"

// Dense-tensor layer arithmetic. Everything is templated on the scalar type:
// the training path runs float, the gradient-check harness runs the same code
// in double.

namespace vibfault::nn {

template <typename T>
struct TensorT {
    std::vector<std::size_t> dims;
    std::vector<T> data;

    TensorT() = default;
    TensorT(std::vector<std::size_t> d, std::vector<T> values)
        : dims(std::move(d)), data(std::move(values)) {
        if (numel_of(dims) != data.size())
            throw ValidationError("tensor data does not match its dimensions");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& d) {
        std::size_t n = 1;
        for (auto v : d) n *= v;
        return d.empty() ? 0 : n;
    }

    static TensorT zeros(std::vector<std::size_t> d) {
        TensorT t;
        t.data.assign(numel_of(d), T(0));
        t.dims = std::move(d);
        return t;
    }

    std::size_t numel() const { return data.size(); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.dims = dims;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

namespace detail {

inline void require(bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
}

} // namespace detail

// ---- convolution (valid padding, stride 1) ----

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    detail::require(x.dims.size() == 3, "conv input must be [C,H,W]");
    detail::require(w.dims.size() == 4, "conv weights must be [F,C,k,k]");
    detail::require(b.dims.size() == 1, "conv bias must be [F]");
    const std::size_t c_in = x.dims[0], h = x.dims[1], wd = x.dims[2];
    const std::size_t f_out = w.dims[0], k = w.dims[2];
    detail::require(w.dims[1] == c_in, "conv channel mismatch");
    detail::require(w.dims[3] == k, "conv kernel must be square");
    detail::require(b.dims[0] == f_out, "conv bias size mismatch");
    detail::require(h >= k && wd >= k, "conv input smaller than kernel");

    const std::size_t oh = h - k + 1, ow = wd - k + 1;
    TensorT<T> y = TensorT<T>::zeros({f_out, oh, ow});
    for (std::size_t f = 0; f < f_out; ++f) {
        T* ybase = y.ptr() + f * oh * ow;
        std::fill(ybase, ybase + oh * ow, b.data[f]);
        for (std::size_t c = 0; c < c_in; ++c) {
            const T* xbase = x.ptr() + c * h * wd;
            const T* wbase = w.ptr() + (f * c_in + c) * k * k;
            for (std::size_t p = 0; p < k; ++p) {
                for (std::size_t q = 0; q < k; ++q) {
                    const T wv = wbase[p * k + q];
                    for (std::size_t i = 0; i < oh; ++i) {
                        const T* xrow = xbase + (i + p) * wd + q;
                        T* yrow = ybase + i * ow;
                        for (std::size_t j = 0; j < ow; ++j) yrow[j] += wv * xrow[j];
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
struct Conv2dGrads {
    TensorT<T> input;
    TensorT<T> weights;
    TensorT<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy) {
    const std::size_t c_in = x.dims[0], h = x.dims[1], wd = x.dims[2];
    const std::size_t f_out = w.dims[0], k = w.dims[2];
    const std::size_t oh = h - k + 1, ow = wd - k + 1;
    detail::require(gy.dims.size() == 3 && gy.dims[0] == f_out && gy.dims[1] == oh &&
                        gy.dims[2] == ow,
                    "conv upstream gradient shape mismatch");

    Conv2dGrads<T> g{TensorT<T>::zeros(x.dims), TensorT<T>::zeros(w.dims),
                     TensorT<T>::zeros({f_out})};
    for (std::size_t f = 0; f < f_out; ++f) {
        const T* gybase = gy.ptr() + f * oh * ow;
        T acc = T(0);
        for (std::size_t i = 0; i < oh * ow; ++i) acc += gybase[i];
        g.bias.data[f] = acc;
        for (std::size_t c = 0; c < c_in; ++c) {
            const T* xbase = x.ptr() + c * h * wd;
            T* gxbase = g.input.ptr() + c * h * wd;
            const T* wbase = w.ptr() + (f * c_in + c) * k * k;
            T* gwbase = g.weights.ptr() + (f * c_in + c) * k * k;
            for (std::size_t p = 0; p < k; ++p) {
                for (std::size_t q = 0; q < k; ++q) {
                    const T wv = wbase[p * k + q];
                    T wacc = T(0);
                    for (std::size_t i = 0; i < oh; ++i) {
                        const T* xrow = xbase + (i + p) * wd + q;
                        T* gxrow = gxbase + (i + p) * wd + q;
                        const T* gyrow = gybase + i * ow;
                        for (std::size_t j = 0; j < ow; ++j) {
                            wacc += xrow[j] * gyrow[j];
                            gxrow[j] += wv * gyrow[j];
                        }
                    }
                    gwbase[p * k + q] = wacc;
                }
            }
        }
    }
    return g;
}

// ---- relu ----

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& x) {
    TensorT<T> y = x;
    for (auto& v : y.data) v = v > T(0) ? v : T(0);
    return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& gy) {
    detail::require(x.dims == gy.dims, "relu gradient shape mismatch");
    TensorT<T> gx = TensorT<T>::zeros(x.dims);
    for (std::size_t i = 0; i < x.numel(); ++i)
        gx.data[i] = x.data[i] > T(0) ? gy.data[i] : T(0);
    return gx;
}

// ---- 2x2 max pooling, stride 2 (odd trailing row/column dropped) ----

template <typename T>
struct PoolResult {
    TensorT<T> output;
    std::vector<std::uint32_t> argmax; // flat input index per output cell
};

template <typename T>
PoolResult<T> maxpool2_forward(const TensorT<T>& x) {
    detail::require(x.dims.size() == 3, "pool input must be [C,H,W]");
    const std::size_t c_in = x.dims[0], h = x.dims[1], w = x.dims[2];
    detail::require(h >= 2 && w >= 2, "pool input smaller than window");
    const std::size_t oh = h / 2, ow = w / 2;
    PoolResult<T> r{TensorT<T>::zeros({c_in, oh, ow}), {}};
    r.argmax.resize(c_in * oh * ow);
    for (std::size_t c = 0; c < c_in; ++c) {
        const T* xbase = x.ptr() + c * h * w;
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                std::size_t best = (2 * i) * w + 2 * j;
                T bv = xbase[best];
                for (int di = 0; di < 2; ++di) {
                    for (int dj = 0; dj < 2; ++dj) {
                        const std::size_t idx =
                            (2 * i + static_cast<std::size_t>(di)) * w + 2 * j +
                            static_cast<std::size_t>(dj);
                        if (xbase[idx] > bv) {
                            bv = xbase[idx];
                            best = idx;
                        }
                    }
                }
                r.output.data[(c * oh + i) * ow + j] = bv;
                r.argmax[(c * oh + i) * ow + j] = static_cast<std::uint32_t>(c * h * w + best);
            }
        }
    }
    return r;
}

template <typename T>
TensorT<T> maxpool2_backward(const TensorT<T>& gy, const std::vector<std::uint32_t>& argmax,
                             const std::vector<std::size_t>& input_dims) {
    detail::require(gy.numel() == argmax.size(), "pool gradient shape mismatch");
    TensorT<T> gx = TensorT<T>::zeros(input_dims);
    for (std::size_t i = 0; i < argmax.size(); ++i) gx.data[argmax[i]] += gy.data[i];
    return gx;
}

// ---- dense ----

template <typename T>
TensorT<T> dense_forward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    detail::require(w.dims.size() == 2, "dense weights must be [out,in]");
    const std::size_t out = w.dims[0], in = w.dims[1];
    detail::require(x.numel() == in, "dense input size mismatch");
    detail::require(b.numel() == out, "dense bias size mismatch");
    TensorT<T> y = TensorT<T>::zeros({out});
    for (std::size_t o = 0; o < out; ++o) {
        const T* wrow = w.ptr() + o * in;
        T acc = b.data[o];
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x.data[i];
        y.data[o] = acc;
    }
    return y;
}

template <typename T>
struct DenseGrads {
    TensorT<T> input;
    TensorT<T> weights;
    TensorT<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& gy) {
    const std::size_t out = w.dims[0], in = w.dims[1];
    detail::require(gy.numel() == out, "dense upstream gradient size mismatch");
    DenseGrads<T> g{TensorT<T>::zeros({in}), TensorT<T>::zeros(w.dims), TensorT<T>::zeros({out})};
    for (std::size_t o = 0; o < out; ++o) {
        const T* wrow = w.ptr() + o * in;
        T* gwrow = g.weights.ptr() + o * in;
        const T gv = gy.data[o];
        g.bias.data[o] = gv;
        for (std::size_t i = 0; i < in; ++i) {
            g.input.data[i] += wrow[i] * gv;
            gwrow[i] = gv * x.data[i];
        }
    }
    return g;
}

// ---- softmax and cross entropy ----

template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
    detail::require(logits.numel() >= 2, "softmax needs at least two logits");
    TensorT<T> p = TensorT<T>::zeros({logits.numel()});
    T mx = logits.data[0];
    for (const T v : logits.data) mx = std::max(mx, v);
    T total = T(0);
    for (std::size_t i = 0; i < logits.numel(); ++i) {
        p.data[i] = std::exp(logits.data[i] - mx);
        total += p.data[i];
    }
    for (auto& v : p.data) v /= total;
    return p;
}

template <typename T>
T cross_entropy(const TensorT<T>& probs, int label) {
    detail::require(label >= 0 && static_cast<std::size_t>(label) < probs.numel(),
                    "label out of range");
    const T p = std::max(probs.data[static_cast<std::size_t>(label)], T(1e-12));
    return -std::log(p);
}

// Gradient of cross_entropy(softmax(z), label) with respect to z.
template <typename T>
TensorT<T> softmax_xent_grad(const TensorT<T>& probs, int label) {
    detail::require(label >= 0 && static_cast<std::size_t>(label) < probs.numel(),
                    "label out of range");
    TensorT<T> g = probs;
    g.data[static_cast<std::size_t>(label)] -= T(1);
    return g;
}

// ---- Adam ----

template <typename T>
struct AdamStateT {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::vector<TensorT<T>> m;
    std::vector<TensorT<T>> v;
};

using AdamState = AdamStateT<float>;

template <typename T>
void adam_init(AdamStateT<T>& state, const std::vector<TensorT<T>>& params) {
    state.t = 0;
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
        state.m.push_back(TensorT<T>::zeros(p.dims));
        state.v.push_back(TensorT<T>::zeros(p.dims));
    }
}

template <typename T>
void adam_step(std::vector<TensorT<T>>& params, const std::vector<TensorT<T>>& grads,
               AdamStateT<T>& state) {
    detail::require(params.size() == grads.size(), "adam: parameter/gradient count mismatch");
    detail::require(params.size() == state.m.size(), "adam: state not initialized");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        detail::require(params[k].dims == grads[k].dims, "adam: gradient shape mismatch");
        auto& p = params[k];
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double g = static_cast<double>(grads[k].data[i]);
            const double mi = state.beta1 * static_cast<double>(m.data[i]) + (1.0 - state.beta1) * g;
            const double vi =
                state.beta2 * static_cast<double>(v.data[i]) + (1.0 - state.beta2) * g * g;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.data[i] = static_cast<T>(static_cast<double>(p.data[i]) -
                                       state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

} // namespace vibfault::nn
