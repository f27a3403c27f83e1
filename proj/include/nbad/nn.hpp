#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "nbad/error.hpp"
#include "nbad/rng.hpp"
#include "nbad/tensor.hpp"

namespace nbad {

template <class T>
struct Param {
    TensorT<T> value;
    TensorT<T> grad;
    std::string name;

    explicit Param(std::vector<std::size_t> shape = {}, std::string n = "")
        : value(shape), grad(shape), name(std::move(n)) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T{0}); }
};

// ---------------------------------------------------------------------------
// conv2d: cross-correlation with zero padding.
// x: NxCxHxW, w: FxCxkhxkw, b: F -> NxFxH'xW'
// ---------------------------------------------------------------------------
struct ConvGeom {
    std::size_t n, c, h, w, f, kh, kw, stride, pad, oh, ow;
};

template <class T>
ConvGeom conv_geometry(const TensorT<T>& x, const TensorT<T>& wt, std::size_t stride,
                       std::size_t pad) {
    require(x.rank() == 4 && wt.rank() == 4, "ShapeMismatch", "conv2d expects 4-d tensors");
    require(x.shape[1] == wt.shape[1], "ShapeMismatch", "conv2d channel mismatch");
    require(stride >= 1, "ShapeMismatch", "stride must be >= 1");
    ConvGeom g{x.shape[0], x.shape[1], x.shape[2], x.shape[3],
               wt.shape[0], wt.shape[2], wt.shape[3], stride, pad, 0, 0};
    g.kh = wt.shape[2];
    g.kw = wt.shape[3];
    const std::size_t ph = g.h + 2 * pad, pw = g.w + 2 * pad;
    require(ph >= g.kh && pw >= g.kw, "ShapeMismatch", "kernel larger than padded input");
    // floor division: trailing rows/columns that do not fit a full stride are dropped
    g.oh = (ph - g.kh) / stride + 1;
    g.ow = (pw - g.kw) / stride + 1;
    return g;
}

// Reference kernel: direct nested loops, fixed summation order.
template <class T>
TensorT<T> conv2d_forward_naive(const TensorT<T>& x, const TensorT<T>& wt,
                                const std::vector<T>& bias, std::size_t stride, std::size_t pad) {
    const ConvGeom g = conv_geometry(x, wt, stride, pad);
    require(bias.size() == g.f, "ShapeMismatch", "conv2d bias size");
    TensorT<T> y({g.n, g.f, g.oh, g.ow});
    for (std::size_t n = 0; n < g.n; ++n)
        for (std::size_t f = 0; f < g.f; ++f)
            for (std::size_t oy = 0; oy < g.oh; ++oy)
                for (std::size_t ox = 0; ox < g.ow; ++ox) {
                    T acc = bias[f];
                    for (std::size_t c = 0; c < g.c; ++c)
                        for (std::size_t ky = 0; ky < g.kh; ++ky)
                            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.h) ||
                                    ix >= static_cast<std::ptrdiff_t>(g.w))
                                    continue;
                                acc += x.at4(n, c, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                       wt.at4(f, c, ky, kx);
                            }
                    y.at4(n, f, oy, ox) = acc;
                }
    return y;
}

namespace nndetail {

// C = A(mxk) * B(kxn), accumulate in a fixed i,p,j loop nest.
template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            if (av == T{0}) continue;
            const T* brow = b + p * n;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
}

// cols: (C*kh*kw) x (oh*ow) patch matrix for one sample.
template <class T>
void im2col(const TensorT<T>& x, std::size_t sample, const ConvGeom& g, T* cols) {
    const T* xp = x.data.data() + sample * g.c * g.h * g.w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
                T* out = cols + row * g.oh * g.ow;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        const bool in = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                        ix < static_cast<std::ptrdiff_t>(g.w);
                        out[oy * g.ow + ox] =
                            in ? xp[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                                    static_cast<std::size_t>(ix)]
                               : T{0};
                    }
                }
            }
}

template <class T>
void col2im_acc(const T* cols, std::size_t sample, const ConvGeom& g, TensorT<T>& dx) {
    T* xp = dx.data.data() + sample * g.c * g.h * g.w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ky = 0; ky < g.kh; ++ky)
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
                const T* in = cols + row * g.oh * g.ow;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                                  static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        xp[(c * g.h + static_cast<std::size_t>(iy)) * g.w +
                           static_cast<std::size_t>(ix)] += in[oy * g.ow + ox];
                    }
                }
            }
}

} // namespace nndetail

// im2col + matmul path; must agree with conv2d_forward_naive.
template <class T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& wt, const std::vector<T>& bias,
                          std::size_t stride, std::size_t pad) {
    const ConvGeom g = conv_geometry(x, wt, stride, pad);
    require(bias.size() == g.f, "ShapeMismatch", "conv2d bias size");
    TensorT<T> y({g.n, g.f, g.oh, g.ow});
    const std::size_t krows = g.c * g.kh * g.kw;
    const std::size_t cols_n = g.oh * g.ow;
    std::vector<T> cols(krows * cols_n);
    for (std::size_t n = 0; n < g.n; ++n) {
        nndetail::im2col(x, n, g, cols.data());
        T* yp = y.data.data() + n * g.f * cols_n;
        for (std::size_t f = 0; f < g.f; ++f)
            std::fill(yp + f * cols_n, yp + (f + 1) * cols_n, bias[f]);
        nndetail::matmul_acc(wt.data.data(), cols.data(), yp, g.f, krows, cols_n);
    }
    return y;
}

template <class T>
struct ConvGrads {
    TensorT<T> dx, dw;
    std::vector<T> db;
};

template <class T>
ConvGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& wt, std::size_t stride,
                             std::size_t pad, const TensorT<T>& dy) {
    const ConvGeom g = conv_geometry(x, wt, stride, pad);
    require(dy.shape == std::vector<std::size_t>({g.n, g.f, g.oh, g.ow}), "ShapeMismatch",
            "conv2d upstream shape");
    ConvGrads<T> out{TensorT<T>(x.shape), TensorT<T>(wt.shape), std::vector<T>(g.f, T{0})};
    const std::size_t krows = g.c * g.kh * g.kw;
    const std::size_t cols_n = g.oh * g.ow;
    std::vector<T> cols(krows * cols_n);
    std::vector<T> dcols(krows * cols_n);
    // transpose of w once: (krows x F)
    std::vector<T> wtr(krows * g.f);
    for (std::size_t f = 0; f < g.f; ++f)
        for (std::size_t r = 0; r < krows; ++r) wtr[r * g.f + f] = wt.data[f * krows + r];

    for (std::size_t n = 0; n < g.n; ++n) {
        nndetail::im2col(x, n, g, cols.data());
        const T* dyp = dy.data.data() + n * g.f * cols_n;
        // dw += dy * cols^T  -> (F x krows); use explicit loops over cols^T
        for (std::size_t f = 0; f < g.f; ++f)
            for (std::size_t r = 0; r < krows; ++r) {
                T acc{0};
                const T* dyrow = dyp + f * cols_n;
                const T* crow = cols.data() + r * cols_n;
                for (std::size_t j = 0; j < cols_n; ++j) acc += dyrow[j] * crow[j];
                out.dw.data[f * krows + r] += acc;
            }
        for (std::size_t f = 0; f < g.f; ++f) {
            T acc{0};
            const T* dyrow = dyp + f * cols_n;
            for (std::size_t j = 0; j < cols_n; ++j) acc += dyrow[j];
            out.db[f] += acc;
        }
        // dcols = w^T * dy -> (krows x cols_n)
        std::fill(dcols.begin(), dcols.end(), T{0});
        nndetail::matmul_acc(wtr.data(), dyp, dcols.data(), krows, g.f, cols_n);
        nndetail::col2im_acc(dcols.data(), n, g, out.dx);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pooling. No padding; the window must tile the input exactly given stride.
// ---------------------------------------------------------------------------
enum class PoolMode { Max, Avg };

template <class T>
struct PoolResult {
    TensorT<T> y;
    std::vector<std::size_t> argmax;  // winning flat input index per output (max mode)
};

template <class T>
PoolResult<T> pool_forward(const TensorT<T>& x, PoolMode mode, std::size_t wh, std::size_t ww,
                           std::size_t stride) {
    require(x.rank() == 4, "ShapeMismatch", "pool expects NxCxHxW");
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    require(wh >= 1 && ww >= 1 && stride >= 1 && h >= wh && w >= ww && (h - wh) % stride == 0 &&
                (w - ww) % stride == 0,
            "ShapeMismatch", "pool window does not tile the input");
    const std::size_t oh = (h - wh) / stride + 1, ow = (w - ww) / stride + 1;
    PoolResult<T> r{TensorT<T>({n, c, oh, ow}), {}};
    if (mode == PoolMode::Max) r.argmax.assign(n * c * oh * ow, 0);
    const T inv_area = T{1} / static_cast<T>(wh * ww);
    std::size_t o = 0;
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                    if (mode == PoolMode::Avg) {
                        T acc{0};
                        for (std::size_t ky = 0; ky < wh; ++ky)
                            for (std::size_t kx = 0; kx < ww; ++kx)
                                acc += x.at4(ni, ci, oy * stride + ky, ox * stride + kx);
                        r.y.data[o] = acc * inv_area;
                    } else {
                        // ties: lowest linear index wins, for gradient determinism
                        std::size_t best = 0;
                        T bv{};
                        bool first = true;
                        for (std::size_t ky = 0; ky < wh; ++ky)
                            for (std::size_t kx = 0; kx < ww; ++kx) {
                                const std::size_t idx =
                                    ((ni * c + ci) * h + oy * stride + ky) * w + ox * stride + kx;
                                const T v = x.data[idx];
                                if (first || v > bv) {
                                    bv = v;
                                    best = idx;
                                    first = false;
                                }
                            }
                        r.y.data[o] = bv;
                        r.argmax[o] = best;
                    }
                }
    return r;
}

template <class T>
TensorT<T> pool_backward(const TensorT<T>& x, const PoolResult<T>& fwd, PoolMode mode,
                         std::size_t wh, std::size_t ww, std::size_t stride, const TensorT<T>& dy) {
    require(dy.shape == fwd.y.shape, "ShapeMismatch", "pool upstream shape");
    TensorT<T> dx(x.shape);
    const std::size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
    const std::size_t oh = fwd.y.shape[2], ow = fwd.y.shape[3];
    const T inv_area = T{1} / static_cast<T>(wh * ww);
    std::size_t o = 0;
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t oy = 0; oy < oh; ++oy)
                for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                    if (mode == PoolMode::Max) {
                        dx.data[fwd.argmax[o]] += dy.data[o];
                    } else {
                        const T g = dy.data[o] * inv_area;
                        for (std::size_t ky = 0; ky < wh; ++ky)
                            for (std::size_t kx = 0; kx < ww; ++kx)
                                dx.data[((ni * c + ci) * h + oy * stride + ky) * w + ox * stride +
                                        kx] += g;
                    }
                }
    return dx;
}

// ---------------------------------------------------------------------------
// Affine: y[n][j] = sum_i W[j][i] x[n][i] + b[j]
// ---------------------------------------------------------------------------
template <class T>
TensorT<T> affine_forward(const TensorT<T>& x, const TensorT<T>& wt, const std::vector<T>& bias) {
    require(x.rank() == 2 && wt.rank() == 2 && x.shape[1] == wt.shape[1] &&
                bias.size() == wt.shape[0],
            "ShapeMismatch", "affine shapes disagree");
    const std::size_t n = x.shape[0], din = x.shape[1], dout = wt.shape[0];
    TensorT<T> y({n, dout});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) {
            T acc = bias[j];
            const T* xr = x.data.data() + i * din;
            const T* wr = wt.data.data() + j * din;
            for (std::size_t k = 0; k < din; ++k) acc += wr[k] * xr[k];
            y.data[i * dout + j] = acc;
        }
    return y;
}

template <class T>
struct AffineGrads {
    TensorT<T> dx, dw;
    std::vector<T> db;
};

template <class T>
AffineGrads<T> affine_backward(const TensorT<T>& x, const TensorT<T>& wt, const TensorT<T>& dy) {
    const std::size_t n = x.shape[0], din = x.shape[1], dout = wt.shape[0];
    require(dy.shape == std::vector<std::size_t>({n, dout}), "ShapeMismatch",
            "affine upstream shape");
    AffineGrads<T> g{TensorT<T>(x.shape), TensorT<T>(wt.shape), std::vector<T>(dout, T{0})};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) {
            const T u = dy.data[i * dout + j];
            g.db[j] += u;
            const T* xr = x.data.data() + i * din;
            T* dwr = g.dw.data.data() + j * din;
            T* dxr = g.dx.data.data() + i * din;
            const T* wr = wt.data.data() + j * din;
            for (std::size_t k = 0; k < din; ++k) {
                dwr[k] += u * xr[k];
                dxr[k] += u * wr[k];
            }
        }
    return g;
}

// ---------------------------------------------------------------------------
// ReLU; subgradient at 0 is 0.
// ---------------------------------------------------------------------------
template <class T>
TensorT<T> relu_forward(const TensorT<T>& x) {
    TensorT<T> y(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T{0} ? x.data[i] : T{0};
    return y;
}

template <class T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
    require(x.same_shape(dy), "ShapeMismatch", "relu upstream shape");
    TensorT<T> dx(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) dx.data[i] = x.data[i] > T{0} ? dy.data[i] : T{0};
    return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors scaled by 1/(1-p); eval mode is identity.
// ---------------------------------------------------------------------------
template <class T>
struct DropoutResult {
    TensorT<T> y;
    std::vector<std::uint8_t> mask;  // 1 = kept; empty in eval mode or p == 0
};

template <class T>
DropoutResult<T> dropout_forward(const TensorT<T>& x, double p, bool train, Rng& rng) {
    require(p >= 0 && p < 1, "ValueOutOfRange", "dropout p must be in [0,1)");
    if (!train || p == 0.0) return {x, {}};
    DropoutResult<T> r{TensorT<T>(x.shape), std::vector<std::uint8_t>(x.numel())};
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const bool keep = rng.uniform() >= p;
        r.mask[i] = keep ? 1 : 0;
        r.y.data[i] = keep ? x.data[i] * scale : T{0};
    }
    return r;
}

template <class T>
TensorT<T> dropout_backward(const DropoutResult<T>& fwd, double p, const TensorT<T>& dy) {
    if (fwd.mask.empty()) return dy;
    TensorT<T> dx(dy.shape);
    const T scale = static_cast<T>(1.0 / (1.0 - p));
    for (std::size_t i = 0; i < dy.numel(); ++i)
        dx.data[i] = fwd.mask[i] ? dy.data[i] * scale : T{0};
    return dx;
}

// ---------------------------------------------------------------------------
// Weston-Watkins multiclass hinge, batch-averaged:
// L = (1/N) sum_n sum_{j != y_n} max(0, s_j - s_y + delta)
// ---------------------------------------------------------------------------
template <class T>
struct HingeResult {
    T loss;
    TensorT<T> grad;  // dL/dscores, NxK
};

template <class T>
HingeResult<T> hinge_loss(const TensorT<T>& scores, const std::vector<int>& labels,
                          T margin = T{1}) {
    require(scores.rank() == 2, "ShapeMismatch", "scores must be NxK");
    const std::size_t n = scores.shape[0], k = scores.shape[1];
    require(labels.size() == n, "ShapeMismatch", "labels size");
    HingeResult<T> r{T{0}, TensorT<T>(scores.shape)};
    const T inv_n = T{1} / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = labels[i];
        require(y >= 0 && static_cast<std::size_t>(y) < k, "LabelOutOfRange",
                "label " + std::to_string(y));
        const T sy = scores.data[i * k + static_cast<std::size_t>(y)];
        std::size_t violations = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == static_cast<std::size_t>(y)) continue;
            const T v = scores.data[i * k + j] - sy + margin;
            if (v > T{0}) {
                r.loss += v * inv_n;
                r.grad.data[i * k + j] += inv_n;
                ++violations;
            }
        }
        r.grad.data[i * k + static_cast<std::size_t>(y)] -= static_cast<T>(violations) * inv_n;
    }
    return r;
}

// ---------------------------------------------------------------------------
// SGD with momentum and decoupled-from-nothing classic weight decay:
// g' = g + lambda*w ; v = mu*v + g' ; w -= eta*v ; grads zeroed afterwards.
// ---------------------------------------------------------------------------
template <class T>
struct OptState {
    double learning_rate = 0.001;
    double weight_decay = 0.0005;
    double momentum = 0.9;
    std::vector<TensorT<T>> velocity;  // aligned with the parameter list

    void validate() const {
        require(learning_rate > 0, "ValueOutOfRange", "learning rate must be > 0");
        require(weight_decay >= 0, "ValueOutOfRange", "weight decay must be >= 0");
        require(momentum >= 0 && momentum < 1, "ValueOutOfRange", "momentum must be in [0,1)");
    }
};

template <class T>
void sgd_step(std::vector<Param<T>>& params, OptState<T>& state) {
    state.validate();
    if (state.velocity.empty())
        for (const auto& p : params) state.velocity.emplace_back(p.value.shape);
    require(state.velocity.size() == params.size(), "ShapeMismatch", "velocity list size");
    const T eta = static_cast<T>(state.learning_rate);
    const T lambda = static_cast<T>(state.weight_decay);
    const T mu = static_cast<T>(state.momentum);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        auto& v = state.velocity[pi];
        require(v.same_shape(p.value), "ShapeMismatch", "velocity shape for " + p.name);
        require(p.grad.all_finite(), "NonFiniteGradient", "gradient of " + p.name);
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const T g = p.grad.data[i] + lambda * p.value.data[i];
            v.data[i] = mu * v.data[i] + g;
            p.value.data[i] -= eta * v.data[i];
        }
        p.zero_grad();
    }
}

// Kaiming-style init: N(0, sqrt(2/fan_in)) weights, zero biases.
template <class T>
void init_gaussian(TensorT<T>& w, std::size_t fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : w.data) v = static_cast<T>(rng.normal() * sd);
}

} // namespace nbad
