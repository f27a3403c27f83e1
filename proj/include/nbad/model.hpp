#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbad/error.hpp"
#include "nbad/gzip.hpp"
#include "nbad/nn.hpp"
#include "nbad/rng.hpp"
#include "nbad/tensor.hpp"

namespace nbad {

enum class LayerKind { Conv, Pool, Affine, Relu, Dropout, Classifier };

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    // conv
    std::size_t filters = 0, kh = 0, kw = 0, stride = 1, pad = 0;
    // pool
    PoolMode pool_mode = PoolMode::Max;
    std::size_t wh = 0, ww = 0;
    // affine / classifier
    std::size_t width = 0;
    // dropout
    double p = 0.5;

    static LayerSpec conv(std::size_t f, std::size_t k, std::size_t s, std::size_t pd) {
        LayerSpec l;
        l.kind = LayerKind::Conv;
        l.filters = f;
        l.kh = l.kw = k;
        l.stride = s;
        l.pad = pd;
        return l;
    }
    static LayerSpec pool(PoolMode m, std::size_t w, std::size_t s) {
        LayerSpec l;
        l.kind = LayerKind::Pool;
        l.pool_mode = m;
        l.wh = l.ww = w;
        l.stride = s;
        return l;
    }
    static LayerSpec affine(std::size_t width) {
        LayerSpec l;
        l.kind = LayerKind::Affine;
        l.width = width;
        return l;
    }
    static LayerSpec relu() { return LayerSpec{}; }
    static LayerSpec dropout(double p) {
        LayerSpec l;
        l.kind = LayerKind::Dropout;
        l.p = p;
        return l;
    }
    static LayerSpec classifier(std::size_t classes) {
        LayerSpec l;
        l.kind = LayerKind::Classifier;
        l.width = classes;
        return l;
    }
};

struct NetworkSpec {
    std::array<std::size_t, 3> input{3, 224, 224};  // C,H,W
    std::size_t classes = 5;
    std::vector<LayerSpec> layers;

    // Structural clauses: 7 conv layers, 3 hidden FC layers of one shared
    // width, one avg pool right after conv #3's activation, max pools right
    // after conv #5 and #6 activations, one dropout after the last FC's
    // activation, classifier of width `classes` last, ReLU after every conv
    // and FC.
    void validate_structure() const {
        auto expect = [&](bool ok, const std::string& clause) {
            require(ok, "SpecInvalid", clause);
        };
        expect(!layers.empty() && layers.back().kind == LayerKind::Classifier,
               "last layer must be the classifier");
        expect(layers.back().width == classes, "classifier width must equal the class count");

        std::size_t conv_count = 0, fc_count = 0, dropout_count = 0;
        std::vector<std::size_t> avg_after, max_after;  // conv ordinal a pool follows
        std::optional<std::size_t> dropout_after_fc;
        std::size_t fc_width = 0;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            switch (l.kind) {
                case LayerKind::Conv:
                    ++conv_count;
                    expect(fc_count == 0, "conv layers must precede the FC stack");
                    expect(i + 1 < layers.size() && layers[i + 1].kind == LayerKind::Relu,
                           "every conv layer needs a ReLU activation");
                    break;
                case LayerKind::Affine:
                    ++fc_count;
                    if (fc_count == 1) fc_width = l.width;
                    expect(l.width == fc_width, "FC layers must share one width");
                    expect(i + 1 < layers.size() && layers[i + 1].kind == LayerKind::Relu,
                           "every FC layer needs a ReLU activation");
                    break;
                case LayerKind::Pool:
                    expect(i >= 2 && layers[i - 1].kind == LayerKind::Relu &&
                               layers[i - 2].kind == LayerKind::Conv,
                           "pool layers must follow a conv activation");
                    (l.pool_mode == PoolMode::Avg ? avg_after : max_after).push_back(conv_count);
                    break;
                case LayerKind::Dropout:
                    ++dropout_count;
                    expect(i >= 2 && layers[i - 1].kind == LayerKind::Relu &&
                               layers[i - 2].kind == LayerKind::Affine,
                           "dropout must follow an FC activation");
                    dropout_after_fc = fc_count;
                    break;
                case LayerKind::Relu:
                case LayerKind::Classifier: break;
            }
        }
        expect(conv_count == 7, "expected exactly 7 conv layers, got " + std::to_string(conv_count));
        expect(fc_count == 3, "expected exactly 3 FC layers, got " + std::to_string(fc_count));
        expect(avg_after == std::vector<std::size_t>{3}, "one avg pool must follow conv #3");
        expect(max_after == (std::vector<std::size_t>{5, 6}),
               "two max pools must follow conv #5 and conv #6");
        expect(dropout_count == 1 && dropout_after_fc == 3,
               "one dropout must follow the last FC layer");
    }
};

inline NetworkSpec spec_preset(const std::string& name) {
    std::size_t side, fc, widths[7];
    if (name == "canonical") {
        side = 224;
        fc = 4096;
        const std::size_t w[7] = {64, 96, 128, 192, 256, 256, 256};
        std::copy(w, w + 7, widths);
    } else if (name == "desk") {
        side = 64;
        fc = 256;
        const std::size_t w[7] = {8, 12, 16, 24, 32, 32, 32};
        std::copy(w, w + 7, widths);
    } else {
        fail("UnknownPreset", "preset '" + name + "'");
    }
    NetworkSpec s;
    s.input = {3, side, side};
    s.classes = 5;
    auto conv_relu = [&](std::size_t i, std::size_t k, std::size_t st, std::size_t p) {
        s.layers.push_back(LayerSpec::conv(widths[i], k, st, p));
        s.layers.push_back(LayerSpec::relu());
    };
    conv_relu(0, 7, 4, 3);
    conv_relu(1, 3, 1, 1);
    conv_relu(2, 3, 1, 1);
    s.layers.push_back(LayerSpec::pool(PoolMode::Avg, 2, 2));
    conv_relu(3, 3, 1, 1);
    conv_relu(4, 3, 1, 1);
    s.layers.push_back(LayerSpec::pool(PoolMode::Max, 2, 2));
    conv_relu(5, 3, 1, 1);
    s.layers.push_back(LayerSpec::pool(PoolMode::Max, 2, 2));
    conv_relu(6, 3, 1, 1);
    for (int i = 0; i < 3; ++i) {
        s.layers.push_back(LayerSpec::affine(fc));
        s.layers.push_back(LayerSpec::relu());
    }
    s.layers.push_back(LayerSpec::dropout(0.5));
    s.layers.push_back(LayerSpec::classifier(5));
    return s;
}

// ---------------------------------------------------------------------------
// JSON form of a NetworkSpec (checkpoints, config files).
// ---------------------------------------------------------------------------
inline nlohmann::json spec_to_json(const NetworkSpec& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) {
        nlohmann::json j;
        switch (l.kind) {
            case LayerKind::Conv:
                j = {{"kind", "conv"}, {"filters", l.filters}, {"kh", l.kh},
                     {"kw", l.kw},     {"stride", l.stride},   {"pad", l.pad}};
                break;
            case LayerKind::Pool:
                j = {{"kind", "pool"},
                     {"mode", l.pool_mode == PoolMode::Avg ? "avg" : "max"},
                     {"wh", l.wh},
                     {"ww", l.ww},
                     {"stride", l.stride}};
                break;
            case LayerKind::Affine: j = {{"kind", "affine"}, {"width", l.width}}; break;
            case LayerKind::Relu: j = {{"kind", "relu"}}; break;
            case LayerKind::Dropout: j = {{"kind", "dropout"}, {"p", l.p}}; break;
            case LayerKind::Classifier: j = {{"kind", "classifier"}, {"classes", l.width}}; break;
        }
        layers.push_back(std::move(j));
    }
    return {{"input", s.input}, {"classes", s.classes}, {"layers", layers}};
}

inline NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    const auto& in = j.at("input");
    for (std::size_t i = 0; i < 3; ++i) s.input[i] = in.at(i).get<std::size_t>();
    s.classes = j.at("classes").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
        const std::string kind = lj.at("kind").get<std::string>();
        LayerSpec l;
        if (kind == "conv") {
            l = LayerSpec::conv(lj.at("filters"), 1, lj.at("stride"), lj.at("pad"));
            l.kh = lj.at("kh");
            l.kw = lj.at("kw");
        } else if (kind == "pool") {
            l = LayerSpec::pool(lj.at("mode") == "avg" ? PoolMode::Avg : PoolMode::Max, 1,
                                lj.at("stride"));
            l.wh = lj.at("wh");
            l.ww = lj.at("ww");
        } else if (kind == "affine") {
            l = LayerSpec::affine(lj.at("width"));
        } else if (kind == "relu") {
            l = LayerSpec::relu();
        } else if (kind == "dropout") {
            l = LayerSpec::dropout(lj.at("p"));
        } else if (kind == "classifier") {
            l = LayerSpec::classifier(lj.at("classes"));
        } else {
            fail("SpecInvalid", "unknown layer kind " + kind);
        }
        s.layers.push_back(l);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Materialized network. Parameter layout: for each conv/affine/classifier in
// layer order, a weight Param then a bias Param.
// ---------------------------------------------------------------------------
template <class T>
struct Network {
    NetworkSpec spec;
    std::vector<Param<T>> params;

    // Output extent after a strided conv, floor division (excess border rows
    // are dropped, matching the preset shape chain).
    static std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
        require(in + 2 * p >= k, "ShapeMismatch", "conv kernel larger than padded input");
        return (in + 2 * p - k) / s + 1;
    }
};

template <class T>
Network<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate_structure();
    Network<T> net;
    net.spec = spec;
    Rng rng = Rng::derive(seed, 0x696e6974ULL);  // init stream

    std::size_t c = spec.input[0], h = spec.input[1], w = spec.input[2];
    bool flat = false;
    std::size_t flat_dim = 0;
    int conv_i = 0, fc_i = 0;
    for (const auto& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::Conv: {
                ++conv_i;
                Param<T> wt({l.filters, c, l.kh, l.kw}, "conv" + std::to_string(conv_i) + ".w");
                init_gaussian(wt.value, c * l.kh * l.kw, rng);
                Param<T> b({l.filters}, "conv" + std::to_string(conv_i) + ".b");
                net.params.push_back(std::move(wt));
                net.params.push_back(std::move(b));
                h = Network<T>::conv_extent(h, l.kh, l.stride, l.pad);
                w = Network<T>::conv_extent(w, l.kw, l.stride, l.pad);
                c = l.filters;
                break;
            }
            case LayerKind::Pool:
                require(h >= l.wh && w >= l.ww && (h - l.wh) % l.stride == 0 &&
                            (w - l.ww) % l.stride == 0,
                        "SpecInvalid", "pool window does not tile the feature map");
                h = (h - l.wh) / l.stride + 1;
                w = (w - l.ww) / l.stride + 1;
                break;
            case LayerKind::Affine:
            case LayerKind::Classifier: {
                if (!flat) {
                    flat = true;
                    flat_dim = c * h * w;
                }
                const std::string name = l.kind == LayerKind::Classifier
                                             ? "classifier"
                                             : "fc" + std::to_string(++fc_i);
                Param<T> wt({l.width, flat_dim}, name + ".w");
                init_gaussian(wt.value, flat_dim, rng);
                Param<T> b({l.width}, name + ".b");
                net.params.push_back(std::move(wt));
                net.params.push_back(std::move(b));
                flat_dim = l.width;
                break;
            }
            case LayerKind::Relu:
            case LayerKind::Dropout: break;
        }
    }
    return net;
}

enum class Mode { Train, Eval };

// Everything the backward pass needs, recorded layer by layer.
template <class T>
struct ForwardCache {
    std::vector<TensorT<T>> inputs;             // input tensor to each layer
    std::vector<PoolResult<T>> pools;           // per pool layer, in order
    std::vector<DropoutResult<T>> dropouts;     // per dropout layer, in order
    std::vector<std::size_t> pre_flatten_shape;  // NxCxHxW before the FC stack
};

template <class T>
TensorT<T> forward(const Network<T>& net, const TensorT<T>& batch, Mode mode, Rng& rng,
                   ForwardCache<T>* cache = nullptr) {
    require(batch.rank() == 4 && batch.shape[1] == net.spec.input[0] &&
                batch.shape[2] == net.spec.input[1] && batch.shape[3] == net.spec.input[2],
            "ShapeMismatch", "batch does not match the network input shape");
    TensorT<T> x = batch;
    std::size_t pi = 0;  // param cursor
    bool flat = false;
    for (const auto& l : net.spec.layers) {
        if (cache) cache->inputs.push_back(x);
        switch (l.kind) {
            case LayerKind::Conv:
                x = conv2d_forward(x, net.params[pi].value, net.params[pi + 1].value.data,
                                   l.stride, l.pad);
                pi += 2;
                break;
            case LayerKind::Pool: {
                auto r = pool_forward(x, l.pool_mode, l.wh, l.ww, l.stride);
                x = r.y;
                if (cache) cache->pools.push_back(std::move(r));
                break;
            }
            case LayerKind::Relu: x = relu_forward(x); break;
            case LayerKind::Dropout: {
                auto r = dropout_forward(x, l.p, mode == Mode::Train, rng);
                x = r.y;
                if (cache) cache->dropouts.push_back(std::move(r));
                break;
            }
            case LayerKind::Affine:
            case LayerKind::Classifier: {
                if (!flat) {
                    flat = true;
                    if (cache) cache->pre_flatten_shape = x.shape;
                    TensorT<T> f({x.shape[0], x.numel() / x.shape[0]});
                    f.data = x.data;
                    x = std::move(f);
                    if (cache) cache->inputs.back() = x;  // record the flattened view
                }
                x = affine_forward(x, net.params[pi].value, net.params[pi + 1].value.data);
                pi += 2;
                break;
            }
        }
    }
    return x;
}

// Backward pass for dL/dscores; accumulates parameter gradients and returns
// dL/dinput (reshaped to the batch shape).
template <class T>
TensorT<T> backward(Network<T>& net, const ForwardCache<T>& cache, const TensorT<T>& dscores) {
    TensorT<T> d = dscores;
    std::size_t pi = net.params.size();
    std::size_t pool_i = cache.pools.size();
    std::size_t drop_i = cache.dropouts.size();
    for (std::size_t li = net.spec.layers.size(); li-- > 0;) {
        const auto& l = net.spec.layers[li];
        const TensorT<T>& x = cache.inputs[li];
        switch (l.kind) {
            case LayerKind::Conv: {
                pi -= 2;
                auto g = conv2d_backward(x, net.params[pi].value, l.stride, l.pad, d);
                for (std::size_t i = 0; i < g.dw.numel(); ++i) net.params[pi].grad.data[i] += g.dw.data[i];
                for (std::size_t i = 0; i < g.db.size(); ++i) net.params[pi + 1].grad.data[i] += g.db[i];
                d = std::move(g.dx);
                break;
            }
            case LayerKind::Pool: {
                --pool_i;
                d = pool_backward(x, cache.pools[pool_i], l.pool_mode, l.wh, l.ww, l.stride, d);
                break;
            }
            case LayerKind::Relu: d = relu_backward(x, d); break;
            case LayerKind::Dropout: {
                --drop_i;
                d = dropout_backward(cache.dropouts[drop_i], l.p, d);
                break;
            }
            case LayerKind::Affine:
            case LayerKind::Classifier: {
                pi -= 2;
                auto g = affine_backward(x, net.params[pi].value, d);
                for (std::size_t i = 0; i < g.dw.numel(); ++i) net.params[pi].grad.data[i] += g.dw.data[i];
                for (std::size_t i = 0; i < g.db.size(); ++i) net.params[pi + 1].grad.data[i] += g.db[i];
                d = std::move(g.dx);
                break;
            }
        }
        // restore the conv-stack shape when moving from the first FC back to
        // the feature map
        if ((l.kind == LayerKind::Affine || l.kind == LayerKind::Classifier) &&
            !cache.pre_flatten_shape.empty() && li > 0 &&
            cache.inputs[li - 1].shape.size() == 4 && d.rank() == 2 &&
            d.numel() == TensorT<T>::numel_of(cache.pre_flatten_shape)) {
            TensorT<T> r(cache.pre_flatten_shape);
            r.data = d.data;
            d = std::move(r);
        }
    }
    return d;
}

template <class T>
T train_step(Network<T>& net, const TensorT<T>& batch, const std::vector<int>& labels,
             OptState<T>& opt, Rng& rng) {
    ForwardCache<T> cache;
    const TensorT<T> scores = forward(net, batch, Mode::Train, rng, &cache);
    auto h = hinge_loss(scores, labels);
    require(std::isfinite(static_cast<double>(h.loss)), "NonFiniteLoss",
            "hinge loss is not finite");
    backward(net, cache, h.grad);
    sgd_step(net.params, opt);
    return h.loss;
}

template <class T>
struct Prediction {
    int class_id = 0;
    std::vector<T> scores;
};

// argmax of eval-mode scores; ties break toward the lowest class id.
template <class T>
Prediction<T> predict(const Network<T>& net, const TensorT<T>& image) {
    require(image.rank() == 3, "ShapeMismatch", "predict expects CxHxW");
    TensorT<T> batch({1, image.shape[0], image.shape[1], image.shape[2]});
    batch.data = image.data;
    Rng rng(0);  // eval mode consumes no randomness
    const TensorT<T> scores = forward(net, batch, Mode::Eval, rng);
    Prediction<T> p;
    p.scores.assign(scores.data.begin(), scores.data.end());
    for (std::size_t j = 1; j < p.scores.size(); ++j)
        if (p.scores[j] > p.scores[static_cast<std::size_t>(p.class_id)])
            p.class_id = static_cast<int>(j);
    return p;
}

// ---------------------------------------------------------------------------
// Checkpoints. Layout: magic "NBADCKPT", u32 LE version, length-prefixed spec
// JSON, u64 tensor count + per tensor (length-prefixed name, u64 rank, u64
// extents, raw LE f32 payload) for parameters, the same for optimizer
// velocities, length-prefixed RNG state bytes, u64 iteration counter.
// ---------------------------------------------------------------------------
inline constexpr char kCheckpointMagic[8] = {'N', 'B', 'A', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckptdetail {

template <class T>
void put_le(Bytes& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
}

inline void put_f32(Bytes& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_le(out, bits);
}

inline void put_blob(Bytes& out, const std::uint8_t* p, std::size_t n) {
    put_le<std::uint64_t>(out, n);
    out.insert(out.end(), p, p + n);
}

struct Reader {
    const Bytes& b;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        require(pos + n <= b.size(), "Truncated", "checkpoint ends early");
    }
    template <class T>
    T get_le() {
        need(sizeof(T));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{b[pos + i]} << (8 * i);
        pos += sizeof(T);
        return static_cast<T>(v);
    }
    float get_f32() {
        const auto bits = get_le<std::uint32_t>();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    Bytes get_blob() {
        const auto n = get_le<std::uint64_t>();
        need(n);
        Bytes out(b.begin() + static_cast<std::ptrdiff_t>(pos),
                  b.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return out;
    }
};

inline void put_tensor(Bytes& out, const std::string& name, const Tensor& t) {
    put_blob(out, reinterpret_cast<const std::uint8_t*>(name.data()), name.size());
    put_le<std::uint64_t>(out, t.rank());
    for (auto e : t.shape) put_le<std::uint64_t>(out, e);
    for (float v : t.data) put_f32(out, v);
}

inline std::pair<std::string, Tensor> get_tensor(Reader& r) {
    const Bytes nb = r.get_blob();
    std::string name(nb.begin(), nb.end());
    const auto rank = r.get_le<std::uint64_t>();
    require(rank <= 8, "Truncated", "implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = r.get_le<std::uint64_t>();
    Tensor t(shape);
    for (auto& v : t.data) v = r.get_f32();
    return {std::move(name), std::move(t)};
}

} // namespace ckptdetail

struct TrainState {
    std::uint64_t rng_state = 0;
    std::uint64_t iteration = 0;
};

inline Bytes checkpoint_serialize(const Network<float>& net, const OptState<float>& opt,
                                  const TrainState& ts) {
    Bytes out(kCheckpointMagic, kCheckpointMagic + 8);
    ckptdetail::put_le(out, kCheckpointVersion);
    const std::string spec = spec_to_json(net.spec).dump();
    ckptdetail::put_blob(out, reinterpret_cast<const std::uint8_t*>(spec.data()), spec.size());
    ckptdetail::put_le<std::uint64_t>(out, net.params.size());
    for (const auto& p : net.params) ckptdetail::put_tensor(out, p.name, p.value);
    ckptdetail::put_le<std::uint64_t>(out, opt.velocity.size());
    for (std::size_t i = 0; i < opt.velocity.size(); ++i)
        ckptdetail::put_tensor(out, net.params[i].name, opt.velocity[i]);
    Bytes rng_bytes;
    ckptdetail::put_le<std::uint64_t>(rng_bytes, ts.rng_state);
    ckptdetail::put_blob(out, rng_bytes.data(), rng_bytes.size());
    ckptdetail::put_le<std::uint64_t>(out, ts.iteration);
    return out;
}

struct LoadedCheckpoint {
    Network<float> net;
    OptState<float> opt;
    TrainState train_state;
};

inline LoadedCheckpoint checkpoint_deserialize(const Bytes& bytes) {
    require(bytes.size() >= 12 && std::memcmp(bytes.data(), kCheckpointMagic, 8) == 0, "BadMagic",
            "not a checkpoint file");
    ckptdetail::Reader r{bytes, 8};
    const auto version = r.get_le<std::uint32_t>();
    require(version == kCheckpointVersion, "VersionMismatch",
            "checkpoint version " + std::to_string(version));
    const Bytes spec_json = r.get_blob();
    LoadedCheckpoint c;
    c.net.spec = spec_from_json(nlohmann::json::parse(std::string(spec_json.begin(), spec_json.end())));
    const auto n_params = r.get_le<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_params; ++i) {
        auto [name, t] = ckptdetail::get_tensor(r);
        Param<float> p(t.shape, name);
        p.value = std::move(t);
        c.net.params.push_back(std::move(p));
    }
    const auto n_vel = r.get_le<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_vel; ++i) c.opt.velocity.push_back(ckptdetail::get_tensor(r).second);
    const Bytes rng_bytes = r.get_blob();
    require(rng_bytes.size() == 8, "Truncated", "bad RNG state length");
    ckptdetail::Reader rr{rng_bytes, 0};
    c.train_state.rng_state = rr.get_le<std::uint64_t>();
    c.train_state.iteration = r.get_le<std::uint64_t>();
    return c;
}

// Atomic write: temp file in the same directory, then rename.
inline void checkpoint_save(const std::filesystem::path& path, const Network<float>& net,
                            const OptState<float>& opt, const TrainState& ts) {
    const Bytes bytes = checkpoint_serialize(net, opt, ts);
    const auto tmp = path.parent_path() / (path.filename().string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(f.good(), "IoError", "cannot write " + tmp.string());
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        require(f.good(), "IoError", "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline LoadedCheckpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "IoError", "cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return checkpoint_deserialize(bytes);
}

} // namespace nbad
