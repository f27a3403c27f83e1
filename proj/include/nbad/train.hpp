#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbad/augment.hpp"
#include "nbad/dataset.hpp"
#include "nbad/error.hpp"
#include "nbad/metrics.hpp"
#include "nbad/model.hpp"
#include "nbad/png.hpp"
#include "nbad/rng.hpp"
#include "nbad/volume_io.hpp"

namespace nbad {

struct TrainConfig {
    std::string preset = "desk";
    double learning_rate = 0.001;
    double weight_decay = 0.0005;
    double momentum = 0.9;
    std::size_t batch = 32;
    std::uint64_t iterations = 2000;
    std::uint64_t eval_every = 200;
    std::uint64_t seed = 0;
    AugmentConfig augment;
    std::string manifest_path;
    std::string checkpoint_path = "checkpoint.nbad";
    std::string curves_path = "curves.csv";
    bool resume = false;

    void validate() const {
        require(batch > 0, "ValueOutOfRange", "batch must be positive");
        require(eval_every > 0 && (iterations == 0 || eval_every <= iterations), "ValueOutOfRange",
                "evaluation interval must be in [1, iterations]");
        require(!manifest_path.empty(), "ValueOutOfRange", "manifest path required");
    }
};

inline void train_config_apply_json(TrainConfig& c, const nlohmann::json& j) {
    c.preset = j.value("preset", c.preset);
    c.learning_rate = j.value("lr", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.momentum = j.value("momentum", c.momentum);
    c.batch = j.value("batch", c.batch);
    c.iterations = j.value("iters", c.iterations);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.seed = j.value("seed", c.seed);
    c.manifest_path = j.value("manifest", c.manifest_path);
    c.checkpoint_path = j.value("checkpoint", c.checkpoint_path);
    c.curves_path = j.value("curves", c.curves_path);
    if (j.contains("augment")) {
        const auto& a = j["augment"];
        c.augment.crop_h = a.value("crop_h", c.augment.crop_h);
        c.augment.crop_w = a.value("crop_w", c.augment.crop_w);
        c.augment.scale_lo = a.value("scale_lo", c.augment.scale_lo);
        c.augment.scale_hi = a.value("scale_hi", c.augment.scale_hi);
        c.augment.base_short_side = a.value("base_short_side", c.augment.base_short_side);
        c.augment.mirror_h_prob = a.value("mirror_h", c.augment.mirror_h_prob);
        c.augment.mirror_v_prob = a.value("mirror_v", c.augment.mirror_v_prob);
        c.augment.enabled = a.value("enabled", c.augment.enabled);
    }
}

// Stateless shuffled order: sample index for global draw position p is
// perm_{p/n}[p%n], with each epoch's permutation derived from (seed, epoch).
// Makes checkpoint resume trivially exact.
class OrderSampler {
public:
    OrderSampler(std::uint64_t seed, std::size_t n) : seed_(seed), n_(n) {
        require(n > 0, "EmptyClass", "no training samples");
    }

    std::size_t index(std::uint64_t position) {
        const std::uint64_t epoch = position / n_;
        if (epoch != cached_epoch_ || perm_.empty()) {
            perm_.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
            Rng rng = Rng::derive(seed_, 0x6f72646572ULL, epoch);  // "order"
            for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng.below(i)]);
            cached_epoch_ = epoch;
        }
        return perm_[position % n_];
    }

private:
    std::uint64_t seed_;
    std::size_t n_;
    std::uint64_t cached_epoch_ = ~std::uint64_t{0};
    std::vector<std::size_t> perm_;
};

inline Tensor load_sample_png(const std::string& path) {
    const PngImage img = decode_png(read_file_bytes(path));
    require(img.channels == 3, "BadInput", "sample PNG must have 3 channels: " + path);
    return img.to_tensor();
}

struct SampleSet {
    std::vector<Tensor> images;
    std::vector<int> labels;
};

inline SampleSet load_split(const Manifest& m, Split split) {
    SampleSet s;
    for (const auto* e : m.of_split(split)) {
        s.images.push_back(load_sample_png(e->path));
        s.labels.push_back(e->class_id);
    }
    return s;
}

struct EvalResult {
    ConfusionMatrix confusion{5};
    double mean_loss = 0;
    double accuracy = 0;
};

// Deterministic eval-mode pass: center crop, batched forward, hinge loss and
// confusion counts over the whole set.
inline EvalResult evaluate_set(const Network<float>& net, const SampleSet& set,
                               const AugmentConfig& aug) {
    require(!set.images.empty(), "EmptySplit", "no samples to evaluate");
    AugmentConfig eval_aug = aug;
    eval_aug.enabled = false;
    EvalResult r;
    r.confusion = ConfusionMatrix(net.spec.classes);
    Rng rng(0);
    double loss_sum = 0;
    const std::size_t chunk = 16;
    for (std::size_t start = 0; start < set.images.size(); start += chunk) {
        const std::size_t n = std::min(chunk, set.images.size() - start);
        Tensor batch({n, net.spec.input[0], net.spec.input[1], net.spec.input[2]});
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor img = augment_image(set.images[start + i], eval_aug, rng);
            std::copy(img.data.begin(), img.data.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(i * img.numel()));
            labels[i] = set.labels[start + i];
        }
        const Tensor scores = forward(net, batch, Mode::Eval, rng);
        const auto h = hinge_loss(scores, labels);
        loss_sum += static_cast<double>(h.loss) * static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            for (std::size_t j = 1; j < net.spec.classes; ++j)
                if (scores.data[i * net.spec.classes + j] >
                    scores.data[i * net.spec.classes + static_cast<std::size_t>(best)])
                    best = static_cast<int>(j);
            ++r.confusion.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(best));
        }
    }
    r.mean_loss = loss_sum / static_cast<double>(set.images.size());
    r.accuracy = accuracy_of(r.confusion);
    return r;
}

namespace traindetail {

inline std::string fmt_loss(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace traindetail

// Iteration-based training: seeded shuffled minibatches, full test-split
// evaluation at every interval and at the end, atomic checkpoints, curves CSV
// (iteration,train_loss,test_loss,test_accuracy).
inline void run_training(const TrainConfig& cfg, std::ostream& log = std::cerr) {
    cfg.validate();
    cfg.augment.validate();
    const Manifest manifest = load_manifest(cfg.manifest_path);
    const SampleSet train_set = load_split(manifest, Split::Train);
    const SampleSet test_set = load_split(manifest, Split::Test);
    require(!train_set.images.empty(), "EmptySplit", "manifest has no train entries");

    Network<float> net;
    OptState<float> opt;
    TrainState ts;
    if (cfg.resume) {
        auto loaded = checkpoint_load(cfg.checkpoint_path);
        net = std::move(loaded.net);
        opt = std::move(loaded.opt);
        ts = loaded.train_state;
        require(ts.rng_state == cfg.seed, "BadInput",
                "checkpoint was trained with a different seed");
    } else {
        const NetworkSpec spec = spec_preset(cfg.preset);
        require(spec.input[1] == cfg.augment.crop_h && spec.input[2] == cfg.augment.crop_w,
                "ValueOutOfRange", "augment crop size must match the network input");
        net = build_network<float>(spec, cfg.seed);
        ts.rng_state = cfg.seed;
        ts.iteration = 0;
    }
    opt.learning_rate = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    opt.momentum = cfg.momentum;

    log << "train: preset=" << cfg.preset << " lr=" << cfg.learning_rate
        << " weight_decay=" << cfg.weight_decay << " momentum=" << cfg.momentum
        << " batch=" << cfg.batch << " iters=" << cfg.iterations << " seed=" << cfg.seed
        << " train_n=" << train_set.images.size() << " test_n=" << test_set.images.size() << "\n";

    std::ofstream curves(cfg.curves_path,
                         cfg.resume ? std::ios::app : (std::ios::trunc | std::ios::out));
    require(curves.good(), "IoError", "cannot write " + cfg.curves_path);
    if (!cfg.resume) curves << "iteration,train_loss,test_loss,test_accuracy\n";

    OrderSampler order(cfg.seed, train_set.images.size());
    const auto& in = net.spec.input;

    for (std::uint64_t it = ts.iteration; it < cfg.iterations; ++it) {
        Tensor batch({cfg.batch, in[0], in[1], in[2]});
        std::vector<int> labels(cfg.batch);
        for (std::size_t i = 0; i < cfg.batch; ++i) {
            const std::uint64_t pos = it * cfg.batch + i;
            const std::size_t si = order.index(pos);
            Rng aug_rng = Rng::derive(cfg.seed, 0x617567ULL, pos);  // "aug", per-draw stream
            const Tensor img = augment_image(train_set.images[si], cfg.augment, aug_rng);
            std::copy(img.data.begin(), img.data.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(i * img.numel()));
            labels[i] = train_set.labels[si];
        }
        Rng drop_rng = Rng::derive(cfg.seed, 0x64726f70ULL, it);  // "drop", per-iteration stream
        const float loss = train_step(net, batch, labels, opt, drop_rng);
        ts.iteration = it + 1;

        curves << ts.iteration << ',' << traindetail::fmt_loss(loss);
        const bool eval_now = ts.iteration % cfg.eval_every == 0 || ts.iteration == cfg.iterations;
        if (eval_now && !test_set.images.empty()) {
            const EvalResult ev = evaluate_set(net, test_set, cfg.augment);
            curves << ',' << traindetail::fmt_loss(ev.mean_loss) << ','
                   << traindetail::fmt_loss(ev.accuracy) << '\n';
            log << "iter " << ts.iteration << " train_loss=" << loss
                << " test_loss=" << ev.mean_loss << " test_acc=" << ev.accuracy << "\n";
            checkpoint_save(cfg.checkpoint_path, net, opt, ts);
        } else {
            curves << ",,\n";
        }
    }
    checkpoint_save(cfg.checkpoint_path, net, opt, ts);
    curves.flush();
    require(curves.good(), "IoError", "short write to " + cfg.curves_path);
}

} // namespace nbad
