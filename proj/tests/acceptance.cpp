// Acceptance gate: one pass/fail line per release criterion. Exits nonzero if
// any criterion fails. Expects NBAD_CLI_PATH to point at the pipeline binary.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbad/dataset.hpp"
#include "nbad/gradcheck.hpp"
#include "nbad/metrics.hpp"
#include "nbad/model.hpp"
#include "nbad/nn.hpp"
#include "nbad/rng.hpp"
#include "nbad/volume.hpp"
#include "nbad/volume_io.hpp"

using namespace nbad;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << std::endl;
    if (!ok) ++g_failures;
}

fs::path g_root;
std::string g_cli;
bool g_pipeline_ok = false;
double g_pipeline_seconds = 0.0;

bool shell_in(const fs::path& dir, const std::string& args) {
    const std::string cmd =
        "cd '" + dir.string() + "' && '" + g_cli + "' " + args + " >> pipeline.log 2>&1";
    return std::system(cmd.c_str()) == 0;
}

Bytes slurp(const fs::path& p) { return read_file_bytes(p); }

// phantom -> prepare -> train(iters) -> eval, all with relative paths so two
// runs in different directories are byte-comparable.
bool run_pipeline(const fs::path& dir, std::uint64_t iters, bool do_eval) {
    fs::create_directories(dir);
    return shell_in(dir, "phantom --out raw --per-class 10 --dims 64 --seed 42") &&
           shell_in(dir, "prepare --input raw --out prep --size 64 --train-fraction 0.7 --seed 42") &&
           shell_in(dir, "train --manifest prep/manifest.jsonl --preset desk --iters " +
                             std::to_string(iters) +
                             " --batch 32 --eval-every 200 --seed 42"
                             " --checkpoint model.nbad --curves curves.csv") &&
           (!do_eval || shell_in(dir, "eval --checkpoint model.nbad --manifest prep/manifest.jsonl"
                                      " --split test --report report.json"));
}

// --------------------------------------------------------------------------
// 1. phantom pipeline quality
// --------------------------------------------------------------------------
void criterion_pipeline() {
    const auto t0 = std::chrono::steady_clock::now();
    g_pipeline_ok = run_pipeline(g_root / "runA", 2000, true);
    g_pipeline_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!g_pipeline_ok) {
        report("phantom pipeline reaches the quality bar", false, "pipeline command failed");
        return;
    }
    nlohmann::json rep;
    std::ifstream(g_root / "runA" / "report.json") >> rep;
    const double acc = rep.at("accuracy").get<double>();
    const double sens = rep.at("sensitivity_macro").get<double>();
    const double spec = rep.at("specificity_macro").get<double>();
    std::ostringstream d;
    d << "accuracy=" << acc << " sensitivity=" << sens << " specificity=" << spec << " in "
      << static_cast<int>(g_pipeline_seconds) << "s";
    const bool ok = acc >= 0.90 && sens >= 0.85 && spec >= 0.85 && g_pipeline_seconds < 1200.0;
    g_pipeline_ok = ok;
    report("phantom pipeline reaches the quality bar", ok, d.str());
}

// --------------------------------------------------------------------------
// 2. architecture fidelity of the canonical preset
// --------------------------------------------------------------------------
void criterion_architecture() {
    bool ok = true;
    std::string why;
    try {
        const NetworkSpec s = spec_preset("canonical");
        s.validate_structure();
        std::vector<std::size_t> convs, fcs;
        std::vector<std::pair<PoolMode, std::size_t>> pools;  // mode, convs seen so far
        std::size_t dropout_at = 0, fc_seen = 0;
        for (const auto& l : s.layers) {
            if (l.kind == LayerKind::Conv) convs.push_back(l.filters);
            if (l.kind == LayerKind::Affine) {
                fcs.push_back(l.width);
                ++fc_seen;
            }
            if (l.kind == LayerKind::Pool) pools.emplace_back(l.pool_mode, convs.size());
            if (l.kind == LayerKind::Dropout) dropout_at = fc_seen;
        }
        ok = ok && convs.size() == 7;
        ok = ok && fcs == std::vector<std::size_t>{4096, 4096, 4096};
        ok = ok && pools.size() == 3 && pools[0] == std::make_pair(PoolMode::Avg, std::size_t{3}) &&
             pools[1] == std::make_pair(PoolMode::Max, std::size_t{5}) &&
             pools[2] == std::make_pair(PoolMode::Max, std::size_t{6});
        ok = ok && dropout_at == 3;
        ok = ok && s.layers.back().kind == LayerKind::Classifier && s.layers.back().width == 5;
        // shape chain bottoms out at a 7x7 map of 256 channels
        std::size_t side = s.input[1];
        for (const auto& l : s.layers) {
            if (l.kind == LayerKind::Conv) side = Network<float>::conv_extent(side, l.kh, l.stride, l.pad);
            if (l.kind == LayerKind::Pool) side = (side - l.wh) / l.stride + 1;
        }
        ok = ok && side == 7 && convs.back() * side * side == 12544;
    } catch (const Error& e) {
        ok = false;
        why = e.what();
    }
    report("canonical preset satisfies every structural clause", ok, why);
}

// --------------------------------------------------------------------------
// 3. gradient suite
// --------------------------------------------------------------------------
template <class T>
TensorT<T> randt(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <class T>
double reduce(const TensorT<T>& y, const std::vector<double>& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) acc += r[i] * static_cast<double>(y.data[i]);
    return acc;
}

template <class T>
TensorT<T> upstream_of(const std::vector<std::size_t>& shape, const std::vector<double>& r) {
    TensorT<T> dy(shape);
    for (std::size_t i = 0; i < dy.numel(); ++i) dy.data[i] = static_cast<T>(r[i]);
    return dy;
}

std::vector<double> reduction(std::size_t n, Rng& rng) {
    std::vector<double> r(n);
    for (auto& v : r) v = rng.uniform(-1.0, 1.0);
    return r;
}

// Single-precision gradients are compared against central differences taken
// through the double instantiation of the same kernel; positive operands keep
// sums from cancelling below float resolution.
template <class T>
constexpr double draw_lo() { return std::is_same_v<T, double> ? -1.0 : 0.2; }

template <class T, class F>
double fd_against_double(const TensorT<T>& x, const TensorT<T>& analytic, F&& f_double) {
    return finite_diff_check(x.template cast<double>(), analytic.template cast<double>(),
                             std::forward<F>(f_double), 1e-5);
}

template <class T>
double conv_case(Rng& rng) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3), f = 1 + rng.below(3);
    const std::size_t kh = 1 + rng.below(3), kw = 1 + rng.below(3);
    const std::size_t h = kh + rng.below(4), w = kw + rng.below(4);  // rectangular inputs
    const std::size_t stride = 1 + rng.below(2), pad = rng.below(2);  // covers stride 2, pad 1
    const TensorT<T> x = randt<T>({n, c, h, w}, rng, draw_lo<T>());
    const TensorT<T> wt = randt<T>({f, c, kh, kw}, rng, draw_lo<T>());
    std::vector<T> bias(f);
    for (auto& b : bias) b = static_cast<T>(rng.uniform(-0.5, 0.5));
    const TensorT<T> y = conv2d_forward(x, wt, bias, stride, pad);
    std::vector<double> r(y.numel());
    for (auto& v : r) v = rng.uniform(draw_lo<T>(), 1.0);
    const auto g = conv2d_backward(x, wt, stride, pad, upstream_of<T>(y.shape, r));
    const TensorT<double> xd = x.template cast<double>();
    const TensorT<double> wd = wt.template cast<double>();
    const std::vector<double> bd(bias.begin(), bias.end());
    double worst = fd_against_double(x, g.dx, [&](const TensorT<double>& p) {
        return reduce(conv2d_forward(p, wd, bd, stride, pad), r);
    });
    worst = std::max(worst, fd_against_double(wt, g.dw, [&](const TensorT<double>& p) {
        return reduce(conv2d_forward(xd, p, bd, stride, pad), r);
    }));
    return worst;
}

template <class T>
double pool_case(Rng& rng, PoolMode mode) {
    const std::size_t n = 1 + rng.below(2), c = 1 + rng.below(3);
    const std::size_t wh = 1 + rng.below(3), ww = 1 + rng.below(3);
    const std::size_t stride = 1 + rng.below(2);
    const std::size_t h = wh + stride * rng.below(4), w = ww + stride * rng.below(4);
    TensorT<T> x({n, c, h, w});
    std::vector<double> vals(x.numel());
    std::iota(vals.begin(), vals.end(), 0.0);
    for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[rng.below(i)]);
    for (std::size_t i = 0; i < x.numel(); ++i) x.data[i] = static_cast<T>(vals[i] * 0.1);
    const auto fwd = pool_forward(x, mode, wh, ww, stride);
    const auto r = reduction(fwd.y.numel(), rng);
    const TensorT<T> dx = pool_backward(x, fwd, mode, wh, ww, stride, upstream_of<T>(fwd.y.shape, r));
    return fd_against_double(x, dx, [&](const TensorT<double>& p) {
        return reduce(pool_forward(p, mode, wh, ww, stride).y, r);
    });
}

template <class T>
double affine_case(Rng& rng) {
    const std::size_t n = 1 + rng.below(4), din = 1 + rng.below(6), dout = 1 + rng.below(6);
    const TensorT<T> x = randt<T>({n, din}, rng, draw_lo<T>());
    const TensorT<T> wt = randt<T>({dout, din}, rng, draw_lo<T>());
    std::vector<T> bias(dout, T{0});
    const TensorT<T> y = affine_forward(x, wt, bias);
    std::vector<double> r(y.numel());
    for (auto& v : r) v = rng.uniform(draw_lo<T>(), 1.0);
    const auto g = affine_backward(x, wt, upstream_of<T>(y.shape, r));
    const TensorT<double> xd = x.template cast<double>();
    const TensorT<double> wd = wt.template cast<double>();
    const std::vector<double> bd(bias.begin(), bias.end());
    double worst = fd_against_double(x, g.dx, [&](const TensorT<double>& p) {
        return reduce(affine_forward(p, wd, bd), r);
    });
    worst = std::max(worst, fd_against_double(wt, g.dw, [&](const TensorT<double>& p) {
        return reduce(affine_forward(xd, p, bd), r);
    }));
    return worst;
}

template <class T>
double relu_case(Rng& rng) {
    TensorT<T> x = randt<T>({1 + rng.below(4), 1 + rng.below(6)}, rng);
    for (auto& v : x.data)
        if (std::abs(static_cast<double>(v)) < 0.05) v = static_cast<T>(0.1);
    const auto r = reduction(x.numel(), rng);
    const TensorT<T> dx = relu_backward(x, upstream_of<T>(x.shape, r));
    return fd_against_double(
        x, dx, [&](const TensorT<double>& p) { return reduce(relu_forward(p), r); });
}

template <class T>
double dropout_case(Rng& rng) {
    const std::uint64_t seed = rng.next_u64();
    const double p = rng.uniform(0.1, 0.7);
    const TensorT<T> x = randt<T>({2 + rng.below(4), 3 + rng.below(5)}, rng);
    Rng mask(seed);
    const auto fwd = dropout_forward(x, p, true, mask);
    const auto r = reduction(x.numel(), rng);
    const TensorT<T> dx = dropout_backward(fwd, p, upstream_of<T>(x.shape, r));
    return fd_against_double(x, dx, [&](const TensorT<double>& probe) {
        Rng replay(seed);
        return reduce(dropout_forward(probe, p, true, replay).y, r);
    });
}

template <class T>
double hinge_case(Rng& rng) {
    const std::size_t n = 1 + rng.below(6), k = 2 + rng.below(5);
    TensorT<T> scores = randt<T>({n, k}, rng, -2.0, 2.0);
    for (auto& s : scores.data) s += static_cast<T>(0.013);
    std::vector<int> labels(n);
    for (auto& y : labels) y = static_cast<int>(rng.below(k));
    const auto res = hinge_loss(scores, labels);
    return fd_against_double(scores, res.grad, [&](const TensorT<double>& p) {
        return hinge_loss(p, labels).loss;
    });
}

// Full desk network: analytic single-precision gradients vs central
// differences on a double-precision clone (a.e. exact for this piecewise
// linear objective).
double network_case() {
    const NetworkSpec spec = spec_preset("desk");
    auto netf = build_network<float>(spec, 3);
    Network<double> netd;
    netd.spec = spec;
    for (const auto& p : netf.params) {
        Param<double> q(p.value.shape, p.name);
        q.value = p.value.cast<double>();
        netd.params.push_back(std::move(q));
    }
    TensorT<double> batch({2, 3, 64, 64});
    Rng rng(17);
    for (auto& v : batch.data) v = rng.uniform();
    const std::vector<int> labels = {1, 4};

    ForwardCache<double> cache;
    Rng r0(0);
    const auto scores = forward(netd, batch, Mode::Eval, r0, &cache);
    const auto h = hinge_loss(scores, labels);
    backward(netd, cache, h.grad);

    auto loss_at = [&](std::size_t pi, const TensorT<double>& value) {
        Network<double> probe = netd;
        probe.params[pi].value = value;
        Rng r(0);
        return static_cast<double>(hinge_loss(forward(probe, batch, Mode::Eval, r), labels).loss);
    };

    double worst = 0.0;
    for (const char* name : {"conv1.w", "conv4.w", "conv7.w", "fc1.w", "fc3.w", "classifier.w"}) {
        std::size_t pi = 0;
        while (netd.params[pi].name != name) ++pi;
        const auto& value = netd.params[pi].value;
        const auto& grad = netd.params[pi].grad;
        const std::size_t stride = std::max<std::size_t>(1, value.numel() / 20);
        for (std::size_t i = 0; i < value.numel(); i += stride) {
            auto probe_at = [&](double eps) {
                TensorT<double> v = value;
                v.data[i] += eps;
                const double fp = loss_at(pi, v);
                v.data[i] -= 2 * eps;
                const double fm = loss_at(pi, v);
                return (fp - fm) / (2 * eps);
            };
            const double analytic = grad.data[i];
            double err = 1.0;
            // retry with a smaller window if the first probe straddles a kink
            for (double eps : {1e-6, 2.5e-7}) {
                const double numeric = probe_at(eps);
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
                err = std::min(err, std::abs(analytic - numeric) / denom);
                if (err <= 1e-6) break;
            }
            worst = std::max(worst, err);
        }
    }
    return worst;
}

void criterion_gradients() {
    double worst_d = 0.0, worst_f = 0.0;
    Rng rd(11), rf(12);
    for (int t = 0; t < 20; ++t) {
        worst_d = std::max({worst_d, conv_case<double>(rd), affine_case<double>(rd),
                            relu_case<double>(rd), dropout_case<double>(rd), hinge_case<double>(rd),
                            pool_case<double>(rd, PoolMode::Max), pool_case<double>(rd, PoolMode::Avg)});
        worst_f = std::max({worst_f, conv_case<float>(rf), affine_case<float>(rf),
                            relu_case<float>(rf), dropout_case<float>(rf), hinge_case<float>(rf),
                            pool_case<float>(rf, PoolMode::Max), pool_case<float>(rf, PoolMode::Avg)});
    }
    const double net_err = network_case();
    std::ostringstream d;
    d << "layer worst double=" << worst_d << " single=" << worst_f << " network=" << net_err;
    report("gradient suite within tolerance", worst_d <= 1e-6 && worst_f <= 1e-4 && net_err <= 1e-6,
           d.str());
}

// --------------------------------------------------------------------------
// 4. hinge oracle
// --------------------------------------------------------------------------
void criterion_hinge() {
    bool ok = true;
    // worked examples
    TensorT<double> s({1, 3});
    s.data = {1.0, 2.0, 0.5};
    const auto w1 = hinge_loss(s, std::vector<int>{0});
    ok = ok && w1.loss == 2.5 && w1.grad.data == std::vector<double>{-2, 1, 1};
    s.data = {5.0, 1.0, 2.0};
    ok = ok && hinge_loss(s, std::vector<int>{0}).loss == 0.0;
    TensorT<double> z({1, 5}, 0.0);
    ok = ok && hinge_loss(z, std::vector<int>{2}).loss == 4.0;
    ok = ok && hinge_loss(z, std::vector<int>{2}, 2.0).loss == 8.0;

    Rng rng(999);
    double worst = 0.0;
    for (int t = 0; t < 1000 && ok; ++t) {
        const std::size_t n = 1 + rng.below(8), k = 2 + rng.below(7);
        const double margin = rng.uniform(0.5, 2.0);
        TensorT<double> scores({n, k});
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<int>(rng.below(k));
            for (std::size_t j = 0; j < k; ++j) scores.data[i * k + j] = rng.uniform(-3.0, 3.0);
        }
        const auto res = hinge_loss(scores, labels, margin);
        // direct-formula loss and gradient
        double loss = 0.0;
        TensorT<double> grad(scores.shape);
        for (std::size_t i = 0; i < n; ++i) {
            const double sy = scores.data[i * k + static_cast<std::size_t>(labels[i])];
            for (std::size_t j = 0; j < k; ++j) {
                if (static_cast<int>(j) == labels[i]) continue;
                const double v = scores.data[i * k + j] - sy + margin;
                if (v > 0) {
                    loss += v / static_cast<double>(n);
                    grad.data[i * k + j] += 1.0 / static_cast<double>(n);
                    grad.data[i * k + static_cast<std::size_t>(labels[i])] -= 1.0 / static_cast<double>(n);
                }
            }
        }
        worst = std::max(worst, std::abs(res.loss - loss));
        for (std::size_t i = 0; i < grad.numel(); ++i)
            worst = std::max(worst, std::abs(res.grad.data[i] - grad.data[i]));
    }
    report("hinge loss matches the direct formula", ok && worst <= 1e-12,
           "worst deviation " + std::to_string(worst));
}

// --------------------------------------------------------------------------
// 5. parser roundtrips
// --------------------------------------------------------------------------
void criterion_roundtrips() {
    bool ok = true;
    std::size_t combos = 0;
    std::string why;
    Rng rng(55);
    try {
        for (FormatKind kind : {FormatKind::Nifti1, FormatKind::Analyze75, FormatKind::MetaImage,
                                FormatKind::Nrrd})
            for (ElementType t : {ElementType::U8, ElementType::I16, ElementType::F32})
                for (Endianness e : {Endianness::Little, Endianness::Big}) {
                    Volume v = make_volume({5, 4, 3}, t, {1.0, 1.5, 2.0});
                    std::visit(
                        [&](auto& vox) {
                            using V = typename std::decay_t<decltype(vox)>::value_type;
                            for (auto& x : vox) x = static_cast<V>(rng.below(120));
                        },
                        v.voxels);
                    const VolumeFile f = write_volume(v, kind, e);
                    const std::string hint = kind == FormatKind::Analyze75 ? "s.hdr" : "s";
                    ok = ok && detect_format(f.primary, hint) == kind;
                    const Bytes* companion = f.companion ? &*f.companion : nullptr;
                    ok = ok && read_volume(f.primary, kind, companion).equals(v);
                    ++combos;
                }
        // gzip NIfTI fixture
        Volume v = make_volume({6, 6, 6}, ElementType::I16);
        for (auto& x : std::get<std::vector<std::int16_t>>(v.voxels))
            x = static_cast<std::int16_t>(rng.below(500));
        WriteOptions gz;
        gz.gzip = true;
        const VolumeFile f = write_volume(v, FormatKind::Nifti1, Endianness::Little, gz);
        ok = ok && detect_format(f.primary, "s.nii.gz") == FormatKind::Nifti1;
        ok = ok && read_volume(f.primary, FormatKind::Nifti1).equals(v);
    } catch (const Error& e) {
        ok = false;
        why = e.what();
    }
    report("format roundtrips are bitwise across " + std::to_string(combos) + " fixtures",
           ok && combos >= 18, why);
}

// --------------------------------------------------------------------------
// 6. optimized kernel equivalence
// --------------------------------------------------------------------------
void criterion_kernel_equivalence() {
    Rng rng(77);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t c = 1 + rng.below(4), f = 1 + rng.below(5);
        const std::size_t kh = 1 + rng.below(4), kw = 1 + rng.below(4);
        const std::size_t h = kh + rng.below(8), w = kw + rng.below(8);
        const std::size_t stride = 1 + rng.below(3), pad = rng.below(3);
        const Tensor x = randt<float>({1 + rng.below(3), c, h, w}, rng);
        const Tensor wt = randt<float>({f, c, kh, kw}, rng);
        std::vector<float> bias(f);
        for (auto& b : bias) b = static_cast<float>(rng.uniform(-1.0, 1.0));
        const Tensor a = conv2d_forward_naive(x, wt, bias, stride, pad);
        const Tensor b = conv2d_forward(x, wt, bias, stride, pad);
        for (std::size_t i = 0; i < a.numel(); ++i) {
            const double denom = std::max(1.0, static_cast<double>(std::abs(a.data[i])));
            worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]) / denom);
        }
    }
    report("im2col convolution matches the nested-loop reference", worst <= 1e-5,
           "worst relative deviation " + std::to_string(worst));
}

// --------------------------------------------------------------------------
// 7. metrics oracle
// --------------------------------------------------------------------------
void criterion_metrics() {
    bool ok = true;
    // hand-enumerated 3-class example
    ConfusionMatrix hand(3);
    hand.at(0, 0) = 2;
    hand.at(1, 0) = 1;
    hand.at(1, 1) = 1;
    hand.at(2, 2) = 1;
    ok = ok && accuracy_of(hand) == 0.8;
    const auto [hs, hp] = macro_sens_spec(hand);
    ok = ok && std::abs(hs - (1.0 + 0.5 + 1.0) / 3.0) < 1e-15;
    ok = ok && std::abs(hp - (2.0 / 3.0 + 1.0 + 1.0) / 3.0) < 1e-15;

    Rng rng(31);
    for (int t = 0; t < 100 && ok; ++t) {
        const std::size_t k = 2 + rng.below(6);
        ConfusionMatrix cm(k);
        std::uint64_t total = 0;
        for (auto& c : cm.counts) {
            c = rng.below(4) == 0 ? 0 : rng.below(900);
            total += c;
        }
        if (total == 0) cm.at(0, 0) = total = 1;
        // per-class enumeration in integer arithmetic
        double sens_sum = 0, spec_sum = 0;
        std::size_t ns = 0, np = 0;
        std::uint64_t diag = 0;
        for (std::size_t c = 0; c < k; ++c) {
            std::uint64_t tp = cm.at(c, c), row = 0, col = 0;
            diag += tp;
            for (std::size_t j = 0; j < k; ++j) {
                row += cm.at(c, j);
                col += cm.at(j, c);
            }
            const std::uint64_t fn = row - tp, fp = col - tp, tn = total - row - col + tp;
            if (tp + fn) {
                sens_sum += static_cast<double>(tp) / static_cast<double>(tp + fn);
                ++ns;
            }
            if (tn + fp) {
                spec_sum += static_cast<double>(tn) / static_cast<double>(tn + fp);
                ++np;
            }
        }
        ok = ok && accuracy_of(cm) == static_cast<double>(diag) / static_cast<double>(total);
        const auto [sens, spec] = macro_sens_spec(cm);
        ok = ok && std::abs(sens - (ns ? sens_sum / static_cast<double>(ns) : 0.0)) <= 1e-12;
        ok = ok && std::abs(spec - (np ? spec_sum / static_cast<double>(np) : 0.0)) <= 1e-12;
    }
    report("metrics match per-class enumeration on 100 random matrices", ok);
}

// --------------------------------------------------------------------------
// 8. determinism and bitwise resume
// --------------------------------------------------------------------------
void criterion_determinism() {
    if (!g_pipeline_ok) {
        report("pipeline runs are byte-identical and resumable", false, "pipeline did not complete");
        return;
    }
    bool ok = run_pipeline(g_root / "runB", 2000, true);
    std::string why;
    if (ok) {
        for (const char* rel : {"prep/manifest.jsonl", "curves.csv", "model.nbad", "report.json"}) {
            if (slurp(g_root / "runA" / rel) != slurp(g_root / "runB" / rel)) {
                ok = false;
                why = std::string(rel) + " differs between identical runs";
                break;
            }
        }
    } else {
        why = "second pipeline run failed";
    }
    if (ok) {
        // midpoint stop, then resume to completion
        ok = run_pipeline(g_root / "runC", 1000, false) &&
             shell_in(g_root / "runC",
                      "train --manifest prep/manifest.jsonl --preset desk --iters 2000 --batch 32"
                      " --eval-every 200 --seed 42 --checkpoint model.nbad --curves curves.csv"
                      " --resume");
        if (ok && slurp(g_root / "runA" / "model.nbad") != slurp(g_root / "runC" / "model.nbad")) {
            ok = false;
            why = "resumed checkpoint differs from uninterrupted training";
        } else if (!ok) {
            why = "resume run failed";
        }
    }
    report("pipeline runs are byte-identical and resumable", ok, why);
}

// --------------------------------------------------------------------------
// 9. overfit smoke test
// --------------------------------------------------------------------------
void criterion_overfit() {
    NetworkSpec spec = spec_preset("desk");
    for (auto& l : spec.layers)
        if (l.kind == LayerKind::Dropout) l.p = 0.0;
    auto net = build_network<float>(spec, 42);
    Tensor batch({8, 3, 64, 64});
    Rng rng(5);
    for (auto& v : batch.data) v = static_cast<float>(rng.uniform());
    const std::vector<int> labels = {0, 1, 2, 3, 4, 0, 1, 2};
    OptState<float> opt;
    opt.weight_decay = 0.0;

    float first = 0, last = 0;
    for (int it = 0; it < 200; ++it) {
        Rng drop = Rng::derive(7, 0x64726f70ULL, static_cast<std::uint64_t>(it));
        last = train_step(net, batch, labels, opt, drop);
        if (it == 0) first = last;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        Tensor img({3, 64, 64});
        std::copy_n(batch.data.begin() + static_cast<std::ptrdiff_t>(i * img.numel()), img.numel(),
                    img.data.begin());
        if (predict(net, img).class_id == labels[i]) ++correct;
    }
    std::ostringstream d;
    d << "loss " << first << " -> " << last << ", " << correct << "/8 correct";
    report("overfit smoke test", std::abs(first - 4.0f) <= 0.5f && last < 0.1f && correct == 8,
           d.str());
}

// --------------------------------------------------------------------------
// 10. curve emission
// --------------------------------------------------------------------------
void criterion_curves() {
    if (!g_pipeline_ok) {
        report("training curves CSV is well formed", false, "pipeline did not complete");
        return;
    }
    std::ifstream f(g_root / "runA" / "curves.csv");
    std::string line;
    bool ok = static_cast<bool>(std::getline(f, line)) &&
              line == "iteration,train_loss,test_loss,test_accuracy";
    std::string why = ok ? "" : "bad header";
    std::uint64_t prev = 0, rows = 0;
    while (ok && std::getline(f, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        cols.resize(4);
        const std::uint64_t it = std::stoull(cols[0]);
        if (it != prev + 1) {
            ok = false;
            why = "iterations not strictly increasing at row " + std::to_string(rows + 1);
            break;
        }
        prev = it;
        ++rows;
        if (cols[1].empty()) {
            ok = false;
            why = "missing train loss at iteration " + std::to_string(it);
            break;
        }
        const bool eval_row = it % 200 == 0 || it == 2000;
        if (eval_row != (!cols[2].empty() && !cols[3].empty())) {
            ok = false;
            why = "test columns wrong at iteration " + std::to_string(it);
            break;
        }
    }
    if (ok && rows != 2000) {
        ok = false;
        why = "expected 2000 rows, found " + std::to_string(rows);
    }
    report("training curves CSV is well formed", ok, why);
}

} // namespace

int main() {
    const char* cli = std::getenv("NBAD_CLI");
    g_cli = cli ? cli : NBAD_CLI_PATH;
    g_root = fs::temp_directory_path() / "nbad_acceptance";
    fs::remove_all(g_root);
    fs::create_directories(g_root);

    criterion_pipeline();
    criterion_architecture();
    criterion_gradients();
    criterion_hinge();
    criterion_roundtrips();
    criterion_kernel_equivalence();
    criterion_metrics();
    criterion_determinism();
    criterion_overfit();
    criterion_curves();

    if (g_failures == 0) fs::remove_all(g_root);
    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
              << std::endl;
    return g_failures == 0 ? 0 : 1;
}
