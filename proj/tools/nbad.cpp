// nbad: brain-MRI five-class classification pipeline.
// Subcommands: phantom, prepare, train, eval, predict, convert.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nbad/augment.hpp"
#include "nbad/dataset.hpp"
#include "nbad/error.hpp"
#include "nbad/metrics.hpp"
#include "nbad/model.hpp"
#include "nbad/phantom.hpp"
#include "nbad/png.hpp"
#include "nbad/train.hpp"
#include "nbad/volume_io.hpp"

namespace fs = std::filesystem;
using nbad::require;

namespace {

bool is_volume_file(const fs::path& p) {
    static const std::vector<std::string> exts = {".nii", ".gz", ".mha", ".hdr", ".nhdr", ".nrrd"};
    const std::string e = p.extension().string();
    for (const auto& x : exts)
        if (e == x) return true;
    return false;
}

int cmd_phantom(const fs::path& out, int per_class, std::size_t dims, std::uint64_t seed) {
    const std::size_t n = nbad::write_phantom_corpus(out, per_class, dims, seed);
    std::cout << "phantom: wrote " << n << " volumes under " << out.string() << "\n";
    return 0;
}

int cmd_prepare(const fs::path& input, const fs::path& out, std::size_t size,
                double train_fraction, std::uint64_t seed, double voi_threshold) {
    const fs::path sample_dir = out / "samples";
    fs::create_directories(sample_dir);

    nbad::Manifest manifest;
    for (int cls = 0; cls < nbad::kNumClasses; ++cls) {
        const std::string cname = nbad::kClassNames[static_cast<std::size_t>(cls)];
        const fs::path dir = input / cname;
        require(fs::is_directory(dir), "IoError", "missing class directory " + dir.string());
        std::vector<fs::path> files;
        for (const auto& de : fs::directory_iterator(dir))
            if (de.is_regular_file() && is_volume_file(de.path())) files.push_back(de.path());
        std::sort(files.begin(), files.end());

        std::size_t ok = 0;
        for (const auto& f : files) {
            if (f.extension() == ".img" || f.extension() == ".raw") continue;
            try {
                std::string warning;
                nbad::Volume v = nbad::read_volume_file(f, &warning);
                if (!warning.empty()) std::cerr << "warn: " << f.string() << ": " << warning << "\n";
                v = nbad::reorient_canonical(v);
                const nbad::VoiBox voi = nbad::compute_voi(v, voi_threshold);
                std::array<std::size_t, 3> planes{};
                const nbad::Tensor img = nbad::compose_sample(v, voi, size, size, &planes);
                const fs::path png = sample_dir / (cname + "_" + f.stem().string() + ".png");
                nbad::write_file_bytes(png, nbad::export_png(img));
                nbad::ManifestEntry e;
                e.path = png.string();
                e.class_id = cls;
                e.class_name = cname;
                e.source_volume = f.string();
                for (std::size_t i = 0; i < 3; ++i) e.plane_indices[i] = static_cast<std::int64_t>(planes[i]);
                manifest.entries.push_back(std::move(e));
                ++ok;
            } catch (const nbad::Error& err) {
                std::cerr << "warn: skipping " << f.string() << ": " << err.what() << "\n";
            }
        }
        require(ok > 0, "EmptyClass", "every volume of class " + cname + " failed to convert");
    }

    const nbad::Manifest split = nbad::split_balance(manifest, train_fraction, seed);
    const fs::path mpath = out / "manifest.jsonl";
    nbad::save_manifest(split, mpath);
    std::size_t n_train = 0, n_test = 0;
    for (const auto& e : split.entries) (e.split == nbad::Split::Train ? n_train : n_test)++;
    std::cout << "prepare: " << split.entries.size() << " samples (" << n_train << " train, "
              << n_test << " test) -> " << mpath.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_path,
             const std::string& split_name, const std::string& report_path) {
    auto loaded = nbad::checkpoint_load(checkpoint);
    const nbad::Manifest manifest = nbad::load_manifest(manifest_path);
    const nbad::Split split = split_name == "train" ? nbad::Split::Train : nbad::Split::Test;
    const nbad::SampleSet set = nbad::load_split(manifest, split);
    require(!set.images.empty(), "EmptySplit", "no '" + split_name + "' entries in manifest");

    nbad::AugmentConfig aug;
    aug.crop_h = loaded.net.spec.input[1];
    aug.crop_w = loaded.net.spec.input[2];
    aug.base_short_side = aug.crop_h;
    aug.enabled = false;
    const nbad::EvalResult r = nbad::evaluate_set(loaded.net, set, aug);

    nlohmann::json report = nbad::metrics_report(r.confusion);
    report["mean_loss"] = r.mean_loss;
    report["split"] = split_name;
    if (!report_path.empty()) {
        std::ofstream f(report_path, std::ios::trunc);
        require(f.good(), "IoError", "cannot write " + report_path);
        f << report.dump(2) << "\n";
    }
    std::cout << "eval: split=" << split_name << " n=" << set.images.size()
              << " accuracy=" << r.accuracy << " sensitivity=" << report["sensitivity_macro"]
              << " specificity=" << report["specificity_macro"] << "\n";
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& image_path) {
    auto loaded = nbad::checkpoint_load(checkpoint);
    const auto& in = loaded.net.spec.input;

    nbad::Tensor img;
    const nbad::Bytes head = nbad::read_file_bytes(image_path);
    const bool is_png = head.size() >= 8 && head[0] == 0x89 && head[1] == 'P';
    if (is_png) {
        const nbad::PngImage png = nbad::decode_png(head);
        require(png.channels == 3 && png.height == in[1] && png.width == in[2], "BadInput",
                "expected a 3-channel " + std::to_string(in[1]) + "x" + std::to_string(in[2]) +
                    " PNG");
        img = png.to_tensor();
    } else {
        nbad::Volume v = nbad::read_volume_file(image_path);
        v = nbad::reorient_canonical(v);
        const nbad::VoiBox voi = nbad::compute_voi(v);
        img = nbad::compose_sample(v, voi, in[1], in[2]);
    }
    const auto p = nbad::predict(loaded.net, img);
    std::cout << p.class_id << " " << nbad::kClassNames[static_cast<std::size_t>(p.class_id)];
    for (float s : p.scores) std::cout << " " << s;
    std::cout << "\n";
    return 0;
}

int cmd_convert(const std::string& in_path, const std::string& plane_name, std::int64_t index,
                const std::string& out_path) {
    nbad::Volume v = nbad::read_volume_file(in_path);
    v = nbad::reorient_canonical(v);
    nbad::Plane plane;
    if (plane_name == "axial") plane = nbad::Plane::Axial;
    else if (plane_name == "coronal") plane = nbad::Plane::Coronal;
    else if (plane_name == "sagittal") plane = nbad::Plane::Sagittal;
    else nbad::fail("BadInput", "plane must be axial, coronal or sagittal");

    const std::size_t axis = plane == nbad::Plane::Axial ? 2 : plane == nbad::Plane::Coronal ? 1 : 0;
    const std::size_t idx = index < 0 ? v.dims[axis] / 2 : static_cast<std::size_t>(index);
    require(idx < v.dims[axis], "IndexOutOfRange",
            "index " + std::to_string(idx) + " >= " + std::to_string(v.dims[axis]));
    nbad::Tensor slice = nbad::extract_slice(v, plane, idx);

    float lo = slice.data[0], hi = slice.data[0];
    for (float x : slice.data) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    for (float& x : slice.data) x = hi > lo ? (x - lo) / (hi - lo) : 0.0f;
    nbad::write_file_bytes(out_path, nbad::export_png(slice));
    std::cout << "convert: " << out_path << " (" << slice.shape[0] << "x" << slice.shape[1]
              << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"brain-MRI five-class classification pipeline"};
    app.require_subcommand(1);

    // phantom
    auto* ph = app.add_subcommand("phantom", "generate a synthetic volume corpus");
    std::string ph_out;
    int ph_per_class = 10;
    std::size_t ph_dims = 64;
    std::uint64_t ph_seed = 42;
    ph->add_option("--out", ph_out, "output directory")->required();
    ph->add_option("--per-class", ph_per_class, "volumes per class");
    ph->add_option("--dims", ph_dims, "cubic volume extent (>= 32)");
    ph->add_option("--seed", ph_seed, "corpus seed");

    // prepare
    auto* pr = app.add_subcommand("prepare", "volumes -> PNG samples + split manifest");
    std::string pr_in, pr_out;
    std::size_t pr_size = 224;
    double pr_fraction = 0.7, pr_voi = 0.1;
    std::uint64_t pr_seed = 0;
    pr->add_option("--input", pr_in, "directory with one subdirectory per class")->required();
    pr->add_option("--out", pr_out, "output directory")->required();
    pr->add_option("--size", pr_size, "sample side length in pixels");
    pr->add_option("--train-fraction", pr_fraction, "train fraction of the balanced set");
    pr->add_option("--seed", pr_seed, "split seed");
    pr->add_option("--voi-threshold", pr_voi, "VOI foreground threshold fraction");

    // train
    auto* tr = app.add_subcommand("train", "train a network from a manifest");
    nbad::TrainConfig cfg;
    std::string tr_config;
    std::size_t tr_crop = 0, tr_base = 0;
    tr->add_option("--config", tr_config, "JSON config file (flags override)");
    auto* o_manifest = tr->add_option("--manifest", cfg.manifest_path, "manifest file");
    auto* o_preset = tr->add_option("--preset", cfg.preset, "desk|canonical");
    auto* o_lr = tr->add_option("--lr", cfg.learning_rate, "learning rate");
    auto* o_wd = tr->add_option("--weight-decay", cfg.weight_decay, "weight decay");
    auto* o_mom = tr->add_option("--momentum", cfg.momentum, "momentum");
    auto* o_batch = tr->add_option("--batch", cfg.batch, "batch size");
    auto* o_iters = tr->add_option("--iters", cfg.iterations, "total iterations");
    auto* o_eval = tr->add_option("--eval-every", cfg.eval_every, "evaluation interval");
    auto* o_seed = tr->add_option("--seed", cfg.seed, "training seed");
    auto* o_ckpt = tr->add_option("--checkpoint", cfg.checkpoint_path, "checkpoint path");
    auto* o_curves = tr->add_option("--curves", cfg.curves_path, "curves CSV path");
    tr->add_option("--crop", tr_crop, "augment crop side (default: network input)");
    tr->add_option("--base", tr_base, "augment base short side (default: canonical 256, desk 64)");
    tr->add_flag("--resume", cfg.resume, "resume from the checkpoint file");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
    std::string ev_ckpt, ev_manifest, ev_split = "test", ev_report;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--manifest", ev_manifest, "manifest file")->required();
    ev->add_option("--split", ev_split, "train|test");
    ev->add_option("--report", ev_report, "report JSON output path");

    // predict
    auto* pd = app.add_subcommand("predict", "classify one PNG sample or raw volume");
    std::string pd_ckpt, pd_image;
    pd->add_option("--checkpoint", pd_ckpt, "checkpoint path")->required();
    pd->add_option("--image", pd_image, "PNG sample or volume file")->required();

    // convert
    auto* cv = app.add_subcommand("convert", "volume slice -> PNG");
    std::string cv_in, cv_plane = "axial", cv_out;
    std::int64_t cv_index = -1;
    cv->add_option("--in", cv_in, "volume file")->required();
    cv->add_option("--plane", cv_plane, "axial|coronal|sagittal");
    cv->add_option("--index", cv_index, "slice index (default: middle)");
    cv->add_option("--out", cv_out, "output PNG")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (ph->parsed()) return cmd_phantom(ph_out, ph_per_class, ph_dims, ph_seed);
        if (pr->parsed()) return cmd_prepare(pr_in, pr_out, pr_size, pr_fraction, pr_seed, pr_voi);
        if (tr->parsed()) {
            if (!tr_config.empty()) {
                // file values first, then re-apply any flag the user set
                std::ifstream f(tr_config);
                require(f.good(), "IoError", "cannot open " + tr_config);
                nlohmann::json j;
                f >> j;
                nbad::TrainConfig file_cfg = cfg;
                nbad::train_config_apply_json(file_cfg, j);
                auto keep = [&](CLI::Option* o, auto& dst, const auto& flag_value) {
                    if (o->count() > 0) dst = flag_value;
                };
                const nbad::TrainConfig flags = cfg;
                cfg = file_cfg;
                keep(o_manifest, cfg.manifest_path, flags.manifest_path);
                keep(o_preset, cfg.preset, flags.preset);
                keep(o_lr, cfg.learning_rate, flags.learning_rate);
                keep(o_wd, cfg.weight_decay, flags.weight_decay);
                keep(o_mom, cfg.momentum, flags.momentum);
                keep(o_batch, cfg.batch, flags.batch);
                keep(o_iters, cfg.iterations, flags.iterations);
                keep(o_eval, cfg.eval_every, flags.eval_every);
                keep(o_seed, cfg.seed, flags.seed);
                keep(o_ckpt, cfg.checkpoint_path, flags.checkpoint_path);
                keep(o_curves, cfg.curves_path, flags.curves_path);
            }
            const nbad::NetworkSpec spec = nbad::spec_preset(cfg.preset);
            cfg.augment.crop_h = tr_crop ? tr_crop : spec.input[1];
            cfg.augment.crop_w = tr_crop ? tr_crop : spec.input[2];
            cfg.augment.base_short_side =
                tr_base ? tr_base : (cfg.preset == "canonical" ? 256 : cfg.augment.crop_h);
            nbad::run_training(cfg);
            return 0;
        }
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_manifest, ev_split, ev_report);
        if (pd->parsed()) return cmd_predict(pd_ckpt, pd_image);
        if (cv->parsed()) return cmd_convert(cv_in, cv_plane, cv_index, cv_out);
    } catch (const nbad::Error& e) {
        std::cerr << "ERROR:" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ERROR:Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
