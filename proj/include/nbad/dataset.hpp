#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "nbad/error.hpp"
#include "nbad/rng.hpp"
#include "nbad/tensor.hpp"
#include "nbad/volume.hpp"

namespace nbad {

inline constexpr int kNumClasses = 5;
inline constexpr std::array<const char*, kNumClasses> kClassNames = {"healthy", "hgg", "lgg",
                                                                     "alzheimer", "ms"};

struct VoiBox {
    std::array<std::size_t, 3> lo{};
    std::array<std::size_t, 3> hi{};  // inclusive

    std::size_t extent(std::size_t axis) const { return hi[axis] - lo[axis] + 1; }
    std::size_t center(std::size_t axis) const { return lo[axis] + extent(axis) / 2; }
};

// Tight bounding box of voxels above threshold_fraction * max; full extent
// when nothing qualifies.
inline VoiBox compute_voi(const Volume& v, double threshold_fraction = 0.1) {
    require(threshold_fraction > 0 && threshold_fraction < 1, "ValueOutOfRange",
            "threshold_fraction must be in (0,1)");
    const auto vox = v.to_float();
    const float maxv = *std::max_element(vox.begin(), vox.end());
    const float thr = static_cast<float>(threshold_fraction) * maxv;

    VoiBox full{{0, 0, 0}, {v.dims[0] - 1, v.dims[1] - 1, v.dims[2] - 1}};
    if (!(maxv > 0)) return full;

    VoiBox box{{v.dims[0], v.dims[1], v.dims[2]}, {0, 0, 0}};
    bool any = false;
    std::size_t i = 0;
    for (std::size_t z = 0; z < v.dims[2]; ++z)
        for (std::size_t y = 0; y < v.dims[1]; ++y)
            for (std::size_t x = 0; x < v.dims[0]; ++x, ++i) {
                if (vox[i] > thr) {
                    any = true;
                    box.lo = {std::min(box.lo[0], x), std::min(box.lo[1], y), std::min(box.lo[2], z)};
                    box.hi = {std::max(box.hi[0], x), std::max(box.hi[1], y), std::max(box.hi[2], z)};
                }
            }
    return any ? box : full;
}

enum class Plane { Axial, Coronal, Sagittal };

inline const char* plane_name(Plane p) {
    switch (p) {
        case Plane::Axial: return "axial";
        case Plane::Coronal: return "coronal";
        case Plane::Sagittal: return "sagittal";
    }
    return "?";
}

// Axial fixes z (free x,y), coronal fixes y (free x,z), sagittal fixes x
// (free y,z); output shape is {first free extent, second free extent}.
inline Tensor extract_slice(const Volume& v, Plane plane, std::size_t index) {
    const auto vox = v.to_float();
    auto grab = [&](std::size_t x, std::size_t y, std::size_t z) {
        return vox[v.flat_index(x, y, z)];
    };
    switch (plane) {
        case Plane::Axial: {
            require(index < v.dims[2], "IndexOutOfRange", "axial index");
            Tensor out({v.dims[0], v.dims[1]});
            for (std::size_t x = 0; x < v.dims[0]; ++x)
                for (std::size_t y = 0; y < v.dims[1]; ++y) out.at2(x, y) = grab(x, y, index);
            return out;
        }
        case Plane::Coronal: {
            require(index < v.dims[1], "IndexOutOfRange", "coronal index");
            Tensor out({v.dims[0], v.dims[2]});
            for (std::size_t x = 0; x < v.dims[0]; ++x)
                for (std::size_t z = 0; z < v.dims[2]; ++z) out.at2(x, z) = grab(x, index, z);
            return out;
        }
        case Plane::Sagittal: {
            require(index < v.dims[0], "IndexOutOfRange", "sagittal index");
            Tensor out({v.dims[1], v.dims[2]});
            for (std::size_t y = 0; y < v.dims[1]; ++y)
                for (std::size_t z = 0; z < v.dims[2]; ++z) out.at2(y, z) = grab(index, y, z);
            return out;
        }
    }
    fail("IndexOutOfRange", "bad plane");
}

// Bilinear resize with half-pixel centers:
// src = (dst + 0.5) * (src_extent / dst_extent) - 0.5, clamped.
template <class T>
TensorT<T> resize_bilinear(const TensorT<T>& img, std::size_t out_h, std::size_t out_w) {
    require(img.rank() == 2 && img.shape[0] >= 1 && img.shape[1] >= 1, "ValueOutOfRange",
            "resize_bilinear needs a non-empty 2-d image");
    const std::size_t in_h = img.shape[0], in_w = img.shape[1];
    if (in_h == out_h && in_w == out_w) return img;

    TensorT<T> out({out_h, out_w});
    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(in_h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(in_w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - static_cast<double>(x0);
            const double v = (1 - wy) * ((1 - wx) * img.at2(y0, x0) + wx * img.at2(y0, x1)) +
                             wy * ((1 - wx) * img.at2(y1, x0) + wx * img.at2(y1, x1));
            out.at2(y, x) = static_cast<T>(v);
        }
    }
    return out;
}

// Resize a whole C-channel image, channel by channel.
template <class T>
TensorT<T> resize_bilinear_chw(const TensorT<T>& img, std::size_t out_h, std::size_t out_w) {
    require(img.rank() == 3, "ValueOutOfRange", "expected CxHxW");
    const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    TensorT<T> out({c, out_h, out_w});
    for (std::size_t ch = 0; ch < c; ++ch) {
        TensorT<T> plane({h, w});
        std::copy_n(img.data.begin() + static_cast<std::ptrdiff_t>(ch * h * w), h * w,
                    plane.data.begin());
        const auto r = resize_bilinear(plane, out_h, out_w);
        std::copy(r.data.begin(), r.data.end(),
                  out.data.begin() + static_cast<std::ptrdiff_t>(ch * out_h * out_w));
    }
    return out;
}

// Channels = (axial, coronal, sagittal) central VOI slices, each cropped to
// the VOI in-plane extent, rescaled by the VOI's 3-d min/max (constant VOI
// maps to 0) and resized to HxW. Also reports the chosen plane indices.
inline Tensor compose_sample(const Volume& v, const VoiBox& voi, std::size_t out_h,
                             std::size_t out_w, std::array<std::size_t, 3>* plane_indices = nullptr) {
    for (std::size_t a = 0; a < 3; ++a) {
        require(voi.lo[a] <= voi.hi[a] && voi.hi[a] < v.dims[a], "DegenerateVoi",
                "VOI box outside volume");
    }
    const auto vox = v.to_float();
    float lo = vox[v.flat_index(voi.lo[0], voi.lo[1], voi.lo[2])];
    float hi = lo;
    for (std::size_t z = voi.lo[2]; z <= voi.hi[2]; ++z)
        for (std::size_t y = voi.lo[1]; y <= voi.hi[1]; ++y)
            for (std::size_t x = voi.lo[0]; x <= voi.hi[0]; ++x) {
                const float val = vox[v.flat_index(x, y, z)];
                lo = std::min(lo, val);
                hi = std::max(hi, val);
            }
    const float range = hi - lo;

    const std::array<std::size_t, 3> centers = {voi.center(0), voi.center(1), voi.center(2)};
    if (plane_indices) *plane_indices = {centers[2], centers[1], centers[0]};  // axial,coronal,sagittal

    Tensor out({3, out_h, out_w});
    const Plane planes[3] = {Plane::Axial, Plane::Coronal, Plane::Sagittal};
    const std::size_t fixed_axis[3] = {2, 1, 0};
    for (std::size_t ch = 0; ch < 3; ++ch) {
        Tensor slice = extract_slice(v, planes[ch], centers[fixed_axis[ch]]);
        // crop to the VOI's in-plane extent; slice axes follow the free axes
        const std::size_t free0 = planes[ch] == Plane::Sagittal ? 1 : 0;
        const std::size_t free1 = planes[ch] == Plane::Axial ? 1 : 2;
        Tensor crop({voi.extent(free0), voi.extent(free1)});
        for (std::size_t i = 0; i < crop.shape[0]; ++i)
            for (std::size_t j = 0; j < crop.shape[1]; ++j) {
                const float val = slice.at2(voi.lo[free0] + i, voi.lo[free1] + j);
                crop.at2(i, j) = range > 0 ? (val - lo) / range : 0.0f;
            }
        const Tensor resized = resize_bilinear(crop, out_h, out_w);
        for (std::size_t i = 0; i < out_h * out_w; ++i)
            out.data[ch * out_h * out_w + i] = std::clamp(resized.data[i], 0.0f, 1.0f);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------
enum class Split { Unassigned, Train, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unassigned: return "";
    }
    return "";
}

struct ManifestEntry {
    std::string path;
    int class_id = 0;
    std::string class_name;
    Split split = Split::Unassigned;
    std::string source_volume;
    std::array<std::int64_t, 3> plane_indices{0, 0, 0};
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> of_split(Split s) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries)
            if (e.split == s) out.push_back(&e);
        return out;
    }
};

inline nlohmann::json entry_to_json(const ManifestEntry& e) {
    return nlohmann::json{{"path", e.path},
                          {"class_id", e.class_id},
                          {"class_name", e.class_name},
                          {"split", split_name(e.split)},
                          {"source_volume", e.source_volume},
                          {"plane_indices", e.plane_indices}};
}

inline ManifestEntry entry_from_json(const nlohmann::json& j) {
    ManifestEntry e;
    e.path = j.at("path").get<std::string>();
    e.class_id = j.at("class_id").get<int>();
    e.class_name = j.at("class_name").get<std::string>();
    const std::string s = j.at("split").get<std::string>();
    e.split = s == "train" ? Split::Train : s == "test" ? Split::Test : Split::Unassigned;
    e.source_volume = j.value("source_volume", "");
    if (j.contains("plane_indices")) {
        const auto& p = j["plane_indices"];
        for (std::size_t i = 0; i < 3 && i < p.size(); ++i) e.plane_indices[i] = p[i].get<std::int64_t>();
    }
    return e;
}

// JSON-lines, one entry per line.
inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), "IoError", "cannot write " + path.string());
    for (const auto& e : m.entries) f << entry_to_json(e).dump() << '\n';
    require(f.good(), "IoError", "short write to " + path.string());
}

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    require(f.good(), "IoError", "cannot open " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        m.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
    }
    return m;
}

// One entry per file, lexicographic order, split unassigned.
inline Manifest build_manifest(const std::map<int, std::filesystem::path>& class_dirs) {
    Manifest m;
    for (const auto& [cls, dir] : class_dirs) {
        require(cls >= 0 && cls < kNumClasses, "ClassOutOfRange", "class id " + std::to_string(cls));
        require(std::filesystem::is_directory(dir), "IoError", "not a directory: " + dir.string());
        std::vector<std::string> files;
        for (const auto& de : std::filesystem::directory_iterator(dir))
            if (de.is_regular_file()) files.push_back(de.path().string());
        std::sort(files.begin(), files.end());
        require(!files.empty(), "EmptyClass",
                "no files for class " + std::string(kClassNames[static_cast<std::size_t>(cls)]));
        for (auto& f : files) {
            ManifestEntry e;
            e.path = f;
            e.class_id = cls;
            e.class_name = kClassNames[static_cast<std::size_t>(cls)];
            m.entries.push_back(std::move(e));
        }
    }
    return m;
}

// Undersample every class to the minority count, then assign
// floor(train_fraction * n) per class to train and the rest to test.
inline Manifest split_balance(const Manifest& m, double train_fraction, std::uint64_t seed) {
    require(train_fraction > 0 && train_fraction < 1, "ValueOutOfRange",
            "train_fraction must be in (0,1)");
    std::map<int, std::vector<const ManifestEntry*>> per_class;
    for (const auto& e : m.entries) per_class[e.class_id].push_back(&e);
    require(!per_class.empty(), "EmptyClass", "manifest has no entries");

    std::size_t min_count = SIZE_MAX;
    for (const auto& [cls, v] : per_class) min_count = std::min(min_count, v.size());
    require(min_count > 0, "EmptyClass", "a class has no entries");

    Manifest out;
    for (auto& [cls, v] : per_class) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(cls));
        // Fisher-Yates with our seeded stream
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.below(i)]);
        // epsilon guard so e.g. 0.7*10 floors to 7 despite binary rounding
        const std::size_t n_train = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(min_count) + 1e-9));
        for (std::size_t i = 0; i < min_count; ++i) {
            ManifestEntry e = *v[i];
            e.split = i < n_train ? Split::Train : Split::Test;
            out.entries.push_back(std::move(e));
        }
    }
    // stable, class-major, path-minor ordering for reproducible files
    std::sort(out.entries.begin(), out.entries.end(), [](const auto& a, const auto& b) {
        return std::tie(a.class_id, a.path) < std::tie(b.class_id, b.path);
    });
    return out;
}

} // namespace nbad
