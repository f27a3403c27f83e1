#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nbad/dataset.hpp"
#include "nbad/error.hpp"
#include "nbad/rng.hpp"
#include "nbad/volume.hpp"
#include "nbad/volume_io.hpp"

namespace nbad {

// Synthetic stand-in corpus. Class geometries are loose analogues of the five
// conditions, tuned so the desk network can separate them; no clinical
// meaning. Fully determined by (seed, class, index).
//
//   0 healthy    smooth ellipsoid "brain" with a baseline dark center
//   1 hgg        one large bright blob (radius 15-25% of extent)
//   2 lgg        one small dim blob (5-10%, 60% of class-1 contrast)
//   3 alzheimer  enlarged dark central region (2x baseline)
//   4 ms         5-9 small bright speckles
//
// Gaussian noise (sigma = 5% of dynamic range) over brain tissue.

struct PhantomFeatures {
    std::array<double, 3> blob_center{};  // classes 1/2
    double blob_radius = 0;
    std::vector<std::array<double, 3>> speckles;  // class 4
    double ventricle_radius = 0;
};

inline Volume generate_phantom(int class_id, int index, std::size_t dims, std::uint64_t seed,
                               PhantomFeatures* features = nullptr) {
    require(class_id >= 0 && class_id < kNumClasses, "ClassOutOfRange",
            "class " + std::to_string(class_id));
    require(dims >= 32, "ValueOutOfRange", "phantom dims must be >= 32");
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(class_id),
                          static_cast<std::uint64_t>(index));

    const double d = static_cast<double>(dims);
    const std::array<double, 3> center = {d / 2 + rng.uniform(-1.5, 1.5),
                                          d / 2 + rng.uniform(-1.5, 1.5),
                                          d / 2 + rng.uniform(-1.5, 1.5)};
    // brain semi-axes, mildly anisotropic
    const std::array<double, 3> semi = {d * rng.uniform(0.38, 0.43), d * rng.uniform(0.34, 0.39),
                                        d * rng.uniform(0.36, 0.41)};
    const double brain_level = 120.0, csf_level = 45.0, bright_level = 235.0;
    const double dim_level = brain_level + 0.6 * (bright_level - brain_level);

    const double vent_base = 0.06;
    const double vent_r = d * (class_id == 3 ? 2.0 * vent_base : vent_base) * rng.uniform(0.9, 1.1);

    double blob_r = 0;
    std::array<double, 3> blob_c{};
    if (class_id == 1 || class_id == 2) {
        blob_r = d * (class_id == 1 ? rng.uniform(0.15, 0.25) : rng.uniform(0.05, 0.10));
        // near the volume center so the central VOI slices cut through it
        for (auto& c : blob_c) c = d / 2 + rng.uniform(-3.0, 3.0);
    }
    std::vector<std::array<double, 3>> speckles;
    std::vector<double> speckle_r;
    if (class_id == 4) {
        const std::size_t n = 5 + rng.below(5);  // 5..9
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, 3> p = {d / 2 + rng.uniform(-0.22, 0.22) * d,
                                       d / 2 + rng.uniform(-0.22, 0.22) * d,
                                       d / 2 + rng.uniform(-0.22, 0.22) * d};
            // pin the first three near the axial/coronal/sagittal center planes
            if (i < 3) p[2 - i] = d / 2 + rng.uniform(-1.0, 1.0);
            speckles.push_back(p);
            speckle_r.push_back(rng.uniform(2.0, 4.0));
        }
    }
    if (features) {
        features->blob_center = blob_c;
        features->blob_radius = blob_r;
        features->speckles = speckles;
        features->ventricle_radius = vent_r;
    }

    Volume v = make_volume({dims, dims, dims}, ElementType::U8);
    auto& vox = std::get<std::vector<std::uint8_t>>(v.voxels);

    auto soft = [](double dist, double radius) {
        // 1 inside, 0 outside, ~2-voxel smooth shoulder
        return std::clamp((radius - dist) / 2.0 + 0.5, 0.0, 1.0);
    };

    std::size_t i = 0;
    for (std::size_t z = 0; z < dims; ++z)
        for (std::size_t y = 0; y < dims; ++y)
            for (std::size_t x = 0; x < dims; ++x, ++i) {
                const double px = static_cast<double>(x), py = static_cast<double>(y),
                             pz = static_cast<double>(z);
                const double rx = (px - center[0]) / semi[0];
                const double ry = (py - center[1]) / semi[1];
                const double rz = (pz - center[2]) / semi[2];
                const double rad = std::sqrt(rx * rx + ry * ry + rz * rz);
                const double brain = std::clamp((1.0 - rad) * 12.0, 0.0, 1.0);
                if (brain <= 0.0) continue;  // background stays exactly 0

                double val = brain_level;
                auto dist_to = [&](const std::array<double, 3>& c) {
                    return std::sqrt((px - c[0]) * (px - c[0]) + (py - c[1]) * (py - c[1]) +
                                     (pz - c[2]) * (pz - c[2]));
                };
                const double wv = soft(dist_to(center), vent_r);
                val = val * (1 - wv) + csf_level * wv;
                if (class_id == 1 || class_id == 2) {
                    const double wb = soft(dist_to(blob_c), blob_r);
                    const double level = class_id == 1 ? bright_level : dim_level;
                    val = val * (1 - wb) + level * wb;
                }
                for (std::size_t s = 0; s < speckles.size(); ++s) {
                    const double ws = soft(dist_to(speckles[s]), speckle_r[s]);
                    val = val * (1 - ws) + bright_level * ws;
                }
                val = val * brain + 0.05 * 255.0 * rng.normal();
                vox[i] = static_cast<std::uint8_t>(std::clamp(val, 0.0, 255.0));
            }
    return v;
}

// Writes <out>/<class-name>/<class>_<index>.nii per class; returns file count.
inline std::size_t write_phantom_corpus(const std::filesystem::path& out_dir, int per_class,
                                        std::size_t dims, std::uint64_t seed) {
    require(per_class > 0, "ValueOutOfRange", "per_class must be positive");
    std::size_t written = 0;
    for (int cls = 0; cls < kNumClasses; ++cls) {
        const auto dir = out_dir / kClassNames[static_cast<std::size_t>(cls)];
        std::filesystem::create_directories(dir);
        for (int i = 0; i < per_class; ++i) {
            const Volume v = generate_phantom(cls, i, dims, seed);
            char name[64];
            std::snprintf(name, sizeof(name), "%s_%03d.nii",
                          kClassNames[static_cast<std::size_t>(cls)], i);
            write_volume_file(dir / name, v, FormatKind::Nifti1);
            ++written;
        }
    }
    return written;
}

} // namespace nbad
