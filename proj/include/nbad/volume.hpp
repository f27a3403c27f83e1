#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <variant>
#include <vector>

#include "nbad/error.hpp"

namespace nbad {

enum class ElementType { U8, I16, F32 };

inline std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::U8: return 1;
        case ElementType::I16: return 2;
        case ElementType::F32: return 4;
    }
    return 0;
}

inline const char* element_type_name(ElementType t) {
    switch (t) {
        case ElementType::U8: return "unsigned-8";
        case ElementType::I16: return "signed-16";
        case ElementType::F32: return "float-32";
    }
    return "?";
}

// Anatomical axis a storage axis maps to: 0=Right, 1=Anterior, 2=Superior,
// with sign -1 when the storage axis runs toward Left/Posterior/Inferior.
struct AxisCode {
    int axis = 0;
    int sign = 1;

    bool operator==(const AxisCode&) const = default;
};

using Orientation = std::array<AxisCode, 3>;

inline constexpr Orientation kCanonicalOrientation = {AxisCode{0, 1}, AxisCode{1, 1}, AxisCode{2, 1}};

inline bool orientation_valid(const Orientation& o) {
    bool seen[3] = {false, false, false};
    for (const auto& c : o) {
        if (c.axis < 0 || c.axis > 2 || (c.sign != 1 && c.sign != -1)) return false;
        if (seen[c.axis]) return false;
        seen[c.axis] = true;
    }
    return true;
}

// 3-d voxel grid. Voxels are stored x-fastest in their native element type so
// file roundtrips stay bitwise.
struct Volume {
    std::array<std::size_t, 3> dims{0, 0, 0};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    ElementType element_type = ElementType::U8;
    Orientation orientation = kCanonicalOrientation;
    std::variant<std::vector<std::uint8_t>, std::vector<std::int16_t>, std::vector<float>> voxels;

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    std::size_t stored_count() const {
        return std::visit([](const auto& v) { return v.size(); }, voxels);
    }

    void validate() const {
        require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, "MalformedHeader", "non-positive dims");
        require(spacing[0] > 0 && spacing[1] > 0 && spacing[2] > 0, "MalformedHeader",
                "non-positive spacing");
        require(orientation_valid(orientation), "MalformedHeader", "invalid orientation codes");
        require(stored_count() == voxel_count(), "TruncatedFile",
                "voxel payload does not match dims");
    }

    float value_at(std::size_t flat) const {
        return std::visit([&](const auto& v) { return static_cast<float>(v[flat]); }, voxels);
    }

    std::size_t flat_index(std::size_t x, std::size_t y, std::size_t z) const {
        return (z * dims[1] + y) * dims[0] + x;
    }

    std::vector<float> to_float() const {
        std::vector<float> out(voxel_count());
        std::visit(
            [&](const auto& v) {
                for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
            },
            voxels);
        return out;
    }

    bool equals(const Volume& o) const {
        return dims == o.dims && spacing == o.spacing && element_type == o.element_type &&
               orientation == o.orientation && voxels == o.voxels;
    }
};

inline Volume make_volume(std::array<std::size_t, 3> dims, ElementType t,
                          std::array<double, 3> spacing = {1.0, 1.0, 1.0}) {
    Volume v;
    v.dims = dims;
    v.spacing = spacing;
    v.element_type = t;
    const std::size_t n = v.voxel_count();
    switch (t) {
        case ElementType::U8: v.voxels = std::vector<std::uint8_t>(n); break;
        case ElementType::I16: v.voxels = std::vector<std::int16_t>(n); break;
        case ElementType::F32: v.voxels = std::vector<float>(n); break;
    }
    return v;
}

// Permute/flip storage axes so they run Right-Anterior-Superior. Idempotent;
// preserves the voxel multiset and dim product.
inline Volume reorient_canonical(const Volume& v) {
    require(orientation_valid(v.orientation), "MalformedHeader", "invalid orientation codes");
    if (v.orientation == kCanonicalOrientation) return v;

    // perm[a] = storage axis that carries anatomical axis a.
    std::array<std::size_t, 3> perm{};
    std::array<int, 3> sign{};
    for (std::size_t s = 0; s < 3; ++s) {
        perm[static_cast<std::size_t>(v.orientation[s].axis)] = s;
        sign[static_cast<std::size_t>(v.orientation[s].axis)] = v.orientation[s].sign;
    }

    Volume out = make_volume({v.dims[perm[0]], v.dims[perm[1]], v.dims[perm[2]]}, v.element_type,
                             {v.spacing[perm[0]], v.spacing[perm[1]], v.spacing[perm[2]]});

    std::visit(
        [&](const auto& src) {
            auto& dst = std::get<std::decay_t<decltype(src)>>(out.voxels);
            std::array<std::size_t, 3> idx{};  // source indices
            for (idx[2] = 0; idx[2] < v.dims[2]; ++idx[2])
                for (idx[1] = 0; idx[1] < v.dims[1]; ++idx[1])
                    for (idx[0] = 0; idx[0] < v.dims[0]; ++idx[0]) {
                        std::array<std::size_t, 3> o{};
                        for (std::size_t a = 0; a < 3; ++a) {
                            const std::size_t s = perm[a];
                            o[a] = sign[a] > 0 ? idx[s] : v.dims[s] - 1 - idx[s];
                        }
                        dst[out.flat_index(o[0], o[1], o[2])] =
                            src[v.flat_index(idx[0], idx[1], idx[2])];
                    }
        },
        v.voxels);
    return out;
}

} // namespace nbad
