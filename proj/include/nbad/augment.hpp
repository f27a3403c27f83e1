#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "nbad/dataset.hpp"
#include "nbad/error.hpp"
#include "nbad/rng.hpp"
#include "nbad/tensor.hpp"

namespace nbad {

struct AugmentConfig {
    std::size_t crop_h = 224, crop_w = 224;
    double scale_lo = 1.0, scale_hi = 1.25;
    std::size_t base_short_side = 256;  // shorter side before the scale multiplier
    double mirror_h_prob = 0.5, mirror_v_prob = 0.5;
    bool enabled = true;

    void validate() const {
        require(scale_lo > 0 && scale_lo <= scale_hi, "ValueOutOfRange", "bad scale range");
        require(mirror_h_prob >= 0 && mirror_h_prob <= 1 && mirror_v_prob >= 0 && mirror_v_prob <= 1,
                "ValueOutOfRange", "mirror probabilities must be in [0,1]");
        require(crop_h > 0 && crop_w > 0, "ValueOutOfRange", "bad crop size");
        const auto min_side = static_cast<std::size_t>(
            std::llround(scale_lo * static_cast<double>(base_short_side)));
        require(std::min(crop_h, crop_w) <= min_side, "ValueOutOfRange",
                "crop does not fit the smallest scaled image");
    }
};

enum class MirrorAxis { Horizontal, Vertical };

// horizontal reverses columns, vertical reverses rows
template <class T>
TensorT<T> mirror(const TensorT<T>& img, MirrorAxis axis) {
    require(img.rank() == 3, "ValueOutOfRange", "mirror expects CxHxW");
    const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    TensorT<T> out(img.shape);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const std::size_t sy = axis == MirrorAxis::Vertical ? h - 1 - y : y;
                const std::size_t sx = axis == MirrorAxis::Horizontal ? w - 1 - x : x;
                out.data[(ch * h + y) * w + x] = img.data[(ch * h + sy) * w + sx];
            }
    return out;
}

// Draw s ~ U[lo,hi]; resize so the shorter side becomes
// round(s * base_short_side), preserving aspect ratio.
template <class T>
TensorT<T> scale_jitter(const TensorT<T>& img, Rng& rng, double lo, double hi,
                        std::size_t base_short_side) {
    require(img.rank() == 3, "ValueOutOfRange", "scale_jitter expects CxHxW");
    const double s = rng.uniform(lo, hi);
    const auto target =
        static_cast<std::size_t>(std::llround(s * static_cast<double>(base_short_side)));
    const std::size_t h = img.shape[1], w = img.shape[2];
    const std::size_t short_side = std::min(h, w);
    const double ratio = static_cast<double>(target) / static_cast<double>(short_side);
    const auto nh = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(h))));
    const auto nw = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(w))));
    return resize_bilinear_chw(img, nh, nw);
}

template <class T>
TensorT<T> crop_at(const TensorT<T>& img, std::size_t off_y, std::size_t off_x, std::size_t out_h,
                   std::size_t out_w) {
    const std::size_t c = img.shape[0], h = img.shape[1], w = img.shape[2];
    require(off_y + out_h <= h && off_x + out_w <= w, "CropTooLarge", "crop exceeds image");
    TensorT<T> out({c, out_h, out_w});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < out_h; ++y)
            for (std::size_t x = 0; x < out_w; ++x)
                out.data[(ch * out_h + y) * out_w + x] =
                    img.data[(ch * h + off_y + y) * w + off_x + x];
    return out;
}

template <class T>
TensorT<T> random_crop(const TensorT<T>& img, Rng& rng, std::size_t out_h, std::size_t out_w) {
    require(img.rank() == 3, "ValueOutOfRange", "random_crop expects CxHxW");
    require(out_h <= img.shape[1] && out_w <= img.shape[2], "CropTooLarge",
            "crop larger than image");
    const std::size_t oy = rng.below(img.shape[1] - out_h + 1);
    const std::size_t ox = rng.below(img.shape[2] - out_w + 1);
    return crop_at(img, oy, ox, out_h, out_w);
}

template <class T>
TensorT<T> center_crop(const TensorT<T>& img, std::size_t out_h, std::size_t out_w) {
    require(out_h <= img.shape[1] && out_w <= img.shape[2], "CropTooLarge",
            "crop larger than image");
    return crop_at(img, (img.shape[1] - out_h) / 2, (img.shape[2] - out_w) / 2, out_h, out_w);
}

// Pipeline: scale_jitter -> random_crop -> mirror(h?) -> mirror(v?).
// With enabled=false only a deterministic center crop is applied (eval path);
// if the image is smaller than the crop it is first resized to the base side.
template <class T>
TensorT<T> augment_image(const TensorT<T>& img, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!cfg.enabled) {
        TensorT<T> x = img;
        if (x.shape[1] < cfg.crop_h || x.shape[2] < cfg.crop_w) {
            const std::size_t short_side = std::min(x.shape[1], x.shape[2]);
            const double r = static_cast<double>(cfg.base_short_side) / static_cast<double>(short_side);
            x = resize_bilinear_chw(x, static_cast<std::size_t>(std::llround(r * static_cast<double>(x.shape[1]))),
                                    static_cast<std::size_t>(std::llround(r * static_cast<double>(x.shape[2]))));
        }
        return center_crop(x, cfg.crop_h, cfg.crop_w);
    }
    TensorT<T> x = scale_jitter(img, rng, cfg.scale_lo, cfg.scale_hi, cfg.base_short_side);
    x = random_crop(x, rng, cfg.crop_h, cfg.crop_w);
    if (rng.uniform() < cfg.mirror_h_prob) x = mirror(x, MirrorAxis::Horizontal);
    if (rng.uniform() < cfg.mirror_v_prob) x = mirror(x, MirrorAxis::Vertical);
    return x;
}

} // namespace nbad
