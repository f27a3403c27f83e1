#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "nbad/augment.hpp"
#include "nbad/rng.hpp"

using namespace nbad;

namespace {

Tensor ramp(std::size_t c, std::size_t h, std::size_t w) {
    Tensor t({c, h, w});
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(i);
    return t;
}

Tensor random_image(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
    Tensor t({c, h, w});
    Rng rng(seed);
    for (auto& x : t.data) x = static_cast<float>(rng.uniform());
    return t;
}

} // namespace

TEST_CASE("mirror flips exactly one axis") {
    Tensor img({1, 2, 3});
    img.data = {1, 2, 3, 4, 5, 6};

    const Tensor h = mirror(img, MirrorAxis::Horizontal);
    CHECK(h.data == std::vector<float>{3, 2, 1, 6, 5, 4});

    const Tensor v = mirror(img, MirrorAxis::Vertical);
    CHECK(v.data == std::vector<float>{4, 5, 6, 1, 2, 3});

    SECTION("mirror is an involution") {
        const Tensor x = random_image(3, 5, 7, 2);
        CHECK(mirror(mirror(x, MirrorAxis::Horizontal), MirrorAxis::Horizontal).data == x.data);
        CHECK(mirror(mirror(x, MirrorAxis::Vertical), MirrorAxis::Vertical).data == x.data);
    }
    SECTION("the two mirrors commute") {
        const Tensor x = random_image(1, 4, 6, 3);
        CHECK(mirror(mirror(x, MirrorAxis::Horizontal), MirrorAxis::Vertical).data ==
              mirror(mirror(x, MirrorAxis::Vertical), MirrorAxis::Horizontal).data);
    }
}

TEST_CASE("scale_jitter resizes the shorter side into the configured range") {
    const Tensor img = random_image(3, 64, 80, 5);
    SECTION("degenerate range is exact") {
        Rng rng(1);
        const Tensor out = scale_jitter(img, rng, 1.0, 1.0, 64);
        CHECK(out.shape == std::vector<std::size_t>{3, 64, 80});
        CHECK(out.data == img.data);  // identity resize
    }
    SECTION("draws stay inside [lo*base, hi*base] and preserve aspect") {
        Rng rng(7);
        for (int t = 0; t < 100; ++t) {
            const Tensor out = scale_jitter(img, rng, 1.0, 1.25, 64);
            const std::size_t short_side = std::min(out.shape[1], out.shape[2]);
            CHECK(short_side >= 64);
            CHECK(short_side <= 80);
            // aspect ratio preserved to rounding
            const double r = static_cast<double>(short_side) / 64.0;
            CHECK(out.shape[2] == static_cast<std::size_t>(std::llround(r * 80.0)));
        }
    }
    SECTION("same seed, same output") {
        Rng a(11), b(11);
        CHECK(scale_jitter(img, a, 1.0, 1.25, 64).data ==
              scale_jitter(img, b, 1.0, 1.25, 64).data);
    }
}

TEST_CASE("crops") {
    const Tensor img = ramp(1, 4, 4);
    SECTION("full-size random crop is the identity") {
        Rng rng(1);
        CHECK(random_crop(img, rng, 4, 4).data == img.data);
    }
    SECTION("3x3 crops enumerate the four possible offsets") {
        std::set<std::vector<float>> expected;
        for (std::size_t oy = 0; oy <= 1; ++oy)
            for (std::size_t ox = 0; ox <= 1; ++ox)
                expected.insert(crop_at(img, oy, ox, 3, 3).data);
        REQUIRE(expected.size() == 4);
        Rng rng(3);
        std::set<std::vector<float>> seen;
        for (int t = 0; t < 200; ++t) seen.insert(random_crop(img, rng, 3, 3).data);
        CHECK(seen == expected);
    }
    SECTION("center crop picks the floor-centered window") {
        const Tensor c = center_crop(img, 2, 2);
        CHECK(c.data == crop_at(img, 1, 1, 2, 2).data);
        const Tensor odd = center_crop(ramp(1, 5, 5), 3, 3);
        CHECK(odd.data == crop_at(ramp(1, 5, 5), 1, 1, 3, 3).data);
    }
    SECTION("oversized crops are rejected") {
        Rng rng(1);
        CHECK_THROWS_WITH(random_crop(img, rng, 5, 4), Catch::Matchers::ContainsSubstring("CropTooLarge"));
        CHECK_THROWS_WITH(center_crop(img, 4, 5), Catch::Matchers::ContainsSubstring("CropTooLarge"));
    }
}

TEST_CASE("augment_image pipeline") {
    AugmentConfig cfg;
    cfg.crop_h = cfg.crop_w = 32;
    cfg.base_short_side = 40;
    const Tensor img = random_image(3, 40, 48, 9);

    SECTION("output shape is always the crop size") {
        Rng rng(2);
        for (int t = 0; t < 20; ++t) {
            const Tensor out = augment_image(img, cfg, rng);
            CHECK(out.shape == std::vector<std::size_t>{3, 32, 32});
        }
    }
    SECTION("deterministic per RNG state") {
        Rng a(5), b(5);
        CHECK(augment_image(img, cfg, a).data == augment_image(img, cfg, b).data);
        const auto sa = a.state();
        CHECK(sa == b.state());
    }
    SECTION("disabled augmentation is a pure center crop") {
        cfg.enabled = false;
        Rng rng(4);
        const auto st = rng.state();
        const Tensor out = augment_image(img, cfg, rng);
        CHECK(rng.state() == st);  // no random draws on the eval path
        CHECK(out.data == center_crop(img, 32, 32).data);
    }
    SECTION("disabled path resizes undersized images up to the base side") {
        cfg.enabled = false;
        Rng rng(4);
        const Tensor small = random_image(3, 20, 24, 6);
        const Tensor out = augment_image(small, cfg, rng);
        CHECK(out.shape == std::vector<std::size_t>{3, 32, 32});
    }
    SECTION("identity configuration returns a crop of the source") {
        cfg.scale_lo = cfg.scale_hi = 1.0;
        cfg.mirror_h_prob = cfg.mirror_v_prob = 0.0;
        Rng rng(8);
        const Tensor out = augment_image(img, cfg, rng);
        // every output pixel must exist somewhere in a source window
        bool found = false;
        for (std::size_t oy = 0; oy + 32 <= 40 && !found; ++oy)
            for (std::size_t ox = 0; ox + 32 <= 48 && !found; ++ox)
                found = crop_at(img, oy, ox, 32, 32).data == out.data;
        CHECK(found);
    }
    SECTION("invalid configurations are rejected") {
        Rng rng(1);
        AugmentConfig bad = cfg;
        bad.scale_lo = 0.0;
        CHECK_THROWS_WITH(augment_image(img, bad, rng), Catch::Matchers::ContainsSubstring("ValueOutOfRange"));
        bad = cfg;
        bad.mirror_h_prob = 1.5;
        CHECK_THROWS_WITH(augment_image(img, bad, rng), Catch::Matchers::ContainsSubstring("ValueOutOfRange"));
        bad = cfg;
        bad.crop_h = 64;  // larger than scale_lo * base_short_side
        CHECK_THROWS_WITH(augment_image(img, bad, rng), Catch::Matchers::ContainsSubstring("CropTooLarge"));
    }
}
