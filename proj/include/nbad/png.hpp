#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include <zlib.h>

#include "nbad/error.hpp"
#include "nbad/gzip.hpp"
#include "nbad/tensor.hpp"

namespace nbad {

// Minimal PNG codec: 8-bit grayscale/RGB, non-interlaced. The encoder uses
// filter 0 for every scanline; the decoder handles all five filter types.

namespace pngdetail {

inline void put_be32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_be32(const Bytes& b, std::size_t off) {
    require(off + 4 <= b.size(), "TruncatedFile", "PNG read past end");
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
           (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline void put_chunk(Bytes& out, const char type[4], const Bytes& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0, out.data() + start, static_cast<uInt>(out.size() - start));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

inline Bytes zlib_deflate(const Bytes& in) {
    z_stream s{};
    if (deflateInit(&s, 6) != Z_OK) fail("CompressionError", "deflateInit failed");
    Bytes out(deflateBound(&s, static_cast<uLong>(in.size())) + 16);
    s.next_in = const_cast<Bytef*>(in.data());
    s.avail_in = static_cast<uInt>(in.size());
    s.next_out = out.data();
    s.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&s, Z_FINISH);
    deflateEnd(&s);
    if (rc != Z_STREAM_END) fail("CompressionError", "deflate did not finish");
    out.resize(out.size() - s.avail_out);
    return out;
}

inline std::uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
    if (pb <= pc) return static_cast<std::uint8_t>(b);
    return static_cast<std::uint8_t>(c);
}

inline constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

} // namespace pngdetail

// image: {H,W} or {C,H,W} with C in {1,3}, values in [0,1].
// Quantization: round(value * 255).
template <class T>
Bytes export_png(const TensorT<T>& image) {
    std::size_t channels, height, width;
    if (image.rank() == 2) {
        channels = 1;
        height = image.shape[0];
        width = image.shape[1];
    } else if (image.rank() == 3 && (image.shape[0] == 1 || image.shape[0] == 3)) {
        channels = image.shape[0];
        height = image.shape[1];
        width = image.shape[2];
    } else {
        fail("ValueOutOfRange", "export_png needs an HxW or {1,3}xHxW image");
    }
    for (T v : image.data)
        require(std::isfinite(static_cast<double>(v)) && v >= T{0} && v <= T{1}, "ValueOutOfRange",
                "pixel value outside [0,1]");

    Bytes raw;  // filter byte + scanline, per row
    raw.reserve(height * (1 + width * channels));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0);
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = static_cast<double>(image.data[(c * height + y) * width + x]);
                raw.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
    }

    Bytes out(pngdetail::kSignature, pngdetail::kSignature + 8);
    Bytes ihdr;
    pngdetail::put_be32(ihdr, static_cast<std::uint32_t>(width));
    pngdetail::put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);                                      // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);                  // color type
    ihdr.push_back(0);                                      // compression
    ihdr.push_back(0);                                      // filter method
    ihdr.push_back(0);                                      // interlace
    pngdetail::put_chunk(out, "IHDR", ihdr);
    pngdetail::put_chunk(out, "IDAT", pngdetail::zlib_deflate(raw));
    pngdetail::put_chunk(out, "IEND", {});
    return out;
}

struct PngImage {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels;  // row-major, interleaved

    // {C,H,W} tensor with values in [0,1].
    Tensor to_tensor() const {
        Tensor t({channels, height, width});
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x)
                for (std::size_t c = 0; c < channels; ++c)
                    t.data[(c * height + y) * width + x] =
                        static_cast<float>(pixels[(y * width + x) * channels + c]) / 255.0f;
        return t;
    }
};

inline PngImage decode_png(const Bytes& file) {
    require(file.size() >= 8 && std::memcmp(file.data(), pngdetail::kSignature, 8) == 0,
            "MalformedHeader", "not a PNG file");
    PngImage img;
    Bytes idat;
    std::size_t pos = 8;
    bool saw_ihdr = false, saw_iend = false;
    while (pos < file.size() && !saw_iend) {
        const std::uint32_t len = pngdetail::get_be32(file, pos);
        require(pos + 12 + len <= file.size(), "TruncatedFile", "PNG chunk past end");
        const std::string type(file.begin() + static_cast<std::ptrdiff_t>(pos) + 4,
                               file.begin() + static_cast<std::ptrdiff_t>(pos) + 8);
        const std::size_t data = pos + 8;
        if (type == "IHDR") {
            img.width = pngdetail::get_be32(file, data);
            img.height = pngdetail::get_be32(file, data + 4);
            const std::uint8_t depth = file[data + 8], color = file[data + 9];
            const std::uint8_t interlace = file[data + 12];
            require(depth == 8 && (color == 0 || color == 2) && interlace == 0, "MalformedHeader",
                    "only 8-bit gray/RGB non-interlaced PNG is supported");
            img.channels = color == 0 ? 1 : 3;
            saw_ihdr = true;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), file.begin() + static_cast<std::ptrdiff_t>(data),
                        file.begin() + static_cast<std::ptrdiff_t>(data) + len);
        } else if (type == "IEND") {
            saw_iend = true;
        }
        pos = data + len + 4;  // skip crc
    }
    require(saw_ihdr && saw_iend, "TruncatedFile", "PNG missing IHDR or IEND");

    const Bytes raw = gzip_decompress(idat);  // inflateInit2(15+32) also takes zlib streams
    const std::size_t bpp = img.channels;
    const std::size_t stride = img.width * bpp;
    require(raw.size() == img.height * (stride + 1), "TruncatedFile", "PNG scanline data size");

    img.pixels.assign(img.height * stride, 0);
    for (std::size_t y = 0; y < img.height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
        std::uint8_t* dst = img.pixels.data() + y * stride;
        const std::uint8_t* up = y ? dst - stride : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int a = i >= bpp ? dst[i - bpp] : 0;
            const int b = up ? up[i] : 0;
            const int c = (up && i >= bpp) ? up[i - bpp] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += pngdetail::paeth(a, b, c); break;
                default: fail("MalformedHeader", "bad PNG filter type");
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }
    return img;
}

} // namespace nbad
