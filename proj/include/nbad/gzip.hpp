#pragma once

#include <cstdint>
#include <vector>

#include <zlib.h>

#include "nbad/error.hpp"

namespace nbad {

using Bytes = std::vector<std::uint8_t>;

inline bool looks_gzip(const Bytes& b) {
    return b.size() >= 2 && b[0] == 0x1F && b[1] == 0x8B;
}

// Fixed compression level; zlib writes mtime=0 when no gz_header is supplied,
// so output is deterministic.
inline Bytes gzip_compress(const Bytes& in) {
    z_stream s{};
    if (deflateInit2(&s, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        fail("CompressionError", "deflateInit2 failed");
    Bytes out(deflateBound(&s, static_cast<uLong>(in.size())) + 32);
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

inline Bytes gzip_decompress(const Bytes& in) {
    z_stream s{};
    if (inflateInit2(&s, 15 + 32) != Z_OK)  // accepts gzip and zlib wrappers
        fail("CompressionError", "inflateInit2 failed");
    Bytes out;
    Bytes buf(1 << 16);
    s.next_in = const_cast<Bytef*>(in.data());
    s.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        s.next_out = buf.data();
        s.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&s, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&s);
            fail("TruncatedFile", "corrupt or truncated gzip stream");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - s.avail_out));
        if (rc == Z_OK && s.avail_in == 0 && s.avail_out != 0) {
            inflateEnd(&s);
            fail("TruncatedFile", "gzip stream ended early");
        }
    }
    inflateEnd(&s);
    return out;
}

} // namespace nbad
