#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nbad/error.hpp"
#include "nbad/gzip.hpp"
#include "nbad/volume.hpp"

namespace nbad {

enum class FormatKind { Nifti1, Analyze75, MetaImage, Nrrd };

enum class Endianness { Little, Big };

inline const char* format_name(FormatKind k) {
    switch (k) {
        case FormatKind::Nifti1: return "nifti1";
        case FormatKind::Analyze75: return "analyze75";
        case FormatKind::MetaImage: return "metaimage";
        case FormatKind::Nrrd: return "nrrd";
    }
    return "?";
}

// A written volume: one file, or header + raw payload for the two-file
// formats (.hdr/.img, .nhdr/.raw).
struct VolumeFile {
    Bytes primary;
    std::optional<Bytes> companion;
    std::string companion_suffix;  // e.g. ".img"
};

struct WriteOptions {
    bool gzip = false;      // NIfTI container / NRRD encoding
    bool detached = false;  // NRRD: emit .nhdr + raw data file
    std::string data_file_name = "volume.raw";
};

namespace detail {

inline bool host_is_little_endian() {
    const std::uint16_t probe = 1;
    std::uint8_t b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

template <class T>
void put_scalar(Bytes& out, T v, Endianness e) {
    std::array<std::uint8_t, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    if ((e == Endianness::Little) != host_is_little_endian())
        std::reverse(raw.begin(), raw.end());
    out.insert(out.end(), raw.begin(), raw.end());
}

template <class T>
T get_scalar(const Bytes& in, std::size_t off, bool swap) {
    require(off + sizeof(T) <= in.size(), "TruncatedFile", "header read past end of file");
    std::array<std::uint8_t, sizeof(T)> raw;
    std::memcpy(raw.data(), in.data() + off, sizeof(T));
    if (swap) std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
}

// Raw voxel payload in the requested byte order.
inline Bytes encode_voxels(const Volume& v, Endianness e) {
    Bytes out;
    out.reserve(v.voxel_count() * element_size(v.element_type));
    std::visit(
        [&](const auto& vox) {
            for (auto x : vox) put_scalar(out, x, e);
        },
        v.voxels);
    return out;
}

inline void decode_voxels(Volume& v, const Bytes& payload, std::size_t offset, Endianness e) {
    const std::size_t n = v.voxel_count();
    const std::size_t esz = element_size(v.element_type);
    require(payload.size() >= offset && payload.size() - offset >= n * esz, "TruncatedFile",
            "voxel payload shorter than dims imply");
    const bool swap = (e == Endianness::Little) != host_is_little_endian();
    std::visit(
        [&](auto& vox) {
            using V = typename std::decay_t<decltype(vox)>::value_type;
            vox.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::array<std::uint8_t, sizeof(V)> raw;
                std::memcpy(raw.data(), payload.data() + offset + i * sizeof(V), sizeof(V));
                if (swap) std::reverse(raw.begin(), raw.end());
                std::memcpy(&vox[i], raw.data(), sizeof(V));
            }
        },
        v.voxels);
}

// Signed-permutation direction matrix; column i is the RAS direction of
// storage axis i.
inline std::array<std::array<double, 3>, 3> orientation_matrix(const Orientation& o) {
    std::array<std::array<double, 3>, 3> m{};
    for (std::size_t i = 0; i < 3; ++i)
        m[static_cast<std::size_t>(o[i].axis)][i] = static_cast<double>(o[i].sign);
    return m;
}

inline Orientation orientation_from_matrix(const std::array<std::array<double, 3>, 3>& m) {
    Orientation o{};
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < 3; ++a)
            if (std::abs(m[a][i]) > std::abs(m[best][i])) best = a;
        o[i].axis = static_cast<int>(best);
        o[i].sign = m[best][i] < 0 ? -1 : 1;
    }
    require(orientation_valid(o), "MalformedHeader", "orientation matrix is not axis-aligned");
    return o;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Format detection. Rules are disjoint: gzip container and NRRD/NIfTI magics
// are checked before the magic-less Analyze heuristic.
// ---------------------------------------------------------------------------
inline FormatKind detect_format(const Bytes& head, const std::string& filename_hint = "") {
    if (looks_gzip(head)) return FormatKind::Nifti1;  // gzip is only used as a NIfTI container
    static constexpr char nrrd_magic[] = "NRRD000";
    if (head.size() >= 8 && std::memcmp(head.data(), nrrd_magic, 7) == 0 && head[7] >= '0' &&
        head[7] <= '5')
        return FormatKind::Nrrd;
    if (head.size() >= 348 && std::memcmp(head.data() + 344, "n+1\0", 4) == 0)
        return FormatKind::Nifti1;
    static constexpr char mha_key[] = "ObjectType";
    if (head.size() >= sizeof(mha_key) - 1 &&
        std::memcmp(head.data(), mha_key, sizeof(mha_key) - 1) == 0)
        return FormatKind::MetaImage;
    if (head.size() >= 4) {
        const auto le = detail::get_scalar<std::uint32_t>(head, 0, !detail::host_is_little_endian());
        const auto be = detail::get_scalar<std::uint32_t>(head, 0, detail::host_is_little_endian());
        if ((le == 348 || be == 348) && filename_hint.size() >= 4 &&
            filename_hint.substr(filename_hint.size() - 4) == ".hdr")
            return FormatKind::Analyze75;
    }
    fail("UnknownFormat", "no format rule matches '" + filename_hint + "'");
}

// ---------------------------------------------------------------------------
// NIfTI-1 / Analyze 7.5. The two share the 348-byte header layout; NIfTI adds
// the magic, vox_offset and the qform/sform orientation fields.
// ---------------------------------------------------------------------------
namespace detail {

inline std::int16_t datatype_code(ElementType t) {
    switch (t) {
        case ElementType::U8: return 2;
        case ElementType::I16: return 4;
        case ElementType::F32: return 16;
    }
    return 0;
}

inline ElementType element_from_datatype(std::int16_t code) {
    switch (code) {
        case 2: return ElementType::U8;
        case 4: return ElementType::I16;
        case 16: return ElementType::F32;
        default: fail("UnsupportedElementType", "datatype code " + std::to_string(code));
    }
}

inline Bytes build_hdr348(const Volume& v, Endianness e, bool nifti) {
    Bytes h;
    h.reserve(nifti ? 352 : 348);
    put_scalar<std::int32_t>(h, 348, e);          // sizeof_hdr
    h.resize(40, 0);                              // data_type / db_name / extents / regular...
    put_scalar<std::int16_t>(h, 3, e);            // dim[0]
    for (std::size_t i = 0; i < 3; ++i) put_scalar<std::int16_t>(h, static_cast<std::int16_t>(v.dims[i]), e);
    for (int i = 0; i < 4; ++i) put_scalar<std::int16_t>(h, 1, e);  // dim[4..7]
    h.resize(70, 0);
    put_scalar<std::int16_t>(h, datatype_code(v.element_type), e);
    put_scalar<std::int16_t>(h, static_cast<std::int16_t>(element_size(v.element_type) * 8), e);  // bitpix
    h.resize(76, 0);
    put_scalar<float>(h, 1.0f, e);  // pixdim[0]
    for (std::size_t i = 0; i < 3; ++i) put_scalar<float>(h, static_cast<float>(v.spacing[i]), e);
    for (int i = 0; i < 4; ++i) put_scalar<float>(h, 0.0f, e);
    put_scalar<float>(h, nifti ? 352.0f : 0.0f, e);  // vox_offset
    h.resize(252, 0);
    if (nifti) {
        put_scalar<std::int16_t>(h, 0, e);  // qform_code
        put_scalar<std::int16_t>(h, 1, e);  // sform_code
        h.resize(280, 0);                   // quaternion block unused
        const auto m = orientation_matrix(v.orientation);
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c)
                put_scalar<float>(h, static_cast<float>(m[r][c] * v.spacing[c]), e);
            put_scalar<float>(h, 0.0f, e);  // srow_*[3]
        }
        h.resize(344, 0);
        const char magic[4] = {'n', '+', '1', '\0'};
        h.insert(h.end(), magic, magic + 4);
        h.resize(352, 0);  // pad so vox_offset lands on a 16-byte boundary
    } else {
        h.resize(348, 0);
    }
    return h;
}

struct Hdr348 {
    bool swap = false;
    std::array<std::size_t, 3> dims{};
    std::size_t frames = 1;
    ElementType element_type = ElementType::U8;
    std::array<double, 3> spacing{};
    std::size_t vox_offset = 0;
    Orientation orientation = kCanonicalOrientation;
    bool four_d = false;
};

inline Hdr348 parse_hdr348(const Bytes& b, bool nifti) {
    require(b.size() >= 348, "TruncatedFile", "header shorter than 348 bytes");
    Hdr348 h;
    auto sizeof_hdr = get_scalar<std::int32_t>(b, 0, false);
    if (sizeof_hdr != 348) {
        h.swap = true;
        sizeof_hdr = get_scalar<std::int32_t>(b, 0, true);
        require(sizeof_hdr == 348, "MalformedHeader", "sizeof_hdr is not 348 in either byte order");
    }
    if (nifti) {
        require(std::memcmp(b.data() + 344, "n+1\0", 4) == 0, "MalformedHeader",
                std::memcmp(b.data() + 344, "ni1\0", 4) == 0
                    ? "two-file NIfTI (ni1) is not supported"
                    : "missing NIfTI magic");
    }
    const auto ndim = get_scalar<std::int16_t>(b, 40, h.swap);
    require(ndim >= 3 && ndim <= 4, "MalformedHeader", "dim[0] = " + std::to_string(ndim));
    h.four_d = ndim == 4;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto d = get_scalar<std::int16_t>(b, 42 + 2 * i, h.swap);
        require(d > 0, "MalformedHeader", "non-positive dim");
        h.dims[i] = static_cast<std::size_t>(d);
    }
    if (h.four_d) {
        const auto d = get_scalar<std::int16_t>(b, 48, h.swap);
        require(d > 0, "MalformedHeader", "non-positive dim[4]");
        h.frames = static_cast<std::size_t>(d);
    }
    h.element_type = element_from_datatype(get_scalar<std::int16_t>(b, 70, h.swap));
    for (std::size_t i = 0; i < 3; ++i) {
        const auto p = get_scalar<float>(b, 80 + 4 * i, h.swap);
        h.spacing[i] = p > 0 ? static_cast<double>(p) : 1.0;
    }
    if (nifti) {
        const auto off = get_scalar<float>(b, 108, h.swap);
        h.vox_offset = off >= 348.0f ? static_cast<std::size_t>(off) : 352;
        const auto sform = get_scalar<std::int16_t>(b, 254, h.swap);
        if (sform > 0) {
            std::array<std::array<double, 3>, 3> m{};
            for (std::size_t r = 0; r < 3; ++r)
                for (std::size_t c = 0; c < 3; ++c)
                    m[r][c] = get_scalar<float>(b, 280 + 16 * r + 4 * c, h.swap);
            h.orientation = orientation_from_matrix(m);
        }
        // qform fallback is intentionally not decoded: files we emit always
        // carry an sform, and sform-less files are treated as canonical.
    }
    return h;
}

} // namespace detail

inline VolumeFile write_nifti(const Volume& v, Endianness e, const WriteOptions& opt = {}) {
    v.validate();
    Bytes out = detail::build_hdr348(v, e, true);
    const Bytes payload = detail::encode_voxels(v, e);
    out.insert(out.end(), payload.begin(), payload.end());
    if (opt.gzip) out = gzip_compress(out);
    return {std::move(out), std::nullopt, ""};
}

inline Volume read_nifti(const Bytes& raw, std::string* warning = nullptr) {
    const Bytes* bytes = &raw;
    Bytes inflated;
    if (looks_gzip(raw)) {
        inflated = gzip_decompress(raw);
        bytes = &inflated;
    }
    const auto h = detail::parse_hdr348(*bytes, true);
    Volume v = make_volume(h.dims, h.element_type, h.spacing);
    v.orientation = h.orientation;
    if (h.four_d && warning)
        *warning = "4-d NIfTI: reading first frame of " + std::to_string(h.frames);
    detail::decode_voxels(v, *bytes, h.vox_offset,
                          h.swap == detail::host_is_little_endian() ? Endianness::Big
                                                                    : Endianness::Little);
    return v;
}

inline VolumeFile write_analyze(const Volume& v, Endianness e) {
    v.validate();
    require(v.orientation == kCanonicalOrientation, "UnsupportedElementType",
            "Analyze 7.5 cannot encode a non-canonical orientation");
    return {detail::build_hdr348(v, e, false), detail::encode_voxels(v, e), ".img"};
}

inline Volume read_analyze(const Bytes& hdr, const Bytes& img) {
    const auto h = detail::parse_hdr348(hdr, false);
    Volume v = make_volume(h.dims, h.element_type, h.spacing);
    detail::decode_voxels(v, img, 0,
                          h.swap == detail::host_is_little_endian() ? Endianness::Big
                                                                    : Endianness::Little);
    return v;
}

// ---------------------------------------------------------------------------
// MetaImage (.mha, ElementDataFile = LOCAL only).
// ---------------------------------------------------------------------------
namespace detail {

inline const char* met_type(ElementType t) {
    switch (t) {
        case ElementType::U8: return "MET_UCHAR";
        case ElementType::I16: return "MET_SHORT";
        case ElementType::F32: return "MET_FLOAT";
    }
    return "?";
}

inline std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

} // namespace detail

inline VolumeFile write_metaimage(const Volume& v, Endianness e) {
    v.validate();
    std::ostringstream h;
    h << "ObjectType = Image\n";
    h << "NDims = 3\n";
    h << "DimSize = " << v.dims[0] << ' ' << v.dims[1] << ' ' << v.dims[2] << '\n';
    h << "ElementSpacing = " << detail::fmt_double(v.spacing[0]) << ' '
      << detail::fmt_double(v.spacing[1]) << ' ' << detail::fmt_double(v.spacing[2]) << '\n';
    if (v.orientation != kCanonicalOrientation) {
        const auto m = detail::orientation_matrix(v.orientation);
        h << "TransformMatrix =";
        for (std::size_t c = 0; c < 3; ++c)  // column-per-axis, matching our reader
            for (std::size_t r = 0; r < 3; ++r) h << ' ' << m[r][c];
        h << '\n';
    }
    h << "BinaryData = True\n";
    h << "BinaryDataByteOrderMSB = " << (e == Endianness::Big ? "True" : "False") << '\n';
    h << "ElementType = " << detail::met_type(v.element_type) << '\n';
    h << "ElementDataFile = LOCAL\n";
    const std::string hs = h.str();
    Bytes out(hs.begin(), hs.end());
    const Bytes payload = detail::encode_voxels(v, e);
    out.insert(out.end(), payload.begin(), payload.end());
    return {std::move(out), std::nullopt, ""};
}

inline Volume read_metaimage(const Bytes& raw) {
    // ASCII key = value lines up to ElementDataFile, then the raw payload.
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    while (true) {
        const auto eol = std::find(raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.end(), '\n');
        require(eol != raw.end(), "MalformedHeader", "MetaImage header has no ElementDataFile");
        std::string line(raw.begin() + static_cast<std::ptrdiff_t>(pos), eol);
        pos = static_cast<std::size_t>(eol - raw.begin()) + 1;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "MalformedHeader", "MetaImage line without '=': " + line);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        kv[key] = val;
        if (key == "ElementDataFile") {
            require(val == "LOCAL", "MalformedHeader", "only ElementDataFile = LOCAL is supported");
            break;
        }
    }
    require(kv.count("NDims") && kv["NDims"] == "3", "MalformedHeader", "NDims must be 3");
    require(kv.count("DimSize") && kv.count("ElementType"), "MalformedHeader",
            "missing DimSize or ElementType");

    std::array<std::size_t, 3> dims{};
    {
        std::istringstream is(kv["DimSize"]);
        for (auto& d : dims) {
            long long x = 0;
            is >> x;
            require(!is.fail() && x > 0, "MalformedHeader", "bad DimSize");
            d = static_cast<std::size_t>(x);
        }
    }
    ElementType et;
    const std::string& t = kv["ElementType"];
    if (t == "MET_UCHAR") et = ElementType::U8;
    else if (t == "MET_SHORT") et = ElementType::I16;
    else if (t == "MET_FLOAT") et = ElementType::F32;
    else fail("UnsupportedElementType", "ElementType " + t);

    Volume v = make_volume(dims, et);
    if (kv.count("ElementSpacing")) {
        std::istringstream is(kv["ElementSpacing"]);
        for (auto& s : v.spacing) is >> s;
        require(!is.fail(), "MalformedHeader", "bad ElementSpacing");
    }
    if (kv.count("TransformMatrix")) {
        std::istringstream is(kv["TransformMatrix"]);
        std::array<std::array<double, 3>, 3> m{};
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t r = 0; r < 3; ++r) is >> m[r][c];
        require(!is.fail(), "MalformedHeader", "bad TransformMatrix");
        v.orientation = detail::orientation_from_matrix(m);
    }
    const Endianness e = (kv.count("BinaryDataByteOrderMSB") && kv["BinaryDataByteOrderMSB"] == "True")
                             ? Endianness::Big
                             : Endianness::Little;
    detail::decode_voxels(v, raw, pos, e);
    return v;
}

// ---------------------------------------------------------------------------
// NRRD: attached .nrrd (raw or gzip encoding) and detached .nhdr + raw data.
// ---------------------------------------------------------------------------
inline VolumeFile write_nrrd(const Volume& v, Endianness e, const WriteOptions& opt = {}) {
    v.validate();
    require(!(opt.detached && opt.gzip), "UnsupportedElementType",
            "detached NRRD headers are raw-encoding only");
    std::ostringstream h;
    h << "NRRD0004\n";
    switch (v.element_type) {
        case ElementType::U8: h << "type: uchar\n"; break;
        case ElementType::I16: h << "type: short\n"; break;
        case ElementType::F32: h << "type: float\n"; break;
    }
    h << "dimension: 3\n";
    h << "sizes: " << v.dims[0] << ' ' << v.dims[1] << ' ' << v.dims[2] << '\n';
    if (v.orientation == kCanonicalOrientation) {
        h << "spacings: " << detail::fmt_double(v.spacing[0]) << ' '
          << detail::fmt_double(v.spacing[1]) << ' ' << detail::fmt_double(v.spacing[2]) << '\n';
    } else {
        const auto m = detail::orientation_matrix(v.orientation);
        h << "space: right-anterior-superior\n";
        h << "space directions:";
        for (std::size_t c = 0; c < 3; ++c) {
            h << " (";
            for (std::size_t r = 0; r < 3; ++r)
                h << (r ? "," : "") << detail::fmt_double(m[r][c] * v.spacing[c]);
            h << ')';
        }
        h << '\n';
    }
    if (v.element_type != ElementType::U8)
        h << "endian: " << (e == Endianness::Big ? "big" : "little") << '\n';
    h << "encoding: " << (opt.gzip ? "gzip" : "raw") << '\n';
    if (opt.detached) h << "data file: " << opt.data_file_name << '\n';
    h << '\n';

    Bytes payload = detail::encode_voxels(v, e);
    if (opt.gzip) payload = gzip_compress(payload);
    const std::string hs = h.str();
    Bytes head(hs.begin(), hs.end());
    if (opt.detached) return {std::move(head), std::move(payload), ".raw"};
    head.insert(head.end(), payload.begin(), payload.end());
    return {std::move(head), std::nullopt, ""};
}

// Fields of interest from an NRRD header plus the payload offset.
namespace detail {
struct NrrdHeader {
    std::map<std::string, std::string> fields;
    std::size_t payload_offset = 0;
    std::string data_file;
};

inline NrrdHeader parse_nrrd_header(const Bytes& raw) {
    NrrdHeader h;
    std::size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string> {
        if (pos >= raw.size()) return std::nullopt;
        const auto eol = std::find(raw.begin() + static_cast<std::ptrdiff_t>(pos), raw.end(), '\n');
        std::string line(raw.begin() + static_cast<std::ptrdiff_t>(pos), eol);
        pos = eol == raw.end() ? raw.size() : static_cast<std::size_t>(eol - raw.begin()) + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    auto magic = next_line();
    require(magic && magic->size() >= 8 && magic->compare(0, 7, "NRRD000") == 0 &&
                (*magic)[7] >= '0' && (*magic)[7] <= '5',
            "MalformedHeader", "bad NRRD magic");
    while (auto line = next_line()) {
        if (line->empty()) break;  // blank line terminates the header
        if ((*line)[0] == '#') continue;
        const auto colon = line->find(':');
        require(colon != std::string::npos, "MalformedHeader", "NRRD line without ':'");
        std::string key = line->substr(0, colon);
        std::string val = line->substr(colon + 1);
        // "key: value" fields and "key:=value" keyed metadata; we only use the former
        if (!val.empty() && val[0] == '=') continue;
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        const auto a = val.find_first_not_of(" \t");
        val = a == std::string::npos ? std::string{} : val.substr(a);
        if (key == "data file" || key == "datafile") h.data_file = val;
        else h.fields[key] = val;
    }
    h.payload_offset = pos;
    return h;
}
} // namespace detail

inline Volume read_nrrd(const Bytes& raw, const Bytes* data_file = nullptr) {
    auto h = detail::parse_nrrd_header(raw);
    auto& f = h.fields;
    require(f.count("dimension") && f["dimension"] == "3", "MalformedHeader",
            "NRRD dimension must be 3");
    require(f.count("type") && f.count("sizes"), "MalformedHeader", "missing type or sizes");

    ElementType et;
    const std::string& t = f["type"];
    if (t == "uchar" || t == "unsigned char" || t == "uint8" || t == "uint8_t")
        et = ElementType::U8;
    else if (t == "short" || t == "signed short" || t == "int16" || t == "int16_t")
        et = ElementType::I16;
    else if (t == "float") et = ElementType::F32;
    else fail("UnsupportedElementType", "NRRD type " + t);

    std::array<std::size_t, 3> dims{};
    {
        std::istringstream is(f["sizes"]);
        for (auto& d : dims) {
            long long x = 0;
            is >> x;
            require(!is.fail() && x > 0, "MalformedHeader", "bad sizes");
            d = static_cast<std::size_t>(x);
        }
    }
    Volume v = make_volume(dims, et);
    if (f.count("spacings")) {
        std::istringstream is(f["spacings"]);
        for (auto& s : v.spacing) is >> s;
        require(!is.fail(), "MalformedHeader", "bad spacings");
    } else if (f.count("space directions")) {
        // vectors like (a,b,c); column i is storage axis i's direction
        std::string s = f["space directions"];
        for (char& c : s)
            if (c == '(' || c == ')' || c == ',') c = ' ';
        std::istringstream is(s);
        std::array<std::array<double, 3>, 3> m{};
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t r = 0; r < 3; ++r) is >> m[r][c];
        require(!is.fail(), "MalformedHeader", "bad space directions");
        for (std::size_t c = 0; c < 3; ++c) {
            double norm = 0;
            for (std::size_t r = 0; r < 3; ++r) norm += m[r][c] * m[r][c];
            norm = std::sqrt(norm);
            require(norm > 0, "MalformedHeader", "zero space direction");
            v.spacing[c] = norm;
            for (std::size_t r = 0; r < 3; ++r) m[r][c] /= norm;
        }
        v.orientation = detail::orientation_from_matrix(m);
    }

    const std::string enc = f.count("encoding") ? f["encoding"] : "raw";
    require(enc == "raw" || enc == "gzip" || enc == "gz", "MalformedHeader",
            "unsupported NRRD encoding " + enc);
    Endianness e = Endianness::Little;
    if (f.count("endian")) e = f["endian"] == "big" ? Endianness::Big : Endianness::Little;

    Bytes payload;
    std::size_t offset = 0;
    if (!h.data_file.empty()) {
        require(data_file != nullptr, "TruncatedFile", "detached NRRD data file not provided");
        require(enc == "raw", "MalformedHeader", "detached NRRD must be raw encoding");
        payload = *data_file;
    } else {
        payload.assign(raw.begin() + static_cast<std::ptrdiff_t>(h.payload_offset), raw.end());
    }
    if (enc != "raw") payload = gzip_decompress(payload);
    detail::decode_voxels(v, payload, offset, e);
    return v;
}

// ---------------------------------------------------------------------------
// Dispatchers and filesystem helpers.
// ---------------------------------------------------------------------------
inline VolumeFile write_volume(const Volume& v, FormatKind kind,
                               Endianness e = Endianness::Little, const WriteOptions& opt = {}) {
    switch (kind) {
        case FormatKind::Nifti1: return write_nifti(v, e, opt);
        case FormatKind::Analyze75: return write_analyze(v, e);
        case FormatKind::MetaImage: return write_metaimage(v, e);
        case FormatKind::Nrrd: return write_nrrd(v, e, opt);
    }
    fail("UnknownFormat", "bad format kind");
}

inline Volume read_volume(const Bytes& primary, FormatKind kind, const Bytes* companion = nullptr,
                          std::string* warning = nullptr) {
    Volume v;
    switch (kind) {
        case FormatKind::Nifti1: v = read_nifti(primary, warning); break;
        case FormatKind::Analyze75:
            require(companion != nullptr, "TruncatedFile", "Analyze 7.5 needs the .img payload");
            v = read_analyze(primary, *companion);
            break;
        case FormatKind::MetaImage: v = read_metaimage(primary); break;
        case FormatKind::Nrrd: v = read_nrrd(primary, companion); break;
    }
    v.validate();
    return v;
}

inline Bytes read_file_bytes(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    require(f.good(), "IoError", "cannot open " + p.string());
    return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& p, const Bytes& b) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    require(f.good(), "IoError", "cannot write " + p.string());
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    require(f.good(), "IoError", "short write to " + p.string());
}

// Detect, resolve companion files (.img for .hdr, the named data file for
// .nhdr) and decode.
inline Volume read_volume_file(const std::filesystem::path& path, std::string* warning = nullptr) {
    const Bytes primary = read_file_bytes(path);
    std::string hint = path.filename().string();
    if (hint.size() > 3 && hint.substr(hint.size() - 3) == ".gz")
        hint = hint.substr(0, hint.size() - 3);
    const FormatKind kind = detect_format(primary, hint);
    if (kind == FormatKind::Analyze75) {
        auto img_path = path;
        img_path.replace_extension(".img");
        const Bytes img = read_file_bytes(img_path);
        return read_volume(primary, kind, &img, warning);
    }
    if (kind == FormatKind::Nrrd) {
        const auto h = detail::parse_nrrd_header(primary);
        if (!h.data_file.empty()) {
            const Bytes data = read_file_bytes(path.parent_path() / h.data_file);
            return read_volume(primary, kind, &data, warning);
        }
    }
    return read_volume(primary, kind, nullptr, warning);
}

inline void write_volume_file(const std::filesystem::path& path, const Volume& v, FormatKind kind,
                              Endianness e = Endianness::Little, const WriteOptions& opt = {}) {
    const VolumeFile out = write_volume(v, kind, e, opt);
    write_file_bytes(path, out.primary);
    if (out.companion) {
        // The detached NRRD payload must land at the name the header records.
        const auto p = (kind == FormatKind::Nrrd && opt.detached)
                           ? path.parent_path() / opt.data_file_name
                           : std::filesystem::path(path).replace_extension(out.companion_suffix);
        write_file_bytes(p, *out.companion);
    }
}

} // namespace nbad
