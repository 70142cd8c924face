#include "lungcam/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

#include "lungcam/digest.hpp"
#include "lungcam/files.hpp"
#include "lungcam/kv_text.hpp"

namespace lungcam {

namespace fs = std::filesystem;

float window_value(int hu, int lo, int hi) {
    if (lo >= hi) throw ArgumentError("window bounds require lo < hi");
    const double v = (static_cast<double>(hu) - lo) / (static_cast<double>(hi) - lo);
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

NormalizedVolume window_normalize(const CtVolume& vol, int lo, int hi) {
    if (lo >= hi) throw ArgumentError("window bounds require lo < hi");
    NormalizedVolume out(vol.dims(), vol.spacing(), vol.case_id());
    auto src = vol.voxels();
    auto dst = out.voxels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = window_value(src[i], lo, hi);
    return out;
}

namespace {

template <typename Kind>
Image slice_of(const Volume<Kind>& vol, int z) {
    if (z < 0 || z >= vol.dims().nz) {
        throw ArgumentError("slice index " + std::to_string(z) + " outside [0, " + std::to_string(vol.dims().nz) + ")");
    }
    const auto plane = vol.plane(z);
    return Image(vol.dims().nx, vol.dims().ny, std::vector<float>(plane.begin(), plane.end()));
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

template <typename T>
void append_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(const char* p) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

template <typename Kind>
void save_impl(const fs::path& path, const Volume<Kind>& vol) {
    using T = typename Kind::value_type;
    const fs::path payload = payload_path_for(path);
    std::string raw;
    raw.reserve(vol.voxels().size() * sizeof(T));
    for (T v : vol.voxels()) append_le(raw, v);

    std::ostringstream hdr;
    hdr << "# lungcam volume header\n"
        << "dims: " << vol.dims().nx << ' ' << vol.dims().ny << ' ' << vol.dims().nz << '\n'
        << "spacing: " << format_double(vol.spacing().sx) << ' ' << format_double(vol.spacing().sy) << ' '
        << format_double(vol.spacing().sz) << '\n'
        << "dtype: " << Kind::dtype << '\n'
        << "order: zyx\n"
        << "endian: little\n"
        << "case_id: " << vol.case_id() << '\n'
        << "payload: " << payload.filename().string() << '\n';

    write_file_atomic(payload, raw);
    write_file_atomic(path, hdr.str());
}

template <typename Kind>
void check_values(const Volume<Kind>& vol, const fs::path& path) {
    if constexpr (std::is_same_v<Kind, MaskKind>) {
        for (auto v : vol.voxels())
            if (v > 1) throw FormatError(path.string() + ": mask voxel outside {0,1}");
    } else if constexpr (std::is_same_v<Kind, HeatmapKind> || std::is_same_v<Kind, NormalizedKind>) {
        for (auto v : vol.voxels())
            if (!(v >= 0.0f && v <= 1.0f)) throw FormatError(path.string() + ": heatmap voxel outside [0,1]");
    }
}

template <typename Kind>
Volume<Kind> load_impl(const fs::path& path) {
    using T = typename Kind::value_type;
    if (!fs::exists(path)) throw IoError("volume header not found: " + path.string());
    const auto hdr = KeyValueText::load(path);

    const auto dims_f = hdr.fields("dims");
    const auto spacing_f = hdr.fields("spacing");
    if (dims_f.size() != 3 || spacing_f.size() != 3) {
        throw FormatError(path.string() + ": dims and spacing need three values each");
    }
    Dims dims;
    dims.nx = static_cast<int>(parse_int(dims_f[0], "nx"));
    dims.ny = static_cast<int>(parse_int(dims_f[1], "ny"));
    dims.nz = static_cast<int>(parse_int(dims_f[2], "nz"));
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) throw FormatError(path.string() + ": non-positive dims");
    const Spacing spacing{parse_double(spacing_f[0], "sx"), parse_double(spacing_f[1], "sy"),
                          parse_double(spacing_f[2], "sz")};
    if (!(spacing.sx > 0.0) || !(spacing.sy > 0.0) || !(spacing.sz > 0.0)) {
        throw FormatError(path.string() + ": non-positive spacing");
    }
    if (hdr.get("dtype") != Kind::dtype) {
        throw FormatError(path.string() + ": dtype '" + hdr.get("dtype") + "', expected '" + Kind::dtype + "'");
    }
    if (hdr.get_or("order", "zyx") != "zyx") throw FormatError(path.string() + ": unsupported voxel order");
    if (hdr.get_or("endian", "little") != "little") throw FormatError(path.string() + ": unsupported endianness");

    const fs::path payload = path.parent_path() / hdr.get("payload");
    const std::string raw = read_file(payload);
    const std::size_t expected = dims.count() * sizeof(T);
    if (raw.size() != expected) {
        throw FormatError(payload.string() + ": payload has " + std::to_string(raw.size()) + " bytes, header implies " +
                          std::to_string(expected));
    }
    std::vector<T> voxels(dims.count());
    for (std::size_t i = 0; i < voxels.size(); ++i) voxels[i] = read_le<T>(raw.data() + i * sizeof(T));

    Volume<Kind> vol(dims, spacing, std::move(voxels), hdr.get_or("case_id", ""));
    check_values(vol, path);
    return vol;
}

}  // namespace

Image extract_slice(const NormalizedVolume& vol, int z) { return slice_of(vol, z); }
Image extract_slice(const HeatmapVolume& vol, int z) { return slice_of(vol, z); }
Image extract_slice(const MaskVolume& vol, int z) { return slice_of(vol, z); }

fs::path payload_path_for(const fs::path& header) {
    fs::path p = header;
    p.replace_extension(".ctraw");
    return p;
}

void save_volume(const fs::path& path, const CtVolume& vol) { save_impl(path, vol); }
void save_volume(const fs::path& path, const MaskVolume& vol) {
    check_values(vol, path);
    save_impl(path, vol);
}
void save_volume(const fs::path& path, const HeatmapVolume& vol) {
    check_values(vol, path);
    save_impl(path, vol);
}

CtVolume load_volume(const fs::path& path) { return load_impl<CtKind>(path); }
MaskVolume load_mask(const fs::path& path) { return load_impl<MaskKind>(path); }
HeatmapVolume load_heatmap(const fs::path& path) { return load_impl<HeatmapKind>(path); }

std::string volume_digest(const fs::path& header) {
    const auto hdr = KeyValueText::load(header);
    return sha256_hex(read_file(header) + read_file(header.parent_path() / hdr.get("payload")));
}

std::size_t count_set(const MaskVolume& mask) {
    return static_cast<std::size_t>(std::count(mask.voxels().begin(), mask.voxels().end(), std::uint8_t{1}));
}

}  // namespace lungcam
