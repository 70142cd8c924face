#pragma once

#include <filesystem>

#include "lungcam/image.hpp"
#include "lungcam/volume.hpp"

namespace lungcam {

/// Default HU window used for lung CT.
inline constexpr int kWindowLowHu = -1000;
inline constexpr int kWindowHighHu = 0;

/// Maps HU v to clamp((v - lo) / (hi - lo), 0, 1). Throws ArgumentError if lo >= hi.
NormalizedVolume window_normalize(const CtVolume& vol, int lo = kWindowLowHu, int hi = kWindowHighHu);
float window_value(int hu, int lo = kWindowLowHu, int hi = kWindowHighHu);

/// The ny x nx plane at z as an image. Throws ArgumentError if z is out of range.
Image extract_slice(const NormalizedVolume& vol, int z);
Image extract_slice(const HeatmapVolume& vol, int z);
Image extract_slice(const MaskVolume& vol, int z);

// On-disk format: `<name>.cthdr` text header plus `<name>.ctraw` little-endian
// payload (see README). `path` is the header path; the payload path is
// recorded in the header relative to the header's directory.
void save_volume(const std::filesystem::path& path, const CtVolume& vol);
void save_volume(const std::filesystem::path& path, const MaskVolume& vol);
void save_volume(const std::filesystem::path& path, const HeatmapVolume& vol);

CtVolume load_volume(const std::filesystem::path& path);
MaskVolume load_mask(const std::filesystem::path& path);
HeatmapVolume load_heatmap(const std::filesystem::path& path);

/// Payload path that save_volume pairs with a header path.
std::filesystem::path payload_path_for(const std::filesystem::path& header);

/// SHA-256 over the header and payload bytes of a saved volume.
std::string volume_digest(const std::filesystem::path& header);

}  // namespace lungcam
