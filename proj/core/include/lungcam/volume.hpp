#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lungcam/error.hpp"
#include "lungcam/image.hpp"

namespace lungcam {

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    std::size_t plane() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    bool operator==(const Dims&) const = default;
};

/// Voxel spacing in millimetres.
struct Spacing {
    double sx = 1.0;
    double sy = 1.0;
    double sz = 1.0;

    bool operator==(const Spacing&) const = default;
};

// Volume kinds. Each names the on-disk dtype and the value invariant.
struct CtKind {
    using value_type = std::int16_t;
    static constexpr const char* dtype = "int16";
};
struct MaskKind {
    using value_type = std::uint8_t;
    static constexpr const char* dtype = "uint8";
};
struct HeatmapKind {
    using value_type = float;
    static constexpr const char* dtype = "float32";
};
struct NormalizedKind {
    using value_type = float;
    static constexpr const char* dtype = "float32";
};

/// Dense 3D grid stored z-major, then y, then x (x fastest).
template <typename Kind>
class Volume {
public:
    using value_type = typename Kind::value_type;
    using kind = Kind;

    Volume() = default;

    Volume(Dims dims, Spacing spacing, std::string case_id = {})
        : Volume(dims, spacing, std::vector<value_type>(checked_count(dims)), std::move(case_id)) {}

    Volume(Dims dims, Spacing spacing, std::vector<value_type> voxels, std::string case_id = {})
        : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)), case_id_(std::move(case_id)) {
        if (voxels_.size() != checked_count(dims_)) {
            throw ShapeError("voxel count " + std::to_string(voxels_.size()) + " does not match dims " +
                             std::to_string(dims_.nx) + "x" + std::to_string(dims_.ny) + "x" +
                             std::to_string(dims_.nz));
        }
        if (!(spacing_.sx > 0.0) || !(spacing_.sy > 0.0) || !(spacing_.sz > 0.0)) {
            throw ArgumentError("voxel spacing must be strictly positive");
        }
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const std::string& case_id() const { return case_id_; }
    void set_case_id(std::string id) { case_id_ = std::move(id); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }
    value_type& at(int x, int y, int z) { return voxels_[index(x, y, z)]; }
    value_type at(int x, int y, int z) const { return voxels_[index(x, y, z)]; }

    std::span<value_type> voxels() { return voxels_; }
    std::span<const value_type> voxels() const { return voxels_; }

    std::span<value_type> plane(int z) { return std::span<value_type>(voxels_).subspan(z * dims_.plane(), dims_.plane()); }
    std::span<const value_type> plane(int z) const {
        return std::span<const value_type>(voxels_).subspan(z * dims_.plane(), dims_.plane());
    }

    bool operator==(const Volume&) const = default;

private:
    static std::size_t checked_count(const Dims& d) {
        if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw ArgumentError("volume dims must be positive");
        return d.count();
    }

    Dims dims_;
    Spacing spacing_;
    std::vector<value_type> voxels_;
    std::string case_id_;
};

using CtVolume = Volume<CtKind>;
using MaskVolume = Volume<MaskKind>;
using HeatmapVolume = Volume<HeatmapKind>;
using NormalizedVolume = Volume<NormalizedKind>;

/// Product of the three spacings, in mm^3.
template <typename Kind>
double voxel_volume(const Volume<Kind>& vol) {
    const auto& s = vol.spacing();
    return s.sx * s.sy * s.sz;
}

/// Number of voxels equal to 1.
std::size_t count_set(const MaskVolume& mask);

}  // namespace lungcam
