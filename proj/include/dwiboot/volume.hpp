#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dwiboot {

/// On-disk sample types supported by the NIfTI layer.
enum class DiskDtype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    float32 = 16,
    float64 = 64,
};

/// Header fields carried through read/write so metadata is echoed rather
/// than invented. srow holds the three sform rows (x, y, z), 4 floats each.
struct NiftiMeta {
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 1;
    float quatern_b = 0, quatern_c = 0, quatern_d = 0;
    float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
    float qfac = 1.0f; // pixdim[0]; 0 is treated as +1
    char xyzt_units = 2; // NIFTI_UNITS_MM
    std::array<char, 80> descrip{};
};

/// Dense 4D scalar volume, 3 spatial dims by one channel dim.
///
/// Layout is channel-fastest: all channels of one voxel are contiguous,
/// element (x, y, z, c) lives at voxel_index(x, y, z) * nc + c with
/// voxel_index(x, y, z) = x + nx * (y + ny * z). That voxel linear index
/// is the one used for per-voxel random stream seeding.
/// Volumes are immutable once loaded; parallel readers are safe.
struct Volume4D {
    std::array<std::size_t, 4> dims{0, 0, 0, 0}; // nx, ny, nz, nc
    std::array<double, 3> spacing{1.0, 1.0, 1.0}; // mm
    std::array<double, 16> affine{};              // row-major 4x4 voxel-to-world
    std::vector<double> data;                     // channel-fastest
    DiskDtype dtype_on_disk = DiskDtype::float32;
    NiftiMeta meta;

    static Volume4D create(std::size_t nx, std::size_t ny, std::size_t nz, std::size_t nc,
                           std::array<double, 3> spacing = {1.0, 1.0, 1.0});

    std::size_t nx() const { return dims[0]; }
    std::size_t ny() const { return dims[1]; }
    std::size_t nz() const { return dims[2]; }
    std::size_t nc() const { return dims[3]; }
    std::size_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }

    std::size_t voxel_index(std::size_t x, std::size_t y, std::size_t z) const {
        return x + dims[0] * (y + dims[1] * z);
    }
    double& at(std::size_t x, std::size_t y, std::size_t z, std::size_t c) {
        return data[voxel_index(x, y, z) * dims[3] + c];
    }
    double at(std::size_t x, std::size_t y, std::size_t z, std::size_t c) const {
        return data[voxel_index(x, y, z) * dims[3] + c];
    }
    std::span<double> voxel(std::size_t vidx) {
        return {data.data() + vidx * dims[3], dims[3]};
    }
    std::span<const double> voxel(std::size_t vidx) const {
        return {data.data() + vidx * dims[3], dims[3]};
    }

    /// Throws InputError unless data length and spacing are consistent.
    void validate() const;
};

/// Boolean voxel mask over the spatial dims of a volume.
struct Mask {
    std::array<std::size_t, 3> dims{0, 0, 0};
    std::vector<std::uint8_t> data; // nonzero = inside

    static Mask full(std::size_t nx, std::size_t ny, std::size_t nz);
    static Mask none(std::size_t nx, std::size_t ny, std::size_t nz);

    bool contains(std::size_t vidx) const { return data[vidx] != 0; }
    std::size_t count() const;
    std::size_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }

    /// Throws InputError if spatial dims differ from the volume's.
    void require_matches(const Volume4D& v) const;
};

/// Output channel k equals input channel indices[k]; spatial metadata is
/// carried over unchanged. Indices may repeat.
Volume4D gather_channels(const Volume4D& volume, const std::vector<std::size_t>& indices);

} // namespace dwiboot
