#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dwiboot/volume.hpp"

namespace dwiboot {

/// Read a single-file NIfTI-1 volume (.nii, optionally gzip-compressed;
/// gzip is detected by the 0x1F8B prefix). Little- and big-endian headers
/// are accepted; data is converted to doubles, applying scl_slope/scl_inter
/// when scl_slope is nonzero. dim[0] must be 3 or 4.
Volume4D read_nifti(const std::string& path);

/// Same, from an in-memory uncompressed byte stream.
Volume4D read_nifti_from_buffer(const std::vector<std::uint8_t>& bytes);

/// Write a little-endian single-file NIfTI-1: 348-byte header, 4-byte
/// extension pad, vox_offset 352, scl_slope 1, scl_inter 0. A ".gz" suffix
/// selects gzip compression. Values that do not fit the integer dtype are
/// an error, never clamped.
void write_nifti(const Volume4D& volume, const std::string& path, DiskDtype dtype);

inline void write_nifti(const Volume4D& volume, const std::string& path) {
    write_nifti(volume, path, volume.dtype_on_disk);
}

/// Load a 3D (or single-channel 4D) volume as a mask: voxels > 0.5 are in.
Mask read_mask(const std::string& path);

void write_mask(const Mask& mask, const std::string& path,
                std::array<double, 3> spacing = {1.0, 1.0, 1.0});

} // namespace dwiboot
