#include "dwiboot/volume.hpp"

#include <numeric>
#include <string>

#include "dwiboot/errors.hpp"

namespace dwiboot {

Volume4D Volume4D::create(std::size_t nx, std::size_t ny, std::size_t nz, std::size_t nc,
                          std::array<double, 3> spacing) {
    Volume4D v;
    v.dims = {nx, ny, nz, nc};
    v.spacing = spacing;
    v.affine = {spacing[0], 0, 0, 0,
                0, spacing[1], 0, 0,
                0, 0, spacing[2], 0,
                0, 0, 0, 1};
    v.data.assign(nx * ny * nz * nc, 0.0);
    return v;
}

void Volume4D::validate() const {
    for (int i = 0; i < 4; ++i)
        if (dims[i] == 0)
            throw InputError("volume dimension " + std::to_string(i) + " is zero");
    if (data.size() != dims[0] * dims[1] * dims[2] * dims[3])
        throw InputError("volume data length " + std::to_string(data.size()) +
                         " does not match dims");
    for (int i = 0; i < 3; ++i)
        if (!(spacing[i] > 0.0))
            throw InputError("voxel spacing must be positive");
}

Mask Mask::full(std::size_t nx, std::size_t ny, std::size_t nz) {
    Mask m;
    m.dims = {nx, ny, nz};
    m.data.assign(nx * ny * nz, 1);
    return m;
}

Mask Mask::none(std::size_t nx, std::size_t ny, std::size_t nz) {
    Mask m;
    m.dims = {nx, ny, nz};
    m.data.assign(nx * ny * nz, 0);
    return m;
}

std::size_t Mask::count() const {
    return std::accumulate(data.begin(), data.end(), std::size_t{0},
                           [](std::size_t acc, std::uint8_t v) { return acc + (v != 0); });
}

void Mask::require_matches(const Volume4D& v) const {
    if (dims[0] != v.dims[0] || dims[1] != v.dims[1] || dims[2] != v.dims[2])
        throw InputError("mask dims do not match volume spatial dims");
}

Volume4D gather_channels(const Volume4D& volume, const std::vector<std::size_t>& indices) {
    volume.validate();
    for (std::size_t idx : indices)
        if (idx >= volume.nc())
            throw InputError("channel index " + std::to_string(idx) + " out of range [0, " +
                             std::to_string(volume.nc()) + ")");
    Volume4D out;
    out.dims = {volume.dims[0], volume.dims[1], volume.dims[2], indices.size()};
    out.spacing = volume.spacing;
    out.affine = volume.affine;
    out.dtype_on_disk = volume.dtype_on_disk;
    out.meta = volume.meta;
    out.data.resize(volume.n_voxels() * indices.size());
    const std::size_t nc_in = volume.nc();
    const std::size_t nc_out = indices.size();
    for (std::size_t v = 0; v < volume.n_voxels(); ++v) {
        const double* src = volume.data.data() + v * nc_in;
        double* dst = out.data.data() + v * nc_out;
        for (std::size_t k = 0; k < nc_out; ++k) dst[k] = src[indices[k]];
    }
    return out;
}

} // namespace dwiboot
