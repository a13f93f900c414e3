#include "dwiboot/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

#include "dwiboot/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "NIfTI writer emits native byte order and assumes a little-endian host");

namespace dwiboot {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;    // must be 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must pack to 348 bytes");

template <typename T>
T bswap(T v) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

void swap_header(Nifti1Header& h) {
    h.sizeof_hdr = bswap(h.sizeof_hdr);
    h.extents = bswap(h.extents);
    h.session_error = bswap(h.session_error);
    for (auto& d : h.dim) d = bswap(d);
    h.intent_p1 = bswap(h.intent_p1);
    h.intent_p2 = bswap(h.intent_p2);
    h.intent_p3 = bswap(h.intent_p3);
    h.intent_code = bswap(h.intent_code);
    h.datatype = bswap(h.datatype);
    h.bitpix = bswap(h.bitpix);
    h.slice_start = bswap(h.slice_start);
    for (auto& p : h.pixdim) p = bswap(p);
    h.vox_offset = bswap(h.vox_offset);
    h.scl_slope = bswap(h.scl_slope);
    h.scl_inter = bswap(h.scl_inter);
    h.slice_end = bswap(h.slice_end);
    h.cal_max = bswap(h.cal_max);
    h.cal_min = bswap(h.cal_min);
    h.slice_duration = bswap(h.slice_duration);
    h.toffset = bswap(h.toffset);
    h.glmax = bswap(h.glmax);
    h.glmin = bswap(h.glmin);
    h.qform_code = bswap(h.qform_code);
    h.sform_code = bswap(h.sform_code);
    h.quatern_b = bswap(h.quatern_b);
    h.quatern_c = bswap(h.quatern_c);
    h.quatern_d = bswap(h.quatern_d);
    h.qoffset_x = bswap(h.qoffset_x);
    h.qoffset_y = bswap(h.qoffset_y);
    h.qoffset_z = bswap(h.qoffset_z);
    for (auto& v : h.srow_x) v = bswap(v);
    for (auto& v : h.srow_y) v = bswap(v);
    for (auto& v : h.srow_z) v = bswap(v);
}

std::size_t dtype_size(std::int16_t code) {
    switch (code) {
        case 2: return 1;   // uint8
        case 4: return 2;   // int16
        case 16: return 4;  // float32
        case 64: return 8;  // float64
        default:
            throw InputError("unsupported NIfTI datatype code " + std::to_string(code));
    }
}

double decode_sample(const std::uint8_t* p, std::int16_t code, bool swap) {
    switch (code) {
        case 2:
            return double(*p);
        case 4: {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            if (swap) v = bswap(v);
            return double(v);
        }
        case 16: {
            float v;
            std::memcpy(&v, p, 4);
            if (swap) v = bswap(v);
            return double(v);
        }
        case 64: {
            double v;
            std::memcpy(&v, p, 8);
            if (swap) v = bswap(v);
            return v;
        }
        default:
            throw InputError("unsupported NIfTI datatype code " + std::to_string(code));
    }
}

std::array<double, 16> affine_from_header(const Nifti1Header& h) {
    std::array<double, 16> a{};
    a[15] = 1.0;
    if (h.sform_code > 0) {
        for (int j = 0; j < 4; ++j) {
            a[0 * 4 + j] = h.srow_x[j];
            a[1 * 4 + j] = h.srow_y[j];
            a[2 * 4 + j] = h.srow_z[j];
        }
        return a;
    }
    if (h.qform_code > 0) {
        const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        double a0 = 1.0 - (b * b + c * c + d * d);
        a0 = a0 < 0.0 ? 0.0 : std::sqrt(a0);
        const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
        const double dx = h.pixdim[1], dy = h.pixdim[2], dz = h.pixdim[3] * qfac;
        a[0] = (a0 * a0 + b * b - c * c - d * d) * dx;
        a[1] = (2 * b * c - 2 * a0 * d) * dy;
        a[2] = (2 * b * d + 2 * a0 * c) * dz;
        a[4] = (2 * b * c + 2 * a0 * d) * dx;
        a[5] = (a0 * a0 + c * c - b * b - d * d) * dy;
        a[6] = (2 * c * d - 2 * a0 * b) * dz;
        a[8] = (2 * b * d - 2 * a0 * c) * dx;
        a[9] = (2 * c * d + 2 * a0 * b) * dy;
        a[10] = (a0 * a0 + d * d - b * b - c * c) * dz;
        a[3] = h.qoffset_x;
        a[7] = h.qoffset_y;
        a[11] = h.qoffset_z;
        return a;
    }
    a[0] = h.pixdim[1];
    a[5] = h.pixdim[2];
    a[10] = h.pixdim[3];
    return a;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw InputError("cannot open '" + path + "'");
    probe.close();
    // gzread passes non-gzip files through verbatim, which also covers
    // the plain .nii case.
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw InputError("cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes;
    std::uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(gz, buf, sizeof(buf))) > 0)
        bytes.insert(bytes.end(), buf, buf + n);
    const bool ok = n == 0;
    gzclose(gz);
    if (!ok) throw InputError("failed to decompress '" + path + "'");
    return bytes;
}

} // namespace

Volume4D read_nifti_from_buffer(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(Nifti1Header))
        throw InputError("NIfTI stream shorter than the 348-byte header");

    Nifti1Header h;
    std::memcpy(&h, bytes.data(), sizeof(h));
    bool swap = false;
    if (h.sizeof_hdr != 348) {
        if (bswap(h.sizeof_hdr) == 348) {
            swap = true;
            swap_header(h);
        } else if (h.sizeof_hdr == 540 || bswap(h.sizeof_hdr) == 540) {
            throw InputError("NIfTI-2 files are not supported");
        } else {
            throw InputError("bad NIfTI header (sizeof_hdr != 348)");
        }
    }

    if (std::memcmp(h.magic, "ni1", 4) == 0)
        throw InputError("two-file NIfTI (.hdr/.img pair) is not supported");
    if (std::memcmp(h.magic, "n+1", 4) != 0)
        throw InputError("bad NIfTI magic");

    if (h.dim[0] != 3 && h.dim[0] != 4)
        throw InputError("expected a 3D or 4D volume, got dim[0] = " + std::to_string(h.dim[0]));
    const std::size_t nx = std::size_t(h.dim[1]);
    const std::size_t ny = std::size_t(h.dim[2]);
    const std::size_t nz = std::size_t(h.dim[3]);
    const std::size_t nc = h.dim[0] == 4 ? std::size_t(h.dim[4]) : 1;
    if (nx == 0 || ny == 0 || nz == 0 || nc == 0)
        throw InputError("NIfTI header declares a zero-sized dimension");

    const std::size_t elem = dtype_size(h.datatype);
    const std::size_t n_samples = nx * ny * nz * nc;
    std::size_t offset = std::size_t(h.vox_offset);
    if (offset < sizeof(Nifti1Header)) offset = sizeof(Nifti1Header);
    if (bytes.size() < offset + n_samples * elem)
        throw InputError("truncated NIfTI data section: need " +
                         std::to_string(offset + n_samples * elem) + " bytes, have " +
                         std::to_string(bytes.size()));

    Volume4D v;
    v.dims = {nx, ny, nz, nc};
    v.spacing = {double(h.pixdim[1]), double(h.pixdim[2]), double(h.pixdim[3])};
    for (auto& s : v.spacing)
        if (!(s > 0.0)) s = 1.0;
    v.affine = affine_from_header(h);
    v.dtype_on_disk = DiskDtype(h.datatype);
    v.meta.qform_code = h.qform_code;
    v.meta.sform_code = h.sform_code;
    v.meta.quatern_b = h.quatern_b;
    v.meta.quatern_c = h.quatern_c;
    v.meta.quatern_d = h.quatern_d;
    v.meta.qoffset_x = h.qoffset_x;
    v.meta.qoffset_y = h.qoffset_y;
    v.meta.qoffset_z = h.qoffset_z;
    v.meta.qfac = h.pixdim[0];
    v.meta.xyzt_units = h.xyzt_units;
    std::memcpy(v.meta.descrip.data(), h.descrip, 80);

    const bool rescale = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
    const double slope = double(h.scl_slope), inter = double(h.scl_inter);

    // Disk order is x fastest, channel slowest; internal order is
    // channel fastest.
    v.data.resize(n_samples);
    const std::uint8_t* src = bytes.data() + offset;
    const std::size_t n_vox = nx * ny * nz;
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t vox = 0; vox < n_vox; ++vox) {
            double val = decode_sample(src, std::int16_t(v.dtype_on_disk), swap);
            src += elem;
            if (rescale) val = slope * val + inter;
            v.data[vox * nc + c] = val;
        }
    }
    return v;
}

Volume4D read_nifti(const std::string& path) {
    return read_nifti_from_buffer(slurp(path));
}

namespace {

void encode_samples(const Volume4D& v, DiskDtype dtype, std::vector<std::uint8_t>& out) {
    const std::size_t nc = v.nc();
    const std::size_t n_vox = v.n_voxels();
    const std::size_t elem = dtype_size(std::int16_t(dtype));
    out.resize(n_vox * nc * elem);
    std::uint8_t* dst = out.data();
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t vox = 0; vox < n_vox; ++vox) {
            const double val = v.data[vox * nc + c];
            switch (dtype) {
                case DiskDtype::float64:
                    std::memcpy(dst, &val, 8);
                    break;
                case DiskDtype::float32: {
                    const float f = float(val);
                    std::memcpy(dst, &f, 4);
                    break;
                }
                case DiskDtype::int16: {
                    const double r = std::nearbyint(val);
                    if (!(r >= -32768.0 && r <= 32767.0))
                        throw InputError("value " + std::to_string(val) +
                                         " overflows int16; refusing to clamp");
                    const std::int16_t s = std::int16_t(r);
                    std::memcpy(dst, &s, 2);
                    break;
                }
                case DiskDtype::uint8: {
                    const double r = std::nearbyint(val);
                    if (!(r >= 0.0 && r <= 255.0))
                        throw InputError("value " + std::to_string(val) +
                                         " overflows uint8; refusing to clamp");
                    *dst = std::uint8_t(r);
                    break;
                }
            }
            dst += elem;
        }
    }
}

} // namespace

void write_nifti(const Volume4D& volume, const std::string& path, DiskDtype dtype) {
    volume.validate();
    for (std::size_t d : volume.dims)
        if (d > 32767)
            throw InputError("dimension " + std::to_string(d) + " exceeds the NIfTI-1 int16 limit");

    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 4;
    h.dim[1] = std::int16_t(volume.nx());
    h.dim[2] = std::int16_t(volume.ny());
    h.dim[3] = std::int16_t(volume.nz());
    h.dim[4] = std::int16_t(volume.nc());
    h.dim[5] = h.dim[6] = h.dim[7] = 1;
    h.datatype = std::int16_t(dtype);
    h.bitpix = std::int16_t(dtype_size(std::int16_t(dtype)) * 8);
    h.pixdim[0] = volume.meta.qfac == 0.0f ? 1.0f : volume.meta.qfac;
    h.pixdim[1] = float(volume.spacing[0]);
    h.pixdim[2] = float(volume.spacing[1]);
    h.pixdim[3] = float(volume.spacing[2]);
    h.pixdim[4] = h.pixdim[5] = h.pixdim[6] = h.pixdim[7] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = volume.meta.xyzt_units;
    std::memcpy(h.descrip, volume.meta.descrip.data(), 80);
    h.qform_code = volume.meta.qform_code;
    h.sform_code = volume.meta.sform_code;
    h.quatern_b = volume.meta.quatern_b;
    h.quatern_c = volume.meta.quatern_c;
    h.quatern_d = volume.meta.quatern_d;
    h.qoffset_x = volume.meta.qoffset_x;
    h.qoffset_y = volume.meta.qoffset_y;
    h.qoffset_z = volume.meta.qoffset_z;
    if (h.sform_code > 0) {
        // The affine is the live sform; quaternion fields are echoed verbatim.
        for (int j = 0; j < 4; ++j) {
            h.srow_x[j] = float(volume.affine[0 * 4 + j]);
            h.srow_y[j] = float(volume.affine[1 * 4 + j]);
            h.srow_z[j] = float(volume.affine[2 * 4 + j]);
        }
    }
    std::memcpy(h.magic, "n+1", 4);

    std::vector<std::uint8_t> payload;
    encode_samples(volume, dtype, payload);

    const char pad[4] = {0, 0, 0, 0};
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    if (gz) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw InputError("cannot write '" + path + "'");
        bool ok = gzwrite(f, &h, sizeof(h)) == int(sizeof(h)) &&
                  gzwrite(f, pad, 4) == 4 &&
                  (payload.empty() ||
                   gzwrite(f, payload.data(), unsigned(payload.size())) == int(payload.size()));
        ok = gzclose(f) == Z_OK && ok;
        if (!ok) throw InputError("failed writing '" + path + "'");
    } else {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw InputError("cannot write '" + path + "'");
        f.write(reinterpret_cast<const char*>(&h), sizeof(h));
        f.write(pad, 4);
        f.write(reinterpret_cast<const char*>(payload.data()),
                std::streamsize(payload.size()));
        f.flush();
        if (!f) throw InputError("failed writing '" + path + "'");
    }
}

Mask read_mask(const std::string& path) {
    const Volume4D v = read_nifti(path);
    if (v.nc() != 1)
        throw InputError("mask '" + path + "' has " + std::to_string(v.nc()) +
                         " channels; expected a 3D volume");
    Mask m;
    m.dims = {v.dims[0], v.dims[1], v.dims[2]};
    m.data.resize(v.n_voxels());
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = v.data[i] > 0.5 ? 1 : 0;
    return m;
}

void write_mask(const Mask& mask, const std::string& path, std::array<double, 3> spacing) {
    Volume4D v = Volume4D::create(mask.dims[0], mask.dims[1], mask.dims[2], 1, spacing);
    for (std::size_t i = 0; i < mask.data.size(); ++i) v.data[i] = mask.data[i] ? 1.0 : 0.0;
    write_nifti(v, path, DiskDtype::uint8);
}

} // namespace dwiboot
