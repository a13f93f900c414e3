#include "dwiboot/metrics.hpp"

#include <string>

#include "dwiboot/errors.hpp"

namespace dwiboot {

LabelVolume LabelVolume::create(std::size_t nx, std::size_t ny, std::size_t nz,
                                std::size_t n_labels) {
    if (nx == 0 || ny == 0 || nz == 0 || n_labels == 0)
        throw InputError("label volume dims must be positive");
    LabelVolume lv;
    lv.dims = {nx, ny, nz, n_labels};
    lv.data.assign(nx * ny * nz * n_labels, 0);
    return lv;
}

LabelVolume LabelVolume::from_volume(const Volume4D& v) {
    v.validate();
    LabelVolume lv = create(v.dims[0], v.dims[1], v.dims[2], v.dims[3]);
    for (std::size_t i = 0; i < v.data.size(); ++i) lv.data[i] = v.data[i] > 0.5 ? 1 : 0;
    return lv;
}

double dice(const LabelVolume& a, const LabelVolume& b, std::size_t label) {
    if (a.dims != b.dims) throw InputError("label volumes have different dims");
    if (label >= a.n_labels())
        throw InputError("label " + std::to_string(label) + " out of range");
    std::size_t size_a = 0, size_b = 0, overlap = 0;
    const std::size_t n = a.n_voxels();
    for (std::size_t v = 0; v < n; ++v) {
        const bool in_a = a.at(v, label);
        const bool in_b = b.at(v, label);
        size_a += in_a;
        size_b += in_b;
        overlap += in_a && in_b;
    }
    if (size_a + size_b == 0) return 1.0;
    return 2.0 * double(overlap) / double(size_a + size_b);
}

double mean_dice(const LabelVolume& a, const LabelVolume& b,
                 const std::vector<std::size_t>& labels) {
    if (labels.empty()) throw InputError("mean dice needs at least one label");
    double sum = 0.0;
    for (std::size_t label : labels) sum += dice(a, b, label);
    return sum / double(labels.size());
}

SnrReport snr_report(const Volume4D& volume, const Mask& mask, double sigma) {
    if (!(sigma > 0.0)) throw InputError("SNR needs a positive sigma");
    volume.validate();
    mask.require_matches(volume);

    const std::size_t nc = volume.nc();
    std::vector<double> sums(nc, 0.0);
    std::size_t n_in = 0;
    for (std::size_t vidx = 0; vidx < volume.n_voxels(); ++vidx) {
        if (!mask.contains(vidx)) continue;
        const double* voxel = volume.data.data() + vidx * nc;
        for (std::size_t c = 0; c < nc; ++c) sums[c] += voxel[c];
        ++n_in;
    }
    if (n_in == 0) throw InputError("SNR needs a non-empty mask");

    SnrReport report;
    report.per_channel.resize(nc);
    double total = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
        report.per_channel[c] = sums[c] / double(n_in) / sigma;
        total += report.per_channel[c];
    }
    report.mean = total / double(nc);
    return report;
}

} // namespace dwiboot
