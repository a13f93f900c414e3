#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dwiboot/volume.hpp"

namespace dwiboot {

/// Multi-label segmentation: one boolean channel per label.
struct LabelVolume {
    std::array<std::size_t, 4> dims{0, 0, 0, 0}; // nx, ny, nz, n_labels
    std::vector<std::uint8_t> data;              // channel-fastest, like Volume4D

    static LabelVolume create(std::size_t nx, std::size_t ny, std::size_t nz,
                              std::size_t n_labels);
    /// Channels of a 4D volume thresholded at > 0.5; a 3D volume becomes a
    /// single label.
    static LabelVolume from_volume(const Volume4D& v);

    std::size_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t n_labels() const { return dims[3]; }
    bool at(std::size_t vidx, std::size_t label) const {
        return data[vidx * dims[3] + label] != 0;
    }
    void set(std::size_t vidx, std::size_t label, bool v) {
        data[vidx * dims[3] + label] = v ? 1 : 0;
    }
};

/// 2|A n B| / (|A| + |B|); two empty sets agree perfectly (1.0).
double dice(const LabelVolume& a, const LabelVolume& b, std::size_t label);

/// Unweighted mean of per-label dice.
double mean_dice(const LabelVolume& a, const LabelVolume& b,
                 const std::vector<std::size_t>& labels);

/// Per-channel SNR = mean(signal inside mask) / sigma.
struct SnrReport {
    std::vector<double> per_channel;
    double mean = 0.0;
};

SnrReport snr_report(const Volume4D& volume, const Mask& mask, double sigma);

} // namespace dwiboot
