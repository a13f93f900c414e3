#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dwiboot/fitting.hpp"
#include "dwiboot/gradients.hpp"
#include "dwiboot/parallel.hpp"
#include "dwiboot/rng.hpp"
#include "dwiboot/volume.hpp"

namespace dwiboot {

/// One augmentation run: every scale is applied replicates_per_scale
/// times to the input scan, each producing one output scan.
struct BootstrapPlan {
    std::vector<double> scales{2.0, 3.0, 4.0};
    std::uint64_t seed = 0;
    std::size_t replicates_per_scale = 1;
    bool clip_at_zero = false;

    void validate() const;
};

/// Resample this voxel's own corrected residuals with replacement and add
/// them, scaled by r, to the fitted signal.
///
/// Draw order is part of the reproducibility contract: output channel i
/// consumes the i-th uniform_below(N_d) draw from the stream.
void bootstrap_voxel(std::span<const double> fitted,
                     std::span<const double> corrected_residuals, double r,
                     RngStream& rng, std::span<double> out);

Eigen::VectorXd bootstrap_voxel(const VoxelFit& fit, double r, RngStream& rng);

/// b0 path: residuals are deviations from the voxel's mean b0 signal, and
/// the bootstrap value is mean + r * draw. With a single b0 the residual
/// set is {0} and the input passes through unchanged.
void bootstrap_b0_voxel(std::span<const double> b0_signals, double r,
                        RngStream& rng, std::span<double> out);

std::vector<double> bootstrap_b0_voxel(std::span<const double> b0_signals,
                                       double r, RngStream& rng);

/// One bootstrap scan: DW channels from the fit store, b0 channels from
/// the scan's own b0 signals, both scaled by the same factor, written back
/// to their original channel positions. Voxels outside the mask copy the
/// input verbatim. The per-voxel streams are keyed by
/// (seed, scale_index, replicate, voxel linear index), so the output is
/// independent of traversal order and worker count.
Volume4D bootstrap_scan_one(const GradientScheme& scheme, const Volume4D& scan,
                            const FitStore& fits, double scale,
                            std::size_t scale_index, std::size_t replicate,
                            std::uint64_t seed, const Mask& mask,
                            bool clip_at_zero = false,
                            unsigned threads = default_thread_count());

struct BootstrapOutput {
    double scale = 0.0;
    std::size_t scale_index = 0;
    std::size_t replicate = 0; // zero-based
    Volume4D volume;
};

/// All (scale, replicate) outputs of a plan.
std::vector<BootstrapOutput> bootstrap_scan(const GradientScheme& scheme,
                                            const Volume4D& scan,
                                            const FitStore& fits,
                                            const BootstrapPlan& plan,
                                            const Mask& mask,
                                            unsigned threads = default_thread_count());

/// RMS of the corrected residuals over masked voxels: pooled over all
/// channels, and per channel (averaging over voxels only).
struct NoiseEstimate {
    double pooled = 0.0;
    std::vector<double> per_channel;
    std::size_t n_voxels = 0;
};

NoiseEstimate estimate_noise_sigma(const FitStore& fits, const Mask& mask);

} // namespace dwiboot
