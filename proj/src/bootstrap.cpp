#include "dwiboot/bootstrap.hpp"

#include <cmath>
#include <string>

#include "dwiboot/errors.hpp"

namespace dwiboot {

void BootstrapPlan::validate() const {
    if (scales.empty()) throw InputError("bootstrap plan needs at least one scaling factor");
    for (double r : scales)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw InputError("scaling factors must be finite and non-negative");
    if (replicates_per_scale < 1)
        throw InputError("replicates_per_scale must be at least 1");
}

void bootstrap_voxel(std::span<const double> fitted,
                     std::span<const double> corrected_residuals, double r,
                     RngStream& rng, std::span<double> out) {
    const std::size_t n = fitted.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t j = rng.uniform_below(std::uint32_t(n));
        out[i] = fitted[i] + r * corrected_residuals[j];
    }
}

Eigen::VectorXd bootstrap_voxel(const VoxelFit& fit, double r, RngStream& rng) {
    Eigen::VectorXd out(fit.fitted.size());
    bootstrap_voxel({fit.fitted.data(), std::size_t(fit.fitted.size())},
                    {fit.corrected_residuals.data(), std::size_t(fit.corrected_residuals.size())},
                    r, rng, {out.data(), std::size_t(out.size())});
    return out;
}

void bootstrap_b0_voxel(std::span<const double> b0_signals, double r,
                        RngStream& rng, std::span<double> out) {
    const std::size_t n = b0_signals.size();
    if (n == 0) throw InputError("b0 bootstrap needs at least one b0 signal");
    double mean = 0.0;
    for (double v : b0_signals) mean += v;
    mean /= double(n);
    if (n == 1) {
        // Residual set is {0}: the input passes through.
        out[0] = b0_signals[0];
        return;
    }
    for (std::size_t j = 0; j < n; ++j) {
        const std::uint32_t pick = rng.uniform_below(std::uint32_t(n));
        out[j] = mean + r * (b0_signals[pick] - mean);
    }
}

std::vector<double> bootstrap_b0_voxel(std::span<const double> b0_signals,
                                       double r, RngStream& rng) {
    std::vector<double> out(b0_signals.size());
    bootstrap_b0_voxel(b0_signals, r, rng, out);
    return out;
}

Volume4D bootstrap_scan_one(const GradientScheme& scheme, const Volume4D& scan,
                            const FitStore& fits, double scale,
                            std::size_t scale_index, std::size_t replicate,
                            std::uint64_t seed, const Mask& mask,
                            bool clip_at_zero, unsigned threads) {
    scan.validate();
    mask.require_matches(scan);
    if (scheme.size() != scan.nc())
        throw InputError("scan has " + std::to_string(scan.nc()) + " channels but the scheme has " +
                         std::to_string(scheme.size()));
    const auto dw_idx = scheme.dw_indices();
    const auto b0_idx = scheme.b0_indices();
    if (fits.n_channels != dw_idx.size())
        throw InputError("fit store covers " + std::to_string(fits.n_channels) +
                         " DW channels but the scheme has " + std::to_string(dw_idx.size()));
    if (fits.dims != mask.dims) throw InputError("fit store dims do not match the mask");

    Volume4D out = scan; // unmasked voxels stay verbatim
    const std::size_t nc = scan.nc();
    const std::size_t n_dw = dw_idx.size();
    const std::size_t n_b0 = b0_idx.size();

    parallel_for(scan.n_voxels(), threads, [&](std::size_t vidx) {
        if (!mask.contains(vidx)) return;
        if (!fits.has(vidx))
            throw InputError("fit store has no fit for masked voxel " + std::to_string(vidx));

        double* voxel_out = out.data.data() + vidx * nc;
        const double* voxel_in = scan.data.data() + vidx * nc;

        const auto fitted = fits.fitted_at(vidx);
        const auto resid = fits.residuals_at(vidx);
        RngStream dw_rng(stream_key(seed, scale_index, replicate, vidx, kSubstreamDW));
        for (std::size_t i = 0; i < n_dw; ++i) {
            const std::uint32_t j = dw_rng.uniform_below(std::uint32_t(n_dw));
            double v = fitted[i] + scale * resid[j];
            if (clip_at_zero && v < 0.0) v = 0.0;
            voxel_out[dw_idx[i]] = v;
        }

        if (n_b0 > 0) {
            double mean = 0.0;
            for (std::size_t j = 0; j < n_b0; ++j) mean += voxel_in[b0_idx[j]];
            mean /= double(n_b0);
            if (n_b0 == 1) {
                voxel_out[b0_idx[0]] = voxel_in[b0_idx[0]];
            } else {
                RngStream b0_rng(stream_key(seed, scale_index, replicate, vidx, kSubstreamB0));
                for (std::size_t j = 0; j < n_b0; ++j) {
                    const std::uint32_t pick = b0_rng.uniform_below(std::uint32_t(n_b0));
                    double v = mean + scale * (voxel_in[b0_idx[pick]] - mean);
                    if (clip_at_zero && v < 0.0) v = 0.0;
                    voxel_out[b0_idx[j]] = v;
                }
            }
        }
    });
    return out;
}

std::vector<BootstrapOutput> bootstrap_scan(const GradientScheme& scheme,
                                            const Volume4D& scan,
                                            const FitStore& fits,
                                            const BootstrapPlan& plan,
                                            const Mask& mask, unsigned threads) {
    plan.validate();
    std::vector<BootstrapOutput> outputs;
    outputs.reserve(plan.scales.size() * plan.replicates_per_scale);
    for (std::size_t si = 0; si < plan.scales.size(); ++si) {
        for (std::size_t rep = 0; rep < plan.replicates_per_scale; ++rep) {
            BootstrapOutput o;
            o.scale = plan.scales[si];
            o.scale_index = si;
            o.replicate = rep;
            o.volume = bootstrap_scan_one(scheme, scan, fits, plan.scales[si], si, rep,
                                          plan.seed, mask, plan.clip_at_zero, threads);
            outputs.push_back(std::move(o));
        }
    }
    return outputs;
}

NoiseEstimate estimate_noise_sigma(const FitStore& fits, const Mask& mask) {
    if (fits.dims != mask.dims) throw InputError("fit store dims do not match the mask");
    const std::size_t n_d = fits.n_channels;

    NoiseEstimate est;
    est.per_channel.assign(n_d, 0.0);
    double total = 0.0;
    for (std::size_t vidx = 0; vidx < fits.n_voxels(); ++vidx) {
        if (!mask.contains(vidx) || !fits.has(vidx)) continue;
        const auto resid = fits.residuals_at(vidx);
        for (std::size_t i = 0; i < n_d; ++i) {
            const double r2 = resid[i] * resid[i];
            est.per_channel[i] += r2;
            total += r2;
        }
        ++est.n_voxels;
    }
    if (est.n_voxels == 0) throw InputError("noise estimation needs a non-empty masked fit store");
    for (auto& v : est.per_channel) v = std::sqrt(v / double(est.n_voxels));
    est.pooled = std::sqrt(total / double(est.n_voxels * n_d));
    return est;
}

} // namespace dwiboot
