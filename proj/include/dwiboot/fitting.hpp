#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dwiboot/parallel.hpp"
#include "dwiboot/shore.hpp"
#include "dwiboot/volume.hpp"

namespace dwiboot {

/// Precomputed least-squares machinery for one dictionary:
/// pinv = (D^T D + ridge I)^{-1} D^T and the hat-matrix diagonal
/// h_ii of H = D * pinv. Data independent; immutable and shared.
struct FitOperator {
    Eigen::MatrixXd pinv;            // N_a x N_d
    Eigen::VectorXd hat_diag;        // N_d
    Eigen::VectorXd residual_scale;  // 1 / sqrt(1 - h_ii)
    double ridge = 0.0;

    std::size_t n_channels() const { return std::size_t(pinv.cols()); }
    std::size_t n_atoms() const { return std::size_t(pinv.rows()); }
};

/// Per-voxel result: coefficients, fitted signal, and residuals rescaled
/// by 1/sqrt(1 - h_ii) so their variance matches the noise variance.
struct VoxelFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd fitted;
    Eigen::VectorXd corrected_residuals;
};

/// Build the operator from a rank-revealing SVD (relative singular-value
/// cutoff 1e-12). With ridge = 0 the system must be strictly
/// overdetermined (N_d > N_a) and full rank; any leverage reaching 1 is
/// refused since the residual correction would divide by zero.
FitOperator build_fit_operator(const Dictionary& dictionary, double ridge = 0.0);

VoxelFit fit_voxel(const FitOperator& op, const Dictionary& dictionary,
                   const Eigen::VectorXd& y);

/// Fit results for every masked voxel of a volume; unmasked voxels carry
/// an empty marker. Coefficients are stored only on request (they are
/// only needed when they are written out).
struct FitStore {
    std::array<std::size_t, 3> dims{0, 0, 0};
    std::size_t n_channels = 0; // N_d
    std::size_t n_atoms = 0;
    std::vector<std::uint8_t> has_fit;  // per voxel
    std::vector<double> fitted;         // n_voxels * N_d
    std::vector<double> residuals;      // corrected, n_voxels * N_d
    std::vector<double> coefficients;   // n_voxels * N_a when stored

    std::size_t n_voxels() const { return dims[0] * dims[1] * dims[2]; }
    bool has(std::size_t vidx) const { return has_fit[vidx] != 0; }
    std::span<const double> fitted_at(std::size_t vidx) const {
        return {fitted.data() + vidx * n_channels, n_channels};
    }
    std::span<const double> residuals_at(std::size_t vidx) const {
        return {residuals.data() + vidx * n_channels, n_channels};
    }
    std::span<const double> coefficients_at(std::size_t vidx) const {
        return {coefficients.data() + vidx * n_atoms, n_atoms};
    }
};

/// Apply fit_voxel to every masked voxel of a DW volume (channel count
/// must equal N_d). Data-parallel over voxels; results are bit-identical
/// for any worker count.
FitStore fit_volume(const FitOperator& op, const Dictionary& dictionary,
                    const Volume4D& dwi, const Mask& mask,
                    unsigned threads = default_thread_count(),
                    bool store_coefficients = false);

} // namespace dwiboot
