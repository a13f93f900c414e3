#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dwiboot/gradients.hpp"
#include "dwiboot/parallel.hpp"
#include "dwiboot/shore.hpp"
#include "dwiboot/volume.hpp"

namespace dwiboot {

/// One diffusion tensor compartment: cylindrically symmetric tensor with
/// the given principal direction and axial/radial diffusivities (mm^2/s).
struct TensorCompartment {
    Direction principal{1.0, 0.0, 0.0};
    double axial_diffusivity = 1.7e-3;
    double radial_diffusivity = 3.0e-4;
    double fraction = 1.0;
};

enum class NoiseModel { none, gaussian, rician };

struct PhantomSpec {
    std::array<std::size_t, 3> dims{16, 16, 16};
    std::vector<TensorCompartment> compartments{TensorCompartment{}};
    double s0 = 100.0;
    NoiseModel noise = NoiseModel::none;
    double sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const; // fractions sum to 1, diffusivities positive
};

struct PhantomResult {
    Volume4D signals;    // with noise applied
    Volume4D noise_free; // ground truth
    Mask mask;
};

/// Multi-tensor signal S(b, u) = s0 * sum_c f_c exp(-b u^T T_c u) on DW
/// channels, s0 on b0 channels. Gaussian noise adds sigma * N(0,1) per
/// channel; Rician replaces S with sqrt((S + n1)^2 + n2^2). Deterministic
/// under a fixed seed for any worker count.
PhantomResult generate(const PhantomSpec& spec, const GradientScheme& scheme,
                       unsigned threads = default_thread_count());

/// Per-voxel signals y = D x with standard-normal coefficients scaled by
/// coefficient_scale, so fit residuals are analytically zero. Channels
/// correspond to the dictionary's DW rows.
Volume4D generate_in_span(const Dictionary& dictionary,
                          std::array<std::size_t, 3> dims, std::uint64_t seed,
                          double coefficient_scale = 1.0,
                          unsigned threads = default_thread_count());

/// Synthetic three-shell scheme shaped like the usual 270-gradient HCP
/// acquisition: per_shell directions (Fibonacci-sphere spread) on each
/// shell, with n_b0 b0 channels spread through the acquisition order.
GradientScheme hcp_like_scheme(std::size_t per_shell = 90,
                               const std::vector<double>& shell_bvalues = {1000.0, 2000.0, 3000.0},
                               std::size_t n_b0 = 18);

} // namespace dwiboot
