#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dwiboot/gradients.hpp"

namespace dwiboot {

/// (n, l, m): radial order, angular order (even), SH degree.
struct AtomLabel {
    int n = 0;
    int l = 0;
    int m = 0;
    bool operator==(const AtomLabel&) const = default;
};

struct DictionaryParams {
    int radial_order = 6;
    double zeta = 700.0; // units of q^2
    /// b-value to q-space mapping used when building the matrix.
    std::string q_mapping = "q = sqrt(b), time constant fixed by 4*pi^2*tau = 1";
};

/// Design matrix over the DW channels of a scheme (b0 channels excluded),
/// one column per basis atom. Immutable and shareable once built.
struct Dictionary {
    Eigen::MatrixXd matrix; // N_d x N_a
    std::vector<AtomLabel> atom_labels;
    DictionaryParams params;

    std::size_t n_channels() const { return std::size_t(matrix.rows()); }
    std::size_t n_atoms() const { return std::size_t(matrix.cols()); }
};

/// Number of atoms for an even radial order:
/// (R+2)(R+4)(2R+3)/24.
std::size_t shore_atom_count(int radial_order);

/// Atom index triples in column order: l ascending (even), then n, then m.
/// Members satisfy 0 <= l <= n and 2n - l <= radial_order.
std::vector<AtomLabel> shore_atoms(int radial_order);

/// Generalized Laguerre polynomial L_k^(alpha)(x) by the three-term
/// recurrence.
double evaluate_generalized_laguerre(int k, double alpha, double x);

/// Real orthonormal spherical harmonic, even l only, no Condon-Shortley
/// phase; m > 0 gives cosine terms, m < 0 sine terms. direction must be
/// unit length.
double evaluate_real_sh(int l, int m, const Direction& direction);

/// Gaussian-weighted Laguerre radial part times real even spherical
/// harmonics, evaluated at each DW channel's q-space point with q = sqrt(b).
Dictionary shore_dictionary(const GradientScheme& scheme, int radial_order, double zeta);

} // namespace dwiboot
