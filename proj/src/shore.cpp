#include "dwiboot/shore.hpp"

#include <cmath>
#include <stdexcept>

#include "dwiboot/errors.hpp"

namespace dwiboot {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

/// Associated Legendre P_l^m(x) without the Condon-Shortley phase,
/// m >= 0, via the standard upward recurrence.
double assoc_legendre_no_cs(int l, int m, double x) {
    const double somx2 = std::sqrt(std::max(0.0, 1.0 - x * x));
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= double(2 * k - 1) * somx2;
    if (l == m) return pmm;
    double pmmp1 = x * double(2 * m + 1) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = (x * double(2 * ll - 1) * pmmp1 - double(ll + m - 1) * pmm) / double(ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

/// sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!)
double sh_normalization(int l, int m) {
    double ratio = 1.0;
    for (int k = l - m + 1; k <= l + m; ++k) ratio /= double(k);
    return std::sqrt(double(2 * l + 1) / (4.0 * kPi) * ratio);
}

/// sqrt(2 (n-l)! / (zeta^{3/2} Gamma(n + 3/2)))
double radial_normalization(double zeta, int n, int l) {
    double fact = 1.0;
    for (int k = 2; k <= n - l; ++k) fact *= double(k);
    return std::sqrt(2.0 * fact / (std::pow(zeta, 1.5) * std::tgamma(double(n) + 1.5)));
}

} // namespace

std::size_t shore_atom_count(int radial_order) {
    if (radial_order < 0 || radial_order % 2 != 0)
        throw std::invalid_argument("radial_order must be even and non-negative");
    const std::size_t r = std::size_t(radial_order);
    return (r + 2) * (r + 4) * (2 * r + 3) / 24;
}

std::vector<AtomLabel> shore_atoms(int radial_order) {
    if (radial_order < 0 || radial_order % 2 != 0)
        throw std::invalid_argument("radial_order must be even and non-negative");
    std::vector<AtomLabel> atoms;
    for (int l = 0; l <= radial_order; l += 2)
        for (int n = l; n <= (radial_order + l) / 2; ++n)
            for (int m = -l; m <= l; ++m)
                atoms.push_back({n, l, m});
    return atoms;
}

double evaluate_generalized_laguerre(int k, double alpha, double x) {
    if (k < 0) throw std::invalid_argument("Laguerre degree must be non-negative");
    if (k == 0) return 1.0;
    double lkm1 = 1.0;              // L_0
    double lk = 1.0 + alpha - x;    // L_1
    for (int i = 2; i <= k; ++i) {
        const double next =
            ((double(2 * i - 1) + alpha - x) * lk - (double(i - 1) + alpha) * lkm1) / double(i);
        lkm1 = lk;
        lk = next;
    }
    return lk;
}

double evaluate_real_sh(int l, int m, const Direction& u) {
    if (l < 0 || l % 2 != 0)
        throw std::invalid_argument("spherical harmonic order must be even and non-negative");
    const int am = m < 0 ? -m : m;
    if (am > l) throw std::invalid_argument("|m| must not exceed l");

    const double cos_theta = u[2];
    const double plm = assoc_legendre_no_cs(l, am, cos_theta);
    const double norm = sh_normalization(l, am);
    if (m == 0) return norm * plm;
    const double phi = std::atan2(u[1], u[0]);
    const double sqrt2 = 1.41421356237309504880168872420969808;
    return m > 0 ? sqrt2 * norm * plm * std::cos(double(m) * phi)
                 : sqrt2 * norm * plm * std::sin(double(am) * phi);
}

Dictionary shore_dictionary(const GradientScheme& scheme, int radial_order, double zeta) {
    if (radial_order < 0 || radial_order % 2 != 0)
        throw std::invalid_argument("radial_order must be even and non-negative");
    if (!(zeta > 0.0)) throw std::invalid_argument("zeta must be positive");
    const auto dw = scheme.dw_indices();
    if (dw.empty()) throw InputError("scheme has no diffusion-weighted channel");

    Dictionary dict;
    dict.atom_labels = shore_atoms(radial_order);
    dict.params.radial_order = radial_order;
    dict.params.zeta = zeta;
    const std::size_t n_d = dw.size();
    const std::size_t n_a = dict.atom_labels.size();
    dict.matrix.resize(Eigen::Index(n_d), Eigen::Index(n_a));

    for (std::size_t row = 0; row < n_d; ++row) {
        const std::size_t ch = dw[row];
        // q = sqrt(b) under the fixed time-constant convention, so the
        // dimensionless radial argument is q^2 / zeta = b / zeta.
        const double x = scheme.bvalues[ch] / zeta;
        const double gauss = std::exp(-0.5 * x);
        const Direction& u = scheme.directions[ch];
        for (std::size_t col = 0; col < n_a; ++col) {
            const auto& a = dict.atom_labels[col];
            const double radial = radial_normalization(zeta, a.n, a.l) *
                                  std::pow(x, double(a.l) / 2.0) * gauss *
                                  evaluate_generalized_laguerre(a.n - a.l, double(a.l) + 0.5, x);
            dict.matrix(Eigen::Index(row), Eigen::Index(col)) =
                radial * evaluate_real_sh(a.l, a.m, u);
        }
    }

    if (!dict.matrix.allFinite())
        throw InputError("dictionary has non-finite entries; check zeta and b-values");
    return dict;
}

} // namespace dwiboot
