#include "dwiboot/phantom.hpp"

#include <cmath>
#include <string>

#include "dwiboot/errors.hpp"
#include "dwiboot/rng.hpp"

namespace dwiboot {

namespace {

constexpr std::uint64_t kSubstreamPhantomNoise = 2;
constexpr std::uint64_t kSubstreamCoefficients = 3;
constexpr double kGoldenAngle = 2.39996322972865332223155550663361385;

double norm3(const Direction& d) {
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

} // namespace

void PhantomSpec::validate() const {
    for (std::size_t d : dims)
        if (d == 0) throw InputError("phantom dims must be positive");
    if (compartments.empty()) throw InputError("phantom needs at least one compartment");
    double total = 0.0;
    for (const auto& c : compartments) {
        if (!(c.axial_diffusivity > 0.0) || !(c.radial_diffusivity > 0.0))
            throw InputError("diffusivities must be positive");
        if (!(c.fraction >= 0.0)) throw InputError("volume fractions must be non-negative");
        if (norm3(c.principal) <= 0.0)
            throw InputError("compartment principal direction must be nonzero");
        total += c.fraction;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw InputError("volume fractions sum to " + std::to_string(total) + ", expected 1");
    if (sigma < 0.0) throw InputError("noise sigma must be non-negative");
}

PhantomResult generate(const PhantomSpec& spec, const GradientScheme& scheme,
                       unsigned threads) {
    spec.validate();
    const std::size_t nc = scheme.size();
    if (nc == 0) throw InputError("scheme is empty");

    // Noise-free signal depends only on (b, u), so it is shared by all voxels.
    std::vector<double> profile(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        if (scheme.is_b0(i)) {
            profile[i] = spec.s0;
            continue;
        }
        const double b = scheme.bvalues[i];
        const Direction& u = scheme.directions[i];
        double signal = 0.0;
        for (const auto& c : spec.compartments) {
            Direction d = c.principal;
            const double nrm = norm3(d);
            for (auto& x : d) x /= nrm;
            const double dot = d[0] * u[0] + d[1] * u[1] + d[2] * u[2];
            const double adc = c.radial_diffusivity +
                               (c.axial_diffusivity - c.radial_diffusivity) * dot * dot;
            signal += c.fraction * std::exp(-b * adc);
        }
        profile[i] = spec.s0 * signal;
    }

    const auto [nx, ny, nz] = spec.dims;
    PhantomResult result;
    result.noise_free = Volume4D::create(nx, ny, nz, nc);
    for (std::size_t v = 0; v < result.noise_free.n_voxels(); ++v)
        std::copy(profile.begin(), profile.end(), result.noise_free.data.begin() + v * nc);
    result.mask = Mask::full(nx, ny, nz);

    result.signals = result.noise_free;
    if (spec.noise != NoiseModel::none && spec.sigma > 0.0) {
        parallel_for(result.signals.n_voxels(), threads, [&](std::size_t vidx) {
            RngStream rng(stream_key(spec.seed, 0, 0, vidx, kSubstreamPhantomNoise));
            double* voxel = result.signals.data.data() + vidx * nc;
            if (spec.noise == NoiseModel::gaussian) {
                for (std::size_t i = 0; i < nc; ++i) voxel[i] += spec.sigma * rng.normal();
            } else {
                for (std::size_t i = 0; i < nc; ++i) {
                    const double n1 = spec.sigma * rng.normal();
                    const double n2 = spec.sigma * rng.normal();
                    const double re = voxel[i] + n1;
                    voxel[i] = std::sqrt(re * re + n2 * n2);
                }
            }
        });
    }
    return result;
}

Volume4D generate_in_span(const Dictionary& dictionary,
                          std::array<std::size_t, 3> dims, std::uint64_t seed,
                          double coefficient_scale, unsigned threads) {
    const std::size_t n_d = dictionary.n_channels();
    const std::size_t n_a = dictionary.n_atoms();
    Volume4D vol = Volume4D::create(dims[0], dims[1], dims[2], n_d);
    parallel_for(vol.n_voxels(), threads, [&](std::size_t vidx) {
        RngStream rng(stream_key(seed, 0, 0, vidx, kSubstreamCoefficients));
        Eigen::VectorXd x(static_cast<Eigen::Index>(n_a));
        for (std::size_t a = 0; a < n_a; ++a) x(Eigen::Index(a)) = coefficient_scale * rng.normal();
        Eigen::Map<Eigen::VectorXd> y(vol.data.data() + vidx * n_d, Eigen::Index(n_d));
        y.noalias() = dictionary.matrix * x;
    });
    return vol;
}

GradientScheme hcp_like_scheme(std::size_t per_shell,
                               const std::vector<double>& shell_bvalues,
                               std::size_t n_b0) {
    if (per_shell == 0 || shell_bvalues.empty())
        throw InputError("scheme needs at least one shell with at least one direction");

    const std::size_t n_shells = shell_bvalues.size();
    const std::size_t n_dw = per_shell * n_shells;
    const std::size_t total = n_dw + n_b0;

    std::vector<bool> is_b0_slot(total, false);
    for (std::size_t k = 0; k < n_b0; ++k) is_b0_slot[(k * total) / n_b0] = true;

    GradientScheme scheme;
    scheme.b0_threshold = kDefaultB0Threshold;
    scheme.bvalues.reserve(total);
    scheme.directions.reserve(total);

    std::size_t dw_counter = 0;
    for (std::size_t slot = 0; slot < total; ++slot) {
        if (is_b0_slot[slot]) {
            scheme.bvalues.push_back(0.0);
            scheme.directions.push_back({0.0, 0.0, 0.0});
            continue;
        }
        const std::size_t shell = dw_counter % n_shells;
        const std::size_t i = dw_counter / n_shells; // direction index on the shell
        // Scanner-reported effective b-values scatter around the nominal
        // value; reproduce that with a fixed +-20 jitter. Exactly repeated
        // b-values would also make the l = 0 radial atoms linearly
        // dependent across a three-shell scheme.
        const double jitter =
            std::floor(double(mix64(0x5b7a1cadULL + dw_counter) >> 11) * 0x1.0p-53 * 41.0) - 20.0;
        ++dw_counter;
        // Fibonacci-sphere point, phase shifted per shell so the shells do
        // not share identical direction sets.
        const double z = 1.0 - 2.0 * (double(i) + 0.5) / double(per_shell);
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = kGoldenAngle * double(i) + 0.37 * double(shell);
        scheme.bvalues.push_back(shell_bvalues[shell] + jitter);
        scheme.directions.push_back({rho * std::cos(phi), rho * std::sin(phi), z});
    }
    return scheme;
}

} // namespace dwiboot
