// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Statistical checks use fixed seeds so runs are
// reproducible.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dwiboot/bootstrap.hpp"
#include "dwiboot/cli.hpp"
#include "dwiboot/fitting.hpp"
#include "dwiboot/gradients.hpp"
#include "dwiboot/metrics.hpp"
#include "dwiboot/nifti.hpp"
#include "dwiboot/phantom.hpp"
#include "dwiboot/rng.hpp"
#include "dwiboot/shore.hpp"
#include "support.hpp"

using namespace dwiboot;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void criterion(int number, const std::string& name, const std::function<std::string()>& body) {
    std::string detail;
    bool passed = false;
    try {
        detail = body();
        passed = true;
    } catch (const std::exception& e) {
        detail = e.what();
    }
    std::printf("[%s] criterion %2d: %s%s%s\n", passed ? "PASS" : "FAIL", number, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!passed) ++failures;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

std::vector<std::uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Shared fixture: in-span 16^3 phantom with Gaussian sigma = 10 noise,
/// fitted at ridge 0. 4096 voxels x 270 channels > 1e5 voxel-channels.
/// dw_scheme mirrors the scheme's DW channels so the 270-channel in-span
/// volume can be bootstrapped directly.
struct NoisyInSpan {
    GradientScheme scheme = hcp_like_scheme();
    GradientScheme dw_scheme;
    Dictionary dict = shore_dictionary(scheme, 6, 700.0);
    FitOperator op = build_fit_operator(dict, 0.0);
    Mask mask = Mask::full(16, 16, 16);
    Volume4D clean, noisy;
    FitStore fits;
    double sigma = 10.0;

    NoisyInSpan() {
        dw_scheme.b0_threshold = scheme.b0_threshold;
        for (std::size_t i : scheme.dw_indices()) {
            dw_scheme.bvalues.push_back(scheme.bvalues[i]);
            dw_scheme.directions.push_back(scheme.directions[i]);
        }
        clean = generate_in_span(dict, {16, 16, 16}, 2024, 30.0);
        noisy = clean;
        const std::size_t nc = noisy.nc();
        for (std::size_t v = 0; v < noisy.n_voxels(); ++v) {
            RngStream rng(stream_key(555, 0, 0, v, 17));
            for (std::size_t c = 0; c < nc; ++c) noisy.data[v * nc + c] += sigma * rng.normal();
        }
        fits = fit_volume(op, dict, noisy, mask);
    }
};

const NoisyInSpan& noisy_in_span() {
    static NoisyInSpan fixture;
    return fixture;
}

} // namespace

// --------------------------------------------------------------------------

static void criterion_1_leverage_trace() {
    criterion(1, "hat-matrix trace equals the atom count", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto scheme = hcp_like_scheme();
        require(scheme.n_dw() == 270, "scheme should have 270 DW channels");
        const auto dict = shore_dictionary(scheme, 6, 700.0);
        const auto op = build_fit_operator(dict, 0.0);
        const double trace = op.hat_diag.sum();
        const double h_max = op.hat_diag.maxCoeff();
        const double dt = elapsed_s(t0);
        require(std::abs(trace - 50.0) < 1e-8, fmt("trace %.12f deviates from 50", trace));
        require(h_max < 1.0, fmt("max leverage %.6f not < 1", h_max));
        require(dt < 5.0, fmt("took %.2f s (limit 5 s)", dt));
        return fmt("sum h_ii = %.10f, max h_ii = %.4f, %.2f s", trace, h_max, dt);
    });
}

static void criterion_2_residual_orthogonality() {
    criterion(2, "residuals orthogonal to the dictionary on an in-span phantom", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto scheme = hcp_like_scheme();
        const auto dict = shore_dictionary(scheme, 6, 700.0);
        const auto op = build_fit_operator(dict, 0.0);
        const Mask mask = Mask::full(32, 32, 32);
        const auto vol = generate_in_span(dict, {32, 32, 32}, 7, 25.0);
        const auto fits = fit_volume(op, dict, vol, mask);

        const std::size_t nc = vol.nc();
        std::size_t checked = 0;
        double worst = 0.0;
        for (std::size_t v = 0; v < vol.n_voxels(); ++v) {
            Eigen::Map<const Eigen::VectorXd> y(vol.data.data() + v * nc, Eigen::Index(nc));
            Eigen::Map<const Eigen::VectorXd> fitted(fits.fitted.data() + v * nc,
                                                     Eigen::Index(nc));
            const double ratio = (dict.matrix.transpose() * (y - fitted)).norm() / y.norm();
            worst = std::max(worst, ratio);
            ++checked;
        }
        const double dt = elapsed_s(t0);
        require(checked == 32768, "expected 32^3 voxels");
        require(worst < 1e-6, fmt("worst |D^T r|/|y| = %.3e exceeds 1e-6", worst));
        require(dt < 60.0, fmt("took %.2f s (limit 60 s)", dt));
        return fmt("%zu voxels, worst |D^T r|/|y| = %.2e, %.2f s", checked, worst, dt);
    });
}

static void criterion_3_variance_correction() {
    criterion(3, "corrected residual variance matches the noise variance", [] {
        const auto& fx = noisy_in_span();
        const std::size_t nc = fx.noisy.nc();
        double raw_ss = 0.0, corrected_ss = 0.0;
        std::size_t count = 0;
        for (std::size_t v = 0; v < fx.noisy.n_voxels(); ++v) {
            const auto fitted = fx.fits.fitted_at(v);
            const auto corrected = fx.fits.residuals_at(v);
            for (std::size_t c = 0; c < nc; ++c) {
                const double raw = fx.noisy.data[v * nc + c] - fitted[c];
                raw_ss += raw * raw;
                corrected_ss += corrected[c] * corrected[c];
                ++count;
            }
        }
        require(count >= 100000, "need at least 1e5 voxel-channels");
        const double corrected_var = corrected_ss / double(count);
        const double raw_ratio = raw_ss / double(count) / (fx.sigma * fx.sigma);
        const double expected_ratio = 1.0 - 50.0 / 270.0;
        require(corrected_var >= 90.25 && corrected_var <= 110.25,
                fmt("corrected variance %.3f outside [90.25, 110.25]", corrected_var));
        require(std::abs(raw_ratio - expected_ratio) <= 0.02,
                fmt("raw variance ratio %.4f vs expected %.4f +- 0.02", raw_ratio, expected_ratio));
        return fmt("n = %zu, corrected var = %.2f, raw ratio = %.4f (expect %.4f)", count,
                   corrected_var, raw_ratio, expected_ratio);
    });
}

static void criterion_4_scale_linearity() {
    criterion(4, "bootstrap noise scales linearly in r with pinned draws", [] {
        const auto& fx = noisy_in_span();
        const std::uint64_t seed = 99;
        const std::size_t nc = fx.noisy.nc();
        const std::size_t n_vox = fx.noisy.n_voxels();

        const std::vector<double> rs = {1.0, 2.0, 3.0, 4.0};
        std::vector<double> stds;
        std::vector<Volume4D> boots;
        for (double r : rs)
            boots.push_back(
                bootstrap_scan_one(fx.dw_scheme, fx.noisy, fx.fits, r, 0, 0, seed, fx.mask));

        for (const auto& boot : boots) {
            double sum = 0.0, ss = 0.0;
            for (std::size_t v = 0; v < n_vox; ++v) {
                const auto fitted = fx.fits.fitted_at(v);
                const double* out = boot.data.data() + v * nc;
                // every channel of the in-span fixture is DW
                for (std::size_t c = 0; c < nc; ++c) {
                    const double d = out[c] - fitted[c];
                    sum += d;
                    ss += d * d;
                }
            }
            const double n = double(n_vox * nc);
            const double mean = sum / n;
            stds.push_back(std::sqrt(ss / n - mean * mean));
        }

        // least squares line std = slope * r + intercept
        double r_mean = 0.0, s_mean = 0.0;
        for (std::size_t k = 0; k < rs.size(); ++k) {
            r_mean += rs[k];
            s_mean += stds[k];
        }
        r_mean /= double(rs.size());
        s_mean /= double(rs.size());
        double cov = 0.0, var = 0.0;
        for (std::size_t k = 0; k < rs.size(); ++k) {
            cov += (rs[k] - r_mean) * (stds[k] - s_mean);
            var += (rs[k] - r_mean) * (rs[k] - r_mean);
        }
        const double slope = cov / var;
        const double intercept = s_mean - slope * r_mean;
        const double sigma_hat = estimate_noise_sigma(fx.fits, fx.mask).pooled;
        require(std::abs(slope - sigma_hat) <= 0.05 * sigma_hat,
                fmt("slope %.4f vs sigma-hat %.4f (5%% band)", slope, sigma_hat));
        require(std::abs(intercept) < 0.05 * sigma_hat,
                fmt("intercept %.4f vs 0.05*sigma-hat %.4f", intercept, 0.05 * sigma_hat));

        // Exact part: replay the per-voxel draws (same seed, scale slot 0) and
        // verify every output is fitted + r * eps with the identical draw, so
        // the added-noise field for r is exactly r times the field for r = 1.
        for (std::size_t v = 0; v < n_vox; ++v) {
            const auto fitted = fx.fits.fitted_at(v);
            const auto resid = fx.fits.residuals_at(v);
            RngStream replay(stream_key(seed, 0, 0, v, kSubstreamDW));
            for (std::size_t c = 0; c < nc; ++c) {
                const double eps = resid[replay.uniform_below(std::uint32_t(nc))];
                const double field_1 = 1.0 * eps;
                for (std::size_t k = 0; k < rs.size(); ++k) {
                    const double field_r = rs[k] * eps;
                    require(boots[k].data[v * nc + c] == fitted[c] + field_r,
                            "bootstrap output does not match the replayed draw");
                    require(field_r == rs[k] * field_1,
                            "noise field is not exactly r times the r=1 field");
                }
            }
        }
        return fmt("slope %.4f vs sigma-hat %.4f, intercept %.4f; pinned draws exact", slope,
                   sigma_hat, intercept);
    });
}

static void criterion_5_r0_identity() {
    criterion(5, "r = 0 returns the fitted representation; single b0 passes through", [] {
        const auto scheme = hcp_like_scheme(10, {1000.0, 2000.0}, 4); // 20 DW + 4 b0
        const auto dict = shore_dictionary(scheme, 2, 700.0);
        const auto op = build_fit_operator(dict, 0.0);
        PhantomSpec spec;
        spec.dims = {8, 8, 8};
        spec.noise = NoiseModel::gaussian;
        spec.sigma = 6.0;
        spec.seed = 4;
        const auto phantom = generate(spec, scheme);
        const auto dw = gather_channels(phantom.signals, scheme.dw_indices());
        const auto fits = fit_volume(op, dict, dw, phantom.mask);

        const auto out = bootstrap_scan_one(scheme, phantom.signals, fits, 0.0, 0, 0, 8,
                                            phantom.mask);
        const auto dw_idx = scheme.dw_indices();
        const auto b0_idx = scheme.b0_indices();
        const std::size_t nc = scheme.size();
        for (std::size_t v = 0; v < out.n_voxels(); ++v) {
            const auto fitted = fits.fitted_at(v);
            for (std::size_t i = 0; i < dw_idx.size(); ++i)
                require(out.data[v * nc + dw_idx[i]] == fitted[i],
                        "DW channel differs from the fitted value at r = 0");
            double mean = 0.0;
            for (std::size_t j : b0_idx) mean += phantom.signals.data[v * nc + j];
            mean /= double(b0_idx.size());
            for (std::size_t j : b0_idx)
                require(out.data[v * nc + j] == mean, "b0 channel is not the b0 mean at r = 0");
        }

        // N_0 = 1 degenerate case: input passes through bitwise for any r
        const auto scheme1 = hcp_like_scheme(10, {1000.0, 2000.0}, 1);
        const auto dict1 = shore_dictionary(scheme1, 2, 700.0);
        const auto op1 = build_fit_operator(dict1, 0.0);
        const auto phantom1 = generate(spec, scheme1);
        const auto dw1 = gather_channels(phantom1.signals, scheme1.dw_indices());
        const auto fits1 = fit_volume(op1, dict1, dw1, phantom1.mask);
        const auto b0_slot = scheme1.b0_indices().at(0);
        for (double r : {0.0, 3.0}) {
            const auto out1 = bootstrap_scan_one(scheme1, phantom1.signals, fits1, r, 0, 0, 8,
                                                 phantom1.mask);
            for (std::size_t v = 0; v < out1.n_voxels(); ++v)
                require(out1.data[v * scheme1.size() + b0_slot] ==
                            phantom1.signals.data[v * scheme1.size() + b0_slot],
                        "single b0 channel was altered");
        }
        return std::string("DW = fitted bitwise, b0 mean path and N_0 = 1 passthrough exact");
    });
}

static void criterion_6_b0_scaling() {
    criterion(6, "b0 bootstrap spread is r times the residual spread", [] {
        const double r = 3.0;
        const std::size_t n_vox = 100000;
        const std::size_t n_b0 = 18;
        double ss_pool = 0.0, ss_draw = 0.0;
        std::size_t n_pool = 0, n_draw = 0;
        std::vector<double> b0(n_b0);
        std::vector<double> out(n_b0);
        for (std::size_t v = 0; v < n_vox; ++v) {
            RngStream gen(stream_key(31337, 0, 0, v, 23));
            for (auto& x : b0) x = 800.0 + 20.0 * gen.normal();
            double mean = 0.0;
            for (double x : b0) mean += x;
            mean /= double(n_b0);
            for (double x : b0) {
                ss_pool += (x - mean) * (x - mean);
                ++n_pool;
            }
            RngStream rng(stream_key(31337, 0, 0, v, kSubstreamB0));
            bootstrap_b0_voxel(b0, r, rng, out);
            for (double x : out) {
                ss_draw += (x - mean) * (x - mean);
                ++n_draw;
            }
        }
        const double pool_std = std::sqrt(ss_pool / double(n_pool));
        const double draw_std = std::sqrt(ss_draw / double(n_draw));
        const double target = r * pool_std;
        require(std::abs(draw_std - target) <= 0.1 * target,
                fmt("draw std %.3f vs 3*std(E0) %.3f (10%% band)", draw_std, target));
        return fmt("%zu voxels: draw std %.3f vs target %.3f", n_vox, draw_std, target);
    });
}

static void criterion_7_thread_determinism() {
    criterion(7, "augment outputs are bit-identical for 1, 4, and 8 threads", [] {
        test::TempDir dir;
        int rc = cli::run({"phantom", "--out-dir", dir.file("ph"), "--dims", "6,6,5", "--noise",
                           "gaussian", "--sigma", "5", "--seed", "12"});
        require(rc == 0, "phantom subcommand failed");
        std::vector<std::string> outs;
        for (const char* threads : {"1", "4", "8"}) {
            const std::string out = dir.file(std::string("aug_t") + threads);
            rc = cli::run({"augment", "--dwi", dir.file("ph/signals.nii"), "--bvals",
                           dir.file("ph/bvals"), "--bvecs", dir.file("ph/bvecs"), "--mask",
                           dir.file("ph/mask.nii"), "--seed", "2024", "--threads", threads,
                           "--out-dir", out});
            require(rc == 0, "augment subcommand failed");
            outs.push_back(out);
        }
        for (const char* name : {"boot_r2_rep1.nii", "boot_r3_rep1.nii", "boot_r4_rep1.nii"}) {
            const auto ref = file_bytes(outs[0] + "/" + name);
            require(ref == file_bytes(outs[1] + "/" + name), std::string(name) + ": 1 vs 4");
            require(ref == file_bytes(outs[2] + "/" + name), std::string(name) + ": 1 vs 8");
        }
        return std::string("three thread counts, three scans each, byte-identical");
    });
}

static void criterion_8_default_plan() {
    criterion(8, "default plan emits one scan per scale factor {2, 3, 4}", [] {
        const auto scheme = hcp_like_scheme(8, {1000.0}, 2);
        const auto dict = shore_dictionary(scheme, 0, 700.0);
        const auto op = build_fit_operator(dict, 0.0);
        PhantomSpec spec;
        spec.dims = {4, 4, 4};
        spec.noise = NoiseModel::gaussian;
        spec.sigma = 2.0;
        const auto phantom = generate(spec, scheme);
        const auto dw = gather_channels(phantom.signals, scheme.dw_indices());
        const auto fits = fit_volume(op, dict, dw, phantom.mask);

        BootstrapPlan plan; // defaults: scales {2,3,4}, one replicate
        const auto outs = bootstrap_scan(scheme, phantom.signals, fits, plan, phantom.mask);
        require(outs.size() == 3, fmt("expected 3 outputs, got %zu", outs.size()));
        require(outs[0].scale == 2.0 && outs[1].scale == 3.0 && outs[2].scale == 4.0,
                "scales are not {2, 3, 4}");
        return std::string("3 scans per input scan");
    });
}

static void criterion_9_atom_counts() {
    criterion(9, "atom counts match brute-force enumeration", [] {
        const std::size_t expected[5] = {1, 7, 22, 50, 95};
        for (int k = 0; k < 5; ++k) {
            const int order = 2 * k;
            std::size_t brute = 0;
            for (int l = 0; l <= order; ++l)
                for (int n = 0; n <= order; ++n)
                    for (int m = -order; m <= order; ++m) {
                        const bool member =
                            l % 2 == 0 && std::abs(m) <= l && l <= n && 2 * n - l <= order;
                        if (member) ++brute;
                    }
            require(brute == expected[std::size_t(k)],
                    fmt("brute-force count %zu != %zu at order %d", brute,
                        expected[std::size_t(k)], order));
            require(shore_atom_count(order) == expected[std::size_t(k)],
                    fmt("formula count mismatch at order %d", order));
            require(shore_atoms(order).size() == expected[std::size_t(k)],
                    fmt("atom table size mismatch at order %d", order));
        }
        return std::string("orders {0,2,4,6,8} -> {1,7,22,50,95}");
    });
}

static void criterion_10_io_and_subsample() {
    criterion(10, "NIfTI round trip is bit-exact; 12-direction protocol matches", [] {
        test::TempDir dir;
        Volume4D v64 = test::random_volume(9, 7, 5, 11, 2017, -1000.0, 1000.0);
        write_nifti(v64, dir.file("v64.nii"), DiskDtype::float64);
        require(read_nifti(dir.file("v64.nii")).data == v64.data, "float64 round trip differs");

        Volume4D v32 = v64;
        for (auto& x : v32.data) x = double(float(x));
        write_nifti(v32, dir.file("v32.nii"), DiskDtype::float32);
        require(read_nifti(dir.file("v32.nii")).data == v32.data, "float32 round trip differs");

        const auto scheme = hcp_like_scheme();
        const auto r = subsample(scheme, {{1000.0, 12}}, 18);
        require(r.scheme.n_dw() == 12, fmt("DW count %zu != 12", r.scheme.n_dw()));
        require(r.scheme.n_b0() == 18, fmt("b0 count %zu != 18", r.scheme.n_b0()));
        for (std::size_t i : r.scheme.dw_indices())
            require(std::abs(r.scheme.bvalues[i] - 1000.0) <= 50.0,
                    "selected DW channel is not on the b=1000 shell");
        return std::string("round trips bit-exact; 12 DW + 18 b0 protocol reproduced");
    });
}

static void criterion_11_dice() {
    criterion(11, "Dice utility matches fixtures and the scalar-loop oracle", [] {
        auto a = LabelVolume::create(6, 6, 6, 1);
        auto b = LabelVolume::create(6, 6, 6, 1);
        for (std::size_t v = 0; v < 20; ++v) a.set(v, 0, true);
        require(dice(a, a, 0) == 1.0, "identity != 1.0");
        for (std::size_t v = 20; v < 40; ++v) b.set(v, 0, true);
        require(dice(a, b, 0) == 0.0, "disjoint != 0.0");
        auto c = LabelVolume::create(6, 6, 6, 1);
        for (std::size_t v = 10; v < 30; ++v) c.set(v, 0, true); // overlap 10, sizes 20/20
        require(dice(a, c, 0) == 0.5, "half overlap != 0.5");

        std::mt19937_64 rng(404);
        const std::size_t n_labels = 72;
        auto x = LabelVolume::create(8, 8, 8, n_labels);
        auto y = LabelVolume::create(8, 8, 8, n_labels);
        for (std::size_t v = 0; v < x.n_voxels(); ++v)
            for (std::size_t l = 0; l < n_labels; ++l) {
                x.set(v, l, rng() % 3 == 0);
                y.set(v, l, rng() % 3 == 0);
            }
        double worst = 0.0;
        for (std::size_t l = 0; l < n_labels; ++l) {
            std::size_t na = 0, nb = 0, nab = 0;
            for (std::size_t v = 0; v < x.n_voxels(); ++v) {
                const bool ia = x.at(v, l);
                const bool ib = y.at(v, l);
                na += ia ? 1 : 0;
                nb += ib ? 1 : 0;
                nab += (ia && ib) ? 1 : 0;
            }
            const double oracle = (na + nb) == 0 ? 1.0 : 2.0 * double(nab) / double(na + nb);
            worst = std::max(worst, std::abs(dice(x, y, l) - oracle));
        }
        require(worst <= 1e-12, fmt("worst deviation from oracle %.3e", worst));
        return fmt("fixtures exact; 72 labels within %.1e of the oracle", worst);
    });
}

int main() {
    criterion_1_leverage_trace();
    criterion_2_residual_orthogonality();
    criterion_3_variance_correction();
    criterion_4_scale_linearity();
    criterion_5_r0_identity();
    criterion_6_b0_scaling();
    criterion_7_thread_determinism();
    criterion_8_default_plan();
    criterion_9_atom_counts();
    criterion_10_io_and_subsample();
    criterion_11_dice();

    if (failures == 0)
        std::printf("all 11 acceptance criteria passed\n");
    else
        std::printf("%d acceptance criteria FAILED\n", failures);
    return failures;
}
