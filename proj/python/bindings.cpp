#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

#include "dwiboot/bootstrap.hpp"
#include "dwiboot/errors.hpp"
#include "dwiboot/fitting.hpp"
#include "dwiboot/gradients.hpp"
#include "dwiboot/metrics.hpp"
#include "dwiboot/nifti.hpp"
#include "dwiboot/phantom.hpp"
#include "dwiboot/shore.hpp"
#include "dwiboot/version.hpp"

namespace py = pybind11;
using namespace dwiboot;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

GradientScheme scheme_from_arrays(const DoubleArray& bvals, const DoubleArray& bvecs,
                                  double b0_threshold) {
    if (bvals.ndim() != 1) throw InputError("bvals must be a 1-D array");
    const std::size_t n = std::size_t(bvals.shape(0));
    if (bvecs.ndim() != 2 || (std::size_t(bvecs.shape(0)) != 3 && std::size_t(bvecs.shape(1)) != 3))
        throw InputError("bvecs must have shape (3, n) or (n, 3)");

    const bool rows3 = std::size_t(bvecs.shape(0)) == 3 && std::size_t(bvecs.shape(1)) == n;
    if (!rows3 && (std::size_t(bvecs.shape(0)) != n || std::size_t(bvecs.shape(1)) != 3))
        throw InputError("bvals and bvecs describe different channel counts");

    GradientScheme s;
    s.b0_threshold = b0_threshold;
    s.bvalues.assign(bvals.data(), bvals.data() + n);
    s.directions.resize(n);
    auto b = bvecs.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i) {
        Direction d = rows3 ? Direction{b(0, py::ssize_t(i)), b(1, py::ssize_t(i)), b(2, py::ssize_t(i))}
                            : Direction{b(py::ssize_t(i), 0), b(py::ssize_t(i), 1), b(py::ssize_t(i), 2)};
        const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if (!s.is_b0(i)) {
            if (norm < 0.9 || norm > 1.1)
                throw InputError("DW direction norm outside [0.9, 1.1]");
            for (auto& c : d) c /= norm;
        } else if (norm >= 0.9 && norm <= 1.1) {
            for (auto& c : d) c /= norm;
        }
        s.directions[i] = d;
    }
    return s;
}

py::tuple scheme_to_arrays(const GradientScheme& s) {
    py::array_t<double> bvals(py::ssize_t(s.size()));
    py::array_t<double> bvecs({py::ssize_t(3), py::ssize_t(s.size())});
    auto bv = bvals.mutable_unchecked<1>();
    auto bo = bvecs.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        bv(py::ssize_t(i)) = s.bvalues[i];
        for (int r = 0; r < 3; ++r) bo(r, py::ssize_t(i)) = s.directions[i][std::size_t(r)];
    }
    return py::make_tuple(bvals, bvecs);
}

Volume4D volume_from_array(const DoubleArray& data) {
    if (data.ndim() != 4) throw InputError("volume data must have shape (nx, ny, nz, nc)");
    const auto nx = std::size_t(data.shape(0)), ny = std::size_t(data.shape(1));
    const auto nz = std::size_t(data.shape(2)), nc = std::size_t(data.shape(3));
    Volume4D v = Volume4D::create(nx, ny, nz, nc);
    auto a = data.unchecked<4>();
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t z = 0; z < nz; ++z) {
                double* voxel = v.data.data() + v.voxel_index(x, y, z) * nc;
                for (std::size_t c = 0; c < nc; ++c)
                    voxel[c] = a(py::ssize_t(x), py::ssize_t(y), py::ssize_t(z), py::ssize_t(c));
            }
    return v;
}

py::array_t<double> array_from_volume(const Volume4D& v) {
    py::array_t<double> out({py::ssize_t(v.nx()), py::ssize_t(v.ny()), py::ssize_t(v.nz()),
                             py::ssize_t(v.nc())});
    auto a = out.mutable_unchecked<4>();
    for (std::size_t x = 0; x < v.nx(); ++x)
        for (std::size_t y = 0; y < v.ny(); ++y)
            for (std::size_t z = 0; z < v.nz(); ++z) {
                const double* voxel = v.data.data() + v.voxel_index(x, y, z) * v.nc();
                for (std::size_t c = 0; c < v.nc(); ++c)
                    a(py::ssize_t(x), py::ssize_t(y), py::ssize_t(z), py::ssize_t(c)) = voxel[c];
            }
    return out;
}

Mask mask_from_array(const std::optional<DoubleArray>& mask,
                     std::size_t nx, std::size_t ny, std::size_t nz) {
    if (!mask) return Mask::full(nx, ny, nz);
    if (mask->ndim() != 3) throw InputError("mask must have shape (nx, ny, nz)");
    if (std::size_t(mask->shape(0)) != nx || std::size_t(mask->shape(1)) != ny ||
        std::size_t(mask->shape(2)) != nz)
        throw InputError("mask dims do not match volume spatial dims");
    Mask m = Mask::none(nx, ny, nz);
    auto a = mask->unchecked<3>();
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t z = 0; z < nz; ++z)
                m.data[x + nx * (y + ny * z)] =
                    a(py::ssize_t(x), py::ssize_t(y), py::ssize_t(z)) > 0.5 ? 1 : 0;
    return m;
}

DiskDtype dtype_from_name(const std::string& name) {
    if (name == "uint8") return DiskDtype::uint8;
    if (name == "int16") return DiskDtype::int16;
    if (name == "float32") return DiskDtype::float32;
    if (name == "float64") return DiskDtype::float64;
    throw InputError("dtype must be uint8, int16, float32, or float64");
}

} // namespace

PYBIND11_MODULE(_dwiboot, m) {
    m.doc() = "dMRI augmentation by scaled residual bootstrap (C++ core)";
    m.attr("__version__") = kVersion;

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<DegeneracyError>(m, "DegeneracyError", PyExc_ArithmeticError);

    m.def("atom_count", &shore_atom_count, py::arg("radial_order"),
          "Number of basis atoms for an even radial order.");

    m.def(
        "atoms",
        [](int radial_order) {
            py::list out;
            for (const auto& a : shore_atoms(radial_order))
                out.append(py::make_tuple(a.n, a.l, a.m));
            return out;
        },
        py::arg("radial_order"), "Atom (n, l, m) triples in column order.");

    m.def(
        "shore_matrix",
        [](const DoubleArray& bvals, const DoubleArray& bvecs, int radial_order, double zeta,
           double b0_threshold) {
            const auto scheme = scheme_from_arrays(bvals, bvecs, b0_threshold);
            const auto dict = shore_dictionary(scheme, radial_order, zeta);
            py::array_t<double> mat({py::ssize_t(dict.matrix.rows()),
                                     py::ssize_t(dict.matrix.cols())});
            auto a = mat.mutable_unchecked<2>();
            for (py::ssize_t r = 0; r < py::ssize_t(dict.matrix.rows()); ++r)
                for (py::ssize_t c = 0; c < py::ssize_t(dict.matrix.cols()); ++c)
                    a(r, c) = dict.matrix(r, c);
            return py::make_tuple(mat, scheme.dw_indices());
        },
        py::arg("bvals"), py::arg("bvecs"), py::arg("radial_order") = 6, py::arg("zeta") = 700.0,
        py::arg("b0_threshold") = kDefaultB0Threshold,
        "Design matrix over DW channels; returns (matrix, dw_channel_indices).");

    m.def(
        "hcp_like_scheme",
        [](std::size_t per_shell, const std::vector<double>& shells, std::size_t n_b0) {
            return scheme_to_arrays(hcp_like_scheme(per_shell, shells, n_b0));
        },
        py::arg("per_shell") = 90,
        py::arg("shells") = std::vector<double>{1000.0, 2000.0, 3000.0}, py::arg("n_b0") = 18,
        "Synthetic three-shell scheme; returns (bvals, bvecs).");

    m.def(
        "subsample",
        [](const DoubleArray& bvals, const DoubleArray& bvecs,
           const std::vector<std::pair<double, std::size_t>>& shells, std::size_t b0_count,
           const std::string& strategy, const std::optional<std::vector<std::size_t>>& indices,
           double b0_threshold) {
            const auto scheme = scheme_from_arrays(bvals, bvecs, b0_threshold);
            std::vector<ShellRequest> reqs;
            for (const auto& [b, count] : shells) reqs.push_back({b, count});
            const auto strat = strategy == "indices" ? SubsampleStrategy::indices
                                                     : SubsampleStrategy::farthest_point;
            const auto result = subsample(scheme, reqs, b0_count, strat, indices);
            return py::make_tuple(scheme_to_arrays(result.scheme), result.index_map);
        },
        py::arg("bvals"), py::arg("bvecs"), py::arg("shells"), py::arg("b0_count"),
        py::arg("strategy") = "farthest_point", py::arg("indices") = std::nullopt,
        py::arg("b0_threshold") = kDefaultB0Threshold,
        "Reduce a scheme; returns ((bvals, bvecs), index_map).");

    m.def(
        "read_nifti",
        [](const std::string& path) {
            const auto v = read_nifti(path);
            py::array_t<double> affine({py::ssize_t(4), py::ssize_t(4)});
            std::memcpy(affine.mutable_data(), v.affine.data(), 16 * sizeof(double));
            return py::make_tuple(array_from_volume(v), affine);
        },
        py::arg("path"), "Read a NIfTI-1 volume; returns (data[nx,ny,nz,nc], affine).");

    m.def(
        "write_nifti",
        [](const std::string& path, const DoubleArray& data,
           const std::optional<std::array<double, 3>>& spacing, const std::string& dtype) {
            Volume4D v = volume_from_array(data);
            if (spacing) {
                v.spacing = *spacing;
                v.affine = {(*spacing)[0], 0, 0, 0, 0, (*spacing)[1], 0, 0,
                            0, 0, (*spacing)[2], 0, 0, 0, 0, 1};
            }
            write_nifti(v, path, dtype_from_name(dtype));
        },
        py::arg("path"), py::arg("data"), py::arg("spacing") = std::nullopt,
        py::arg("dtype") = "float32");

    m.def(
        "fit",
        [](const DoubleArray& bvals, const DoubleArray& bvecs, const DoubleArray& data,
           const std::optional<DoubleArray>& mask, int radial_order, double zeta, double ridge,
           double b0_threshold, unsigned threads) {
            const auto scheme = scheme_from_arrays(bvals, bvecs, b0_threshold);
            Volume4D vol = volume_from_array(data);
            if (vol.nc() != scheme.size())
                throw InputError("data channel count does not match the scheme");
            const auto m_ = mask_from_array(mask, vol.nx(), vol.ny(), vol.nz());
            const auto dict = shore_dictionary(scheme, radial_order, zeta);
            const auto op = build_fit_operator(dict, ridge);
            const auto dw = gather_channels(vol, scheme.dw_indices());
            const auto fits =
                fit_volume(op, dict, dw, m_, threads == 0 ? default_thread_count() : threads, true);

            Volume4D fitted = Volume4D::create(vol.nx(), vol.ny(), vol.nz(), fits.n_channels);
            fitted.data = fits.fitted;
            Volume4D residuals = fitted;
            residuals.data = fits.residuals;
            Volume4D coeffs = Volume4D::create(vol.nx(), vol.ny(), vol.nz(), fits.n_atoms);
            coeffs.data = fits.coefficients;

            py::array_t<double> hat(py::ssize_t(op.hat_diag.size()));
            std::memcpy(hat.mutable_data(), op.hat_diag.data(),
                        std::size_t(op.hat_diag.size()) * sizeof(double));

            const auto sigma = estimate_noise_sigma(fits, m_);
            py::dict out;
            out["fitted"] = array_from_volume(fitted);
            out["residuals"] = array_from_volume(residuals);
            out["coefficients"] = array_from_volume(coeffs);
            out["hat_diag"] = hat;
            out["sigma_pooled"] = sigma.pooled;
            out["dw_indices"] = scheme.dw_indices();
            return out;
        },
        py::arg("bvals"), py::arg("bvecs"), py::arg("data"), py::arg("mask") = std::nullopt,
        py::arg("radial_order") = 6, py::arg("zeta") = 700.0, py::arg("ridge") = 0.0,
        py::arg("b0_threshold") = kDefaultB0Threshold, py::arg("threads") = 0,
        "Per-voxel fit; returns fitted/residual/coefficient arrays over DW channels.");

    m.def(
        "augment",
        [](const DoubleArray& bvals, const DoubleArray& bvecs, const DoubleArray& data,
           const std::optional<DoubleArray>& mask, const std::vector<double>& scales,
           std::uint64_t seed, std::size_t replicates, int radial_order, double zeta, double ridge,
           bool clip_at_zero, double b0_threshold, unsigned threads) {
            const auto scheme = scheme_from_arrays(bvals, bvecs, b0_threshold);
            scheme.require_bootstrap_ready();
            Volume4D vol = volume_from_array(data);
            if (vol.nc() != scheme.size())
                throw InputError("data channel count does not match the scheme");
            const auto m_ = mask_from_array(mask, vol.nx(), vol.ny(), vol.nz());
            const auto dict = shore_dictionary(scheme, radial_order, zeta);
            const auto op = build_fit_operator(dict, ridge);
            const auto dw = gather_channels(vol, scheme.dw_indices());
            const unsigned t = threads == 0 ? default_thread_count() : threads;
            const auto fits = fit_volume(op, dict, dw, m_, t);

            BootstrapPlan plan;
            plan.scales = scales;
            plan.seed = seed;
            plan.replicates_per_scale = replicates;
            plan.clip_at_zero = clip_at_zero;
            const auto outs = bootstrap_scan(scheme, vol, fits, plan, m_, t);

            py::list result;
            for (const auto& o : outs)
                result.append(py::make_tuple(o.scale, o.replicate + 1,
                                             array_from_volume(o.volume)));
            return result;
        },
        py::arg("bvals"), py::arg("bvecs"), py::arg("data"), py::arg("mask") = std::nullopt,
        py::arg("scales") = std::vector<double>{2.0, 3.0, 4.0}, py::arg("seed") = 0,
        py::arg("replicates") = 1, py::arg("radial_order") = 6, py::arg("zeta") = 700.0,
        py::arg("ridge") = 0.0, py::arg("clip_at_zero") = false,
        py::arg("b0_threshold") = kDefaultB0Threshold, py::arg("threads") = 0,
        "Scaled residual bootstrap; returns [(scale, replicate, data), ...].");

    m.def(
        "phantom",
        [](std::array<std::size_t, 3> dims, const DoubleArray& bvals, const DoubleArray& bvecs,
           double s0, const std::string& noise, double sigma, std::uint64_t seed,
           double b0_threshold) {
            const auto scheme = scheme_from_arrays(bvals, bvecs, b0_threshold);
            PhantomSpec spec;
            spec.dims = dims;
            spec.s0 = s0;
            spec.sigma = sigma;
            spec.seed = seed;
            if (noise == "gaussian")
                spec.noise = NoiseModel::gaussian;
            else if (noise == "rician")
                spec.noise = NoiseModel::rician;
            else if (noise == "none")
                spec.noise = NoiseModel::none;
            else
                throw InputError("noise must be none, gaussian, or rician");
            const auto r = generate(spec, scheme);
            return py::make_tuple(array_from_volume(r.signals), array_from_volume(r.noise_free));
        },
        py::arg("dims"), py::arg("bvals"), py::arg("bvecs"), py::arg("s0") = 100.0,
        py::arg("noise") = "none", py::arg("sigma") = 0.0, py::arg("seed") = 0,
        py::arg("b0_threshold") = kDefaultB0Threshold,
        "Multi-tensor phantom; returns (signals, ground_truth).");

    m.def(
        "dice",
        [](const DoubleArray& a, const DoubleArray& b) {
            if (a.ndim() != b.ndim() || (a.ndim() != 3 && a.ndim() != 4))
                throw InputError("expected two 3-D or 4-D label arrays");
            auto as_label = [](const DoubleArray& arr) {
                Volume4D v;
                if (arr.ndim() == 4) {
                    v = volume_from_array(arr);
                } else {
                    DoubleArray r(std::vector<py::ssize_t>{arr.shape(0), arr.shape(1),
                                                           arr.shape(2), 1});
                    std::memcpy(r.mutable_data(), arr.data(),
                                std::size_t(arr.size()) * sizeof(double));
                    v = volume_from_array(r);
                }
                return LabelVolume::from_volume(v);
            };
            const auto la = as_label(a);
            const auto lb = as_label(b);
            std::vector<std::size_t> labels(la.n_labels());
            for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i;
            py::list per_label;
            for (std::size_t l : labels) per_label.append(dice(la, lb, l));
            return py::make_tuple(per_label, mean_dice(la, lb, labels));
        },
        py::arg("a"), py::arg("b"),
        "Dice overlap per label channel; returns (per_label, mean).");
}
