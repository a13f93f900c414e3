#include "dwiboot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwiboot/bootstrap.hpp"
#include "dwiboot/errors.hpp"
#include "dwiboot/fitting.hpp"
#include "dwiboot/gradients.hpp"
#include "dwiboot/manifest.hpp"
#include "dwiboot/metrics.hpp"
#include "dwiboot/nifti.hpp"
#include "dwiboot/phantom.hpp"
#include "dwiboot/shore.hpp"
#include "dwiboot/version.hpp"
#include "dwiboot/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dwiboot::cli {

namespace {

std::vector<double> parse_number_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &pos);
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(what) + ": bad number '" + item + "'");
        }
        if (pos != item.size())
            throw CLI::ValidationError(std::string(what) + ": bad number '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
    return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    for (double v : parse_number_list(text, what)) {
        if (v < 0 || v != std::floor(v))
            throw CLI::ValidationError(std::string(what) + ": expected non-negative integers");
        out.push_back(std::size_t(v));
    }
    return out;
}

// "1000:12,2000:18" -> shell requests
std::vector<ShellRequest> parse_shell_spec(const std::string& text) {
    std::vector<ShellRequest> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw CLI::ValidationError("--shells: expected bvalue:count, got '" + item + "'");
        try {
            ShellRequest req;
            req.bvalue = std::stod(item.substr(0, colon));
            const long long c = std::stoll(item.substr(colon + 1));
            if (c < 0) throw std::invalid_argument("negative");
            req.count = std::size_t(c);
            out.push_back(req);
        } catch (const CLI::Error&) {
            throw;
        } catch (const std::exception&) {
            throw CLI::ValidationError("--shells: expected bvalue:count, got '" + item + "'");
        }
    }
    if (out.empty()) throw CLI::ValidationError("--shells: empty spec");
    return out;
}

std::string format_scale(double r) {
    if (r == std::floor(r) && std::abs(r) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", r);
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", r);
    return buf;
}

void copy_file_bytes(const std::string& src, const std::string& dst) {
    std::ifstream in(src, std::ios::binary);
    if (!in) throw InputError("cannot open '" + src + "'");
    std::ofstream out(dst, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + dst + "'");
    out << in.rdbuf();
    if (!out) throw InputError("failed writing '" + dst + "'");
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

const CLI::Validator EvenInteger(
    [](std::string& s) -> std::string {
        try {
            if (std::stoi(s) % 2 != 0) return "must be an even integer";
        } catch (const std::exception&) {
            return "must be an even integer";
        }
        return {};
    },
    "EVEN");

Mask load_mask_or_full(const std::string& path, const Volume4D& volume) {
    if (path.empty()) return Mask::full(volume.dims[0], volume.dims[1], volume.dims[2]);
    Mask m = read_mask(path);
    m.require_matches(volume);
    return m;
}

// ---------------------------------------------------------------------------
// subcommand options

struct SchemeOpts {
    std::string bvals, bvecs;
    double b0_threshold = kDefaultB0Threshold;

    void attach(CLI::App* sub, bool required = true) {
        auto* a = sub->add_option("--bvals", bvals, "b-values file, one whitespace-separated row");
        auto* b = sub->add_option("--bvecs", bvecs, "gradient directions file, three rows (x, y, z)");
        if (required) {
            a->required();
            b->required();
        }
        sub->add_option("--b0-threshold", b0_threshold,
                        "b-values at or below this are b0 channels")
            ->capture_default_str();
    }
    GradientScheme load() const { return load_scheme(bvals, bvecs, b0_threshold); }
};

struct BasisOpts {
    int radial_order = 6;
    double zeta = 700.0;

    void attach(CLI::App* sub) {
        sub->add_option("--radial-order", radial_order, "even radial order of the basis")
            ->check(EvenInteger)
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        sub->add_option("--zeta", zeta, "radial scale of the basis")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }
};

struct BasisDumpCmd {
    SchemeOpts scheme;
    BasisOpts basis;
    std::string out_prefix;

    void run() const {
        const auto sch = scheme.load();
        const auto dict = shore_dictionary(sch, basis.radial_order, basis.zeta);

        const std::string matrix_path = out_prefix + "_matrix.txt";
        std::ofstream mat(matrix_path, std::ios::binary | std::ios::trunc);
        if (!mat) throw InputError("cannot write '" + matrix_path + "'");
        char buf[32];
        for (Eigen::Index r = 0; r < dict.matrix.rows(); ++r) {
            for (Eigen::Index c = 0; c < dict.matrix.cols(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", dict.matrix(r, c));
                mat << (c ? " " : "") << buf;
            }
            mat << "\n";
        }

        json atoms = json::array();
        for (const auto& a : dict.atom_labels) atoms.push_back({a.n, a.l, a.m});
        const json sidecar = {
            {"atoms", atoms},
            {"params",
             {{"radial_order", dict.params.radial_order},
              {"zeta", dict.params.zeta},
              {"q_mapping", dict.params.q_mapping}}},
            {"n_channels", dict.n_channels()},
            {"n_atoms", dict.n_atoms()},
        };
        const std::string sidecar_path = out_prefix + "_atoms.json";
        std::ofstream side(sidecar_path, std::ios::binary | std::ios::trunc);
        if (!side) throw InputError("cannot write '" + sidecar_path + "'");
        side << sidecar.dump(2) << "\n";
    }
};

struct PhantomCmd {
    std::string out_dir;
    std::string dims_text = "32,32,32";
    double s0 = 100.0;
    std::string noise = "none";
    double sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> compartment_texts;
    SchemeOpts scheme; // optional; falls back to the built-in HCP-like scheme
    unsigned threads = default_thread_count();

    void run() const {
        PhantomSpec spec;
        const auto dims = parse_index_list(dims_text, "--dims");
        if (dims.size() != 3) throw CLI::ValidationError("--dims: expected nx,ny,nz");
        spec.dims = {dims[0], dims[1], dims[2]};
        spec.s0 = s0;
        spec.sigma = sigma;
        spec.seed = seed;
        if (noise == "none")
            spec.noise = NoiseModel::none;
        else if (noise == "gaussian")
            spec.noise = NoiseModel::gaussian;
        else if (noise == "rician")
            spec.noise = NoiseModel::rician;
        else
            throw CLI::ValidationError("--noise: expected none, gaussian, or rician");

        if (!compartment_texts.empty()) {
            spec.compartments.clear();
            for (const auto& text : compartment_texts) {
                const auto v = parse_number_list(text, "--compartment");
                if (v.size() != 6)
                    throw CLI::ValidationError(
                        "--compartment: expected dx,dy,dz,axial,radial,fraction");
                spec.compartments.push_back(
                    TensorCompartment{{v[0], v[1], v[2]}, v[3], v[4], v[5]});
            }
        }

        std::vector<std::string> inputs;
        GradientScheme sch;
        if (!scheme.bvals.empty() || !scheme.bvecs.empty()) {
            if (scheme.bvals.empty() || scheme.bvecs.empty())
                throw CLI::ValidationError("--bvals and --bvecs must be given together");
            sch = scheme.load();
            inputs = {scheme.bvals, scheme.bvecs};
        } else {
            sch = hcp_like_scheme();
        }

        const auto result = generate(spec, sch, threads);

        ensure_out_dir(out_dir);
        const fs::path dir(out_dir);
        write_nifti(result.signals, (dir / "signals.nii").string(), DiskDtype::float32);
        write_nifti(result.noise_free, (dir / "ground_truth.nii").string(), DiskDtype::float32);
        write_mask(result.mask, (dir / "mask.nii").string());
        save_scheme(sch, (dir / "bvals").string(), (dir / "bvecs").string());

        json compartments = json::array();
        for (const auto& c : spec.compartments)
            compartments.push_back({{"principal", {c.principal[0], c.principal[1], c.principal[2]}},
                                    {"axial_diffusivity", c.axial_diffusivity},
                                    {"radial_diffusivity", c.radial_diffusivity},
                                    {"fraction", c.fraction}});
        const json spec_json = {
            {"dims", {spec.dims[0], spec.dims[1], spec.dims[2]}},
            {"s0", spec.s0},
            {"noise", noise},
            {"sigma", spec.sigma},
            {"seed", spec.seed},
            {"compartments", compartments},
            {"n_channels", sch.size()},
        };
        std::ofstream spec_out(dir / "spec.json", std::ios::binary | std::ios::trunc);
        spec_out << spec_json.dump(2) << "\n";

        write_manifest(out_dir, make_manifest("phantom", spec_json, inputs, seed));
    }
};

struct FitCmd {
    std::string dwi, mask_path, out_dir;
    SchemeOpts scheme;
    BasisOpts basis;
    double ridge = 0.0;
    unsigned threads = default_thread_count();

    void run() const {
        const auto sch = scheme.load();
        const auto volume = read_nifti(dwi);
        if (volume.nc() != sch.size())
            throw InputError("scan has " + std::to_string(volume.nc()) +
                             " channels but the scheme describes " + std::to_string(sch.size()));
        const Mask mask = load_mask_or_full(mask_path, volume);

        const auto dict = shore_dictionary(sch, basis.radial_order, basis.zeta);
        const auto op = build_fit_operator(dict, ridge);
        const auto dw_volume = gather_channels(volume, sch.dw_indices());
        const auto fits = fit_volume(op, dict, dw_volume, mask, threads, true);

        ensure_out_dir(out_dir);
        const fs::path dir(out_dir);

        Volume4D coeffs = Volume4D::create(volume.dims[0], volume.dims[1], volume.dims[2],
                                           op.n_atoms(), volume.spacing);
        coeffs.affine = volume.affine;
        coeffs.meta = volume.meta;
        coeffs.data = fits.coefficients;
        Volume4D fitted = Volume4D::create(volume.dims[0], volume.dims[1], volume.dims[2],
                                           fits.n_channels, volume.spacing);
        fitted.affine = volume.affine;
        fitted.meta = volume.meta;
        fitted.data = fits.fitted;
        Volume4D residuals = fitted;
        residuals.data = fits.residuals;
        write_nifti(coeffs, (dir / "coefficients.nii").string(), DiskDtype::float32);
        write_nifti(fitted, (dir / "fitted.nii").string(), DiskDtype::float32);
        write_nifti(residuals, (dir / "residuals.nii").string(), DiskDtype::float32);

        const auto sigma = estimate_noise_sigma(fits, mask);
        json variance = json::array();
        for (double s : sigma.per_channel) variance.push_back(s * s);
        const json report = {
            {"n_dw_channels", op.n_channels()},
            {"n_atoms", op.n_atoms()},
            {"ridge", ridge},
            {"masked_voxels", sigma.n_voxels},
            {"hat_diag",
             {{"sum", op.hat_diag.sum()},
              {"min", op.hat_diag.minCoeff()},
              {"max", op.hat_diag.maxCoeff()}}},
            {"residual_variance_per_channel", variance},
            {"pooled_sigma", sigma.pooled},
        };
        std::ofstream report_out(dir / "report.json", std::ios::binary | std::ios::trunc);
        report_out << report.dump(2) << "\n";

        const json params = {
            {"dwi", dwi},           {"bvals", scheme.bvals},
            {"bvecs", scheme.bvecs}, {"mask", mask_path},
            {"radial_order", basis.radial_order}, {"zeta", basis.zeta},
            {"ridge", ridge},       {"b0_threshold", scheme.b0_threshold},
        };
        std::vector<std::string> inputs = {dwi, scheme.bvals, scheme.bvecs};
        if (!mask_path.empty()) inputs.push_back(mask_path);
        write_manifest(out_dir, make_manifest("fit", params, inputs, 0));
    }
};

struct AugmentCmd {
    std::string dwi, mask_path, out_dir;
    SchemeOpts scheme;
    BasisOpts basis;
    std::string scales_text = "2,3,4";
    std::size_t replicates = 1;
    std::uint64_t seed = 0;
    double ridge = 0.0;
    bool clip_at_zero = false;
    unsigned threads = default_thread_count();

    void run() const {
        BootstrapPlan plan;
        plan.scales = parse_number_list(scales_text, "--scales");
        plan.seed = seed;
        plan.replicates_per_scale = replicates;
        plan.clip_at_zero = clip_at_zero;
        plan.validate();

        const auto sch = scheme.load();
        sch.require_bootstrap_ready();
        const auto volume = read_nifti(dwi);
        if (volume.nc() != sch.size())
            throw InputError("scan has " + std::to_string(volume.nc()) +
                             " channels but the scheme describes " + std::to_string(sch.size()));
        const Mask mask = load_mask_or_full(mask_path, volume);

        const auto dict = shore_dictionary(sch, basis.radial_order, basis.zeta);
        const auto op = build_fit_operator(dict, ridge);
        const auto dw_volume = gather_channels(volume, sch.dw_indices());
        const auto fits = fit_volume(op, dict, dw_volume, mask, threads, false);
        const auto sigma = estimate_noise_sigma(fits, mask);

        ensure_out_dir(out_dir);
        const fs::path dir(out_dir);
        json outputs = json::array();
        for (std::size_t si = 0; si < plan.scales.size(); ++si) {
            for (std::size_t rep = 0; rep < plan.replicates_per_scale; ++rep) {
                const auto boot = bootstrap_scan_one(sch, volume, fits, plan.scales[si], si, rep,
                                                     plan.seed, mask, plan.clip_at_zero, threads);
                const std::string name = "boot_r" + format_scale(plan.scales[si]) + "_rep" +
                                         std::to_string(rep + 1) + ".nii";
                write_nifti(boot, (dir / name).string(), DiskDtype::float32);
                outputs.push_back(name);
            }
        }
        copy_file_bytes(scheme.bvals, (dir / "bvals").string());
        copy_file_bytes(scheme.bvecs, (dir / "bvecs").string());

        const json params = {
            {"dwi", dwi},
            {"bvals", scheme.bvals},
            {"bvecs", scheme.bvecs},
            {"mask", mask_path},
            {"scales", plan.scales},
            {"replicates", plan.replicates_per_scale},
            {"seed", plan.seed},
            {"ridge", ridge},
            {"radial_order", basis.radial_order},
            {"zeta", basis.zeta},
            {"b0_threshold", scheme.b0_threshold},
            {"clip_at_zero", plan.clip_at_zero},
            {"outputs", outputs},
            {"sigma",
             {{"pooled", sigma.pooled},
              {"per_channel", sigma.per_channel},
              {"masked_voxels", sigma.n_voxels}}},
        };
        std::vector<std::string> inputs = {dwi, scheme.bvals, scheme.bvecs};
        if (!mask_path.empty()) inputs.push_back(mask_path);
        write_manifest(out_dir, make_manifest("augment", params, inputs, seed));
    }
};

struct SubsampleCmd {
    std::string dwi, out_dir;
    SchemeOpts scheme;
    std::string shells_text;
    std::size_t b0_count = 0;
    std::string strategy = "farthest_point";
    std::string indices_text, indices_file;
    double tolerance = kDefaultShellTolerance;

    void run() const {
        const auto sch = scheme.load();

        SubsampleStrategy strat;
        if (strategy == "farthest_point")
            strat = SubsampleStrategy::farthest_point;
        else if (strategy == "indices")
            strat = SubsampleStrategy::indices;
        else
            throw CLI::ValidationError("--strategy: expected farthest_point or indices");

        std::optional<std::vector<std::size_t>> explicit_indices;
        if (!indices_text.empty()) {
            explicit_indices = parse_index_list(indices_text, "--indices");
        } else if (!indices_file.empty()) {
            std::ifstream in(indices_file);
            if (!in) throw InputError("cannot open '" + indices_file + "'");
            std::vector<std::size_t> idx;
            long long v = 0;
            while (in >> v) {
                if (v < 0) throw InputError("--indices-file: negative index");
                idx.push_back(std::size_t(v));
            }
            if (!in.eof()) throw InputError("--indices-file: non-numeric token");
            explicit_indices = std::move(idx);
        }

        std::vector<ShellRequest> requests;
        if (!shells_text.empty()) requests = parse_shell_spec(shells_text);
        if (strat == SubsampleStrategy::farthest_point && requests.empty())
            throw CLI::ValidationError("--shells is required for the farthest_point strategy");

        const auto result = subsample(sch, requests, b0_count, strat, explicit_indices, tolerance);
        const auto volume = read_nifti(dwi);
        if (volume.nc() != sch.size())
            throw InputError("scan has " + std::to_string(volume.nc()) +
                             " channels but the scheme describes " + std::to_string(sch.size()));
        const auto reduced = gather_channels(volume, result.index_map);

        ensure_out_dir(out_dir);
        const fs::path dir(out_dir);
        write_nifti(reduced, (dir / "dwi.nii").string(), volume.dtype_on_disk);
        save_scheme(result.scheme, (dir / "bvals").string(), (dir / "bvecs").string());

        const json params = {
            {"dwi", dwi},
            {"bvals", scheme.bvals},
            {"bvecs", scheme.bvecs},
            {"shells", shells_text},
            {"b0_count", b0_count},
            {"strategy", strategy},
            {"tolerance", tolerance},
            {"index_map", result.index_map},
        };
        write_manifest(out_dir, make_manifest("subsample", params,
                                              {dwi, scheme.bvals, scheme.bvecs}, 0));
    }
};

struct DiceCmd {
    std::string a_path, b_path;
    std::string labels_text;
    std::string out_path;
    bool as_json = false;

    void run() const {
        const auto a = LabelVolume::from_volume(read_nifti(a_path));
        const auto b = LabelVolume::from_volume(read_nifti(b_path));
        if (a.dims != b.dims)
            throw InputError("label volumes have different dims");

        std::vector<std::size_t> labels;
        if (labels_text.empty()) {
            labels.resize(a.n_labels());
            for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i;
        } else {
            labels = parse_index_list(labels_text, "--labels");
        }

        json per_label = json::object();
        double sum = 0.0;
        for (std::size_t label : labels) {
            const double d = dice(a, b, label);
            per_label[std::to_string(label)] = d;
            sum += d;
        }
        const double mean = sum / double(labels.size());

        std::ostream* os = &std::cout;
        std::ofstream file;
        if (!out_path.empty()) {
            file.open(out_path, std::ios::binary | std::ios::trunc);
            if (!file) throw InputError("cannot write '" + out_path + "'");
            os = &file;
        }
        if (as_json || !out_path.empty()) {
            *os << json{{"per_label", per_label}, {"mean", mean}}.dump(2) << "\n";
        } else {
            for (std::size_t label : labels)
                *os << "label " << label << ": " << per_label[std::to_string(label)].get<double>()
                    << "\n";
            *os << "mean: " << mean << "\n";
        }
    }
};

struct StatsCmd {
    std::string residuals_path, mask_path, signal_path, out_path;
    double sigma = 0.0;

    void run() const {
        const auto residuals = read_nifti(residuals_path);
        const Mask mask = load_mask_or_full(mask_path, residuals);

        // The residual volume is its own fit-store surrogate: RMS over
        // masked voxels, per channel and pooled.
        const std::size_t nc = residuals.nc();
        std::vector<double> per_channel(nc, 0.0);
        double total = 0.0;
        std::size_t n_in = 0;
        for (std::size_t vidx = 0; vidx < residuals.n_voxels(); ++vidx) {
            if (!mask.contains(vidx)) continue;
            const double* voxel = residuals.data.data() + vidx * nc;
            for (std::size_t c = 0; c < nc; ++c) {
                per_channel[c] += voxel[c] * voxel[c];
                total += voxel[c] * voxel[c];
            }
            ++n_in;
        }
        if (n_in == 0) throw InputError("stats needs a non-empty mask");
        for (auto& v : per_channel) v = std::sqrt(v / double(n_in));
        const double pooled = std::sqrt(total / double(n_in * nc));

        json report = {
            {"masked_voxels", n_in},
            {"sigma", {{"pooled", pooled}, {"per_channel", per_channel}}},
        };

        if (!signal_path.empty()) {
            const auto signal = read_nifti(signal_path);
            const Mask signal_mask = load_mask_or_full(mask_path, signal);
            const double snr_sigma = sigma > 0.0 ? sigma : pooled;
            const auto snr = snr_report(signal, signal_mask, snr_sigma);
            report["snr"] = {{"sigma_used", snr_sigma},
                             {"per_channel", snr.per_channel},
                             {"mean", snr.mean}};
        }

        if (out_path.empty()) {
            std::cout << report.dump(2) << "\n";
        } else {
            std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
            if (!out) throw InputError("cannot write '" + out_path + "'");
            out << report.dump(2) << "\n";
        }
    }
};

// ---------------------------------------------------------------------------
// config file injection

std::optional<std::string> extract_config_path(std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw CLI::ValidationError("--config needs a file path");
            std::string path = args[i + 1];
            args.erase(args.begin() + std::ptrdiff_t(i), args.begin() + std::ptrdiff_t(i) + 2);
            return path;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            std::string path = args[i].substr(9);
            args.erase(args.begin() + std::ptrdiff_t(i));
            return path;
        }
    }
    return std::nullopt;
}

std::string json_to_arg_value(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string joined;
        for (const auto& item : v) {
            if (!joined.empty()) joined += ",";
            joined += json_to_arg_value(item);
        }
        return joined;
    }
    return v.dump();
}

/// Expand a config section into flag tokens placed before the user's own
/// flags; options take the last value given, so explicit flags win.
void inject_config(std::vector<std::string>& args, const std::string& config_path) {
    std::ifstream in(config_path);
    if (!in) throw InputError("cannot open config '" + config_path + "'");
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw InputError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    if (!config.is_object()) throw InputError("config must be a JSON object");
    if (args.empty()) return;

    // Locate the subcommand tokens ("basis" is followed by its own subcommand).
    std::size_t insert_at = 0;
    std::string section_name;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].empty() && args[i][0] != '-') {
            section_name = args[i];
            insert_at = i + 1;
            if (args[i] == "basis" && i + 1 < args.size()) insert_at = i + 2;
            break;
        }
    }
    if (section_name.empty() || !config.contains(section_name)) return;
    const json& section = config[section_name];
    if (!section.is_object())
        throw InputError("config section '" + section_name + "' must be an object");

    std::vector<std::string> injected;
    for (const auto& [key, value] : section.items()) {
        if (value.is_boolean()) {
            if (value.get<bool>()) injected.push_back("--" + key);
            continue;
        }
        injected.push_back("--" + key + "=" + json_to_arg_value(value));
    }
    args.insert(args.begin() + std::ptrdiff_t(insert_at), injected.begin(), injected.end());
}

} // namespace

int run(std::vector<std::string> args) {
    CLI::App app{"dMRI data augmentation by scaled residual bootstrap"};
    app.set_version_flag("--version", kVersion);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    // Consumed before parsing; registered so it shows up in --help.
    std::string config_dummy;
    app.add_option("--config", config_dummy,
                   "JSON config file; sections are keyed by subcommand, flags override");

    BasisDumpCmd basis_dump;
    auto* basis = app.add_subcommand("basis", "dictionary inspection");
    auto* dump = basis->add_subcommand("dump", "write the design matrix and atom table");
    basis->require_subcommand(1);
    basis_dump.scheme.attach(dump);
    basis_dump.basis.attach(dump);
    dump->add_option("--out-prefix", basis_dump.out_prefix, "prefix for _matrix.txt and _atoms.json")
        ->required();
    dump->callback([&] { basis_dump.run(); });

    PhantomCmd phantom;
    auto* phantom_cmd = app.add_subcommand("phantom", "generate a synthetic multi-tensor scan");
    phantom_cmd->add_option("--out-dir", phantom.out_dir, "output directory")->required();
    phantom_cmd->add_option("--dims", phantom.dims_text, "grid size nx,ny,nz")
        ->capture_default_str();
    phantom_cmd->add_option("--s0", phantom.s0, "baseline b0 intensity")->capture_default_str();
    phantom_cmd->add_option("--noise", phantom.noise, "none, gaussian, or rician")
        ->capture_default_str();
    phantom_cmd->add_option("--sigma", phantom.sigma, "noise standard deviation")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    phantom_cmd->add_option("--seed", phantom.seed, "random seed")->capture_default_str();
    phantom_cmd
        ->add_option("--compartment", phantom.compartment_texts,
                     "tensor compartment dx,dy,dz,axial,radial,fraction (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    phantom.scheme.attach(phantom_cmd, false);
    phantom_cmd->add_option("--threads", phantom.threads, "worker threads")
        ->capture_default_str();
    phantom_cmd->callback([&] { phantom.run(); });

    FitCmd fit;
    auto* fit_cmd = app.add_subcommand("fit", "per-voxel dictionary fit with corrected residuals");
    fit_cmd->add_option("--dwi", fit.dwi, "input scan (.nii or .nii.gz)")->required();
    fit.scheme.attach(fit_cmd);
    fit_cmd->add_option("--mask", fit.mask_path, "binary mask volume (default: all voxels)");
    fit.basis.attach(fit_cmd);
    fit_cmd->add_option("--ridge", fit.ridge, "Tikhonov weight added to the normal matrix")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    fit_cmd->add_option("--out-dir", fit.out_dir, "output directory")->required();
    fit_cmd->add_option("--threads", fit.threads, "worker threads")->capture_default_str();
    fit_cmd->callback([&] { fit.run(); });

    AugmentCmd augment;
    auto* augment_cmd =
        app.add_subcommand("augment", "generate bootstrap scans with scaled noise levels");
    augment_cmd->add_option("--dwi", augment.dwi, "input scan (.nii or .nii.gz)")->required();
    augment.scheme.attach(augment_cmd);
    augment_cmd->add_option("--mask", augment.mask_path, "binary mask volume (default: all voxels)");
    augment_cmd->add_option("--scales", augment.scales_text, "comma-separated scaling factors")
        ->capture_default_str();
    augment_cmd->add_option("--replicates", augment.replicates, "outputs per scaling factor")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    augment_cmd->add_option("--seed", augment.seed, "random seed")->capture_default_str();
    augment_cmd->add_option("--ridge", augment.ridge, "Tikhonov weight for the fit")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    augment.basis.attach(augment_cmd);
    augment_cmd->add_option("--out-dir", augment.out_dir, "output directory")->required();
    augment_cmd->add_flag("--clip-at-zero", augment.clip_at_zero,
                          "clamp negative bootstrap intensities to zero");
    augment_cmd->add_option("--threads", augment.threads, "worker threads")
        ->capture_default_str();
    augment_cmd->callback([&] { augment.run(); });

    SubsampleCmd sub;
    auto* sub_cmd = app.add_subcommand("subsample", "reduce a scan to a smaller gradient protocol");
    sub_cmd->add_option("--dwi", sub.dwi, "input scan (.nii or .nii.gz)")->required();
    sub.scheme.attach(sub_cmd);
    sub_cmd->add_option("--shells", sub.shells_text, "per-shell selection, e.g. 1000:12,2000:18");
    sub_cmd->add_option("--b0-count", sub.b0_count, "number of b0 channels to keep")->required();
    sub_cmd->add_option("--strategy", sub.strategy, "farthest_point or indices")
        ->capture_default_str();
    sub_cmd->add_option("--indices", sub.indices_text, "explicit DW channel indices (comma list)");
    sub_cmd->add_option("--indices-file", sub.indices_file, "file of explicit DW channel indices");
    sub_cmd->add_option("--tolerance", sub.tolerance, "shell matching tolerance")
        ->capture_default_str();
    sub_cmd->add_option("--out-dir", sub.out_dir, "output directory")->required();
    sub_cmd->callback([&] { sub.run(); });

    DiceCmd dice_opts;
    auto* dice_cmd = app.add_subcommand("dice", "Dice overlap between two multi-label volumes");
    dice_cmd->add_option("--a", dice_opts.a_path, "first label volume")->required();
    dice_cmd->add_option("--b", dice_opts.b_path, "second label volume")->required();
    dice_cmd->add_option("--labels", dice_opts.labels_text, "label channels (default: all)");
    dice_cmd->add_flag("--json", dice_opts.as_json, "emit JSON instead of text");
    dice_cmd->add_option("--out", dice_opts.out_path, "write the JSON report to a file");
    dice_cmd->callback([&] { dice_opts.run(); });

    StatsCmd stats;
    auto* stats_cmd = app.add_subcommand("stats", "noise and SNR summary from residual volumes");
    stats_cmd->add_option("--residuals", stats.residuals_path, "corrected-residual volume")
        ->required();
    stats_cmd->add_option("--mask", stats.mask_path, "binary mask volume (default: all voxels)");
    stats_cmd->add_option("--signal", stats.signal_path, "signal volume for the SNR report");
    stats_cmd->add_option("--sigma", stats.sigma, "noise sigma (default: pooled estimate)")
        ->check(CLI::NonNegativeNumber);
    stats_cmd->add_option("--out", stats.out_path, "write the JSON report to a file");
    stats_cmd->callback([&] { stats.run(); });

    try {
        const auto config_path = extract_config_path(args);
        if (config_path) inject_config(args, *config_path);
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const DegeneracyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(std::size_t(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args));
}

} // namespace dwiboot::cli
