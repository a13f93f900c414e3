#include "dwiboot/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dwiboot/errors.hpp"

namespace dwiboot {

namespace {

std::vector<std::vector<double>> parse_rows(const std::string& text, const char* what) {
    std::vector<std::vector<double>> rows;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        std::istringstream toks(line);
        std::vector<double> row;
        std::string tok;
        while (toks >> tok) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &pos);
            } catch (const std::exception&) {
                throw InputError(std::string(what) + ": non-numeric token '" + tok + "'");
            }
            if (pos != tok.size())
                throw InputError(std::string(what) + ": non-numeric token '" + tok + "'");
            row.push_back(v);
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

double norm3(const Direction& d) {
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Angular distance treating u and -u as the same direction.
double antipodal_angle(const Direction& a, const Direction& b) {
    double dot = std::abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
    return std::acos(std::min(dot, 1.0));
}

} // namespace

std::vector<std::size_t> GradientScheme::b0_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bvalues.size(); ++i)
        if (is_b0(i)) out.push_back(i);
    return out;
}

std::vector<std::size_t> GradientScheme::dw_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bvalues.size(); ++i)
        if (!is_b0(i)) out.push_back(i);
    return out;
}

void GradientScheme::require_bootstrap_ready() const {
    if (n_dw() == 0)
        throw InputError("scheme has no diffusion-weighted channel; bootstrap needs at least one");
    if (n_b0() == 0)
        throw InputError("scheme has no b0 channel; bootstrap needs at least one");
}

GradientScheme parse_scheme(const std::string& bvals_text,
                            const std::string& bvecs_text,
                            double b0_threshold) {
    const auto bval_rows = parse_rows(bvals_text, "bvals");
    const auto bvec_rows = parse_rows(bvecs_text, "bvecs");
    if (bval_rows.empty()) throw InputError("bvals: empty input");
    if (bvec_rows.empty()) throw InputError("bvecs: empty input");
    if (bval_rows.size() != 1)
        throw InputError("bvals: expected a single row, got " + std::to_string(bval_rows.size()));
    if (bvec_rows.size() != 3)
        throw InputError("bvecs: expected three rows (x, y, z), got " + std::to_string(bvec_rows.size()));

    const auto& bvals = bval_rows[0];
    const std::size_t n = bvals.size();
    for (int r = 0; r < 3; ++r) {
        if (bvec_rows[r].size() != n)
            throw InputError("bvals/bvecs length mismatch: " + std::to_string(n) + " b-values vs " +
                             std::to_string(bvec_rows[r].size()) + " entries in bvecs row " +
                             std::to_string(r + 1));
    }

    GradientScheme scheme;
    scheme.b0_threshold = b0_threshold;
    scheme.bvalues = bvals;
    scheme.directions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Direction d{bvec_rows[0][i], bvec_rows[1][i], bvec_rows[2][i]};
        const double nrm = norm3(d);
        if (scheme.is_b0(i)) {
            // b0 directions are informational; keep zero vectors as zero.
            if (nrm >= 0.9 && nrm <= 1.1)
                for (auto& c : d) c /= nrm;
        } else {
            if (nrm < 0.9 || nrm > 1.1)
                throw InputError("bvecs: channel " + std::to_string(i) + " has norm " +
                                 format_number(nrm) + ", outside [0.9, 1.1]");
            for (auto& c : d) c /= nrm;
        }
        scheme.directions[i] = d;
    }
    return scheme;
}

GradientScheme load_scheme(const std::string& bvals_path,
                           const std::string& bvecs_path,
                           double b0_threshold) {
    return parse_scheme(read_text_file(bvals_path), read_text_file(bvecs_path), b0_threshold);
}

void save_scheme(const GradientScheme& scheme,
                 const std::string& bvals_path,
                 const std::string& bvecs_path) {
    std::ofstream bv(bvals_path, std::ios::binary);
    if (!bv) throw InputError("cannot write '" + bvals_path + "'");
    for (std::size_t i = 0; i < scheme.size(); ++i)
        bv << (i ? " " : "") << format_number(scheme.bvalues[i]);
    bv << "\n";

    std::ofstream bo(bvecs_path, std::ios::binary);
    if (!bo) throw InputError("cannot write '" + bvecs_path + "'");
    for (int r = 0; r < 3; ++r) {
        for (std::size_t i = 0; i < scheme.size(); ++i)
            bo << (i ? " " : "") << format_number(scheme.directions[i][r]);
        bo << "\n";
    }
}

std::vector<Shell> detect_shells(const GradientScheme& scheme, double tolerance) {
    const auto dw = scheme.dw_indices();
    std::vector<std::size_t> order(dw);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scheme.bvalues[a] != scheme.bvalues[b]) return scheme.bvalues[a] < scheme.bvalues[b];
        return a < b;
    });

    std::vector<Shell> shells;
    double sum = 0.0;
    for (std::size_t idx : order) {
        const double b = scheme.bvalues[idx];
        if (shells.empty() ||
            b - sum / double(shells.back().channel_indices.size()) > tolerance) {
            shells.push_back(Shell{});
            sum = 0.0;
        }
        shells.back().channel_indices.push_back(idx);
        sum += b;
        shells.back().nominal_bvalue = sum / double(shells.back().channel_indices.size());
    }
    // Members keep acquisition order inside each shell.
    for (auto& s : shells) std::sort(s.channel_indices.begin(), s.channel_indices.end());
    return shells;
}

namespace {

std::vector<std::size_t> farthest_point_subset(const GradientScheme& scheme,
                                               const std::vector<std::size_t>& shell_channels,
                                               std::size_t count) {
    if (count == 0) return {};
    std::vector<std::size_t> picked;      // positions within shell_channels
    std::vector<bool> used(shell_channels.size(), false);
    picked.push_back(0);
    used[0] = true;
    std::vector<double> min_angle(shell_channels.size(), std::numeric_limits<double>::infinity());
    while (picked.size() < count) {
        const std::size_t last = picked.back();
        for (std::size_t i = 0; i < shell_channels.size(); ++i) {
            if (used[i]) continue;
            const double a = antipodal_angle(scheme.directions[shell_channels[i]],
                                             scheme.directions[shell_channels[last]]);
            min_angle[i] = std::min(min_angle[i], a);
        }
        std::size_t best = shell_channels.size();
        double best_angle = -1.0;
        for (std::size_t i = 0; i < shell_channels.size(); ++i) {
            if (used[i]) continue;
            if (min_angle[i] > best_angle) {  // ties resolve to the lowest index
                best_angle = min_angle[i];
                best = i;
            }
        }
        picked.push_back(best);
        used[best] = true;
    }
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t p : picked) out.push_back(shell_channels[p]);
    return out;
}

} // namespace

SubsampleResult subsample(const GradientScheme& scheme,
                          const std::vector<ShellRequest>& shells,
                          std::size_t b0_count,
                          SubsampleStrategy strategy,
                          const std::optional<std::vector<std::size_t>>& explicit_indices,
                          double shell_tolerance) {
    const auto b0s = scheme.b0_indices();
    if (b0_count > b0s.size())
        throw InputError("requested " + std::to_string(b0_count) + " b0 channels, scheme has " +
                         std::to_string(b0s.size()));

    std::vector<std::size_t> selected(b0s.begin(), b0s.begin() + std::ptrdiff_t(b0_count));

    if (strategy == SubsampleStrategy::indices) {
        if (!explicit_indices)
            throw InputError("indices strategy requires an explicit index list");
        std::vector<bool> seen(scheme.size(), false);
        for (std::size_t idx : *explicit_indices) {
            if (idx >= scheme.size())
                throw InputError("explicit index " + std::to_string(idx) + " out of range");
            if (scheme.is_b0(idx))
                throw InputError("explicit index " + std::to_string(idx) +
                                 " is a b0 channel; b0 selection uses b0_count");
            if (seen[idx])
                throw InputError("explicit index " + std::to_string(idx) + " repeated");
            seen[idx] = true;
            selected.push_back(idx);
        }
    } else {
        const auto detected = detect_shells(scheme, shell_tolerance);
        for (const auto& req : shells) {
            const Shell* match = nullptr;
            double best = shell_tolerance;
            for (const auto& s : detected) {
                const double d = std::abs(s.nominal_bvalue - req.bvalue);
                if (d <= best) {
                    best = d;
                    match = &s;
                }
            }
            if (!match)
                throw InputError("no shell near b=" + format_number(req.bvalue) +
                                 " (tolerance " + format_number(shell_tolerance) + ")");
            if (req.count > match->channel_indices.size())
                throw InputError("shell b=" + format_number(match->nominal_bvalue) + " has " +
                                 std::to_string(match->channel_indices.size()) +
                                 " channels, requested " + std::to_string(req.count));
            const auto picked = farthest_point_subset(scheme, match->channel_indices, req.count);
            selected.insert(selected.end(), picked.begin(), picked.end());
        }
    }

    std::sort(selected.begin(), selected.end());

    SubsampleResult result;
    result.index_map = selected;
    result.scheme.b0_threshold = scheme.b0_threshold;
    for (std::size_t idx : selected) {
        result.scheme.bvalues.push_back(scheme.bvalues[idx]);
        result.scheme.directions.push_back(scheme.directions[idx]);
    }
    return result;
}

} // namespace dwiboot
