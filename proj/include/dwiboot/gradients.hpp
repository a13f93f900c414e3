#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dwiboot {

using Direction = std::array<double, 3>;

inline constexpr double kDefaultB0Threshold = 50.0;   // s/mm^2
inline constexpr double kDefaultShellTolerance = 50.0; // s/mm^2

/// Per-volume acquisition description: one b-value and one direction per
/// channel. Channels with bvalue <= b0_threshold are the b0 class; all
/// others are diffusion-weighted (DW) and carry unit directions.
/// Immutable after construction; safe to share across threads.
struct GradientScheme {
    std::vector<double> bvalues;        // s/mm^2
    std::vector<Direction> directions;  // unit vectors on DW channels
    double b0_threshold = kDefaultB0Threshold;

    std::size_t size() const { return bvalues.size(); }
    bool is_b0(std::size_t i) const { return bvalues[i] <= b0_threshold; }

    std::vector<std::size_t> b0_indices() const;
    std::vector<std::size_t> dw_indices() const;
    std::size_t n_b0() const { return b0_indices().size(); }
    std::size_t n_dw() const { return dw_indices().size(); }

    /// Bootstrap needs at least one b0 and one DW channel; throws InputError
    /// otherwise.
    void require_bootstrap_ready() const;
};

/// Group of DW channels sharing one nominal b-value (mean of members).
struct Shell {
    double nominal_bvalue = 0.0;
    std::vector<std::size_t> channel_indices;
};

/// Parse FSL-style bvals (one row) and bvecs (three rows: x, y, z) text.
/// Non-b0 directions with norm in [0.9, 1.1] are renormalized to unit
/// length; norms outside that window are rejected as corrupt.
GradientScheme parse_scheme(const std::string& bvals_text,
                            const std::string& bvecs_text,
                            double b0_threshold = kDefaultB0Threshold);

GradientScheme load_scheme(const std::string& bvals_path,
                           const std::string& bvecs_path,
                           double b0_threshold = kDefaultB0Threshold);

void save_scheme(const GradientScheme& scheme,
                 const std::string& bvals_path,
                 const std::string& bvecs_path);

/// Cluster DW channels into shells; every DW channel lands in exactly one
/// shell and shells are sorted by nominal b-value.
std::vector<Shell> detect_shells(const GradientScheme& scheme,
                                 double tolerance = kDefaultShellTolerance);

enum class SubsampleStrategy {
    indices,        // take explicit_indices verbatim
    farthest_point, // greedy max-min antipodal angle per shell
};

struct ShellRequest {
    double bvalue = 0.0;
    std::size_t count = 0;
};

struct SubsampleResult {
    GradientScheme scheme;
    /// index_map[k] is the original channel index of output channel k.
    std::vector<std::size_t> index_map;
};

/// Reduce a scheme to the requested per-shell DW counts plus the first
/// b0_count b0 channels. Output channels keep their original acquisition
/// order. farthest_point picks a deterministic, antipodally-symmetric
/// max-min angular subset seeded with the shell's first direction;
/// explicit_indices (original DW channel indices) bypass shell selection
/// entirely.
SubsampleResult subsample(const GradientScheme& scheme,
                          const std::vector<ShellRequest>& shells,
                          std::size_t b0_count,
                          SubsampleStrategy strategy = SubsampleStrategy::farthest_point,
                          const std::optional<std::vector<std::size_t>>& explicit_indices = std::nullopt,
                          double shell_tolerance = kDefaultShellTolerance);

} // namespace dwiboot
