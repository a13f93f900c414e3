#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "dwiboot/gradients.hpp"
#include "dwiboot/volume.hpp"

namespace dwiboot::test {

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        std::mt19937_64 rng(std::random_device{}());
        for (;;) {
            path_ = base / ("dwiboot_test_" + std::to_string(rng()));
            if (std::filesystem::create_directory(path_)) break;
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Tiny scheme: one b0 plus DW channels on coordinate axes, cycling.
inline GradientScheme tiny_scheme(std::size_t n_dw, double bvalue = 1000.0) {
    GradientScheme s;
    s.bvalues.push_back(0.0);
    s.directions.push_back({0.0, 0.0, 0.0});
    const Direction axes[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (std::size_t i = 0; i < n_dw; ++i) {
        s.bvalues.push_back(bvalue);
        s.directions.push_back(axes[i % 3]);
    }
    return s;
}

inline Volume4D random_volume(std::size_t nx, std::size_t ny, std::size_t nz, std::size_t nc,
                              std::uint64_t seed = 1, double lo = 0.0, double hi = 100.0) {
    Volume4D v = Volume4D::create(nx, ny, nz, nc);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& x : v.data) x = dist(rng);
    return v;
}

} // namespace dwiboot::test
