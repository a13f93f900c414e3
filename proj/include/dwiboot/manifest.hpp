#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace dwiboot {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

/// Reproducibility record written once per output directory: tool version,
/// subcommand, fully resolved parameters, input digests, seed, timestamp.
/// Re-running the subcommand with these parameters reproduces the data
/// outputs bit-exactly.
nlohmann::json make_manifest(const std::string& subcommand,
                             const nlohmann::json& parameters,
                             const std::vector<std::string>& input_paths,
                             std::uint64_t seed);

void write_manifest(const std::string& out_dir, const nlohmann::json& manifest);

} // namespace dwiboot
