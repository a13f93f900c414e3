#include "dwiboot/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "dwiboot/errors.hpp"
#include "dwiboot/version.hpp"

namespace dwiboot {

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "' for digesting");

    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 init failed");

    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        const auto n = in.gcount();
        if (n > 0 && EVP_DigestUpdate(ctx.get(), buf, std::size_t(n)) != 1)
            throw std::runtime_error("SHA-256 update failed");
    }

    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
        throw std::runtime_error("SHA-256 final failed");

    std::string hex(std::size_t(len) * 2, '0');
    for (unsigned int i = 0; i < len; ++i)
        std::snprintf(hex.data() + 2 * i, 3, "%02x", digest[i]);
    return hex;
}

nlohmann::json make_manifest(const std::string& subcommand,
                             const nlohmann::json& parameters,
                             const std::vector<std::string>& input_paths,
                             std::uint64_t seed) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& path : input_paths)
        inputs[path] = "sha256:" + sha256_file(path);

    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &utc);

    return nlohmann::json{
        {"tool", "dwiboot"},  {"version", kVersion}, {"subcommand", subcommand},
        {"parameters", parameters}, {"inputs", inputs},   {"seed", seed},
        {"timestamp", stamp},
    };
}

void write_manifest(const std::string& out_dir, const nlohmann::json& manifest) {
    const auto path = std::filesystem::path(out_dir) / "manifest.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << manifest.dump(2) << "\n";
}

} // namespace dwiboot
