#pragma once

#include <string>
#include <vector>

namespace dwiboot::cli {

/// Run one subcommand. args excludes the program name, e.g.
/// {"augment", "--dwi", "scan.nii", ...}.
///
/// Exit codes: 0 success, 1 usage error, 2 input-format error,
/// 3 numerical degeneracy.
int run(std::vector<std::string> args);

int run(int argc, const char* const* argv);

} // namespace dwiboot::cli
