#pragma once

namespace dwiboot {

inline constexpr const char* kVersion = "0.1.0";

} // namespace dwiboot
