#pragma once

namespace fieldattr {

inline constexpr const char* kVersion = "1.0.0";

}
