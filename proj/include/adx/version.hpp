#pragma once

#include <string>

namespace adx {

#ifndef ADX_GIT_REVISION
#define ADX_GIT_REVISION "unreleased"
#endif

inline std::string version_string() {
    return std::string("adx 0.1.0 (") + ADX_GIT_REVISION + ")";
}

} // namespace adx
