#pragma once

#include <spdlog/spdlog.h>

namespace homeauth {

/// Configures the default spdlog logger from the HOMEAUTH_LOG environment
/// variable (trace, debug, info, warn, error, off). Defaults to warn.
void init_logging();

}  // namespace homeauth
