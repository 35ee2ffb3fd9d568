#include "homeauth/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace homeauth {

void init_logging() {
    auto logger = spdlog::get("homeauth");
    if (!logger) logger = spdlog::stderr_color_mt("homeauth");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("HOMEAUTH_LOG")) {
        auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept "off" when asked for
        if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    }
}

}  // namespace homeauth
