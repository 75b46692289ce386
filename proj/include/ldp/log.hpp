#pragma once

#include <cstdarg>

namespace ldp::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Level comes from the LDP_LOG_LEVEL environment variable
// (error|warn|info|debug), default warn. All output goes to stderr.
Level level();
void set_level(Level l);

void message(Level l, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

#define LDP_LOG_ERROR(...) ::ldp::log::message(::ldp::log::Level::error, __VA_ARGS__)
#define LDP_LOG_WARN(...) ::ldp::log::message(::ldp::log::Level::warn, __VA_ARGS__)
#define LDP_LOG_INFO(...) ::ldp::log::message(::ldp::log::Level::info, __VA_ARGS__)
#define LDP_LOG_DEBUG(...) ::ldp::log::message(::ldp::log::Level::debug, __VA_ARGS__)

}  // namespace ldp::log
