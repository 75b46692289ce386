#include "ldp/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace ldp::log {

namespace {
Level g_level = [] {
    const char* env = std::getenv("LDP_LOG_LEVEL");
    if (!env) return Level::warn;
    if (std::strcmp(env, "error") == 0) return Level::error;
    if (std::strcmp(env, "warn") == 0) return Level::warn;
    if (std::strcmp(env, "info") == 0) return Level::info;
    if (std::strcmp(env, "debug") == 0) return Level::debug;
    return Level::warn;
}();

const char* name(Level l) {
    switch (l) {
        case Level::error: return "error";
        case Level::warn: return "warn";
        case Level::info: return "info";
        case Level::debug: return "debug";
    }
    return "?";
}
}  // namespace

Level level() { return g_level; }
void set_level(Level l) { g_level = l; }

void message(Level l, const char* fmt, ...) {
    if (static_cast<int>(l) > static_cast<int>(g_level)) return;
    std::fprintf(stderr, "[ldp %s] ", name(l));
    va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

}  // namespace ldp::log
