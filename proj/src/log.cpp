#include "synth/log.hpp"

#include <cstdlib>
#include <iostream>

namespace synth {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SYNTH_LOG");
        if (!env) return LogLevel::Error;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

void log_error(const std::string& msg) { std::cerr << "[error] " << msg << "\n"; }

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace synth
