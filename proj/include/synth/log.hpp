#pragma once

#include <string>

namespace synth {

// Verbosity from the SYNTH_LOG env var: error (default), info, debug.
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace synth
