#pragma once

#include <string_view>

namespace layermix::log {

// Applies LAYERMIX_LOG={error|warn|info|debug}; unset or unknown means "warn".
void init_from_env();

void error(std::string_view msg);
void warn(std::string_view msg);
void info(std::string_view msg);
void debug(std::string_view msg);

}  // namespace layermix::log
