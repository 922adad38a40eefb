#include "layermix/logging.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace layermix::log {
namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("layermix");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    return l;
  }();
  return instance;
}

}  // namespace

void init_from_env() {
  const char* env = std::getenv("LAYERMIX_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") {
    logger()->set_level(spdlog::level::err);
  } else if (level == "info") {
    logger()->set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger()->set_level(spdlog::level::debug);
  } else {
    logger()->set_level(spdlog::level::warn);
  }
}

void error(std::string_view msg) { logger()->error("{}", msg); }
void warn(std::string_view msg) { logger()->warn("{}", msg); }
void info(std::string_view msg) { logger()->info("{}", msg); }
void debug(std::string_view msg) { logger()->debug("{}", msg); }

}  // namespace layermix::log
