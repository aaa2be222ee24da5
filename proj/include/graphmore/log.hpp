#pragma once

#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace graphmore {

/// Library-wide logger writing to stderr. Defaults to warnings only.
inline spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("graphmore");
    if (existing) return existing;
    auto l = spdlog::stderr_color_mt("graphmore");
    l->set_level(spdlog::level::warn);
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *instance;
}

}  // namespace graphmore
