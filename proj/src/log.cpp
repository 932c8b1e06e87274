#include "facerec/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace facerec {

namespace {

spdlog::logger& logger() {
    static const std::shared_ptr<spdlog::logger> instance = [] {
        auto existing = spdlog::get("facerec");
        if (existing) return existing;
        auto created = spdlog::stderr_color_mt("facerec");
        created->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
        created->set_level(spdlog::level::info);
        return created;
    }();
    return *instance;
}

}  // namespace

void set_log_level(LogLevel level) {
    switch (level) {
        case LogLevel::debug: logger().set_level(spdlog::level::debug); break;
        case LogLevel::info: logger().set_level(spdlog::level::info); break;
        case LogLevel::warn: logger().set_level(spdlog::level::warn); break;
        case LogLevel::error: logger().set_level(spdlog::level::err); break;
        case LogLevel::off: logger().set_level(spdlog::level::off); break;
    }
}

void log_debug(std::string_view message) { logger().debug("{}", message); }
void log_info(std::string_view message) { logger().info("{}", message); }
void log_warn(std::string_view message) { logger().warn("{}", message); }
void log_error(std::string_view message) { logger().error("{}", message); }

}  // namespace facerec
