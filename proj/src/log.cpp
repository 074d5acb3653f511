#include "kgattack/log.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace kgattack::logging {

namespace {

std::mutex g_mutex;
Sink g_sink;

void emit(Level level, const std::string& msg) {
    std::lock_guard lock(g_mutex);
    if (g_sink) {
        g_sink(level, msg);
        return;
    }
    std::cerr << (level == Level::Warn ? "[warn] " : "[info] ") << msg << "\n";
}

}  // namespace

void set_sink(Sink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}

void info(const std::string& msg) { emit(Level::Info, msg); }
void warn(const std::string& msg) { emit(Level::Warn, msg); }

}  // namespace kgattack::logging
