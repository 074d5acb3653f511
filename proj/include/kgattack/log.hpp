#pragma once

#include <functional>
#include <string>

namespace kgattack::logging {

enum class Level { Info, Warn };

using Sink = std::function<void(Level, const std::string&)>;

// Replaces the default stderr sink; pass nullptr to restore it.
void set_sink(Sink sink);

void info(const std::string& msg);
void warn(const std::string& msg);

}  // namespace kgattack::logging
