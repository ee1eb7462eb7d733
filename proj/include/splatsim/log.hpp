#pragma once

#include <iostream>
#include <string>

namespace splatsim {

inline void warn(const std::string& msg) {
    std::cerr << "[warn] " << msg << "\n";
}

inline void info(const std::string& msg) {
    std::cerr << "[info] " << msg << "\n";
}

} // namespace splatsim
