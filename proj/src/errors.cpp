#include "fockcast/errors.hpp"

#include <atomic>
#include <iostream>

namespace fockcast {
namespace {

std::atomic<bool> g_warnings{true};

}  // namespace

void log_warning(const std::string& message) {
    if (g_warnings) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings = enabled; }

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ArtifactError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 3;
    return 1;
}

}  // namespace fockcast
