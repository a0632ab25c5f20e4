#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fockcast {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: wrong sizes, out-of-range parameters, malformed config.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure could not produce a trustworthy result.
class NumericalError : public Error {
public:
    NumericalError(std::string code, const std::string& what)
        : Error(code + ": " + what), code_(std::move(code)) {}

    /// Short machine-readable tag such as "integration-diverged".
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Missing or corrupt artifact on disk.
class ArtifactError : public Error {
public:
    using Error::Error;
};

/// Writes a warning line to stderr unless warnings are silenced.
void log_warning(const std::string& message);
void set_warnings_enabled(bool enabled);

/// Process exit code for an exception escaping the CLI: 2 for validation and
/// artifact errors, 3 for numerical failures, 1 otherwise.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace fockcast
