#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace hemo {

/// Error categories. Each maps to a distinct process exit code in the CLI so
/// scripted callers can tell a bad config from a numerical abort.
enum class errc {
    config      = 2,  ///< schema violation, bad option value, inconsistent setup
    io          = 3,  ///< missing file, unreadable path, write failure
    format      = 4,  ///< wrong magic/version/shape in an artifact file
    numeric     = 5,  ///< NaN/Inf, divergence, solver failure
    domain      = 6,  ///< geometric precondition violated (degenerate region, empty mask, ...)
    unsupported = 7,  ///< valid input requesting something this build does not do
};

class Error : public std::runtime_error {
  public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const { return code_; }
    int exit_code() const { return static_cast<int>(code_); }

  private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& msg) { throw Error(code, msg); }

/// Throws errc::config with the offending key path when cond is false.
inline void require(bool cond, errc code, const std::string& msg) {
    if (!cond) raise(code, msg);
}

}  // namespace hemo
