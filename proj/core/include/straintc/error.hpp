#pragma once

#include <stdexcept>
#include <string>

namespace straintc {

enum class Errc {
    invalid_argument,
    insufficient_knots,
    non_monotonic_knots,
    insufficient_good_frames,
    empty_region,
    io_error,
};

/// Error raised by the numerical core. The code lets callers (the CLI in
/// particular) distinguish bad input from numerical failures.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string &what) : std::runtime_error(what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

} // namespace straintc
