#pragma once
#include <stdexcept>
#include <string>

namespace mfl {

// Configuration problems: bad values, bad files, mode mismatches.  CLI exit 2.
struct ConfigError : std::runtime_error {
    int line = 0;  // 1-based config file line, 0 if not file-associated
    explicit ConfigError(const std::string& msg, int line_ = 0)
        : std::runtime_error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
          line(line_) {}
};

// Numeric failures: blow-up, non-convergence, quadrature disagreement.  CLI exit 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Precondition violations on operation arguments (non-finite input, m > N, ...).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace mfl
