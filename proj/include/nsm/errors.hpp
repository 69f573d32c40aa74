#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nsm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two operands live on different truncation lattices.
class LatticeMismatch : public Error {
public:
    using Error::Error;
};

/// Vector/matrix dimensions do not agree.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A noise coefficient left the declared band (0, aleph].
class BoundViolation : public Error {
public:
    using Error::Error;
};

/// The integrated field exceeded the blow-up guard or became non-finite.
class BlowUp : public Error {
public:
    BlowUp(std::int64_t step, double norm)
        : Error("blow-up at step " + std::to_string(step) + " (|w| = " + std::to_string(norm) + ")"),
          step_(step), norm_(norm) {}
    std::int64_t step() const { return step_; }
    double norm() const { return norm_; }

private:
    std::int64_t step_;
    double norm_;
};

/// Constrained eigenvalue search did not agree with its cross-check.
class NonConvergence : public Error {
public:
    using Error::Error;
};

/// Linear solve with a (numerically) singular operator.
class SingularSolve : public Error {
public:
    using Error::Error;
};

/// Step index outside the recorded path.
class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated binary file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration problems; carries every message found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> messages)
        : Error(join(messages)), messages_(std::move(messages)) {}
    const std::vector<std::string>& messages() const { return messages_; }

private:
    static std::string join(const std::vector<std::string>& m) {
        std::string out;
        for (const auto& s : m) {
            if (!out.empty()) out += "; ";
            out += s;
        }
        return out;
    }
    std::vector<std::string> messages_;
};

}  // namespace nsm
