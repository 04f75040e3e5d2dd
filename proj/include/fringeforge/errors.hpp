#pragma once

#include <stdexcept>
#include <string>

namespace fringeforge {

/// Base for all library errors. `code()` is a stable machine-readable
/// identifier; the CLI serializes it into the error JSON on stderr.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error("ConfigError", m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error("IoError", m) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& m) : Error("DomainError", m) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& m) : Error("DimensionMismatch", m) {}
};

class InvalidStack : public Error {
public:
    explicit InvalidStack(const std::string& m) : Error("InvalidStack", m) {}
};

class InsufficientPoses : public Error {
public:
    explicit InsufficientPoses(const std::string& m) : Error("InsufficientPoses", m) {}
};

class InsufficientData : public Error {
public:
    explicit InsufficientData(const std::string& m) : Error("InsufficientData", m) {}
};

class EmptyInput : public Error {
public:
    explicit EmptyInput(const std::string& m) : Error("EmptyInput", m) {}
};

class EmptyBudget : public Error {
public:
    explicit EmptyBudget(const std::string& m) : Error("EmptyBudget", m) {}
};

class EmptyRegion : public Error {
public:
    explicit EmptyRegion(const std::string& m) : Error("EmptyRegion", m) {}
};

class DegenerateInput : public Error {
public:
    explicit DegenerateInput(const std::string& m) : Error("DegenerateInput", m) {}
};

class NoConvergence : public Error {
public:
    explicit NoConvergence(const std::string& m) : Error("NoConvergence", m) {}
};

class BehindCamera : public Error {
public:
    explicit BehindCamera(const std::string& m) : Error("BehindCamera", m) {}
};

}  // namespace fringeforge
