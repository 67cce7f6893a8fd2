#ifndef STOPFLOW_ERRORS_HPP
#define STOPFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace stopflow {

// Base for all solver/runtime failures. what() carries a short diagnostic;
// name() is the stable identifier written into run reports.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& msg)
        : std::runtime_error(msg), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

// Config/schema/precondition problems. CLI exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error("ValidationError", msg) {}
};

class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& msg) : Error("GridMismatch", msg) {}
};

// Solver failures. CLI exit code 3.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& msg, double residual)
        : Error("NonConvergence", msg), final_residual(residual) {}
    double final_residual;
};

class DomainTooSmall : public Error {
public:
    explicit DomainTooSmall(const std::string& msg) : Error("DomainTooSmall", msg) {}
};

class NonExtinction : public Error {
public:
    explicit NonExtinction(const std::string& msg) : Error("NonExtinction", msg) {}
};

class BoxEscape : public Error {
public:
    explicit BoxEscape(const std::string& msg) : Error("BoxEscape", msg) {}
};

class IncompleteFlow : public Error {
public:
    explicit IncompleteFlow(const std::string& msg) : Error("IncompleteFlow", msg) {}
};

} // namespace stopflow

#endif
