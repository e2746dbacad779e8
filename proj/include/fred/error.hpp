#ifndef FRED_ERROR_HPP
#define FRED_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fred {

enum class ErrorKind {
    Constraint,    // invalid construction arguments
    InvalidEpoch,  // flows overlapping on ports, ports out of range
    Config,        // malformed scenario / workload / fabric description
    Routing,       // unroutable epoch after all resolution attempts
    Simulation,    // inconsistent simulation inputs
    Capacity,      // placement or lane capacity exceeded
};

inline const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Constraint: return "constraint violation";
    case ErrorKind::InvalidEpoch: return "invalid epoch";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Routing: return "routing failure";
    case ErrorKind::Simulation: return "simulation error";
    case ErrorKind::Capacity: return "capacity exceeded";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message)
{
    if (!condition)
        throw Error(kind, message);
}

} // namespace fred

#endif // FRED_ERROR_HPP
