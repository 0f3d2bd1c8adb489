#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace gstar {

// Thrown on malformed configs / violated preconditions (CLI exit code 2).
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a verification assertion fails (CLI exit code 3).
class check_failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Thrown when a computation produces NaN (CLI exit code 4).
class nan_error : public std::runtime_error {
public:
    explicit nan_error(const std::string& op)
        : std::runtime_error("NaN encountered in " + op), operation(op) {}
    std::string operation;
};

inline double require_finite(double v, const char* op) {
    if (std::isnan(v)) throw nan_error(op);
    return v;
}

// 17 significant digits: round-trips any double, locale-independent.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace gstar
