#pragma once

#include <stdexcept>
#include <string>

namespace reprocs {

// Invalid user-supplied configuration (bad schedules, inconsistent cluster
// sizes, malformed JSON). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at run time (rank-deficient solve, non-converged step).
// CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class RankDeficiencyError : public NumericalError {
public:
    explicit RankDeficiencyError(const std::string& what) : NumericalError(what) {}
};

class DegenerateInputError : public NumericalError {
public:
    explicit DegenerateInputError(const std::string& what) : NumericalError(what) {}
};

// Input outside the exhaustive-enumeration size cap.
class SizeError : public std::invalid_argument {
public:
    explicit SizeError(const std::string& what) : std::invalid_argument(what) {}
};

class ArgumentError : public std::invalid_argument {
public:
    explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

// A bound formula left its region of validity (nonpositive denominator,
// argument outside the domain of a ceiling/log expression).
class RegimeError : public std::domain_error {
public:
    explicit RegimeError(const std::string& what) : std::domain_error(what) {}
};

} // namespace reprocs
