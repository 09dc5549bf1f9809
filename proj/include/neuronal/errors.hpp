#pragma once

#include <stdexcept>
#include <string>

namespace neuronal {

// Categories double as CLI exit codes.
enum class ErrorCategory : int {
    Internal = 1,
    Config = 2,
    Shape = 3,
    Data = 4,
    Divergence = 5,
    Parameter = 6,
    Conditioning = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& what) : Error(ErrorCategory::Shape, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

struct DivergenceError : Error {
    DivergenceError(const std::string& what, int epoch)
        : Error(ErrorCategory::Divergence, what), epoch(epoch) {}
    int epoch;
};

/// Bad algorithm hyper-parameters, e.g. an IGW mu too small for the gap vector.
struct ParameterError : Error {
    explicit ParameterError(const std::string& what) : Error(ErrorCategory::Parameter, what) {}
};

struct ConditioningError : Error {
    explicit ConditioningError(const std::string& what)
        : Error(ErrorCategory::Conditioning, what) {}
};

}  // namespace neuronal
