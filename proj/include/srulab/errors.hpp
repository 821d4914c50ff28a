#pragma once

#include <stdexcept>
#include <string>

namespace srulab {

/// Base of every error raised by the library. `category()` is a stable
/// machine-readable tag used by the command line front end.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(what), category_(std::move(category)) {}
    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error("dimension_error", what) {}
};

struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error("contract_error", what) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error("domain_error", what) {}
};

struct NonFiniteError : Error {
    explicit NonFiniteError(const std::string& what) : Error("non_finite", what) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error("format_error", what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("io_error", what) {}
};

struct GenerationError : Error {
    explicit GenerationError(const std::string& what) : Error("generation_error", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error("training_error", what) {}
};

struct SweepError : Error {
    explicit SweepError(const std::string& what) : Error("sweep_error", what) {}
};

}  // namespace srulab
