#pragma once

#include <stdexcept>
#include <string>

namespace edlb {

// Shape or dimension disagreement between operands.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration (ranks, group counts, unknown config keys, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was violated.
class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Evaluation could not be carried out (no valid pixels, too few frames).
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file contents. Carries the byte offset where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Checkpoint does not match the constructed model.
class LoadError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace edlb
