#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geobound {

/// A numeric argument lies outside the region where an operation (or the
/// theorem it evaluates) is defined.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A point does not lie on the model surface of its space form.
class InvalidPointError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DisconnectedGraphError : public std::runtime_error {
public:
    DisconnectedGraphError(std::size_t components, std::size_t k)
        : std::runtime_error("k-NN graph (k=" + std::to_string(k) + ") has " +
                             std::to_string(components) +
                             " connected components; increase k"),
          components_(components) {}

    std::size_t components() const noexcept { return components_; }

private:
    std::size_t components_;
};

class InsufficientTrianglesError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonFiniteLossError : public std::runtime_error {
public:
    explicit NonFiniteLossError(int epoch)
        : std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch)),
          epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnknownColumnError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace geobound
