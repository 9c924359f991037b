#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace amv {

/// Malformed or out-of-contract input (bad index, non-positive radius, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its stated accuracy.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the Dirichlet solver when part of the interior has no r-chain to the boundary.
class DisconnectedInteriorError : public InputError {
public:
    DisconnectedInteriorError(const std::string& what, std::vector<std::size_t> component)
        : InputError(what), component_(std::move(component)) {}

    const std::vector<std::size_t>& component() const noexcept { return component_; }

private:
    std::vector<std::size_t> component_;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw InputError(msg);
}

} // namespace amv
