#pragma once

#include <cassert>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace decosim {

/// Error thrown by simulation operations (unresolvable ids, empty pools,
/// mismatched histogram supports, ...). Construction-time invariant
/// violations are reported through Result instead.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& message) : std::runtime_error(message) {}
};

/// Value-or-error carrier used by the domain type factory functions.
/// Invalid construction yields an error message, never a throw.
template <typename T>
class Result {
public:
    static Result ok(T value)
    {
        Result r;
        r.value_ = std::move(value);
        return r;
    }

    static Result fail(std::string message)
    {
        Result r;
        r.error_ = std::move(message);
        return r;
    }

    explicit operator bool() const { return value_.has_value(); }
    bool has_value() const { return value_.has_value(); }

    const T& value() const&
    {
        assert(value_.has_value());
        return *value_;
    }

    T&& value() &&
    {
        assert(value_.has_value());
        return std::move(*value_);
    }

    /// Unwraps, converting a construction failure into a SimError.
    T expect() &&
    {
        if (!value_.has_value()) {
            throw SimError(error_);
        }
        return std::move(*value_);
    }

    const std::string& error() const
    {
        assert(!value_.has_value());
        return error_;
    }

private:
    Result() = default;
    std::optional<T> value_;
    std::string error_;
};

} // namespace decosim
