#pragma once

#include <stdexcept>
#include <string>

namespace semsplat {

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation called on an object in the wrong state (empty map, stale render).
class InvalidState : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Metric has no defined value for the inputs (e.g. no valid pixels).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Failure while reading or validating an on-disk bundle. Carries the offending path.
class LoadError : public std::runtime_error {
public:
    LoadError(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace semsplat
