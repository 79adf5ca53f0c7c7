#pragma once

#include <stdexcept>
#include <string>

namespace switchcot {

// Bad configuration, unusable invocation, missing files. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema violations, malformed transcripts, degenerate inputs. CLI exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Generation failures. retryable() distinguishes transport hiccups from
// malformed responses and fixture misses, which are fatal for the item.
class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& msg, bool retryable = false)
        : std::runtime_error(msg), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

} // namespace switchcot
