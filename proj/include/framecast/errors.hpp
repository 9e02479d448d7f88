#pragma once

#include <stdexcept>
#include <string>

namespace fc {

// Thrown on dimension/shape mismatches. CLI maps this to exit code 4.
struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File open/read/write failures. Exit code 2.
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad magic, truncated or inconsistent binary containers. Exit code 3.
struct format_error : std::runtime_error {
    explicit format_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad config keys/values or bad command-line usage. Exit code 1.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace fc
