#pragma once

#include <stdexcept>
#include <string>

namespace mpacdc {

// Error categories map onto CLI exit codes: config 2, io 3, everything
// else is a plain runtime failure.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct input_error : std::runtime_error {
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parse_error : std::runtime_error {
  explicit parse_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of an inter-module contract (e.g. mismatched sample lists).
struct contract_error : std::logic_error {
  explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

struct generation_error : std::runtime_error {
  explicit generation_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mpacdc
