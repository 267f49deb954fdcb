#pragma once

#include <stdexcept>
#include <string>

namespace hpppf {

/// Bad input data or configuration (CLI exit code 2).
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computed quantity violated an internal contract (CLI exit code 4).
class internal_error : public std::runtime_error {
 public:
  explicit internal_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hpppf
