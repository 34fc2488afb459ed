#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace transferlab {

/// Error raised by any transferlab module. Carries the originating module name
/// so front ends can surface machine-readable context alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

}  // namespace transferlab
