#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tap {

// Base for all component errors. `component()` identifies the subsystem so the
// CLI can attribute failures.
class Error : public std::runtime_error {
 public:
  Error(std::string component, const std::string& msg)
      : std::runtime_error(component + ": " + msg), component_(std::move(component)) {}

  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

}  // namespace tap
