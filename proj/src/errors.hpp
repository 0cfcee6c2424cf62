#pragma once

#include <stdexcept>

namespace slowfast {

// Invalid or inconsistent configuration; maps to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An experiment ran but could not stand behind its output (excess aborts,
// noise-dominated fit, failed oracle); maps to exit code 1.
struct ExperimentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failure while reading configs or writing results; maps to
// exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace slowfast
