#pragma once

#include <stdexcept>
#include <string>

namespace nmc {

// Base for everything this library throws.
struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad flags, bad key=value config, inconsistent inputs. CLI maps these to exit 2.
struct config_error : error {
  using error::error;
};

// Malformed input files (rating files, split files, checkpoints). Also exit 2.
struct parse_error : error {
  using error::error;
};

// Tensor/layer dimension mismatches.
struct shape_error : error {
  using error::error;
};

// Non-finite losses or gradients during optimization.
struct numeric_error : error {
  using error::error;
};

// Filesystem failures while reading or writing.
struct io_error : error {
  using error::error;
};

}  // namespace nmc
