#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace polyvox {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Base error for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad settings: unknown language id, mismatched dims in config, bad schema.
struct ConfigError : Error {
  using Error::Error;
};

// Matrix/vector dimensions out of contract.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed on-disk record (manifest line, sequence record, cache file).
struct ParseError : Error {
  using Error::Error;
};

// Filesystem and decode failures.
struct IoError : Error {
  using Error::Error;
};

// Content-level data problems (empty audio, symbol not in inventory, ...).
struct DataError : Error {
  using Error::Error;
};

inline void check_shape(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace polyvox
