#pragma once

#include <stdexcept>
#include <string>

namespace cabm {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension mismatches. The message carries both shapes.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Malformed persisted files (LUTs, checkpoints, CSVs). line == 0 when the
// error is not tied to a specific line.
struct ParseError : Error {
  ParseError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? msg + " (line " + std::to_string(line_no) + ")" : msg),
        line(line_no) {}
  int line = 0;
};

// Training loss became non-finite.
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

}  // namespace cabm
