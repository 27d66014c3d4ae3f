#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "vcreplay/trace.hpp"

namespace vcreplay {

/// Malformed trace file. line/offset locate syntax errors; schema errors
/// carry the JSON path in the message and offset 0.
class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(const std::string &what, std::size_t line, std::size_t offset)
      : std::runtime_error(what), line_(line), offset_(offset) {}
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

class TraceValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses the JSON trace format. Does not validate.
TraceSet read_trace(std::string_view bytes);

/// Canonical serialization: threads in ascending order, keys in fixed order,
/// no whitespace. Throws TraceValidationError if validate(ts) is non-empty.
std::string write_trace(const TraceSet &ts);

TraceSet load_trace(const std::filesystem::path &path);
void save_trace(const TraceSet &ts, const std::filesystem::path &path);

}  // namespace vcreplay
