#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowdval {

// Machine-readable error codes. The string form is what the HTTP API puts in
// the "error" field of an error body.
enum class ErrorCode {
  ParseError,
  ValidationError,
  UnsupportedRelation,
  IncompatibleAlignments,
  MissingLexicalForm,
  EmptySeedSource,
  TrustUnavailable,
  NoVotes,
  DanglingAssertion,
  NotFound,
  TaskClosed,
  Forbidden,
  Unauthorized,
  Conflict,
  BadRequest,
  InfeasibleSpec,
  IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(detail), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures carry a 1-based line and a 0-based byte offset into the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& detail, std::size_t line, std::size_t offset)
      : Error(ErrorCode::ParseError, detail + " (line " + std::to_string(line) +
                                         ", offset " + std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

}  // namespace crowdval
