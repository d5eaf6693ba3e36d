#pragma once

#include <stdexcept>
#include <string>

namespace rigkit {

// Base class for all domain errors raised by the library. The CLI maps these
// to exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define RIGKIT_ERROR_TYPE(Name)                              \
  struct Name : Error {                                      \
    explicit Name(const std::string& what) : Error(what) {}  \
  };

RIGKIT_ERROR_TYPE(FrameMismatch)
RIGKIT_ERROR_TYPE(EmptyInput)
RIGKIT_ERROR_TYPE(OutOfRange)
RIGKIT_ERROR_TYPE(TooFewPoints)
RIGKIT_ERROR_TYPE(TooFewPoses)
RIGKIT_ERROR_TYPE(DegenerateConfiguration)
RIGKIT_ERROR_TYPE(DegenerateMotion)
RIGKIT_ERROR_TYPE(TimestampMismatch)
RIGKIT_ERROR_TYPE(NonPositiveStep)
RIGKIT_ERROR_TYPE(InsufficientOverlap)
RIGKIT_ERROR_TYPE(NoCorrespondences)
RIGKIT_ERROR_TYPE(EmptyMesh)
RIGKIT_ERROR_TYPE(EmptyScene)
RIGKIT_ERROR_TYPE(InvalidConfig)
RIGKIT_ERROR_TYPE(UnknownObject)
RIGKIT_ERROR_TYPE(NegativeError)
RIGKIT_ERROR_TYPE(IoError)

#undef RIGKIT_ERROR_TYPE

// Malformed input file. Keeps the offending file and (1-based) line so the
// CLI can point at the problem; line 0 means "not line-oriented".
class ParseError : public Error {
 public:
  ParseError(std::string file, long line, const std::string& what)
      : Error(format(file, line, what)), file_(std::move(file)), line_(line) {}

  const std::string& file() const { return file_; }
  long line() const { return line_; }

 private:
  static std::string format(const std::string& file, long line,
                            const std::string& what) {
    if (line > 0)
      return file + ":" + std::to_string(line) + ": " + what;
    return file + ": " + what;
  }

  std::string file_;
  long line_ = 0;
};

}  // namespace rigkit
