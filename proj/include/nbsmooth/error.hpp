#pragma once

#include <stdexcept>
#include <string>

namespace nbs {

/// Base of every error raised by the toolkit. The CLI maps subclasses onto
/// exit codes and prints `what()` as a single line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define NBS_DEFINE_ERROR(Name, tag)                          \
  class Name : public Error {                                \
   public:                                                   \
    using Error::Error;                                      \
    const char* kind() const noexcept override { return tag; } \
  }

NBS_DEFINE_ERROR(ConfigError, "config");
NBS_DEFINE_ERROR(FormatError, "format");
NBS_DEFINE_ERROR(ShapeError, "shape");
NBS_DEFINE_ERROR(SizeError, "size");
NBS_DEFINE_ERROR(DegenerateInputError, "degenerate-input");
NBS_DEFINE_ERROR(DataIntegrityError, "data-integrity");
NBS_DEFINE_ERROR(MetricUndefinedError, "metric-undefined");
NBS_DEFINE_ERROR(TrainingAbortError, "training-abort");
NBS_DEFINE_ERROR(IoError, "io");

#undef NBS_DEFINE_ERROR

}  // namespace nbs
