#pragma once

#include <stdexcept>
#include <string>

namespace fast3d {

// Every failure raised by the library derives from Error. kind() is a stable,
// machine-readable class name; the CLI prints it and maps it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define FAST3D_DECLARE_ERROR(Name, Base)                               \
  class Name : public Base {                                           \
   public:                                                             \
    using Base::Base;                                                  \
    const char* kind() const noexcept override { return #Name; }       \
  }

FAST3D_DECLARE_ERROR(InvalidArgument, Error);
FAST3D_DECLARE_ERROR(ShapeMismatch, Error);
FAST3D_DECLARE_ERROR(CalibrationError, Error);
FAST3D_DECLARE_ERROR(OracleError, Error);
FAST3D_DECLARE_ERROR(IoError, Error);

FAST3D_DECLARE_ERROR(TraceError, Error);
FAST3D_DECLARE_ERROR(TraceBadMagic, TraceError);
FAST3D_DECLARE_ERROR(TraceVersionMismatch, TraceError);
FAST3D_DECLARE_ERROR(TraceChecksumMismatch, TraceError);
FAST3D_DECLARE_ERROR(TraceTruncated, TraceError);
FAST3D_DECLARE_ERROR(TraceMalformed, TraceError);

#undef FAST3D_DECLARE_ERROR

}  // namespace fast3d
