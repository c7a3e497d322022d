#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace steer {

// Base of every error thrown by the library. Callers that only care about
// "something in the toolkit failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STEER_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

STEER_DEFINE_ERROR(DimensionError);
STEER_DEFINE_ERROR(DegenerateRowError);
STEER_DEFINE_ERROR(EmptyDataError);
STEER_DEFINE_ERROR(LengthError);
STEER_DEFINE_ERROR(DecodeError);
STEER_DEFINE_ERROR(ConfigError);
STEER_DEFINE_ERROR(IoError);
STEER_DEFINE_ERROR(CompositionError);
STEER_DEFINE_ERROR(SteerError);
STEER_DEFINE_ERROR(OverrideError);
STEER_DEFINE_ERROR(SpecError);
STEER_DEFINE_ERROR(NormalizationError);
STEER_DEFINE_ERROR(SpanError);
STEER_DEFINE_ERROR(SelectionError);
STEER_DEFINE_ERROR(ClassBalanceError);
STEER_DEFINE_ERROR(PoolExhaustedError);
STEER_DEFINE_ERROR(StructuralError);
STEER_DEFINE_ERROR(BiasError);
STEER_DEFINE_ERROR(RegistryError);
STEER_DEFINE_ERROR(KwargsError);
STEER_DEFINE_ERROR(JoinError);
STEER_DEFINE_ERROR(PlotError);

#undef STEER_DEFINE_ERROR

// Malformed STW1 file; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace steer
