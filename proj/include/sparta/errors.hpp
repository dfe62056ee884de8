#pragma once

#include <stdexcept>
#include <string>

namespace sparta {

// Base class for every error raised by the library. The CLI maps subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPARTA_DEFINE_ERROR(Name)         \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

SPARTA_DEFINE_ERROR(InvalidAngle);
SPARTA_DEFINE_ERROR(InvalidArgument);
SPARTA_DEFINE_ERROR(DimensionError);
SPARTA_DEFINE_ERROR(GenerationError);
SPARTA_DEFINE_ERROR(BoundsError);
SPARTA_DEFINE_ERROR(EmptyInput);
SPARTA_DEFINE_ERROR(HeadContractError);
SPARTA_DEFINE_ERROR(TrainingDiverged);
SPARTA_DEFINE_ERROR(UnderdeterminedFit);
SPARTA_DEFINE_ERROR(FormatError);
SPARTA_DEFINE_ERROR(CacheFull);
SPARTA_DEFINE_ERROR(NoPath);
SPARTA_DEFINE_ERROR(ConfigError);

#undef SPARTA_DEFINE_ERROR

}  // namespace sparta
