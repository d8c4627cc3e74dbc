#pragma once

#include <stdexcept>
#include <string>

namespace eegsim {

// Base class for every error raised by the library. Callers that only care
// about "something went wrong in the simulator" can catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define EEGSIM_DEFINE_ERROR(Name)        \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

// mvar-core
EEGSIM_DEFINE_ERROR(StabilitySearchExhausted);
EEGSIM_DEFINE_ERROR(UnstableModel);
EEGSIM_DEFINE_ERROR(RankDeficientRegressor);

// forward model / io
EEGSIM_DEFINE_ERROR(SourceOutsideHead);
EEGSIM_DEFINE_ERROR(ParseError);
EEGSIM_DEFINE_ERROR(DimensionMismatch);
EEGSIM_DEFINE_ERROR(ZeroTargetSignal);
EEGSIM_DEFINE_ERROR(ShapeMismatch);

// filters
EEGSIM_DEFINE_ERROR(SingularCovariance);
EEGSIM_DEFINE_ERROR(RankDeficientLeadfield);
EEGSIM_DEFINE_ERROR(EigenDecompositionFailure);

// connectivity
EEGSIM_DEFINE_ERROR(ZeroColumn);
EEGSIM_DEFINE_ERROR(ZeroRow);

// configuration / cli
EEGSIM_DEFINE_ERROR(UnknownKey);
EEGSIM_DEFINE_ERROR(InvalidValue);
EEGSIM_DEFINE_ERROR(MissingRun);

#undef EEGSIM_DEFINE_ERROR

}  // namespace eegsim
