#pragma once

#include <stdexcept>
#include <string>

namespace rwsbi {

// Base for every error raised by the library. Messages name the violated
// condition and the offending value.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RWSBI_DEFINE_ERROR(Name)               \
    class Name : public Error {                \
    public:                                    \
        using Error::Error;                    \
    };

RWSBI_DEFINE_ERROR(NotAProbability)
RWSBI_DEFINE_ERROR(NonZeroMean)
RWSBI_DEFINE_ERROR(NonFiniteVariance)
RWSBI_DEFINE_ERROR(KernelParseError)
RWSBI_DEFINE_ERROR(RadiusTooSmall)
RWSBI_DEFINE_ERROR(StepFailure)
RWSBI_DEFINE_ERROR(DomainError)
RWSBI_DEFINE_ERROR(ParameterOrderViolated)
RWSBI_DEFINE_ERROR(EnvelopeViolation)
RWSBI_DEFINE_ERROR(RangeError)
RWSBI_DEFINE_ERROR(EventCapExceeded)
RWSBI_DEFINE_ERROR(KernelNotSymmetric)
RWSBI_DEFINE_ERROR(DominationViolated)
RWSBI_DEFINE_ERROR(KTooLarge)
RWSBI_DEFINE_ERROR(UnrealizableSpec)
RWSBI_DEFINE_ERROR(InvalidSpec)
RWSBI_DEFINE_ERROR(ConfigError)
RWSBI_DEFINE_ERROR(EmptyInput)
// Raised by run_suite with the module error attached via std::nested_exception.
RWSBI_DEFINE_ERROR(SuiteError)

#undef RWSBI_DEFINE_ERROR

}  // namespace rwsbi
