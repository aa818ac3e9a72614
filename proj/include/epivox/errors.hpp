#pragma once

#include <stdexcept>
#include <string>

namespace epivox {

// All library failures derive from Error; `kind()` is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define EPIVOX_DEFINE_ERROR(NAME)                                         \
    class NAME : public Error {                                           \
    public:                                                               \
        explicit NAME(const std::string& msg) : Error(#NAME, msg) {}      \
    }

EPIVOX_DEFINE_ERROR(UnknownStructure);
EPIVOX_DEFINE_ERROR(NoWallPair);
EPIVOX_DEFINE_ERROR(DegenerateRay);
EPIVOX_DEFINE_ERROR(CollinearLandmarks);
EPIVOX_DEFINE_ERROR(CoincidentLandmarks);
EPIVOX_DEFINE_ERROR(OpenSurface);
EPIVOX_DEFINE_ERROR(InvalidParams);
EPIVOX_DEFINE_ERROR(MissingLandmark);
EPIVOX_DEFINE_ERROR(BadKernel);
EPIVOX_DEFINE_ERROR(ShapeMismatch);
EPIVOX_DEFINE_ERROR(NotScalarLoss);
EPIVOX_DEFINE_ERROR(NonFiniteValue);
EPIVOX_DEFINE_ERROR(InvalidSpec);
EPIVOX_DEFINE_ERROR(ViewCountMismatch);
EPIVOX_DEFINE_ERROR(RefinerDisabled);
EPIVOX_DEFINE_ERROR(TooFewCases);
EPIVOX_DEFINE_ERROR(DivisionByZero);
EPIVOX_DEFINE_ERROR(NonFiniteLoss);
EPIVOX_DEFINE_ERROR(EmptyTestSet);
EPIVOX_DEFINE_ERROR(IoError);

#undef EPIVOX_DEFINE_ERROR

}  // namespace epivox
