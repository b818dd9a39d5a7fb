#pragma once

#include <stdexcept>
#include <string>

namespace gb {

enum class ErrorKind {
    NearCutLocus,
    BadGeometry,
    NotTypeA,
    NotTypeB,
    RankMismatch,
    ChartMismatch,
    DbcViolation,
    NoConvergence,
    UnsupportedDegree,
    NotHorizontal,
    IncompatibleBoundaryData,
    WindowTooSmall,
    SupportTouchesBoundary,
    KernelConditionViolated,
    HopfViolation,
    BadCover,
    ConfigError,
    IoError,
};

const char* error_kind_name(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace gb
