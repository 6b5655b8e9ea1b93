// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twoi {

enum class Errc {
    SingularPoint,
    WrongSide,
    NodalPoint,
    NonFiniteState,
    NoBracket,
    InterpolationDegenerate,
    NoConvergence,
    DegenerateCurve,
    EmptyHistogram,
    InvalidArgument,
    ConfigError,
    IoError,
};

constexpr std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::SingularPoint: return "SingularPoint";
    case Errc::WrongSide: return "WrongSide";
    case Errc::NodalPoint: return "NodalPoint";
    case Errc::NonFiniteState: return "NonFiniteState";
    case Errc::NoBracket: return "NoBracket";
    case Errc::InterpolationDegenerate: return "InterpolationDegenerate";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::DegenerateCurve: return "DegenerateCurve";
    case Errc::EmptyHistogram: return "EmptyHistogram";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

/// Every failure in the library is reported with this type; `code()` is the
/// machine-readable category.
class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

  private:
    Errc code_;
};

inline void require(bool cond, Errc code, const char* what)
{
    if (!cond) [[unlikely]]
        throw Error(code, what);
}

inline void require(bool cond, Errc code, const std::string& what)
{
    if (!cond) [[unlikely]]
        throw Error(code, what);
}

} // namespace twoi
