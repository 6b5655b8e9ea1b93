// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Opt-in SIMD variants of sin/cos. With TWOI_USE_LIBMVEC defined (and
// -fopenmp-simd), loops marked TWOI_SIMD_REDUCTION call glibc's libmvec
// vector entry points; otherwise they compile to ordinary scalar loops.
#pragma once

#include <cmath>

#if defined(TWOI_USE_LIBMVEC)
extern "C" {
#pragma omp declare simd notinbranch
double sin(double) noexcept;
#pragma omp declare simd notinbranch
double cos(double) noexcept;
}
#define TWOI_PRAGMA(x) _Pragma(#x)
#define TWOI_SIMD_REDUCTION(...) TWOI_PRAGMA(omp simd reduction(+ : __VA_ARGS__))
#else
#define TWOI_SIMD_REDUCTION(...)
#endif
