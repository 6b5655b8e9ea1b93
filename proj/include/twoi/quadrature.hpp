// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "twoi/error.hpp"
#include "twoi/types.hpp"

namespace twoi {

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1], ascending
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule from Newton iteration on P_n.
inline GaussRule gauss_legendre(std::size_t n)
{
    require(n >= 1, Errc::InvalidArgument, "Gauss-Legendre order must be positive");
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * static_cast<double>(k) - 1.0) * x * p1 - (static_cast<double>(k) - 1.0) * p0)
                                  / static_cast<double>(k);
                p0 = p1;
                p1 = pk;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

namespace detail {
inline double simpson_recurse(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                              double fb, double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
           + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
} // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] (b < a gives the negated
/// integral). The interval is pre-split into `pieces` panels so oscillatory
/// integrands are not under-sampled at the top level.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int pieces = 16, int max_depth = 40)
{
    if (a == b) return 0.0;
    double total = 0.0;
    const double width = (b - a) / pieces;
    for (int p = 0; p < pieces; ++p) {
        const double lo = a + p * width;
        const double hi = (p + 1 == pieces) ? b : lo + width;
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fmid = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += detail::simpson_recurse(f, lo, hi, flo, fmid, fhi, whole, tol / pieces, max_depth);
    }
    return total;
}

} // namespace twoi
