// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Explicit Runge-Kutta steps for first-order systems y' = f(t, y) over a
// fixed-size state array.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace twoi::ode {

template <std::size_t N>
using State = std::array<double, N>;

namespace detail {
template <std::size_t N, class... Terms>
inline State<N> combine(const State<N>& y, double h, const Terms&... terms)
{
    State<N> out = y;
    for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        ((acc += terms.first * (*terms.second)[i]), ...);
        out[i] += h * acc;
    }
    return out;
}

template <std::size_t N>
inline std::pair<double, const State<N>*> term(double c, const State<N>& k)
{
    return {c, &k};
}
} // namespace detail

/// Classical fourth-order Runge-Kutta step.
template <std::size_t N, class Rhs>
State<N> step_rk4(const State<N>& y, double t, double h, Rhs&& rhs)
{
    using detail::combine;
    using detail::term;
    const State<N> k1 = rhs(t, y);
    const State<N> k2 = rhs(t + 0.5 * h, combine(y, h, term(0.5, k1)));
    const State<N> k3 = rhs(t + 0.5 * h, combine(y, h, term(0.5, k2)));
    const State<N> k4 = rhs(t + h, combine(y, h, term(1.0, k3)));
    return combine(y, h, term(1.0 / 6.0, k1), term(1.0 / 3.0, k2), term(1.0 / 3.0, k3), term(1.0 / 6.0, k4));
}

template <std::size_t N>
struct EmbeddedStep {
    State<N> y;      // fifth-order solution (advanced)
    State<N> delta;  // fifth minus fourth order solution
};

/// Runge-Kutta-Fehlberg 4(5) step. The fifth-order solution is returned; the
/// embedded difference drives step-size control.
template <std::size_t N, class Rhs>
EmbeddedStep<N> step_rkf45(const State<N>& y, double t, double h, Rhs&& rhs)
{
    using detail::combine;
    using detail::term;
    const State<N> k1 = rhs(t, y);
    const State<N> k2 = rhs(t + h / 4.0, combine(y, h, term(1.0 / 4.0, k1)));
    const State<N> k3 = rhs(t + 3.0 * h / 8.0, combine(y, h, term(3.0 / 32.0, k1), term(9.0 / 32.0, k2)));
    const State<N> k4 = rhs(t + 12.0 * h / 13.0, combine(y, h, term(1932.0 / 2197.0, k1), term(-7200.0 / 2197.0, k2),
                                                         term(7296.0 / 2197.0, k3)));
    const State<N> k5 = rhs(t + h, combine(y, h, term(439.0 / 216.0, k1), term(-8.0, k2), term(3680.0 / 513.0, k3),
                                           term(-845.0 / 4104.0, k4)));
    const State<N> k6 = rhs(t + h / 2.0, combine(y, h, term(-8.0 / 27.0, k1), term(2.0, k2),
                                                 term(-3544.0 / 2565.0, k3), term(1859.0 / 4104.0, k4),
                                                 term(-11.0 / 40.0, k5)));
    EmbeddedStep<N> out;
    out.y = combine(y, h, term(16.0 / 135.0, k1), term(6656.0 / 12825.0, k3), term(28561.0 / 56430.0, k4),
                    term(-9.0 / 50.0, k5), term(2.0 / 55.0, k6));
    for (std::size_t i = 0; i < N; ++i) {
        out.delta[i] = h * ((16.0 / 135.0 - 25.0 / 216.0) * k1[i] + (6656.0 / 12825.0 - 1408.0 / 2565.0) * k3[i]
                            + (28561.0 / 56430.0 - 2197.0 / 4104.0) * k4[i] + (-9.0 / 50.0 + 1.0 / 5.0) * k5[i]
                            + (2.0 / 55.0) * k6[i]);
    }
    return out;
}

/// Max-norm of the embedded error scaled by abs_tol + rel_tol |y|. Values
/// <= 1 mean the step meets the tolerance.
template <std::size_t N>
double scaled_error(const State<N>& y0, const EmbeddedStep<N>& step, double rel_tol, double abs_tol)
{
    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double scale = abs_tol + rel_tol * std::max(std::abs(y0[i]), std::abs(step.y[i]));
        err = std::max(err, std::abs(step.delta[i]) / scale);
    }
    return err;
}

struct StepController {
    double safety = 0.9;
    double max_growth = 5.0;
    double max_shrink = 0.1;

    /// Next step size from the scaled error, h' = safety h (1/err)^(1/5),
    /// limited to [max_shrink h, max_growth h] and [h_min, h_max].
    double next(double h, double err, double h_min, double h_max) const
    {
        double factor = err > 0.0 ? safety * std::pow(err, -0.2) : max_growth;
        factor = std::clamp(factor, max_shrink, max_growth);
        return std::clamp(h * factor, h_min, h_max);
    }
};

} // namespace twoi::ode
