// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// One-dimensional attractor-limit variant generator. Integrating
// d(xdot)/dt = -xdot F(x) until xdot has decayed to a small fraction of its
// start value leaves the particle where int_{x0}^{x} F dx' = xdot(0), so
// uniformly drawn start velocities produce positions distributed like F.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>

#include "twoi/error.hpp"
#include "twoi/ode.hpp"
#include "twoi/parallel.hpp"
#include "twoi/quadrature.hpp"
#include "twoi/rng.hpp"
#include "twoi/stats.hpp"

namespace twoi {

struct VariantSpec {
    std::function<double(double)> target_density;
    double x_init_lo = 0.0;
    double x_init_hi = 0.0;  // equal to x_init_lo for a fixed start
    double v_init_lo = 0.0;
    double v_init_hi = 1.0;
    double stop_fraction = 1e-5;
    /// Particles leaving [support_lo, support_hi] have escaped the region
    /// where F can stop them. Unbounded by default.
    double support_lo = -std::numeric_limits<double>::infinity();
    double support_hi = std::numeric_limits<double>::infinity();
    double rel_tol = 1e-10;
    double h_init = 1e-3;
    double h_max = 10.0;
    std::int64_t max_steps = 100000;

    void validate() const
    {
        require(static_cast<bool>(target_density), Errc::InvalidArgument, "variant spec has no density");
        require(x_init_hi >= x_init_lo, Errc::InvalidArgument, "x_init range is inverted");
        require(v_init_hi > v_init_lo && v_init_lo >= 0.0, Errc::InvalidArgument,
                "velocity range must satisfy v_hi > v_lo >= 0");
        require(stop_fraction > 0.0 && stop_fraction < 1.0, Errc::InvalidArgument, "stop fraction must lie in (0, 1)");
        require(support_hi > support_lo, Errc::InvalidArgument, "support is empty");
        require(x_init_lo >= support_lo && x_init_hi <= support_hi, Errc::InvalidArgument,
                "start range lies outside the support");
    }
};

enum class VariantStatus { Converged, Escaped, NoConvergence };

struct VariantSample {
    VariantStatus status = VariantStatus::NoConvergence;
    double x0 = 0.0;
    double v0 = 0.0;
    double x_stop = 0.0;                                            // last position reached
    double eq5_residual = std::numeric_limits<double>::quiet_NaN(); // |int F dx - v0|, converged only
    std::int64_t steps = 0;
};

/// Independent check of the integral identity: adaptive Simpson over F.
inline double integral_identity_residual(const VariantSpec& spec, double x0, double x_stop, double v0)
{
    const double integral = adaptive_simpson(spec.target_density, x0, x_stop, 1e-10, 64);
    return std::abs(integral - v0);
}

/// Integrate one particle from (x0, v0). Never throws for non-convergence.
inline VariantSample integrate_variant(const VariantSpec& spec, double x0, double v0)
{
    VariantSample out;
    out.x0 = x0;
    out.v0 = v0;
    out.x_stop = x0;
    const double threshold = spec.stop_fraction * std::abs(v0);
    if (std::abs(v0) <= threshold) {
        out.status = VariantStatus::Converged;
        out.eq5_residual = std::abs(v0);
        return out;
    }

    auto rhs = [&](double, const ode::State<2>& y) {
        const double f = spec.target_density(y[0]);
        require(f >= 0.0, Errc::InvalidArgument, "target density is negative");
        return ode::State<2>{y[1], -y[1] * f};
    };

    const double abs_tol = 1e-12 * std::abs(v0);
    const double h_min = 1e-12;
    ode::StepController controller;
    ode::State<2> y{x0, v0};
    double t = 0.0;
    double h = spec.h_init;
    while (out.steps < spec.max_steps) {
        const auto trial = ode::step_rkf45<2>(y, t, h, rhs);
        const double err = ode::scaled_error<2>(y, trial, spec.rel_tol, abs_tol);
        require(std::isfinite(err), Errc::NonFiniteState, "non-finite variant trajectory");
        if (err > 1.0 && h > h_min) {
            h = controller.next(h, err, h_min, spec.h_max);
            continue;
        }
        y = trial.y;
        t += h;
        h = controller.next(h, err, h_min, spec.h_max);
        ++out.steps;
        out.x_stop = y[0];
        if (std::abs(y[1]) <= threshold) {
            out.status = VariantStatus::Converged;
            out.eq5_residual = integral_identity_residual(spec, x0, y[0], v0);
            return out;
        }
        if (y[0] < spec.support_lo || y[0] > spec.support_hi) {
            out.status = VariantStatus::Escaped;
            return out;
        }
    }
    out.status = VariantStatus::NoConvergence;
    return out;
}

/// Start position and velocity drawn from a particle's stream.
inline std::pair<double, double> draw_start(const VariantSpec& spec, CounterRng& rng)
{
    const double x0 = spec.x_init_hi > spec.x_init_lo ? rng.uniform(spec.x_init_lo, spec.x_init_hi) : spec.x_init_lo;
    const double v0 = rng.uniform(spec.v_init_lo, spec.v_init_hi);
    return {x0, v0};
}

/// Draw (x0, v0) from the stream and integrate to the attractor limit.
/// Throws NoConvergence when the step budget runs out first.
inline VariantSample sample_variant(const VariantSpec& spec, CounterRng& rng)
{
    spec.validate();
    const auto [x0, v0] = draw_start(spec, rng);
    VariantSample s = integrate_variant(spec, x0, v0);
    if (s.status == VariantStatus::NoConvergence)
        throw Error(Errc::NoConvergence, "step budget exhausted before the attractor limit (F too small on the path?)");
    return s;
}

struct VariantEnsemble {
    Histogram histogram;
    std::uint64_t converged = 0;
    std::uint64_t escaped = 0;
    std::uint64_t no_convergence = 0;
    double max_relative_residual = 0.0;  // max over converged of residual / v0
    std::int64_t total_steps = 0;
};

struct HistogramSpec {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t bins = 100;
};

/// n independent particles on streams (seed, index). Escaped particles enter
/// the histogram at their exit position (under/overflow). Fails when more
/// than 1% of particles exhaust the step budget.
inline VariantEnsemble run_variant_ensemble(const VariantSpec& spec, std::uint64_t n, std::uint64_t seed,
                                            const HistogramSpec& bins, unsigned workers = 0,
                                            std::uint64_t block_size = 4096)
{
    spec.validate();
    require(n >= 1, Errc::InvalidArgument, "ensemble size must be at least 1");

    auto work = [&](std::uint64_t begin, std::uint64_t end) {
        VariantEnsemble part{Histogram(bins.lo, bins.hi, bins.bins)};
        for (std::uint64_t i = begin; i < end; ++i) {
            CounterRng rng(seed, i);
            const auto [x0, v0] = draw_start(spec, rng);
            const VariantSample s = integrate_variant(spec, x0, v0);
            part.total_steps += s.steps;
            switch (s.status) {
            case VariantStatus::Converged:
                ++part.converged;
                part.histogram.add(s.x_stop);
                if (s.v0 > 0.0) part.max_relative_residual = std::max(part.max_relative_residual, s.eq5_residual / s.v0);
                break;
            case VariantStatus::Escaped:
                ++part.escaped;
                part.histogram.add(s.x_stop);
                break;
            case VariantStatus::NoConvergence: ++part.no_convergence; break;
            }
        }
        return part;
    };
    auto fold = [](VariantEnsemble& acc, const VariantEnsemble& part) {
        acc.histogram.merge(part.histogram);
        acc.converged += part.converged;
        acc.escaped += part.escaped;
        acc.no_convergence += part.no_convergence;
        acc.max_relative_residual = std::max(acc.max_relative_residual, part.max_relative_residual);
        acc.total_steps += part.total_steps;
    };
    VariantEnsemble result = run_blocks(n, block_size, resolve_workers(workers),
                                        VariantEnsemble{Histogram(bins.lo, bins.hi, bins.bins)}, work, fold,
                                        [](const VariantEnsemble&) { return false; });
    require(static_cast<double>(result.no_convergence) <= 0.01 * static_cast<double>(n), Errc::NoConvergence,
            "more than 1% of variant trajectories did not converge");
    return result;
}

/// The density used for the attractor-limit histogram demonstration:
/// F(x) = 0.3 exp(-0.3 |x|) cos^2(2x), started at x0 = -7 with xdot(0) ~ U(0, 1.2).
inline VariantSpec fig1_variant_spec()
{
    VariantSpec s;
    s.target_density = [](double x) {
        const double c = std::cos(2.0 * x);
        return 0.3 * std::exp(-0.3 * std::abs(x)) * c * c;
    };
    s.x_init_lo = s.x_init_hi = -7.0;
    s.v_init_lo = 0.0;
    s.v_init_hi = 1.2;
    s.stop_fraction = 1e-5;
    s.support_lo = -7.0;
    s.support_hi = 12.0;
    return s;
}

/// Per-bin average of a density, by 8-point Gauss-Legendre on each bin.
inline std::vector<double> bin_averaged(const std::function<double(double)>& f, const Histogram& h)
{
    static const GaussRule gl = gauss_legendre(8);
    std::vector<double> out(h.bins());
    for (std::size_t i = 0; i < h.bins(); ++i) {
        const double a = h.bin_lo(i);
        const double w = h.bin_width();
        double s = 0.0;
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) s += 0.5 * gl.weights[q] * f(a + 0.5 * w * (1.0 + gl.nodes[q]));
        out[i] = s;
    }
    return out;
}

} // namespace twoi
