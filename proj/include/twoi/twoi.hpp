// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Trajectory-wave ordering interaction (TWOI):
//
//     d(vel)/dt - du/dt = -(vel - u) F,     d(pos)/dt = vel,
//
// integrated as a first-order system in (pos, vel). The fields are static,
// so du/dt along the path is J_u vel with J_u the ray-velocity Jacobian.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>

#include "twoi/error.hpp"
#include "twoi/ode.hpp"
#include "twoi/types.hpp"
#include "twoi/wavefield.hpp"

namespace twoi {

struct TrajectoryState {
    Vec2 pos{};
    Vec2 vel{};
    double t = 0.0;

    bool finite() const { return is_finite(pos) && is_finite(vel) && std::isfinite(t); }
};

/// Parameters that turn a scalar field into (u, F).
struct OrderingParams {
    double gain = 1.0;            // gamma, in units of c / lambda
    double intensity_ref = 1.0;   // I_ref
    double amplitude_A = kRayAmplitude;
};

struct FlowSample {
    Vec2 u{};
    Mat2 jacobian{};
    double rate = 0.0;
};

template <ScalarField Field>
FlowSample sample_flow(const Field& field, Vec2 pos, const OrderingParams& p)
{
    const FieldSample s = field.sample(pos);
    FlowSample f;
    f.u = ray_velocity(s, p.amplitude_A, p.intensity_ref);
    f.jacobian = ray_velocity_jacobian(s, p.amplitude_A, p.intensity_ref);
    f.rate = ordering_rate(s, p.gain, p.intensity_ref);
    return f;
}

struct StateDerivative {
    Vec2 dpos{};
    Vec2 dvel{};
};

/// d(pos)/dt = vel, d(vel)/dt = J_u vel - (vel - u) F.
inline StateDerivative twoi_rhs(const TrajectoryState& s, const FlowSample& flow)
{
    return {s.vel, flow.jacobian.apply(s.vel) - (s.vel - flow.u) * flow.rate};
}

template <ScalarField Field>
StateDerivative twoi_rhs(const TrajectoryState& s, const Field& field, const OrderingParams& p)
{
    return twoi_rhs(s, sample_flow(field, s.pos, p));
}

enum class Method { RK4Fixed, RKF45Adaptive };

struct IntegratorConfig {
    Method method = Method::RKF45Adaptive;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double h_init = 1e-2;
    double h_min = 1e-10;
    double h_max = 50.0;
    std::int64_t max_steps = 200000;
    double attractor_tol = 1e-5;
    double max_speed = 10.0 * kLightSpeed;

    void validate() const
    {
        require(h_min > 0.0 && h_min <= h_init && h_init <= h_max, Errc::InvalidArgument,
                "step sizes must satisfy 0 < h_min <= h_init <= h_max");
        require(rel_tol > 0.0 && abs_tol > 0.0 && attractor_tol > 0.0, Errc::InvalidArgument,
                "tolerances must be positive");
        require(max_steps > 0, Errc::InvalidArgument, "step budget must be positive");
    }
};

struct StepSample {
    double t = 0.0;
    Vec2 pos{};
    Vec2 vel{};
};

/// The last six accepted samples, oldest first.
class StepRecord {
  public:
    static constexpr int kCapacity = 6;

    void push(const StepSample& s)
    {
        require(count_ == 0 || s.t > back().t, Errc::InterpolationDegenerate,
                "step samples must have strictly increasing time");
        data_[(start_ + count_) % kCapacity] = s;
        if (count_ < kCapacity)
            ++count_;
        else
            start_ = (start_ + 1) % kCapacity;
    }

    int size() const { return count_; }
    bool full() const { return count_ == kCapacity; }
    const StepSample& operator[](int i) const { return data_[(start_ + i) % kCapacity]; }
    const StepSample& back() const { return (*this)[count_ - 1]; }
    void clear() { start_ = count_ = 0; }

  private:
    std::array<StepSample, kCapacity> data_{};
    int start_ = 0;
    int count_ = 0;
};

namespace detail {

// Lagrange basis evaluation and derivative at t over the buffered times.
inline void lagrange_weights(const StepRecord& buf, double t, std::array<double, StepRecord::kCapacity>& w,
                             std::array<double, StepRecord::kCapacity>& dw)
{
    const int n = buf.size();
    for (int i = 0; i < n; ++i) {
        double li = 1.0;
        double dli = 0.0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double denom = buf[i].t - buf[j].t;
            const double f = (t - buf[j].t) / denom;
            dli = dli * f + li / denom;
            li *= f;
        }
        w[i] = li;
        dw[i] = dli;
    }
}

} // namespace detail

/// Degree-(n-1) Lagrange interpolant of the buffered samples at time t.
inline StepSample interpolate(const StepRecord& buf, double t)
{
    std::array<double, StepRecord::kCapacity> w{}, dw{};
    detail::lagrange_weights(buf, t, w, dw);
    // Offsets from the newest sample: the weights can be large when step
    // sizes grow quickly, and this keeps constant components exact.
    const StepSample& ref = buf.back();
    StepSample s;
    s.t = t;
    for (int i = 0; i < buf.size(); ++i) {
        s.pos += (buf[i].pos - ref.pos) * w[i];
        s.vel += (buf[i].vel - ref.vel) * w[i];
    }
    s.pos += ref.pos;
    s.vel += ref.vel;
    return s;
}

struct Crossing {
    double t = 0.0;
    double y = 0.0;
};

/// Locate z(t*) = screen_z inside the last accepted step using the Lagrange
/// interpolants through every buffered sample (six once the buffer is full),
/// by safeguarded Newton iteration on the bracketing interval.
inline Crossing screen_crossing(const StepRecord& buf, double screen_z)
{
    require(buf.size() >= 2, Errc::NoBracket, "at least two samples are needed to bracket a crossing");
    for (int i = 0; i < buf.size(); ++i)
        for (int j = i + 1; j < buf.size(); ++j)
            require(buf[i].t != buf[j].t, Errc::InterpolationDegenerate, "sample times are not distinct");

    const StepSample& a = buf[buf.size() - 2];
    const StepSample& b = buf.back();
    double fa = a.pos.z - screen_z;
    const double fb = b.pos.z - screen_z;
    if (fa == 0.0) return {a.t, a.pos.y};
    if (fb == 0.0) return {b.t, b.pos.y};
    require((fa < 0.0) != (fb < 0.0), Errc::NoBracket, "screen plane not crossed in the last step");

    double lo = a.t;
    double hi = b.t;
    double t = lo + (hi - lo) * fa / (fa - fb);
    std::array<double, StepRecord::kCapacity> w{}, dw{};
    for (int iter = 0; iter < 100; ++iter) {
        detail::lagrange_weights(buf, t, w, dw);
        double f = b.pos.z - screen_z;
        double dz = 0.0;
        for (int i = 0; i < buf.size(); ++i) {
            f += (buf[i].pos.z - b.pos.z) * w[i];
            dz += (buf[i].pos.z - b.pos.z) * dw[i];
        }
        if (std::abs(f) < 1e-9 * kWavelength) break;
        if ((f < 0.0) == (fa < 0.0)) {
            lo = t;
            fa = f;
        } else {
            hi = t;
        }
        double next = (dz != 0.0) ? t - f / dz : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        t = next;
    }
    return {t, interpolate(buf, t).pos.y};
}

enum class Outcome {
    ScreenHit,
    Absorbed,
    OutOfBounds,
    StepBudgetExhausted,
    NodalHalt,
    AttractorReached,
    Runaway,
};

constexpr std::string_view to_string(Outcome o)
{
    switch (o) {
    case Outcome::ScreenHit: return "screen_hit";
    case Outcome::Absorbed: return "absorbed";
    case Outcome::OutOfBounds: return "out_of_bounds";
    case Outcome::StepBudgetExhausted: return "step_budget_exhausted";
    case Outcome::NodalHalt: return "nodal_halt";
    case Outcome::AttractorReached: return "attractor_reached";
    case Outcome::Runaway: return "runaway";
    }
    return "unknown";
}

struct Box {
    double y_min = -std::numeric_limits<double>::infinity();
    double y_max = std::numeric_limits<double>::infinity();
    double z_min = -std::numeric_limits<double>::infinity();
    double z_max = std::numeric_limits<double>::infinity();

    bool contains(Vec2 p) const { return p.y >= y_min && p.y <= y_max && p.z >= z_min && p.z <= z_max; }
};

/// Terminating conditions. The screen is crossed when z passes screen_z in
/// either direction; the absorber is a plane that must not be approached
/// closer than `absorber_margin` from the side the trajectory starts on.
struct StopSet {
    std::optional<double> screen_z;
    double screen_y_min = -std::numeric_limits<double>::infinity();
    double screen_y_max = std::numeric_limits<double>::infinity();
    std::optional<Box> bounds;
    std::optional<double> absorber_z;
    double absorber_margin = kApertureClearance;
    bool stop_at_attractor = false;
};

struct TrajectoryResult {
    Outcome outcome = Outcome::StepBudgetExhausted;
    Crossing hit{};                 // valid when outcome == ScreenHit
    TrajectoryState final_state{};
    double attractor_residual = std::numeric_limits<double>::quiet_NaN();
    std::int64_t steps_taken = 0;
    std::int64_t steps_rejected = 0;
};

/// Called after every accepted step with the crossing buffer.
using StepObserver = std::function<void(const StepRecord&)>;

namespace detail {

inline ode::State<4> pack(const TrajectoryState& s) { return {s.pos.y, s.pos.z, s.vel.y, s.vel.z}; }
inline TrajectoryState unpack(const ode::State<4>& y, double t) { return {{y[0], y[1]}, {y[2], y[3]}, t}; }

inline bool recoverable(const Error& e)
{
    return e.code() == Errc::NodalPoint || e.code() == Errc::SingularPoint || e.code() == Errc::WrongSide;
}

inline Outcome outcome_for(const Error& e)
{
    return e.code() == Errc::NodalPoint ? Outcome::NodalHalt : Outcome::Absorbed;
}

} // namespace detail

/// Integrate one trajectory until the first stop condition fires.
///
/// Nodal, singular and wrong-side evaluations inside trial stages shrink the
/// step; if the step cannot shrink further the trajectory ends as NodalHalt
/// (nodes) or Absorbed (aperture plane). Non-finite states throw.
template <ScalarField Field>
TrajectoryResult integrate(const TrajectoryState& state0, const Field& field, const OrderingParams& params,
                           const StopSet& stops, const IntegratorConfig& cfg, const StepObserver& observer = {})
{
    cfg.validate();
    require(state0.finite(), Errc::NonFiniteState, "initial state is not finite");
    require(stops.screen_z || stops.bounds || stops.absorber_z || stops.stop_at_attractor, Errc::InvalidArgument,
            "stop set has no terminating plane, box or attractor condition");

    TrajectoryResult result;
    result.final_state = state0;

    auto residual_at = [&](const TrajectoryState& s) { return norm(s.vel - sample_flow(field, s.pos, params).u); };

    double initial_gap = 0.0;
    try {
        initial_gap = residual_at(state0);
    } catch (const Error& e) {
        if (e.code() != Errc::NodalPoint) throw;
        result.outcome = Outcome::NodalHalt;
        return result;
    }
    const double gap_scale = initial_gap > 0.0 ? initial_gap : 1.0;
    result.attractor_residual = initial_gap / gap_scale;
    if (stops.stop_at_attractor && initial_gap == 0.0) {
        result.outcome = Outcome::AttractorReached;
        return result;
    }

    auto rhs = [&](double, const ode::State<4>& y) {
        const TrajectoryState s = detail::unpack(y, 0.0);
        const StateDerivative d = twoi_rhs(s, field, params);
        return ode::State<4>{d.dpos.y, d.dpos.z, d.dvel.y, d.dvel.z};
    };

    StepRecord buffer;
    buffer.push({state0.t, state0.pos, state0.vel});
    if (observer) observer(buffer);

    const double absorber_side =
        stops.absorber_z ? (state0.pos.z >= *stops.absorber_z ? 1.0 : -1.0) : 0.0;
    const double screen_side = stops.screen_z ? (state0.pos.z - *stops.screen_z) : 0.0;

    ode::StepController controller;
    TrajectoryState cur = state0;
    double h = cfg.h_init;

    auto finish = [&](Outcome o, const TrajectoryState& s) {
        result.outcome = o;
        result.final_state = s;
        try {
            result.attractor_residual = residual_at(s) / gap_scale;
        } catch (const Error& e) {
            if (!detail::recoverable(e)) throw;
        }
        return result;
    };

    while (true) {
        if (result.steps_taken >= cfg.max_steps) return finish(Outcome::StepBudgetExhausted, cur);

        const ode::State<4> y0 = detail::pack(cur);
        ode::State<4> y1{};
        double h_used = h;
        double h_next = h;
        try {
            if (cfg.method == Method::RK4Fixed) {
                y1 = ode::step_rk4<4>(y0, cur.t, h, rhs);
            } else {
                const auto trial = ode::step_rkf45<4>(y0, cur.t, h, rhs);
                const double err = ode::scaled_error<4>(y0, trial, cfg.rel_tol, cfg.abs_tol);
                if (!std::isfinite(err)) throw Error(Errc::NonFiniteState, "non-finite error estimate");
                if (err > 1.0 && h > cfg.h_min) {
                    h = controller.next(h, err, cfg.h_min, cfg.h_max);
                    ++result.steps_rejected;
                    continue;
                }
                y1 = trial.y;
                h_next = controller.next(h, err, cfg.h_min, cfg.h_max);
            }
        } catch (const Error& e) {
            if (!detail::recoverable(e)) throw;
            if (cfg.method == Method::RK4Fixed || h <= cfg.h_min) return finish(detail::outcome_for(e), cur);
            h = std::max(cfg.h_min, 0.25 * h);
            ++result.steps_rejected;
            continue;
        }

        const TrajectoryState next = detail::unpack(y1, cur.t + h_used);
        if (!next.finite()) throw Error(Errc::NonFiniteState, "integration produced a non-finite state");
        ++result.steps_taken;
        buffer.push({next.t, next.pos, next.vel});
        if (observer) observer(buffer);
        cur = next;
        h = h_next;

        if (stops.screen_z) {
            const double side = cur.pos.z - *stops.screen_z;
            if (side == 0.0 || (side < 0.0) != (screen_side < 0.0)) {
                const Crossing c = screen_crossing(buffer, *stops.screen_z);
                TrajectoryState at = cur;
                const StepSample s = interpolate(buffer, c.t);
                at.pos = {c.y, *stops.screen_z};
                at.vel = s.vel;
                at.t = c.t;
                result.hit = c;
                const bool inside = c.y >= stops.screen_y_min && c.y <= stops.screen_y_max;
                return finish(inside ? Outcome::ScreenHit : Outcome::OutOfBounds, at);
            }
        }
        if (stops.absorber_z && (cur.pos.z - *stops.absorber_z) * absorber_side < stops.absorber_margin)
            return finish(Outcome::Absorbed, cur);
        if (stops.bounds && !stops.bounds->contains(cur.pos)) return finish(Outcome::OutOfBounds, cur);
        if (norm(cur.vel) > cfg.max_speed) return finish(Outcome::Runaway, cur);
        if (stops.stop_at_attractor) {
            try {
                if (residual_at(cur) <= cfg.attractor_tol * initial_gap) return finish(Outcome::AttractorReached, cur);
            } catch (const Error& e) {
                if (e.code() != Errc::NodalPoint) throw;
                return finish(Outcome::NodalHalt, cur);
            }
        }
    }
}

} // namespace twoi
