// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end experiments: point-source slit diffraction, near-field trajectory
// traces, and two-photon ghost diffraction in the unfolded geometry
//
//     idler screen z = -Z2   crystal z = -Z0   mask z = 0   signal screen z = +Z1
//
// The idler travels in -z from the crystal; the signal crosses the mask.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twoi/error.hpp"
#include "twoi/parallel.hpp"
#include "twoi/rng.hpp"
#include "twoi/stats.hpp"
#include "twoi/twoi.hpp"
#include "twoi/types.hpp"
#include "twoi/variantgen.hpp"
#include "twoi/wavefield.hpp"

namespace twoi {

//---------------------------------------------------------------------------//
// Shared pieces
//---------------------------------------------------------------------------//

inline constexpr std::size_t kOutcomeCount = 7;

struct OutcomeTally {
    std::array<std::uint64_t, kOutcomeCount> counts{};

    void add(Outcome o) { ++counts[static_cast<std::size_t>(o)]; }
    std::uint64_t operator[](Outcome o) const { return counts[static_cast<std::size_t>(o)]; }
    std::uint64_t total() const
    {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    void merge(const OutcomeTally& o)
    {
        for (std::size_t i = 0; i < kOutcomeCount; ++i) counts[i] += o.counts[i];
    }
    friend bool operator==(const OutcomeTally&, const OutcomeTally&) = default;
};

inline constexpr std::array<Outcome, kOutcomeCount> kAllOutcomes = {
    Outcome::ScreenHit, Outcome::Absorbed,         Outcome::OutOfBounds, Outcome::StepBudgetExhausted,
    Outcome::NodalHalt, Outcome::AttractorReached, Outcome::Runaway,
};

enum class PremaskMode { Geometric, Integrated };
enum class LaunchKind { Openings, Cone };

/// Velocity given to a particle when it enters the diffracted field: the
/// incident ray direction, or the local u of the diffracted field.
enum class Handoff { Incident, Attractor };

/// Straight ray from `source` at angle theta (from +z) to the mask and on to
/// z = plane_z + z_start.
struct RayLaunch {
    bool transmitted = false;
    double mask_y = 0.0;
    TrajectoryState start{};
};

inline RayLaunch straight_launch(Vec2 source, double theta, const SlitMask& mask, double z_start)
{
    const Vec2 dir = unit_from_angle(theta);
    require(dir.z > 0.0, Errc::InvalidArgument, "launch direction must point towards the mask");
    RayLaunch out;
    const double s_mask = (mask.plane_z - source.z) / dir.z;
    out.mask_y = source.y + s_mask * dir.y;
    out.transmitted = mask.transmits(out.mask_y);
    const double s_start = (mask.plane_z + z_start - source.z) / dir.z;
    out.start.pos = source + dir * s_start;
    out.start.vel = dir * kLightSpeed;
    out.start.t = s_start / kLightSpeed;
    return out;
}

/// The same leg integrated with the TWOI in the incident field, for
/// validating the geometric shortcut. Starts one wavelength from the source.
inline RayLaunch integrated_launch(const PointSourceField& incident, double theta, const SlitMask& mask, double z_start,
                                   const OrderingParams& params, const IntegratorConfig& cfg)
{
    const Vec2 dir = unit_from_angle(theta);
    require(dir.z > 0.0, Errc::InvalidArgument, "launch direction must point towards the mask");
    TrajectoryState s0{incident.origin + dir * kWavelength, dir * kLightSpeed, kWavelength / kLightSpeed};
    RayLaunch out;
    StopSet to_mask;
    to_mask.screen_z = mask.plane_z;
    const TrajectoryResult a = integrate(s0, incident, params, to_mask, cfg);
    require(a.outcome == Outcome::ScreenHit, Errc::NoConvergence, "incident leg did not reach the mask");
    out.mask_y = a.hit.y;
    out.transmitted = mask.transmits(out.mask_y);
    StopSet to_start;
    to_start.screen_z = mask.plane_z + z_start;
    const TrajectoryResult b = integrate(a.final_state, incident, params, to_start, cfg);
    require(b.outcome == Outcome::ScreenHit, Errc::NoConvergence, "incident leg did not reach the start plane");
    out.start = b.final_state;
    return out;
}

/// Transverse bounds generous enough never to fire on physical paths.
inline constexpr double kFarTransverse = 1e6;

//---------------------------------------------------------------------------//
// Slit diffraction
//---------------------------------------------------------------------------//

struct LaunchPolicy {
    /// Openings: angles uniform over the directions that reach an opening
    /// (uniform-cone sampling conditioned on transmission). Cone: uniform in
    /// [-half_angle, half_angle]; blocked rays are counted as absorbed.
    LaunchKind kind = LaunchKind::Openings;
    double half_angle = 0.0;  // radians; 0 selects the automatic cone
    double z_start = 0.5;     // TWOI integration starts this far past the mask
    PremaskMode premask = PremaskMode::Geometric;
    Handoff handoff = Handoff::Attractor;
};

struct SlitScenario {
    std::string name = "custom";
    SlitMask mask = SlitMask::uniform(1, 8.0, 0.0);
    double source_distance = 500.0;
    double screen_distance = 1000.0;
    double source_y = 0.0;
    std::uint64_t n_particles = 20000;
    LaunchPolicy launch;
    KernelKind kernel = KernelKind::Kernel2DAsymptotic;
    DiffractionOptions diffraction;
    double gain = 1.0;
    IntegratorConfig integrator;
    HistogramSpec screen{-300.0, 300.0, 100};
    double fringe_prominence = 0.05;
    std::uint64_t block_size = 256;

    void validate() const
    {
        mask.validate();
        require(mask.plane_z == 0.0, Errc::InvalidArgument, "the mask plane is z = 0");
        require(source_distance > 0.0 && screen_distance > 0.0, Errc::InvalidArgument, "distances must be positive");
        require(launch.z_start >= kApertureClearance && launch.z_start < screen_distance, Errc::InvalidArgument,
                "z_start must lie between the aperture clearance and the screen");
        require(launch.half_angle >= 0.0 && launch.half_angle < 0.5 * kPi, Errc::InvalidArgument,
                "launch half angle must lie in [0, pi/2)");
        require(gain >= 0.0, Errc::InvalidArgument, "ordering gain must be non-negative");
        require(screen.hi > screen.lo && screen.bins >= 1, Errc::InvalidArgument, "invalid screen histogram");
        require(n_particles >= 1 && block_size >= 1, Errc::InvalidArgument, "particle and block counts must be positive");
        integrator.validate();
        const double a = resolved_half_angle();
        require(std::atan2(mask.lowest_edge() - source_y, source_distance) >= -a &&
                    std::atan2(mask.highest_edge() - source_y, source_distance) <= a,
                Errc::InvalidArgument, "launch cone does not cover the mask openings");
    }

    Vec2 source_point() const { return {source_y, -source_distance}; }
    PointSourceField source() const { return {source_point(), kernel}; }
    DiffractedField field() const { return DiffractedField(source(), mask, diffraction); }

    /// 1.2 times the half angle the mask subtends at the source.
    double resolved_half_angle() const
    {
        if (launch.half_angle > 0.0) return launch.half_angle;
        const double reach = std::max(std::abs(mask.lowest_edge() - source_y), std::abs(mask.highest_edge() - source_y));
        return 1.2 * std::atan(reach / source_distance);
    }

    /// Main lobe of the single-opening envelope on the screen, centred on the
    /// geometric image of the mask centre.
    Window central_envelope() const
    {
        const double s = std::min(1.0, kWavelength / mask.slit_width);
        const double half = screen_distance * std::tan(std::asin(s));
        const double mc = 0.5 * (mask.lowest_edge() + mask.highest_edge());
        const double centre = mc + (mc - source_y) * screen_distance / source_distance;
        return {centre - half, centre + half};
    }

    StopSet stops() const
    {
        StopSet s;
        s.screen_z = screen_distance;
        s.absorber_z = mask.plane_z;
        s.bounds = Box{-kFarTransverse, kFarTransverse, mask.plane_z - 1.0, screen_distance + 1.0};
        return s;
    }
};

/// Angular intervals, seen from the source, that land inside an opening.
inline std::vector<Window> opening_angles(const SlitScenario& sc)
{
    std::vector<double> c = sc.mask.slit_centers;
    std::sort(c.begin(), c.end());
    std::vector<Window> out;
    for (double x : c) {
        const double lo = std::atan2(x - 0.5 * sc.mask.slit_width - sc.source_y, sc.source_distance);
        const double hi = std::atan2(x + 0.5 * sc.mask.slit_width - sc.source_y, sc.source_distance);
        out.push_back({lo, hi});
    }
    return out;
}

/// Launch angle for particle `rng`'s stream under the scenario's policy.
inline double draw_launch_angle(const SlitScenario& sc, std::span<const Window> openings, CounterRng& rng)
{
    if (sc.launch.kind == LaunchKind::Cone) {
        const double a = sc.resolved_half_angle();
        return rng.uniform_open(-a, a);
    }
    double total = 0.0;
    for (const auto& w : openings) total += w.hi - w.lo;
    double u = rng.uniform_open(0.0, total);
    for (const auto& w : openings) {
        const double len = w.hi - w.lo;
        if (u < len) return std::clamp(w.lo + u, std::nextafter(w.lo, w.hi), std::nextafter(w.hi, w.lo));
        u -= len;
    }
    const Window& last = openings.back();
    return std::nextafter(last.hi, last.lo);
}

struct SlitParticle {
    RayLaunch launch;
    std::optional<TrajectoryResult> trajectory;  // empty when blocked
};

/// With Handoff::Attractor the start velocity is replaced by the local flow
/// velocity. A start on a node halts immediately.
inline TrajectoryResult handoff_and_integrate(TrajectoryState start, Handoff handoff, const DiffractedField& field,
                                              const OrderingParams& params, const StopSet& stops,
                                              const IntegratorConfig& cfg)
{
    if (handoff == Handoff::Attractor) {
        try {
            start.vel = sample_flow(field, start.pos, params).u;
        } catch (const Error& e) {
            if (e.code() != Errc::NodalPoint) throw;
            TrajectoryResult r;
            r.outcome = Outcome::NodalHalt;
            r.final_state = start;
            return r;
        }
    }
    return integrate(start, field, params, stops, cfg);
}

/// One particle: straight incident leg, then TWOI to the screen.
inline SlitParticle run_slit_particle(const SlitScenario& sc, const DiffractedField& field,
                                      const OrderingParams& params, double theta, const IntegratorConfig& cfg)
{
    SlitParticle p;
    if (sc.launch.premask == PremaskMode::Geometric) {
        p.launch = straight_launch(sc.source_point(), theta, sc.mask, sc.launch.z_start);
    } else {
        const PointSourceField inc = sc.source();
        OrderingParams inc_params = params;
        p.launch = integrated_launch(inc, theta, sc.mask, sc.launch.z_start, inc_params, cfg);
    }
    if (!p.launch.transmitted) return p;
    p.trajectory = handoff_and_integrate(p.launch.start, sc.launch.handoff, field, params, sc.stops(), cfg);
    return p;
}

inline OrderingParams ordering_for(const DiffractedField& field, double gain)
{
    OrderingParams p;
    p.gain = gain;
    p.intensity_ref = field.reference_intensity();
    return p;
}

struct SlitRunResult {
    Histogram screen;
    OutcomeTally outcomes;          // TWOI outcomes of transmitted particles
    std::uint64_t launched = 0;
    std::uint64_t blocked = 0;      // stopped by the mask on the incident leg
    std::int64_t total_steps = 0;
    double half_angle = 0.0;
    std::vector<double> reference;  // bin-averaged |psi|^2 on the screen
    ScaledCurve scaled;
    double pearson_r = 0.0;
    Window envelope{};
    int fringes_histogram = 0;
    int fringes_reference = 0;
    double converged_fraction = 0.0;
};

/// Bin-averaged |psi|^2 over the screen plane.
inline std::vector<double> screen_intensity(const DiffractedField& field, double screen_z, const Histogram& bins)
{
    return bin_averaged([&](double y) { return std::norm(field.sample({y, screen_z}).psi); }, bins);
}

/// Fringe count of a per-bin profile after 3-bin smoothing.
inline int count_profile_fringes(const Histogram& bins, std::span<const double> values, Window window,
                                 double prominence)
{
    std::vector<double> x(bins.bins());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = bins.bin_center(i);
    const auto sm = smooth3(values);
    return count_fringes(x, sm, window, prominence);
}

inline SlitRunResult run_slit_diffraction(const SlitScenario& sc, std::uint64_t seed, unsigned workers = 0,
                                          BlockRunStats* stats = nullptr)
{
    sc.validate();
    const DiffractedField field = sc.field();
    const OrderingParams params = ordering_for(field, sc.gain);
    const std::vector<Window> openings = opening_angles(sc);
    const Histogram empty(sc.screen.lo, sc.screen.hi, sc.screen.bins);

    auto work = [&](std::uint64_t begin, std::uint64_t end) {
        SlitRunResult part;
        part.screen = empty;
        for (std::uint64_t i = begin; i < end; ++i) {
            CounterRng rng(seed, i);
            const double theta = draw_launch_angle(sc, openings, rng);
            const SlitParticle p = run_slit_particle(sc, field, params, theta, sc.integrator);
            ++part.launched;
            if (!p.trajectory) {
                ++part.blocked;
                continue;
            }
            part.outcomes.add(p.trajectory->outcome);
            part.total_steps += p.trajectory->steps_taken;
            if (p.trajectory->outcome == Outcome::ScreenHit) part.screen.add(p.trajectory->hit.y);
        }
        return part;
    };
    auto fold = [](SlitRunResult& acc, const SlitRunResult& part) {
        acc.screen.merge(part.screen);
        acc.outcomes.merge(part.outcomes);
        acc.launched += part.launched;
        acc.blocked += part.blocked;
        acc.total_steps += part.total_steps;
    };
    SlitRunResult init;
    init.screen = empty;
    SlitRunResult r = run_blocks(sc.n_particles, sc.block_size, resolve_workers(workers), std::move(init), work, fold,
                                 [](const SlitRunResult&) { return false; }, stats);

    r.half_angle = sc.resolved_half_angle();
    const std::uint64_t transmitted = r.launched - r.blocked;
    r.converged_fraction =
        transmitted > 0 ? static_cast<double>(r.outcomes[Outcome::ScreenHit]) / static_cast<double>(transmitted) : 0.0;
    require(r.converged_fraction >= 0.9, Errc::NoConvergence, "fewer than 90% of trajectories reached the screen");

    r.reference = screen_intensity(field, sc.screen_distance, r.screen);
    r.scaled = scale_to_match(r.screen, r.reference);
    r.pearson_r = pearson(r.screen, r.reference);
    r.envelope = sc.central_envelope();
    r.fringes_histogram = count_profile_fringes(r.screen, r.screen.as_doubles(), r.envelope, sc.fringe_prominence);
    r.fringes_reference = count_profile_fringes(r.screen, r.reference, r.envelope, sc.fringe_prominence);
    return r;
}

//---------------------------------------------------------------------------//
// Traces
//---------------------------------------------------------------------------//

struct Trace {
    std::vector<StepSample> steps;  // start plus every accepted step
    std::vector<double> flow_gap;   // |vel - u| at each recorded step; NaN on a node
    std::vector<double> y_at;       // y where the path crosses each sample plane; NaN if never
    TrajectoryResult result;
};

/// Integrate one trajectory recording accepted steps and plane crossings.
template <ScalarField Field>
Trace trace_trajectory(const TrajectoryState& s0, const Field& field, const OrderingParams& params,
                       const StopSet& stops, const IntegratorConfig& cfg, std::span<const double> sample_z)
{
    Trace tr;
    tr.y_at.assign(sample_z.size(), std::numeric_limits<double>::quiet_NaN());
    auto observer = [&](const StepRecord& buf) {
        tr.steps.push_back(buf.back());
        double gap = std::numeric_limits<double>::quiet_NaN();
        try {
            gap = norm(buf.back().vel - sample_flow(field, buf.back().pos, params).u);
        } catch (const Error&) {
        }
        tr.flow_gap.push_back(gap);
        if (buf.size() < 2) return;
        const double a = buf[buf.size() - 2].pos.z;
        const double b = buf.back().pos.z;
        for (std::size_t k = 0; k < sample_z.size(); ++k) {
            const double zp = sample_z[k];
            if (!std::isnan(tr.y_at[k])) continue;
            if (b == zp || ((a < zp) != (b < zp) && a != zp)) tr.y_at[k] = screen_crossing(buf, zp).y;
        }
    };
    for (std::size_t k = 0; k < sample_z.size(); ++k)
        if (s0.pos.z == sample_z[k]) tr.y_at[k] = s0.pos.y;
    tr.result = integrate(s0, field, params, stops, cfg, observer);
    return tr;
}

/// Number of trace pairs whose transverse order differs between two sample
/// planes where both are defined. Zero means no trajectories cross.
inline std::uint64_t count_crossing_pairs(std::span<const Trace> traces)
{
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t j = i + 1; j < traces.size(); ++j) {
            int sign = 0;
            bool crossed = false;
            const auto& a = traces[i].y_at;
            const auto& b = traces[j].y_at;
            for (std::size_t k = 0; k < std::min(a.size(), b.size()) && !crossed; ++k) {
                if (std::isnan(a[k]) || std::isnan(b[k])) continue;
                const int s = (a[k] > b[k]) - (a[k] < b[k]);
                if (s == 0) continue;
                if (sign != 0 && s != sign) crossed = true;
                sign = s;
            }
            if (crossed) ++n;
        }
    }
    return n;
}

/// True when traces ordered by starting y stay ordered at every plane.
inline bool sorted_at_every_plane(std::span<const Trace> traces)
{
    std::vector<std::size_t> order(traces.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return traces[a].steps.front().pos.y < traces[b].steps.front().pos.y; });
    if (traces.empty()) return true;
    const std::size_t planes = traces.front().y_at.size();
    for (std::size_t k = 0; k < planes; ++k) {
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t idx : order) {
            const double y = traces[idx].y_at[k];
            if (std::isnan(y)) continue;
            if (y < prev) return false;
            prev = y;
        }
    }
    return true;
}

/// Evenly spaced planes z0, z0 + dz, ..., <= z1.
inline std::vector<double> sample_planes(double z0, double z1, double dz)
{
    require(dz > 0.0 && z1 >= z0, Errc::InvalidArgument, "invalid sample plane range");
    std::vector<double> z;
    const auto n = static_cast<std::size_t>(std::floor((z1 - z0) / dz + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) z.push_back(z0 + static_cast<double>(i) * dz);
    return z;
}

enum class TraceStart { Incident, Attractor };

struct TraceSpec {
    std::size_t count = 50;
    TraceStart start = TraceStart::Attractor;
    double z_end = 30.0;
    double sample_dz = 0.25;
    double edge_margin = 0.25;  // keep start points this far inside an opening
};

/// Start states spread evenly along the openings, placed at z_start on the
/// straight incident ray. Attractor starts use vel = u there.
inline std::vector<TrajectoryState> opening_starts(const SlitScenario& sc, const DiffractedField& field,
                                                   const OrderingParams& params, const TraceSpec& spec)
{
    require(spec.count >= 1 && spec.count <= 100, Errc::InvalidArgument, "trace count must lie in [1, 100]");
    const double w = sc.mask.slit_width - 2.0 * spec.edge_margin;
    require(w > 0.0, Errc::InvalidArgument, "edge margin leaves no room inside the openings");
    std::vector<double> c = sc.mask.slit_centers;
    std::sort(c.begin(), c.end());
    const double total = w * static_cast<double>(c.size());
    std::vector<TrajectoryState> out;
    for (std::size_t i = 0; i < spec.count; ++i) {
        const double s = (static_cast<double>(i) + 0.5) / static_cast<double>(spec.count) * total;
        const auto slit = std::min(c.size() - 1, static_cast<std::size_t>(s / w));
        const double y_mask = c[slit] - 0.5 * w + (s - static_cast<double>(slit) * w);
        const double theta = std::atan2(y_mask - sc.source_y, sc.source_distance);
        TrajectoryState st = straight_launch(sc.source_point(), theta, sc.mask, sc.launch.z_start).start;
        if (spec.start == TraceStart::Attractor) st.vel = sample_flow(field, st.pos, params).u;
        out.push_back(st);
    }
    return out;
}

inline std::vector<Trace> trace_trajectories(const SlitScenario& sc, std::span<const TrajectoryState> starts,
                                             const TraceSpec& spec, const StopSet& stops)
{
    sc.validate();
    require(starts.size() <= 100, Errc::InvalidArgument, "at most 100 traces per request");
    const DiffractedField field = sc.field();
    const OrderingParams params = ordering_for(field, sc.gain);
    const auto planes = sample_planes(std::ceil(sc.launch.z_start / spec.sample_dz) * spec.sample_dz, spec.z_end,
                                      spec.sample_dz);
    std::vector<Trace> out;
    for (const auto& s : starts) out.push_back(trace_trajectory(s, field, params, stops, sc.integrator, planes));
    return out;
}

/// Near-field traces from evenly spaced points in the openings, ending at z_end.
inline std::vector<Trace> trace_trajectories(const SlitScenario& sc, const TraceSpec& spec)
{
    sc.validate();
    const DiffractedField field = sc.field();
    const OrderingParams params = ordering_for(field, sc.gain);
    const auto starts = opening_starts(sc, field, params, spec);
    StopSet stops = sc.stops();
    stops.screen_z = spec.z_end;
    return trace_trajectories(sc, starts, spec, stops);
}

/// Starts at one point with velocity directions every `step_deg` degrees,
/// measured from +z.
inline std::vector<TrajectoryState> fan_starts(Vec2 point, double step_deg)
{
    require(step_deg > 0.0 && step_deg <= 360.0, Errc::InvalidArgument, "fan step must lie in (0, 360]");
    std::vector<TrajectoryState> out;
    const auto n = static_cast<int>(std::floor(360.0 / step_deg + 1e-9));
    for (int i = 0; i < n; ++i) {
        const double a = static_cast<double>(i) * step_deg * kPi / 180.0;
        out.push_back({point, unit_from_angle(a) * kLightSpeed, 0.0});
    }
    return out;
}

/// Angle in degrees between a trace's final velocity and the local u.
template <ScalarField Field>
double alignment_error_deg(const Trace& tr, const Field& field, const OrderingParams& params)
{
    const Vec2 u = sample_flow(field, tr.result.final_state.pos, params).u;
    const Vec2 v = tr.result.final_state.vel;
    const double c = std::clamp(dot(u, v) / (norm(u) * norm(v)), -1.0, 1.0);
    return std::acos(c) * 180.0 / kPi;
}

//---------------------------------------------------------------------------//
// Ghost diffraction
//---------------------------------------------------------------------------//

enum class IdlerMode { Integrated, Geometric };

struct GhostGeometry {
    std::string name = "custom";
    double Z0 = 1000.0;
    double Z1 = 500.0;
    double Z2 = 7000.0;
    double W = 155.0;
    SlitMask mask = SlitMask::uniform(1, 15.0, 0.0);
    double d1_center = 0.0;
    double d1_aperture = 6.0;
    double launch_half_angle = 0.0;  // radians; 0 selects the automatic cone
    KernelKind kernel = KernelKind::Kernel2DAsymptotic;
    DiffractionOptions diffraction;
    double gain = 1.0;
    IntegratorConfig integrator;
    double z_start = 0.5;
    double idler_start = 1.0;  // the idler is integrated from this distance along its ray
    Handoff handoff = Handoff::Attractor;
    IdlerMode idler_mode = IdlerMode::Integrated;
    HistogramSpec idler_bins{-1085.0, 1085.0, 100};
    HistogramSpec signal_bins{-77.5, 77.5, 100};
    std::uint64_t coincidence_target = 5000;
    std::uint64_t pair_budget = 50'000'000;
    std::uint64_t block_size = 4096;

    void validate() const
    {
        mask.validate();
        require(mask.plane_z == 0.0, Errc::InvalidArgument, "the mask plane is z = 0");
        require(Z2 > Z0 && Z0 > 0.0, Errc::InvalidArgument, "geometry requires Z2 > Z0 > 0");
        require(Z1 > 0.0 && W > 0.0 && d1_aperture > 0.0, Errc::InvalidArgument, "Z1, W and the D1 aperture must be positive");
        require(launch_half_angle >= 0.0 && launch_half_angle < 0.5 * kPi, Errc::InvalidArgument,
                "launch half angle must lie in [0, pi/2)");
        require(z_start >= kApertureClearance && z_start < Z1, Errc::InvalidArgument,
                "z_start must lie between the aperture clearance and the signal screen");
        require(idler_start > 0.0 && idler_start < Z2 - Z0, Errc::InvalidArgument, "idler start must lie on its path");
        require(gain >= 0.0, Errc::InvalidArgument, "ordering gain must be non-negative");
        require(idler_bins.hi > idler_bins.lo && idler_bins.bins >= 1 && signal_bins.hi > signal_bins.lo &&
                    signal_bins.bins >= 1,
                Errc::InvalidArgument, "invalid histogram specification");
        require(coincidence_target >= 1 && pair_budget >= 1 && block_size >= 1, Errc::InvalidArgument,
                "coincidence target, pair budget and block size must be positive");
        integrator.validate();
    }

    /// 1.2 times the half angle needed to reach every opening from every
    /// source point.
    double resolved_half_angle() const
    {
        if (launch_half_angle > 0.0) return launch_half_angle;
        const double reach = std::max(std::abs(mask.lowest_edge()), std::abs(mask.highest_edge())) + W;
        return 1.2 * std::atan(reach / Z0);
    }

    bool d1_hit(double y) const { return std::abs(y - d1_center) <= 0.5 * d1_aperture; }

    StopSet signal_stops() const
    {
        StopSet s;
        s.screen_z = Z1;
        s.absorber_z = mask.plane_z;
        s.bounds = Box{-kFarTransverse, kFarTransverse, mask.plane_z - 1.0, Z1 + 1.0};
        return s;
    }

    StopSet idler_stops() const
    {
        StopSet s;
        s.screen_z = -Z2;
        s.bounds = Box{-kFarTransverse, kFarTransverse, -Z2 - 1.0, -Z0};
        return s;
    }
};

struct PairRecord {
    double source_y = 0.0;
    Vec2 launch_dir{};  // signal
    Vec2 idler_dir{};   // exactly -launch_dir
    double mask_y = 0.0;
    bool blocked = false;
    std::optional<TrajectoryResult> signal;  // empty until run (or when blocked)
    std::optional<TrajectoryResult> idler;   // empty = not run
    bool coincidence = false;
};

/// Initial conditions for one pair from its stream.
inline PairRecord sample_pair(const GhostGeometry& g, CounterRng& rng)
{
    PairRecord p;
    p.source_y = rng.uniform_open(-g.W, g.W);
    const double a = g.resolved_half_angle();
    const double theta = rng.uniform_open(-a, a);
    p.launch_dir = unit_from_angle(theta);
    p.idler_dir = -p.launch_dir;
    return p;
}

inline Vec2 crystal_point(const GhostGeometry& g, double source_y) { return {source_y, -g.Z0}; }

/// Straight-ray idler position on the idler screen.
inline double geometric_idler_y(const GhostGeometry& g, const PairRecord& p)
{
    return p.source_y + (g.Z2 - g.Z0) * p.idler_dir.y / (-p.idler_dir.z);
}

/// e-ray field of a pair: the crystal point S diffracted by the mask.
inline DiffractedField signal_field(const GhostGeometry& g, double source_y)
{
    return DiffractedField(PointSourceField{crystal_point(g, source_y), g.kernel}, g.mask, g.diffraction);
}

/// Propagate a sampled pair: signal to its screen, then the idler when the
/// signal lands in D1.
inline void run_pair(const GhostGeometry& g, PairRecord& p)
{
    const Vec2 s = crystal_point(g, p.source_y);
    const double theta = direction_angle(p.launch_dir);
    const RayLaunch launch = straight_launch(s, theta, g.mask, g.z_start);
    p.mask_y = launch.mask_y;
    if (!launch.transmitted) {
        p.blocked = true;
        return;
    }
    const DiffractedField field = signal_field(g, p.source_y);
    const OrderingParams params = ordering_for(field, g.gain);
    p.signal = handoff_and_integrate(launch.start, g.handoff, field, params, g.signal_stops(), g.integrator);
    if (p.signal->outcome != Outcome::ScreenHit || !g.d1_hit(p.signal->hit.y)) return;

    if (g.idler_mode == IdlerMode::Geometric) {
        TrajectoryResult r;
        r.outcome = Outcome::ScreenHit;
        r.hit.y = geometric_idler_y(g, p);
        r.hit.t = (g.Z2 - g.Z0) / (-p.idler_dir.z) / kLightSpeed;
        r.final_state = {{r.hit.y, -g.Z2}, p.idler_dir * kLightSpeed, r.hit.t};
        r.attractor_residual = 0.0;
        p.idler = r;
    } else {
        const PointSourceField oray{s, g.kernel, Propagation::MinusZ};
        const TrajectoryState i0{s + p.idler_dir * g.idler_start, p.idler_dir * kLightSpeed,
                                 g.idler_start / kLightSpeed};
        p.idler = integrate(i0, oray, params, g.idler_stops(), g.integrator);
    }
    p.coincidence = p.idler->outcome == Outcome::ScreenHit;
}

struct GhostRunResult {
    Histogram coincidence;          // idler screen, gated on D1
    Histogram signal;               // signal screen, every signal hit
    Histogram idler;                // idler screen, every pair (straight-ray projection)
    std::uint64_t pairs = 0;
    std::uint64_t blocked = 0;      // signal stopped by the mask on its straight leg
    std::uint64_t absorbed = 0;     // blocked plus TWOI-absorbed signals
    std::uint64_t misses = 0;       // signal reached its screen outside D1
    std::uint64_t coincidences = 0;
    std::uint64_t errors = 0;       // other signal outcomes and failed idlers
    OutcomeTally signal_outcomes;
    OutcomeTally idler_outcomes;
    std::int64_t signal_steps = 0;
    std::uint64_t overshoot = 0;    // coincidences beyond the target
    bool budget_exhausted = false;
    bool low_statistics = false;    // fewer than 10 coincidences per bin
    double half_angle = 0.0;
    BlockRunStats blocks;
    std::vector<double> reference;  // bin-averaged reference ghost curve
    ScaledCurve scaled;
    double pearson_r = 0.0;
    double visibility_signal = 0.0;
    double visibility_coincidence = 0.0;

    double acceptance_fraction() const
    {
        return pairs > 0 ? static_cast<double>(coincidences) / static_cast<double>(pairs) : 0.0;
    }
    bool conserved() const { return pairs == absorbed + misses + coincidences + errors; }
};

/// |psi|^2 on the idler screen from a point source at D1 passing back
/// through the mask. By mirror symmetry this is the field of a source at
/// (d1, -Z1) seen at z = +Z2 with the same transverse coordinate.
inline DiffractedField reference_ghost_field(const GhostGeometry& g)
{
    return DiffractedField(PointSourceField{{g.d1_center, -g.Z1}, g.kernel}, g.mask, g.diffraction);
}

inline std::vector<double> reference_ghost_curve(const GhostGeometry& g, std::span<const double> y)
{
    const DiffractedField f = reference_ghost_field(g);
    std::vector<double> out;
    out.reserve(y.size());
    for (double v : y) out.push_back(std::norm(f.sample({v, g.Z2}).psi));
    return out;
}

inline std::vector<double> reference_ghost_curve(const GhostGeometry& g, const Histogram& bins)
{
    return screen_intensity(reference_ghost_field(g), g.Z2, bins);
}

inline GhostRunResult run_ghost(const GhostGeometry& g, std::uint64_t seed, unsigned workers = 0)
{
    g.validate();
    const Histogram coinc0(g.idler_bins.lo, g.idler_bins.hi, g.idler_bins.bins);
    const Histogram signal0(g.signal_bins.lo, g.signal_bins.hi, g.signal_bins.bins);

    auto fresh = [&] {
        GhostRunResult r;
        r.coincidence = coinc0;
        r.signal = signal0;
        r.idler = coinc0;
        return r;
    };
    auto work = [&](std::uint64_t begin, std::uint64_t end) {
        GhostRunResult part = fresh();
        for (std::uint64_t i = begin; i < end; ++i) {
            CounterRng rng(seed, i);
            PairRecord p = sample_pair(g, rng);
            run_pair(g, p);
            ++part.pairs;
            part.idler.add(geometric_idler_y(g, p));
            if (p.blocked) {
                ++part.blocked;
                ++part.absorbed;
                continue;
            }
            part.signal_outcomes.add(p.signal->outcome);
            part.signal_steps += p.signal->steps_taken;
            if (p.signal->outcome == Outcome::Absorbed) {
                ++part.absorbed;
            } else if (p.signal->outcome != Outcome::ScreenHit) {
                ++part.errors;
            } else {
                part.signal.add(p.signal->hit.y);
                if (!p.idler) {
                    ++part.misses;
                } else {
                    part.idler_outcomes.add(p.idler->outcome);
                    if (p.coincidence) {
                        ++part.coincidences;
                        part.coincidence.add(p.idler->hit.y);
                    } else {
                        ++part.errors;
                    }
                }
            }
        }
        return part;
    };
    auto fold = [](GhostRunResult& acc, const GhostRunResult& part) {
        acc.coincidence.merge(part.coincidence);
        acc.signal.merge(part.signal);
        acc.idler.merge(part.idler);
        acc.pairs += part.pairs;
        acc.blocked += part.blocked;
        acc.absorbed += part.absorbed;
        acc.misses += part.misses;
        acc.coincidences += part.coincidences;
        acc.errors += part.errors;
        acc.signal_outcomes.merge(part.signal_outcomes);
        acc.idler_outcomes.merge(part.idler_outcomes);
        acc.signal_steps += part.signal_steps;
    };
    const std::uint64_t target = g.coincidence_target;
    BlockRunStats stats;
    GhostRunResult r = run_blocks(g.pair_budget, g.block_size, resolve_workers(workers), fresh(), work, fold,
                                  [target](const GhostRunResult& acc) { return acc.coincidences >= target; }, &stats);
    r.blocks = stats;
    r.half_angle = g.resolved_half_angle();
    r.budget_exhausted = r.coincidences < target;
    r.overshoot = r.coincidences > target ? r.coincidences - target : 0;
    r.low_statistics = r.coincidences < 10 * g.idler_bins.bins;
    require(r.coincidences > 0, Errc::EmptyHistogram, "no coincidences within the pair budget");

    r.reference = reference_ghost_curve(g, r.coincidence);
    r.scaled = scale_to_match(r.coincidence, r.reference);
    r.pearson_r = pearson(r.coincidence, r.reference);
    r.visibility_coincidence = visibility(r.coincidence);
    if (r.signal.in_range() > 0) r.visibility_signal = visibility(r.signal);
    return r;
}

/// Signal traces of pairs that pass the mask, from z_start to z_end.
inline std::vector<Trace> ghost_signal_traces(const GhostGeometry& g, std::uint64_t seed, std::size_t count,
                                              double z_end, double sample_dz)
{
    g.validate();
    require(count >= 1 && count <= 100, Errc::InvalidArgument, "trace count must lie in [1, 100]");
    const auto planes = sample_planes(std::ceil(g.z_start / sample_dz) * sample_dz, z_end, sample_dz);
    std::vector<Trace> out;
    for (std::uint64_t i = 0; out.size() < count && i < g.pair_budget; ++i) {
        CounterRng rng(seed, i);
        const PairRecord p = sample_pair(g, rng);
        const RayLaunch launch =
            straight_launch(crystal_point(g, p.source_y), direction_angle(p.launch_dir), g.mask, g.z_start);
        if (!launch.transmitted) continue;
        const DiffractedField field = signal_field(g, p.source_y);
        StopSet stops = g.signal_stops();
        stops.screen_z = z_end;
        TrajectoryState start = launch.start;
        const OrderingParams params = ordering_for(field, g.gain);
        if (g.handoff == Handoff::Attractor) {
            try {
                start.vel = sample_flow(field, start.pos, params).u;
            } catch (const Error& e) {
                if (e.code() != Errc::NodalPoint) throw;
                continue;
            }
        }
        out.push_back(trace_trajectory(start, field, params, stops, g.integrator, planes));
    }
    return out;
}

//---------------------------------------------------------------------------//
// Presets
//---------------------------------------------------------------------------//

/// Single slit of width 10 with launches fanned every 20 degrees from
/// (0, 10), ten wavelengths past the mask.
inline SlitScenario fig2_preset()
{
    SlitScenario s;
    s.name = "fig2";
    s.mask = SlitMask::uniform(1, 10.0, 0.0);
    s.screen = {-300.0, 300.0, 100};
    return s;
}

inline SlitScenario fig3_preset()
{
    SlitScenario s;
    s.name = "fig3";
    s.mask = SlitMask::uniform(1, 8.0, 0.0);
    s.screen = {-300.0, 300.0, 100};
    return s;
}

inline SlitScenario fig4_preset()
{
    SlitScenario s;
    s.name = "fig4";
    s.mask = SlitMask::uniform(2, 5.0, 25.0);
    s.screen = {-250.0, 250.0, 100};
    return s;
}

inline SlitScenario fig5_preset()
{
    SlitScenario s;
    s.name = "fig5";
    s.mask = SlitMask::uniform(3, 5.0, 10.0);
    s.screen = {-250.0, 250.0, 100};
    return s;
}

/// Near-field three-slit mask for trajectory traces.
inline SlitScenario fig6_preset()
{
    SlitScenario s;
    s.name = "fig6";
    s.mask = SlitMask::uniform(3, 5.0, 7.0);
    s.screen = {-250.0, 250.0, 100};
    return s;
}

inline GhostGeometry fig8_ghost_single_preset()
{
    GhostGeometry g;
    g.name = "fig8_ghost_single";
    g.mask = SlitMask::uniform(1, 15.0, 0.0);
    g.W = 155.0;
    g.d1_aperture = 6.0;
    g.integrator.rel_tol = 1e-6;
    g.idler_bins = {-g.W * g.Z2 / g.Z0, g.W * g.Z2 / g.Z0, 100};
    g.signal_bins = {-g.W * g.Z1 / g.Z0, g.W * g.Z1 / g.Z0, 100};
    return g;
}

inline GhostGeometry fig9_ghost_triple_preset()
{
    GhostGeometry g;
    g.name = "fig9_ghost_triple";
    g.mask = SlitMask::uniform(3, 5.0, 7.0);
    g.W = 215.0;
    g.d1_aperture = 10.0;
    g.integrator.rel_tol = 1e-6;
    g.idler_bins = {-g.W * g.Z2 / g.Z0, g.W * g.Z2 / g.Z0, 100};
    g.signal_bins = {-g.W * g.Z1 / g.Z0, g.W * g.Z1 / g.Z0, 100};
    return g;
}

inline constexpr std::array<std::string_view, 5> kSlitPresets = {"fig2", "fig3", "fig4", "fig5", "fig6"};
inline constexpr std::array<std::string_view, 2> kGhostPresets = {"fig8_ghost_single", "fig9_ghost_triple"};

inline SlitScenario slit_preset(std::string_view name)
{
    if (name == "fig2") return fig2_preset();
    if (name == "fig3") return fig3_preset();
    if (name == "fig4") return fig4_preset();
    if (name == "fig5") return fig5_preset();
    if (name == "fig6") return fig6_preset();
    throw Error(Errc::ConfigError, "unknown slit preset '" + std::string(name) + "'");
}

inline GhostGeometry ghost_preset(std::string_view name)
{
    if (name == "fig8_ghost_single") return fig8_ghost_single_preset();
    if (name == "fig9_ghost_triple") return fig9_ghost_triple_preset();
    throw Error(Errc::ConfigError, "unknown ghost preset '" + std::string(name) + "'");
}

} // namespace twoi
