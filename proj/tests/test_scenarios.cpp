// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "twoi/scenarios.hpp"

namespace twoi {
namespace {

GhostGeometry quick_ghost()
{
    GhostGeometry g = fig8_ghost_single_preset();
    g.integrator.rel_tol = 1e-6;
    return g;
}

TEST(Pairs, SampleContracts)
{
    const GhostGeometry g = fig8_ghost_single_preset();
    const double a = g.resolved_half_angle();
    std::vector<double> ys, thetas;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        CounterRng rng(9, i);
        const PairRecord p = sample_pair(g, rng);
        ASSERT_GT(p.source_y, -g.W);
        ASSERT_LT(p.source_y, g.W);
        ASSERT_NEAR(norm(p.launch_dir), 1.0, 1e-15);
        ASSERT_EQ(p.idler_dir.y, -p.launch_dir.y);
        ASSERT_EQ(p.idler_dir.z, -p.launch_dir.z);
        const double th = direction_angle(p.launch_dir);
        ASSERT_LE(std::abs(th), a + 1e-15);
        ys.push_back(p.source_y);
        thetas.push_back(th);
    }
    EXPECT_LT(ks_uniform(ys, -g.W, g.W), ks_critical_1pct(ys.size()));
    EXPECT_LT(ks_uniform(thetas, -a, a), ks_critical_1pct(thetas.size()));
}

TEST(Pairs, HalfAngleCoversMaskFromEverySource)
{
    for (const GhostGeometry& g : {fig8_ghost_single_preset(), fig9_ghost_triple_preset()}) {
        const double a = g.resolved_half_angle();
        for (double s : {-g.W, g.W})
            for (double edge : {g.mask.lowest_edge(), g.mask.highest_edge()})
                EXPECT_LT(std::abs(std::atan2(edge - s, g.Z0)), a);
    }
}

TEST(Pairs, BlockedLaunchHasNoSignal)
{
    const GhostGeometry g = quick_ghost();
    PairRecord p;
    p.source_y = 0.0;
    p.launch_dir = unit_from_angle(0.05);  // reaches the mask at y = 50
    p.idler_dir = -p.launch_dir;
    run_pair(g, p);
    EXPECT_TRUE(p.blocked);
    EXPECT_FALSE(p.signal.has_value());
    EXPECT_FALSE(p.idler.has_value());
    EXPECT_FALSE(p.coincidence);
}

TEST(Pairs, D1GateIsInclusive)
{
    GhostGeometry g;
    g.d1_center = 0.0;
    g.d1_aperture = 6.0;
    EXPECT_TRUE(g.d1_hit(3.0));
    EXPECT_TRUE(g.d1_hit(-3.0));
    EXPECT_FALSE(g.d1_hit(std::nextafter(3.0, 4.0)));
    EXPECT_FALSE(g.d1_hit(std::nextafter(-3.0, -4.0)));
    g.d1_center = 20.0;
    EXPECT_TRUE(g.d1_hit(23.0));
    EXPECT_FALSE(g.d1_hit(23.5));
}

TEST(Launch, StraightLegGeometry)
{
    const SlitMask mask = SlitMask::uniform(1, 8.0, 0.0);
    const RayLaunch in = straight_launch({0, -500}, std::atan(3.0 / 500.0), mask, 0.5);
    EXPECT_TRUE(in.transmitted);
    EXPECT_NEAR(in.mask_y, 3.0, 1e-12);
    EXPECT_NEAR(in.start.pos.z, 0.5, 1e-12);
    EXPECT_NEAR(in.start.pos.y, 3.0 * 500.5 / 500.0, 1e-12);
    const RayLaunch out = straight_launch({0, -500}, std::atan(4.5 / 500.0), mask, 0.5);
    EXPECT_FALSE(out.transmitted);
    EXPECT_TRUE(straight_launch({0, -500}, std::atan(3.999 / 500.0), mask, 0.5).transmitted);
    EXPECT_THROW(straight_launch({0, -500}, 0.6 * kPi, mask, 0.5), Error);
}

TEST(Launch, IntegratedLegMatchesStraightRay)
{
    const SlitScenario sc = fig4_preset();
    const PointSourceField inc = sc.source();
    OrderingParams p;
    p.intensity_ref = std::norm(inc.sample({0, 0}).psi);
    for (double y_mask : {-14.0, -10.5, 11.0, 13.9}) {
        const double theta = std::atan2(y_mask, sc.source_distance);
        const RayLaunch a = straight_launch(sc.source_point(), theta, sc.mask, sc.launch.z_start);
        const RayLaunch b = integrated_launch(inc, theta, sc.mask, sc.launch.z_start, p, sc.integrator);
        EXPECT_EQ(a.transmitted, b.transmitted);
        EXPECT_NEAR(a.mask_y, b.mask_y, 1e-8);
        EXPECT_NEAR(a.start.pos.y, b.start.pos.y, 1e-8);
        EXPECT_NEAR(a.start.pos.z, b.start.pos.z, 1e-8);
    }
}

TEST(Ghost, IntegratedIdlerMatchesStraightRay)
{
    const GhostGeometry g = fig8_ghost_single_preset();
    for (std::uint64_t i = 0; i < 20; ++i) {
        CounterRng rng(5, i);
        const PairRecord p = sample_pair(g, rng);
        const Vec2 s = crystal_point(g, p.source_y);
        const PointSourceField oray{s, g.kernel, Propagation::MinusZ};
        const OrderingParams params = ordering_for(signal_field(g, p.source_y), g.gain);
        const TrajectoryState i0{s + p.idler_dir * g.idler_start, p.idler_dir * kLightSpeed, g.idler_start};
        const TrajectoryResult r = integrate(i0, oray, params, g.idler_stops(), g.integrator);
        ASSERT_EQ(r.outcome, Outcome::ScreenHit);
        EXPECT_NEAR(r.hit.y, geometric_idler_y(g, p), 1e-6);
    }
}

TEST(Ghost, ReferenceCurveShape)
{
    const GhostGeometry g = fig8_ghost_single_preset();
    std::vector<double> y;
    for (int i = -400; i <= 400; ++i) y.push_back(2.5 * i);
    const auto ref = reference_ghost_curve(g, y);
    const std::size_t mid = 400;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ASSERT_NEAR(ref[i], ref[y.size() - 1 - i], 1e-9 * ref[mid]);
        ASSERT_LE(ref[i], ref[mid]);
    }

    GhostGeometry shifted = g;
    shifted.d1_center = 20.0;
    const auto moved = reference_ghost_curve(shifted, y);
    const double com = center_of_mass(y, moved);
    // A detector displaced by d1 images to -d1 Z2 / Z1 on the idler screen.
    EXPECT_LT(com, 0.0);
    EXPECT_NEAR(com, -20.0 * g.Z2 / g.Z1, 0.15 * 20.0 * g.Z2 / g.Z1);
}

TEST(Ghost, SmallRunConservationAndDeterminism)
{
    GhostGeometry g = quick_ghost();
    g.coincidence_target = 12;
    g.block_size = 2048;
    const GhostRunResult a = run_ghost(g, 17, 1);
    const GhostRunResult b = run_ghost(g, 17, 3);
    EXPECT_TRUE(a.conserved());
    EXPECT_GE(a.coincidences, 12u);
    EXPECT_FALSE(a.budget_exhausted);
    EXPECT_TRUE(a.low_statistics);
    EXPECT_EQ(a.pairs % g.block_size, 0u);
    EXPECT_EQ(a.pairs, b.pairs);
    EXPECT_EQ(a.coincidences, b.coincidences);
    EXPECT_EQ(a.signal_steps, b.signal_steps);
    EXPECT_EQ(a.signal_outcomes, b.signal_outcomes);
    for (std::size_t i = 0; i < a.coincidence.bins(); ++i) ASSERT_EQ(a.coincidence.count(i), b.coincidence.count(i));
    for (std::size_t i = 0; i < a.signal.bins(); ++i) ASSERT_EQ(a.signal.count(i), b.signal.count(i));
    EXPECT_EQ(a.idler.in_range() + a.idler.underflow() + a.idler.overflow(), a.pairs);
}

TEST(Ghost, BudgetExhaustionIsReported)
{
    GhostGeometry g = quick_ghost();
    g.coincidence_target = 1000;
    g.pair_budget = 3000;
    g.block_size = 1000;
    try {
        const GhostRunResult r = run_ghost(g, 3, 1);
        EXPECT_TRUE(r.budget_exhausted);
        EXPECT_EQ(r.pairs, 3000u);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::EmptyHistogram);
    }
}

TEST(Ghost, SignalTracesDoNotCross)
{
    const GhostGeometry g = quick_ghost();
    const auto traces = ghost_signal_traces(g, 1, 12, 20.0, 0.5);
    ASSERT_EQ(traces.size(), 12u);
    for (const auto& t : traces) EXPECT_GT(t.steps.size(), 1u);
}

TEST(Traces, Fig6OpeningsAreSorted)
{
    const SlitScenario sc = fig6_preset();
    TraceSpec spec;
    spec.count = 45;
    const auto traces = trace_trajectories(sc, spec);
    ASSERT_EQ(traces.size(), 45u);
    EXPECT_EQ(count_crossing_pairs(traces), 0u);
    EXPECT_TRUE(sorted_at_every_plane(traces));
    std::size_t reached = 0;
    for (const auto& t : traces) reached += t.result.outcome == Outcome::ScreenHit;
    EXPECT_GE(reached, 40u);
}

TEST(Traces, CrossingCountDetectsSwaps)
{
    Trace a, b;
    a.steps.push_back({});
    b.steps.push_back({});
    a.y_at = {0.0, 1.0, 2.0};
    b.y_at = {1.0, 1.5, 1.0};
    const std::vector<Trace> v{a, b};
    EXPECT_EQ(count_crossing_pairs(v), 1u);
    EXPECT_FALSE(sorted_at_every_plane(v));
}

TEST(Traces, Fig2FanAlignsWithFlow)
{
    const SlitScenario sc = fig2_preset();
    const auto starts = fan_starts({0.0, 10.0}, 20.0);
    ASSERT_EQ(starts.size(), 18u);
    TraceSpec spec;
    StopSet stops = sc.stops();
    stops.screen_z = spec.z_end;
    const auto traces = trace_trajectories(sc, starts, spec, stops);
    const DiffractedField field = sc.field();
    const OrderingParams params = ordering_for(field, sc.gain);
    std::size_t reached = 0;
    for (const auto& t : traces) {
        if (t.result.outcome != Outcome::ScreenHit) continue;
        ++reached;
        EXPECT_LT(alignment_error_deg(t, field, params), 1.0);
    }
    EXPECT_GE(reached, 15u);
}

TEST(Slits, OpeningAnglesAndLaunchDraws)
{
    SlitScenario sc = fig5_preset();
    const auto w = opening_angles(sc);
    ASSERT_EQ(w.size(), 3u);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        CounterRng rng(2, i);
        const double th = draw_launch_angle(sc, w, rng);
        ASSERT_TRUE(straight_launch(sc.source_point(), th, sc.mask, sc.launch.z_start).transmitted);
    }
    sc.launch.kind = LaunchKind::Cone;
    const double a = sc.resolved_half_angle();
    for (std::uint64_t i = 0; i < 2000; ++i) {
        CounterRng rng(2, i);
        const double th = draw_launch_angle(sc, w, rng);
        ASSERT_GT(th, -a);
        ASSERT_LT(th, a);
    }
}

TEST(Slits, SmallRunIsDeterministicAcrossWorkers)
{
    SlitScenario sc = fig4_preset();
    sc.n_particles = 300;
    sc.block_size = 64;
    const SlitRunResult a = run_slit_diffraction(sc, 4, 1);
    const SlitRunResult b = run_slit_diffraction(sc, 4, 3);
    EXPECT_EQ(a.launched, 300u);
    EXPECT_EQ(a.blocked, 0u);
    EXPECT_EQ(a.outcomes, b.outcomes);
    EXPECT_EQ(a.total_steps, b.total_steps);
    for (std::size_t i = 0; i < a.screen.bins(); ++i) ASSERT_EQ(a.screen.count(i), b.screen.count(i));
}

TEST(Slits, ConeLaunchCountsBlockedRays)
{
    SlitScenario sc = fig3_preset();
    sc.launch.kind = LaunchKind::Cone;
    sc.n_particles = 200;
    const SlitRunResult r = run_slit_diffraction(sc, 1, 1);
    EXPECT_GT(r.blocked, 0u);
    EXPECT_EQ(r.launched, 200u);
    EXPECT_EQ(r.outcomes.total(), r.launched - r.blocked);
}

TEST(Presets, ValidateAndLookup)
{
    for (auto name : kSlitPresets) EXPECT_NO_THROW(slit_preset(name).validate()) << name;
    for (auto name : kGhostPresets) EXPECT_NO_THROW(ghost_preset(name).validate()) << name;
    try {
        slit_preset("fig7");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::ConfigError);
    }
    EXPECT_THROW(ghost_preset("fig3"), Error);
}

TEST(Presets, InvalidScenarioRejected)
{
    SlitScenario sc = fig3_preset();
    sc.launch.z_start = 0.01;
    EXPECT_THROW(sc.validate(), Error);
    sc = fig3_preset();
    sc.launch.half_angle = 0.001;  // does not cover the slit
    EXPECT_THROW(sc.validate(), Error);
    GhostGeometry g = fig8_ghost_single_preset();
    g.Z2 = 500.0;
    EXPECT_THROW(g.validate(), Error);
}

} // namespace
} // namespace twoi
