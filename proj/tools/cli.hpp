// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// twoi-sim command line. Settings resolve in this order, later winning:
// preset defaults, $TWOI_WORKERS, --config file, --set overrides, flags.
//
// Exit status: 0 success, 1 run failure, 2 configuration error (nothing
// written), 3 I/O error.
#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "output.hpp"
#include "twoi/config.hpp"
#include "twoi/scenarios.hpp"
#include "twoi/variantgen.hpp"

namespace twoi::cli {

using json = nlohmann::ordered_json;

struct Flags {
    std::string preset;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::uint64_t n = 0;
    std::uint64_t coincidences = 0;
    unsigned workers = 0;
    bool emit_traces = false;
    bool dump_config = false;
    std::vector<std::string> sets;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* n_opt = nullptr;
    CLI::Option* coinc_opt = nullptr;
    CLI::Option* workers_opt = nullptr;
    CLI::Option* out_opt = nullptr;
};

inline json outcomes_json(const OutcomeTally& t)
{
    json j = json::object();
    for (Outcome o : kAllOutcomes) j[std::string(to_string(o))] = t[o];
    return j;
}

inline std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::ConfigError, "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Resolve presets, files and flags into a validated configuration.
inline RunConfig resolve(RunKind kind, const Flags& f)
{
    std::optional<ConfigDoc> file;
    if (!f.config.empty()) file = ConfigDoc::parse(read_file(f.config));
    // Without --preset, a config file's [run] preset picks the defaults.
    std::string preset = f.preset;
    if (preset.empty() && file) preset = file->get("run", "preset").value_or("");
    RunConfig rc = preset_config(kind, preset);
    if (const char* env = std::getenv("TWOI_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) rc.workers = static_cast<unsigned>(v);
    }
    if (file) apply_config(*file, rc);
    if (!f.sets.empty()) {
        ConfigDoc overrides;
        for (const std::string& s : f.sets) {
            const auto dot = s.find('.');
            const auto eq = s.find('=');
            if (dot == std::string::npos || eq == std::string::npos || dot > eq)
                throw Error(Errc::ConfigError, "--set expects section.key=value, got '" + s + "'");
            overrides.set(s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
        }
        apply_config(overrides, rc);
    }
    if (f.seed_opt->count()) rc.seed = f.seed;
    if (f.workers_opt->count()) rc.workers = f.workers;
    if (f.out_opt->count()) rc.out_dir = f.out;
    if (f.emit_traces) rc.emit_traces = true;
    if (f.n_opt->count()) {
        if (rc.variant_scenario) rc.variant.n = f.n;
        else if (kind == RunKind::Trace) rc.trace.spec.count = f.n;
        else if (rc.ghost_scenario) rc.ghost.pair_budget = f.n;
        else rc.slit.n_particles = f.n;
    }
    if (f.coinc_opt && f.coinc_opt->count()) rc.ghost.coincidence_target = f.coincidences;
    validate_config(rc);
    return rc;
}

inline json base_metadata(const RunConfig& rc, const ConfigDoc& doc)
{
    return {{"schema_version", out::kSchemaVersion},
            {"tool", "twoi-sim"},
            {"version", out::version_string()},
            {"command", std::string(cfg::format_enum(rc.kind, kRunKindNames))},
            {"preset", rc.preset},
            {"seed", rc.seed},
            {"workers", resolve_workers(rc.workers)},
            {"config", out::config_json(doc)},
            {"status", "running"}};
}

/// Columns: trace, step, t, y, z, vel_y, vel_z, flow_gap.
inline std::string traces_csv(std::span<const Trace> traces)
{
    std::string s = "trace,step,t,y,z,vel_y,vel_z,flow_gap\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const Trace& tr = traces[i];
        for (std::size_t k = 0; k < tr.steps.size(); ++k) {
            const StepSample& st = tr.steps[k];
            s += std::to_string(i) + ',' + std::to_string(k) + ',' + out::num(st.t) + ',' + out::num(st.pos.y) + ',' +
                 out::num(st.pos.z) + ',' + out::num(st.vel.y) + ',' + out::num(st.vel.z) + ',' +
                 out::num(k < tr.flow_gap.size() ? tr.flow_gap[k] : std::numeric_limits<double>::quiet_NaN()) + '\n';
        }
    }
    return s;
}

/// Columns: trace, z, y; one row per trace and sample plane it reached.
inline std::string crossings_csv(std::span<const Trace> traces, std::span<const double> planes)
{
    std::string s = "trace,z,y\n";
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t k = 0; k < planes.size() && k < traces[i].y_at.size(); ++k)
            if (!std::isnan(traces[i].y_at[k]))
                s += std::to_string(i) + ',' + out::num(planes[k]) + ',' + out::num(traces[i].y_at[k]) + '\n';
    return s;
}

inline json trace_metrics(std::span<const Trace> traces)
{
    OutcomeTally tally;
    double worst_gap = 0.0;
    std::uint64_t steps = 0;
    for (const Trace& tr : traces) {
        tally.add(tr.result.outcome);
        steps += static_cast<std::uint64_t>(tr.result.steps_taken);
        if (!tr.flow_gap.empty() && std::isfinite(tr.flow_gap.back()))
            worst_gap = std::max(worst_gap, tr.flow_gap.back());
    }
    return {{"traces", traces.size()},
            {"crossing_pairs", count_crossing_pairs(traces)},
            {"sorted_at_every_plane", sorted_at_every_plane(traces)},
            {"final_flow_gap_max", worst_gap},
            {"accepted_steps", steps},
            {"outcomes", outcomes_json(tally)}};
}

inline json run_variant(const RunConfig& rc, out::RunOutput& o)
{
    const VariantRun& v = rc.variant;
    const VariantEnsemble e = run_variant_ensemble(v.spec, v.n, rc.seed, v.bins, rc.workers, v.block_size);
    const std::vector<double> ref = bin_averaged(v.spec.target_density, e.histogram);
    const ScaledCurve sc = scale_to_match(e.histogram, ref);
    o.write("histogram.csv", out::histogram_csv(e.histogram, ref, sc.curve));
    return {{"counts",
             {{"particles", v.n},
              {"converged", e.converged},
              {"escaped", e.escaped},
              {"no_convergence", e.no_convergence},
              {"accepted_steps", e.total_steps}}},
            {"histogram", out::histogram_summary(e.histogram)},
            {"metrics",
             {{"tv_distance", total_variation(e.histogram, ref)},
              {"pearson_r", pearson(e.histogram, ref)},
              {"scale", sc.scale},
              {"max_relative_residual", e.max_relative_residual}}}};
}

inline std::vector<double> trace_planes(double z_start, const TraceSpec& spec)
{
    return sample_planes(std::ceil(z_start / spec.sample_dz) * spec.sample_dz, spec.z_end, spec.sample_dz);
}

inline json run_slits(const RunConfig& rc, out::RunOutput& o)
{
    const SlitScenario& sc = rc.slit;
    BlockRunStats stats;
    const SlitRunResult r = run_slit_diffraction(sc, rc.seed, rc.workers, &stats);
    o.write("screen.csv", out::histogram_csv(r.screen, r.reference, r.scaled.curve));
    json j = {{"counts",
               {{"launched", r.launched},
                {"blocked", r.blocked},
                {"accepted_steps", r.total_steps},
                {"outcomes", outcomes_json(r.outcomes)}}},
              {"histogram", out::histogram_summary(r.screen)},
              {"metrics",
               {{"pearson_r", r.pearson_r},
                {"scale", r.scaled.scale},
                {"fringes_histogram", r.fringes_histogram},
                {"fringes_reference", r.fringes_reference},
                {"envelope", {r.envelope.lo, r.envelope.hi}},
                {"converged_fraction", r.converged_fraction},
                {"launch_half_angle", r.half_angle}}}};
    if (rc.emit_traces) {
        TraceSpec spec;
        const auto traces = trace_trajectories(sc, spec);
        o.write("traces.csv", traces_csv(traces));
        j["traces"] = trace_metrics(traces);
    }
    return j;
}

inline json run_ghost_cmd(const RunConfig& rc, out::RunOutput& o)
{
    const GhostGeometry& g = rc.ghost;
    const GhostRunResult r = run_ghost(g, rc.seed, rc.workers);
    o.write("coincidence.csv", out::histogram_csv(r.coincidence, r.reference, r.scaled.curve));
    o.write("signal.csv", out::histogram_csv(r.signal));
    o.write("idler.csv", out::histogram_csv(r.idler));
    o.write("reference.csv", out::curve_csv(r.coincidence, r.reference));
    if (r.low_statistics)
        std::cerr << "warning: " << r.coincidences << " coincidences is fewer than 10 per bin\n";
    json j = {{"counts",
               {{"pairs", r.pairs},
                {"blocked", r.blocked},
                {"absorbed", r.absorbed},
                {"misses", r.misses},
                {"coincidences", r.coincidences},
                {"errors", r.errors},
                {"overshoot", r.overshoot},
                {"budget_exhausted", r.budget_exhausted},
                {"low_statistics", r.low_statistics},
                {"conserved", r.conserved()},
                {"signal_steps", r.signal_steps},
                {"signal_outcomes", outcomes_json(r.signal_outcomes)},
                {"idler_outcomes", outcomes_json(r.idler_outcomes)}}},
              {"histograms",
               {{"coincidence", out::histogram_summary(r.coincidence)},
                {"signal", out::histogram_summary(r.signal)},
                {"idler", out::histogram_summary(r.idler)}}},
              {"metrics",
               {{"pearson_r", r.pearson_r},
                {"scale", r.scaled.scale},
                {"acceptance_fraction", r.acceptance_fraction()},
                {"visibility_signal", r.visibility_signal},
                {"visibility_coincidence", r.visibility_coincidence},
                {"center_of_mass", center_of_mass(r.coincidence)},
                {"launch_half_angle", r.half_angle}}}};
    if (rc.emit_traces) {
        const TraceSpec spec;
        const auto traces = ghost_signal_traces(g, rc.seed, 100, spec.z_end, spec.sample_dz);
        o.write("signal_traces.csv", traces_csv(traces));
        j["traces"] = trace_metrics(traces);
    }
    return j;
}

inline json run_trace(const RunConfig& rc, out::RunOutput& o)
{
    const TraceSpec& spec = rc.trace.spec;
    std::vector<Trace> traces;
    std::vector<double> planes;
    switch (rc.trace.mode) {
    case TraceMode::Openings:
        traces = trace_trajectories(rc.slit, spec);
        planes = trace_planes(rc.slit.launch.z_start, spec);
        break;
    case TraceMode::Fan: {
        const auto starts = fan_starts(rc.trace.fan_point, rc.trace.fan_step_deg);
        StopSet stops = rc.slit.stops();
        stops.screen_z = spec.z_end;
        traces = trace_trajectories(rc.slit, starts, spec, stops);
        planes = trace_planes(rc.slit.launch.z_start, spec);
        break;
    }
    case TraceMode::Ghost:
        traces = ghost_signal_traces(rc.ghost, rc.seed, spec.count, spec.z_end, spec.sample_dz);
        planes = trace_planes(rc.ghost.z_start, spec);
        break;
    }
    o.write("traces.csv", traces_csv(traces));
    o.write("crossings.csv", crossings_csv(traces, planes));
    return {{"metrics", trace_metrics(traces)}};
}

inline json run_reference(const RunConfig& rc, out::RunOutput& o)
{
    if (rc.variant_scenario) {
        const Histogram bins(rc.variant.bins.lo, rc.variant.bins.hi, rc.variant.bins.bins);
        o.write("reference.csv", out::curve_csv(bins, bin_averaged(rc.variant.spec.target_density, bins)));
        return {{"metrics", {{"bins", bins.bins()}}}};
    }
    if (rc.ghost_scenario) {
        const Histogram bins(rc.ghost.idler_bins.lo, rc.ghost.idler_bins.hi, rc.ghost.idler_bins.bins);
        const auto ref = reference_ghost_curve(rc.ghost, bins);
        o.write("reference.csv", out::curve_csv(bins, ref));
        std::vector<double> x(bins.bins());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = bins.bin_center(i);
        return {{"metrics", {{"bins", bins.bins()}, {"center_of_mass", center_of_mass(x, ref)}}}};
    }
    const SlitScenario& sc = rc.slit;
    const Histogram bins(sc.screen.lo, sc.screen.hi, sc.screen.bins);
    const auto ref = screen_intensity(sc.field(), sc.screen_distance, bins);
    o.write("reference.csv", out::curve_csv(bins, ref));
    const Window env = sc.central_envelope();
    return {{"metrics",
             {{"bins", bins.bins()},
              {"envelope", {env.lo, env.hi}},
              {"fringes_reference", count_profile_fringes(bins, ref, env, sc.fringe_prominence)}}}};
}

inline json execute(const RunConfig& rc, out::RunOutput& o)
{
    switch (rc.kind) {
    case RunKind::Variant1D: return run_variant(rc, o);
    case RunKind::Slits: return run_slits(rc, o);
    case RunKind::Ghost: return run_ghost_cmd(rc, o);
    case RunKind::Trace: return run_trace(rc, o);
    case RunKind::Reference: return run_reference(rc, o);
    }
    return {};
}

inline int exit_code(Errc code)
{
    switch (code) {
    case Errc::ConfigError: return 2;
    case Errc::IoError: return 3;
    default: return 1;
    }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Trajectory-wave ordering interaction Monte Carlo simulator", "twoi-sim"};
    app.set_version_flag("--version", out::version_string());
    app.require_subcommand(1);

    Flags flags;
    struct Sub {
        RunKind kind;
        CLI::App* app;
    };
    std::vector<Sub> subs;
    auto add = [&](RunKind kind, const char* help) {
        const std::string name(cfg::format_enum(kind, kRunKindNames));
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("--preset", flags.preset, "Named preset");
        s->add_option("--config", flags.config, "Sectioned key = value config file");
        s->add_option("--set", flags.sets, "Override one setting, section.key=value (repeatable)");
        flags.seed_opt = s->add_option("--seed", flags.seed, "64-bit seed");
        flags.workers_opt = s->add_option("--workers", flags.workers, "Worker threads (0 = auto)");
        flags.out_opt = s->add_option("--out", flags.out, "Output directory");
        flags.n_opt = s->add_option("-n,--count", flags.n,
                                    "Particles (variant1d, slits), pair budget (ghost) or trace count (trace)");
        if (kind == RunKind::Ghost)
            flags.coinc_opt = s->add_option("--coincidences", flags.coincidences, "Coincidence target");
        if (kind == RunKind::Slits || kind == RunKind::Ghost)
            s->add_flag("--emit-traces", flags.emit_traces, "Also write trajectory traces");
        s->add_flag("--dump-config", flags.dump_config, "Print the resolved config and exit");
        subs.push_back({kind, s});
    };
    add(RunKind::Variant1D, "Attractor-limit random variants of a 1-D density");
    add(RunKind::Slits, "Slit diffraction screen histogram");
    add(RunKind::Ghost, "Coincidence-gated two-photon ghost diffraction");
    add(RunKind::Trace, "Near-field trajectory traces");
    add(RunKind::Reference, "Reference intensity curve only");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << out::error_json(Error(Errc::ConfigError, e.what())) << '\n';
        return 2;
    }

    // Only the selected subcommand's options matter; rebind them.
    const Sub* chosen = nullptr;
    for (const Sub& s : subs)
        if (s.app->parsed()) chosen = &s;
    flags.seed_opt = chosen->app->get_option("--seed");
    flags.workers_opt = chosen->app->get_option("--workers");
    flags.out_opt = chosen->app->get_option("--out");
    flags.n_opt = chosen->app->get_option("--count");
    flags.coinc_opt = chosen->kind == RunKind::Ghost ? chosen->app->get_option("--coincidences") : nullptr;

    RunConfig rc;
    ConfigDoc doc;
    try {
        rc = resolve(chosen->kind, flags);
        doc = dump_config(rc);
    } catch (const Error& e) {
        err << out::error_json(e) << '\n';
        return exit_code(e.code());
    }
    if (flags.dump_config) {
        out << doc.dump();
        return 0;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();
        out::RunOutput o(rc.out_dir, base_metadata(rc, doc));
        json results = execute(rc, o);
        results["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.finish(std::move(results));
        out << "wrote " << o.dir().string() << '\n';
        return 0;
    } catch (const Error& e) {
        err << out::error_json(e) << '\n';
        return exit_code(e.code());
    } catch (const std::exception& e) {
        err << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
}

} // namespace twoi::cli
