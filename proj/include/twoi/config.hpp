// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: a sectioned key-value text format
//
//     # comment
//     [section]
//     key = value
//
// and its mapping onto the scenario structures. Unknown sections or keys and
// malformed values raise ConfigError.
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "twoi/error.hpp"
#include "twoi/scenarios.hpp"
#include "twoi/variantgen.hpp"

namespace twoi {

class ConfigDoc {
  public:
    using Entries = std::vector<std::pair<std::string, std::string>>;

    static ConfigDoc parse(std::string_view text)
    {
        ConfigDoc doc;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = std::min(text.find('\n', pos), text.size());
            std::string_view line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3) fail(line_no, "malformed section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                doc.section(section);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
            if (section.empty()) fail(line_no, "key outside of any section");
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty()) fail(line_no, "empty key");
            if (doc.get(section, key)) fail(line_no, "duplicate key '" + key + "'");
            doc.set(section, key, std::string(trim(line.substr(eq + 1))));
        }
        return doc;
    }

    void set(const std::string& section_name, const std::string& key, std::string value)
    {
        Entries& e = section(section_name);
        for (auto& kv : e) {
            if (kv.first == key) {
                kv.second = std::move(value);
                return;
            }
        }
        e.emplace_back(key, std::move(value));
    }

    std::optional<std::string> get(std::string_view section_name, std::string_view key) const
    {
        for (const auto& [name, entries] : sections_)
            if (name == section_name)
                for (const auto& kv : entries)
                    if (kv.first == key) return kv.second;
        return std::nullopt;
    }

    const std::vector<std::pair<std::string, Entries>>& sections() const { return sections_; }

    std::string dump() const
    {
        std::string out;
        for (const auto& [name, entries] : sections_) {
            if (!out.empty()) out += '\n';
            out += '[' + name + "]\n";
            for (const auto& [k, v] : entries) out += k + " = " + v + '\n';
        }
        return out;
    }

  private:
    Entries& section(const std::string& name)
    {
        for (auto& s : sections_)
            if (s.first == name) return s.second;
        sections_.emplace_back(name, Entries{});
        return sections_.back().second;
    }

    static std::string_view trim(std::string_view s)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

    [[noreturn]] static void fail(int line, const std::string& what)
    {
        throw Error(Errc::ConfigError, "line " + std::to_string(line) + ": " + what);
    }

    std::vector<std::pair<std::string, Entries>> sections_;
};

//---------------------------------------------------------------------------//
// Value conversion
//---------------------------------------------------------------------------//

namespace cfg {

inline std::string format(double v)
{
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format(std::uint64_t v) { return std::to_string(v); }
inline std::string format(std::int64_t v) { return std::to_string(v); }
inline std::string format(bool v) { return v ? "true" : "false"; }

inline std::string format(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format(v[i]);
    return out;
}

[[noreturn]] inline void bad_value(std::string_view key, std::string_view value, std::string_view expected)
{
    throw Error(Errc::ConfigError,
                "invalid value '" + std::string(value) + "' for '" + std::string(key) + "' (expected " +
                    std::string(expected) + ")");
}

inline double parse_double(std::string_view key, std::string_view s)
{
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) bad_value(key, s, "a finite number");
    return v;
}

inline std::uint64_t parse_u64(std::string_view key, std::string_view s)
{
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    // Accept exact integers written in floating notation, e.g. 1e5.
    const double d = parse_double(key, s);
    if (d < 0.0 || d > 1.8e19 || d != std::floor(d)) bad_value(key, s, "a non-negative integer");
    return static_cast<std::uint64_t>(d);
}

inline bool parse_bool(std::string_view key, std::string_view s)
{
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad_value(key, s, "true or false");
}

inline std::vector<double> parse_list(std::string_view key, std::string_view s)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        std::string_view item = s.substr(pos, comma - pos);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        out.push_back(parse_double(key, item));
        pos = comma + 1;
    }
    return out;
}

/// Enumerated value from a fixed list of spellings.
template <class E, std::size_t N>
E parse_enum(std::string_view key, std::string_view s, const std::array<std::pair<std::string_view, E>, N>& names)
{
    for (const auto& [n, e] : names)
        if (n == s) return e;
    std::string expected;
    for (const auto& [n, e] : names) expected += (expected.empty() ? "" : "|") + std::string(n);
    bad_value(key, s, expected);
}

template <class E, std::size_t N>
std::string format_enum(E v, const std::array<std::pair<std::string_view, E>, N>& names)
{
    for (const auto& [n, e] : names)
        if (e == v) return std::string(n);
    return "?";
}

inline constexpr std::array<std::pair<std::string_view, KernelKind>, 2> kKernelNames{
    {{"2d", KernelKind::Kernel2DAsymptotic}, {"3d", KernelKind::Kernel3D}}};
inline constexpr std::array<std::pair<std::string_view, Obliquity>, 2> kObliquityNames{
    {{"none", Obliquity::None}, {"cosine", Obliquity::Cosine}}};
inline constexpr std::array<std::pair<std::string_view, Method>, 2> kMethodNames{
    {{"rkf45", Method::RKF45Adaptive}, {"rk4", Method::RK4Fixed}}};
inline constexpr std::array<std::pair<std::string_view, LaunchKind>, 2> kLaunchNames{
    {{"openings", LaunchKind::Openings}, {"cone", LaunchKind::Cone}}};
inline constexpr std::array<std::pair<std::string_view, PremaskMode>, 2> kPremaskNames{
    {{"geometric", PremaskMode::Geometric}, {"integrated", PremaskMode::Integrated}}};
inline constexpr std::array<std::pair<std::string_view, Handoff>, 2> kHandoffNames{
    {{"attractor", Handoff::Attractor}, {"incident", Handoff::Incident}}};
inline constexpr std::array<std::pair<std::string_view, IdlerMode>, 2> kIdlerNames{
    {{"integrated", IdlerMode::Integrated}, {"geometric", IdlerMode::Geometric}}};
inline constexpr std::array<std::pair<std::string_view, TraceStart>, 2> kTraceStartNames{
    {{"attractor", TraceStart::Attractor}, {"incident", TraceStart::Incident}}};

/// Applies every key of one section through `apply(key, value)`, which
/// returns false for keys it does not know.
template <class Apply>
void apply_section(const ConfigDoc& doc, std::string_view name, Apply&& apply)
{
    for (const auto& [section, entries] : doc.sections()) {
        if (section != name) continue;
        for (const auto& [k, v] : entries)
            if (!apply(k, v))
                throw Error(Errc::ConfigError, "unknown key '" + k + "' in section [" + std::string(name) + "]");
    }
}

} // namespace cfg

//---------------------------------------------------------------------------//
// Run configuration
//---------------------------------------------------------------------------//

enum class RunKind { Variant1D, Slits, Ghost, Trace, Reference };

inline constexpr std::array<std::pair<std::string_view, RunKind>, 5> kRunKindNames{{
    {"variant1d", RunKind::Variant1D},
    {"slits", RunKind::Slits},
    {"ghost", RunKind::Ghost},
    {"trace", RunKind::Trace},
    {"reference", RunKind::Reference},
}};

/// Parameters of a 1-D variant run. The density itself comes from a preset.
struct VariantRun {
    std::string preset = "fig1";
    VariantSpec spec = fig1_variant_spec();
    std::uint64_t n = 100000;
    HistogramSpec bins{-7.0, 12.0, 200};
    std::uint64_t block_size = 4096;
};

inline VariantSpec variant_preset(std::string_view name)
{
    if (name == "fig1") return fig1_variant_spec();
    throw Error(Errc::ConfigError, "unknown variant preset '" + std::string(name) + "'");
}

/// Trace selection: launches spread over the mask openings, a fan of
/// directions from one point, or signal traces of ghost pairs.
enum class TraceMode { Openings, Fan, Ghost };

inline constexpr std::array<std::pair<std::string_view, TraceMode>, 3> kTraceModeNames{
    {{"openings", TraceMode::Openings}, {"fan", TraceMode::Fan}, {"ghost", TraceMode::Ghost}}};

struct TraceRun {
    TraceMode mode = TraceMode::Openings;
    TraceSpec spec;
    Vec2 fan_point{0.0, 10.0};
    double fan_step_deg = 20.0;
};

struct RunConfig {
    RunKind kind = RunKind::Slits;
    std::string preset;
    std::uint64_t seed = 1;
    unsigned workers = 0;
    std::string out_dir = "out";
    bool emit_traces = false;

    bool variant_scenario = false;  // 1-D variant density
    bool ghost_scenario = false;    // ghost geometry; otherwise a slit scenario
    VariantRun variant;
    SlitScenario slit;
    GhostGeometry ghost;
    TraceRun trace;
};

inline bool is_ghost_preset(std::string_view name)
{
    for (auto p : kGhostPresets)
        if (p == name) return true;
    return false;
}

/// Defaults for a subcommand and preset, before any file or flag overrides.
inline RunConfig preset_config(RunKind kind, std::string_view preset)
{
    RunConfig rc;
    rc.kind = kind;
    if (kind == RunKind::Variant1D || (kind == RunKind::Reference && preset == "fig1")) {
        const std::string p = preset.empty() ? "fig1" : std::string(preset);
        rc.preset = p;
        rc.variant_scenario = true;
        rc.variant.preset = p;
        rc.variant.spec = variant_preset(p);
        return rc;
    }
    if (kind == RunKind::Ghost && !preset.empty() && !is_ghost_preset(preset))
        throw Error(Errc::ConfigError, "unknown ghost preset '" + std::string(preset) + "'");
    if (kind == RunKind::Slits && is_ghost_preset(preset))
        throw Error(Errc::ConfigError, "'" + std::string(preset) + "' is a ghost preset; use the ghost subcommand");
    const std::string p = !preset.empty() ? std::string(preset) : (kind == RunKind::Ghost ? "fig8_ghost_single" : "fig3");
    rc.preset = p;
    if (is_ghost_preset(p)) {
        rc.ghost_scenario = true;
        rc.ghost = ghost_preset(p);
        rc.trace.mode = TraceMode::Ghost;
        rc.trace.spec.count = 100;
        rc.trace.spec.z_end = 30.0;
        rc.trace.spec.sample_dz = 0.25;
    } else {
        rc.slit = slit_preset(p);
        if (p == "fig2") {
            rc.trace.mode = TraceMode::Fan;
            rc.trace.fan_point = {0.0, 10.0};
            rc.trace.fan_step_deg = 20.0;
            rc.trace.spec.z_end = 30.0;
        }
    }
    return rc;
}

namespace cfg {

inline bool apply_field(std::string_view k, std::string_view v, KernelKind& kernel, DiffractionOptions& d,
                        double& gain)
{
    if (k == "kernel") kernel = parse_enum(k, v, kKernelNames);
    else if (k == "points_per_wavelength") d.points_per_wavelength = static_cast<int>(parse_u64(k, v));
    else if (k == "obliquity") d.obliquity = parse_enum(k, v, kObliquityNames);
    else if (k == "gain") gain = parse_double(k, v);
    else return false;
    return true;
}

inline bool apply_integrator(std::string_view k, std::string_view v, IntegratorConfig& c)
{
    if (k == "method") c.method = parse_enum(k, v, kMethodNames);
    else if (k == "rel_tol") c.rel_tol = parse_double(k, v);
    else if (k == "abs_tol") c.abs_tol = parse_double(k, v);
    else if (k == "h_init") c.h_init = parse_double(k, v);
    else if (k == "h_min") c.h_min = parse_double(k, v);
    else if (k == "h_max") c.h_max = parse_double(k, v);
    else if (k == "max_steps") c.max_steps = static_cast<std::int64_t>(parse_u64(k, v));
    else if (k == "attractor_tol") c.attractor_tol = parse_double(k, v);
    else if (k == "max_speed") c.max_speed = parse_double(k, v);
    else return false;
    return true;
}

inline bool apply_mask(std::string_view k, std::string_view v, SlitMask& m)
{
    if (k == "slit_width") m.slit_width = parse_double(k, v);
    else if (k == "slit_centers") m.slit_centers = parse_list(k, v);
    else return false;
    return true;
}

inline void dump_field(ConfigDoc& doc, KernelKind kernel, const DiffractionOptions& d, double gain)
{
    doc.set("field", "kernel", format_enum(kernel, kKernelNames));
    doc.set("field", "points_per_wavelength", std::to_string(d.points_per_wavelength));
    doc.set("field", "obliquity", format_enum(d.obliquity, kObliquityNames));
    doc.set("field", "gain", format(gain));
}

inline void dump_integrator(ConfigDoc& doc, const IntegratorConfig& c)
{
    doc.set("integrator", "method", format_enum(c.method, kMethodNames));
    doc.set("integrator", "rel_tol", format(c.rel_tol));
    doc.set("integrator", "abs_tol", format(c.abs_tol));
    doc.set("integrator", "h_init", format(c.h_init));
    doc.set("integrator", "h_min", format(c.h_min));
    doc.set("integrator", "h_max", format(c.h_max));
    doc.set("integrator", "max_steps", format(c.max_steps));
    doc.set("integrator", "attractor_tol", format(c.attractor_tol));
    doc.set("integrator", "max_speed", format(c.max_speed));
}

} // namespace cfg

/// Overlay a parsed document onto `rc`. The [run] section may name a kind
/// and preset only when they agree with `rc` (the subcommand wins).
inline void apply_config(const ConfigDoc& doc, RunConfig& rc)
{
    static constexpr std::array<std::string_view, 9> kSections = {
        "run", "variant", "mask", "slits", "ghost", "field", "integrator", "trace", "histogram"};
    for (const auto& [name, entries] : doc.sections()) {
        bool known = false;
        for (auto s : kSections) known = known || s == name;
        if (!known || name == "histogram") throw Error(Errc::ConfigError, "unknown section [" + name + "]");
    }
    using namespace cfg;
    apply_section(doc, "run", [&](std::string_view k, std::string_view v) {
        if (k == "kind") {
            if (parse_enum(k, v, kRunKindNames) != rc.kind)
                throw Error(Errc::ConfigError, "config kind '" + std::string(v) + "' does not match the subcommand");
        } else if (k == "preset") {
            if (v != rc.preset)
                throw Error(Errc::ConfigError, "config preset '" + std::string(v) + "' does not match '" + rc.preset + "'");
        } else if (k == "seed") rc.seed = parse_u64(k, v);
        else if (k == "workers") rc.workers = static_cast<unsigned>(parse_u64(k, v));
        else if (k == "out") rc.out_dir = std::string(v);
        else if (k == "emit_traces") rc.emit_traces = parse_bool(k, v);
        else return false;
        return true;
    });

    const bool variant = rc.variant_scenario;
    auto only = [&](std::string_view section, bool allowed) {
        for (const auto& [name, entries] : doc.sections())
            if (name == section && !allowed && !entries.empty())
                throw Error(Errc::ConfigError, "section [" + std::string(section) + "] does not apply to this run");
    };
    only("variant", variant);
    only("mask", !variant);
    only("field", !variant);
    only("integrator", !variant);
    only("slits", !variant && !rc.ghost_scenario);
    only("ghost", !variant && rc.ghost_scenario);
    only("trace", rc.kind == RunKind::Trace);

    apply_section(doc, "variant", [&](std::string_view k, std::string_view v) {
        VariantRun& r = rc.variant;
        if (k == "n") r.n = parse_u64(k, v);
        else if (k == "x0") r.spec.x_init_lo = r.spec.x_init_hi = parse_double(k, v);
        else if (k == "v_lo") r.spec.v_init_lo = parse_double(k, v);
        else if (k == "v_hi") r.spec.v_init_hi = parse_double(k, v);
        else if (k == "stop_fraction") r.spec.stop_fraction = parse_double(k, v);
        else if (k == "support_lo") r.spec.support_lo = parse_double(k, v);
        else if (k == "support_hi") r.spec.support_hi = parse_double(k, v);
        else if (k == "rel_tol") r.spec.rel_tol = parse_double(k, v);
        else if (k == "max_steps") r.spec.max_steps = static_cast<std::int64_t>(parse_u64(k, v));
        else if (k == "hist_lo") r.bins.lo = parse_double(k, v);
        else if (k == "hist_hi") r.bins.hi = parse_double(k, v);
        else if (k == "bins") r.bins.bins = parse_u64(k, v);
        else if (k == "block_size") r.block_size = parse_u64(k, v);
        else return false;
        return true;
    });

    SlitMask& mask = rc.ghost_scenario ? rc.ghost.mask : rc.slit.mask;
    apply_section(doc, "mask", [&](std::string_view k, std::string_view v) { return apply_mask(k, v, mask); });
    if (rc.ghost_scenario) {
        apply_section(doc, "field", [&](std::string_view k, std::string_view v) {
            return apply_field(k, v, rc.ghost.kernel, rc.ghost.diffraction, rc.ghost.gain);
        });
        apply_section(doc, "integrator",
                      [&](std::string_view k, std::string_view v) { return apply_integrator(k, v, rc.ghost.integrator); });
    } else {
        apply_section(doc, "field", [&](std::string_view k, std::string_view v) {
            return apply_field(k, v, rc.slit.kernel, rc.slit.diffraction, rc.slit.gain);
        });
        apply_section(doc, "integrator",
                      [&](std::string_view k, std::string_view v) { return apply_integrator(k, v, rc.slit.integrator); });
    }

    apply_section(doc, "slits", [&](std::string_view k, std::string_view v) {
        SlitScenario& s = rc.slit;
        if (k == "source_distance") s.source_distance = parse_double(k, v);
        else if (k == "screen_distance") s.screen_distance = parse_double(k, v);
        else if (k == "source_y") s.source_y = parse_double(k, v);
        else if (k == "n_particles") s.n_particles = parse_u64(k, v);
        else if (k == "launch") s.launch.kind = parse_enum(k, v, kLaunchNames);
        else if (k == "half_angle") s.launch.half_angle = parse_double(k, v);
        else if (k == "z_start") s.launch.z_start = parse_double(k, v);
        else if (k == "premask") s.launch.premask = parse_enum(k, v, kPremaskNames);
        else if (k == "handoff") s.launch.handoff = parse_enum(k, v, kHandoffNames);
        else if (k == "fringe_prominence") s.fringe_prominence = parse_double(k, v);
        else if (k == "block_size") s.block_size = parse_u64(k, v);
        else if (k == "hist_lo") s.screen.lo = parse_double(k, v);
        else if (k == "hist_hi") s.screen.hi = parse_double(k, v);
        else if (k == "bins") s.screen.bins = parse_u64(k, v);
        else return false;
        return true;
    });

    apply_section(doc, "ghost", [&](std::string_view k, std::string_view v) {
        GhostGeometry& g = rc.ghost;
        if (k == "Z0") g.Z0 = parse_double(k, v);
        else if (k == "Z1") g.Z1 = parse_double(k, v);
        else if (k == "Z2") g.Z2 = parse_double(k, v);
        else if (k == "W") g.W = parse_double(k, v);
        else if (k == "d1_center") g.d1_center = parse_double(k, v);
        else if (k == "d1_aperture") g.d1_aperture = parse_double(k, v);
        else if (k == "half_angle") g.launch_half_angle = parse_double(k, v);
        else if (k == "z_start") g.z_start = parse_double(k, v);
        else if (k == "idler_start") g.idler_start = parse_double(k, v);
        else if (k == "idler") g.idler_mode = parse_enum(k, v, kIdlerNames);
        else if (k == "handoff") g.handoff = parse_enum(k, v, kHandoffNames);
        else if (k == "coincidences") g.coincidence_target = parse_u64(k, v);
        else if (k == "pair_budget") g.pair_budget = parse_u64(k, v);
        else if (k == "block_size") g.block_size = parse_u64(k, v);
        else if (k == "idler_lo") g.idler_bins.lo = parse_double(k, v);
        else if (k == "idler_hi") g.idler_bins.hi = parse_double(k, v);
        else if (k == "idler_bins") g.idler_bins.bins = parse_u64(k, v);
        else if (k == "signal_lo") g.signal_bins.lo = parse_double(k, v);
        else if (k == "signal_hi") g.signal_bins.hi = parse_double(k, v);
        else if (k == "signal_bins") g.signal_bins.bins = parse_u64(k, v);
        else return false;
        return true;
    });

    apply_section(doc, "trace", [&](std::string_view k, std::string_view v) {
        TraceRun& t = rc.trace;
        if (k == "mode") t.mode = parse_enum(k, v, kTraceModeNames);
        else if (k == "count") t.spec.count = parse_u64(k, v);
        else if (k == "start") t.spec.start = parse_enum(k, v, kTraceStartNames);
        else if (k == "z_end") t.spec.z_end = parse_double(k, v);
        else if (k == "sample_dz") t.spec.sample_dz = parse_double(k, v);
        else if (k == "edge_margin") t.spec.edge_margin = parse_double(k, v);
        else if (k == "fan_y") t.fan_point.y = parse_double(k, v);
        else if (k == "fan_z") t.fan_point.z = parse_double(k, v);
        else if (k == "fan_step_deg") t.fan_step_deg = parse_double(k, v);
        else return false;
        return true;
    });
}

/// Check every invariant the run depends on; throws ConfigError.
inline void validate_config(const RunConfig& rc)
{
    try {
        if (rc.variant_scenario) {
            rc.variant.spec.validate();
            require(rc.variant.n >= 1 && rc.variant.block_size >= 1, Errc::InvalidArgument,
                    "variant n and block size must be positive");
            require(rc.variant.bins.hi > rc.variant.bins.lo && rc.variant.bins.bins >= 1, Errc::InvalidArgument,
                    "invalid variant histogram");
        } else {
            if (rc.ghost_scenario) rc.ghost.validate();
            else rc.slit.validate();
            if (rc.kind == RunKind::Trace) {
                require(rc.trace.spec.count >= 1 && rc.trace.spec.count <= 100, Errc::InvalidArgument,
                        "trace count must lie in [1, 100]");
                require(rc.trace.spec.sample_dz > 0.0, Errc::InvalidArgument, "trace sample spacing must be positive");
                require((rc.trace.mode == TraceMode::Ghost) == rc.ghost_scenario, Errc::InvalidArgument,
                        "ghost traces need a ghost geometry and vice versa");
                if (rc.trace.mode == TraceMode::Fan) {
                    require(rc.trace.fan_point.z >= kApertureClearance, Errc::InvalidArgument,
                            "fan point must lie beyond the mask");
                    require(rc.trace.fan_step_deg > 0.0 && rc.trace.fan_step_deg <= 360.0, Errc::InvalidArgument,
                            "fan step must lie in (0, 360]");
                }
            }
        }
    } catch (const Error& e) {
        if (e.code() == Errc::ConfigError) throw;
        throw Error(Errc::ConfigError, e.what());
    }
}

/// Fully resolved configuration as a document that parses back to itself.
inline ConfigDoc dump_config(const RunConfig& rc)
{
    using namespace cfg;
    ConfigDoc doc;
    doc.set("run", "kind", format_enum(rc.kind, kRunKindNames));
    doc.set("run", "preset", rc.preset);
    doc.set("run", "seed", format(rc.seed));
    doc.set("run", "workers", std::to_string(rc.workers));
    doc.set("run", "out", rc.out_dir);
    doc.set("run", "emit_traces", format(rc.emit_traces));

    if (rc.variant_scenario) {
        const VariantRun& r = rc.variant;
        doc.set("variant", "n", format(r.n));
        doc.set("variant", "x0", format(r.spec.x_init_lo));
        doc.set("variant", "v_lo", format(r.spec.v_init_lo));
        doc.set("variant", "v_hi", format(r.spec.v_init_hi));
        doc.set("variant", "stop_fraction", format(r.spec.stop_fraction));
        doc.set("variant", "support_lo", format(r.spec.support_lo));
        doc.set("variant", "support_hi", format(r.spec.support_hi));
        doc.set("variant", "rel_tol", format(r.spec.rel_tol));
        doc.set("variant", "max_steps", format(r.spec.max_steps));
        doc.set("variant", "hist_lo", format(r.bins.lo));
        doc.set("variant", "hist_hi", format(r.bins.hi));
        doc.set("variant", "bins", format(static_cast<std::uint64_t>(r.bins.bins)));
        doc.set("variant", "block_size", format(r.block_size));
        return doc;
    }

    const SlitMask& mask = rc.ghost_scenario ? rc.ghost.mask : rc.slit.mask;
    doc.set("mask", "slit_width", format(mask.slit_width));
    doc.set("mask", "slit_centers", format(mask.slit_centers));

    if (rc.ghost_scenario) {
        const GhostGeometry& g = rc.ghost;
        doc.set("ghost", "Z0", format(g.Z0));
        doc.set("ghost", "Z1", format(g.Z1));
        doc.set("ghost", "Z2", format(g.Z2));
        doc.set("ghost", "W", format(g.W));
        doc.set("ghost", "d1_center", format(g.d1_center));
        doc.set("ghost", "d1_aperture", format(g.d1_aperture));
        doc.set("ghost", "half_angle", format(g.launch_half_angle));
        doc.set("ghost", "z_start", format(g.z_start));
        doc.set("ghost", "idler_start", format(g.idler_start));
        doc.set("ghost", "idler", format_enum(g.idler_mode, kIdlerNames));
        doc.set("ghost", "handoff", format_enum(g.handoff, kHandoffNames));
        doc.set("ghost", "coincidences", format(g.coincidence_target));
        doc.set("ghost", "pair_budget", format(g.pair_budget));
        doc.set("ghost", "block_size", format(g.block_size));
        doc.set("ghost", "idler_lo", format(g.idler_bins.lo));
        doc.set("ghost", "idler_hi", format(g.idler_bins.hi));
        doc.set("ghost", "idler_bins", format(static_cast<std::uint64_t>(g.idler_bins.bins)));
        doc.set("ghost", "signal_lo", format(g.signal_bins.lo));
        doc.set("ghost", "signal_hi", format(g.signal_bins.hi));
        doc.set("ghost", "signal_bins", format(static_cast<std::uint64_t>(g.signal_bins.bins)));
        dump_field(doc, g.kernel, g.diffraction, g.gain);
        dump_integrator(doc, g.integrator);
    } else {
        const SlitScenario& s = rc.slit;
        doc.set("slits", "source_distance", format(s.source_distance));
        doc.set("slits", "screen_distance", format(s.screen_distance));
        doc.set("slits", "source_y", format(s.source_y));
        doc.set("slits", "n_particles", format(s.n_particles));
        doc.set("slits", "launch", format_enum(s.launch.kind, kLaunchNames));
        doc.set("slits", "half_angle", format(s.launch.half_angle));
        doc.set("slits", "z_start", format(s.launch.z_start));
        doc.set("slits", "premask", format_enum(s.launch.premask, kPremaskNames));
        doc.set("slits", "handoff", format_enum(s.launch.handoff, kHandoffNames));
        doc.set("slits", "fringe_prominence", format(s.fringe_prominence));
        doc.set("slits", "block_size", format(s.block_size));
        doc.set("slits", "hist_lo", format(s.screen.lo));
        doc.set("slits", "hist_hi", format(s.screen.hi));
        doc.set("slits", "bins", format(static_cast<std::uint64_t>(s.screen.bins)));
        dump_field(doc, s.kernel, s.diffraction, s.gain);
        dump_integrator(doc, s.integrator);
    }

    if (rc.kind == RunKind::Trace) {
        const TraceRun& t = rc.trace;
        doc.set("trace", "mode", format_enum(t.mode, kTraceModeNames));
        doc.set("trace", "count", format(static_cast<std::uint64_t>(t.spec.count)));
        doc.set("trace", "start", format_enum(t.spec.start, kTraceStartNames));
        doc.set("trace", "z_end", format(t.spec.z_end));
        doc.set("trace", "sample_dz", format(t.spec.sample_dz));
        doc.set("trace", "edge_margin", format(t.spec.edge_margin));
        doc.set("trace", "fan_y", format(t.fan_point.y));
        doc.set("trace", "fan_z", format(t.fan_point.z));
        doc.set("trace", "fan_step_deg", format(t.fan_step_deg));
    }
    return doc;
}

} // namespace twoi
