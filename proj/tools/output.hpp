// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run artifacts: CSV tables, the JSON metadata file and the incompleteness
// sentinel.
//
// Layout of an output directory:
//
//     INCOMPLETE      present from the start of a run until it finishes
//     metadata.json   written first with status "running", rewritten at the end
//     *.csv           data
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twoi/config.hpp"
#include "twoi/error.hpp"
#include "twoi/stats.hpp"

#ifndef TWOI_VERSION
#define TWOI_VERSION "1.0.0"
#endif

namespace twoi::out {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kSentinel = "INCOMPLETE";
inline constexpr const char* kMetadata = "metadata.json";

inline std::string version_string() { return TWOI_VERSION; }

/// Shortest round-trip representation, so CSVs are exact and stable.
inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    const auto tmp = std::filesystem::path(path).concat(".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(Errc::IoError, "cannot open '" + tmp.string() + "' for writing");
        f << text;
        f.flush();
        if (!f) throw Error(Errc::IoError, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::IoError, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

/// Columns: bin_center, count[, reference, scaled_reference].
inline std::string histogram_csv(const Histogram& h, std::span<const double> reference = {},
                                 std::span<const double> scaled = {})
{
    const bool ref = !reference.empty();
    std::string s = ref ? "bin_center,count,reference,scaled_reference\n" : "bin_center,count\n";
    for (std::size_t i = 0; i < h.bins(); ++i) {
        s += num(h.bin_center(i)) + ',' + std::to_string(h.count(i));
        if (ref) s += ',' + num(reference[i]) + ',' + num(scaled.empty() ? 0.0 : scaled[i]);
        s += '\n';
    }
    return s;
}

/// Columns: bin_center, reference.
inline std::string curve_csv(const Histogram& bins, std::span<const double> curve)
{
    std::string s = "bin_center,reference\n";
    for (std::size_t i = 0; i < bins.bins(); ++i) s += num(bins.bin_center(i)) + ',' + num(curve[i]) + '\n';
    return s;
}

inline nlohmann::ordered_json histogram_summary(const Histogram& h)
{
    return {{"lo", h.lo()},           {"hi", h.hi()},
            {"bins", h.bins()},       {"in_range", h.in_range()},
            {"underflow", h.underflow()}, {"overflow", h.overflow()}};
}

inline nlohmann::ordered_json config_json(const ConfigDoc& doc)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [section, entries] : doc.sections())
        for (const auto& [k, v] : entries) j[section][k] = v;
    return j;
}

/// Machine-readable error line for stderr.
inline std::string error_json(const Error& e)
{
    nlohmann::ordered_json j = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    return j.dump();
}

/// One run's output directory. The sentinel and an initial metadata file
/// are written on open; `finish` rewrites the metadata and removes the
/// sentinel.
class RunOutput {
  public:
    RunOutput(std::filesystem::path dir, nlohmann::ordered_json metadata) : dir_(std::move(dir)), meta_(std::move(metadata))
    {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error(Errc::IoError, "cannot create '" + dir_.string() + "': " + ec.message());
        write_text(dir_ / kSentinel, "run started; this file is removed when the run completes\n");
        meta_["status"] = "running";
        write_text(dir_ / kMetadata, meta_.dump(2) + '\n');
    }

    void write(const std::string& name, const std::string& text)
    {
        write_text(dir_ / name, text);
        files_.push_back(name);
    }

    void finish(nlohmann::ordered_json results)
    {
        for (auto& [k, v] : results.items()) meta_[k] = v;
        meta_["files"] = files_;
        meta_["status"] = "complete";
        write_text(dir_ / kMetadata, meta_.dump(2) + '\n');
        std::error_code ec;
        std::filesystem::remove(dir_ / kSentinel, ec);
        if (ec) throw Error(Errc::IoError, "cannot remove the sentinel: " + ec.message());
    }

    const std::filesystem::path& dir() const { return dir_; }

  private:
    std::filesystem::path dir_;
    nlohmann::ordered_json meta_;
    std::vector<std::string> files_;
};

} // namespace twoi::out
