// Copyright 2026 The twoi-sim Authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli.hpp"

namespace twoi {
namespace {

namespace fs = std::filesystem;

Errc error_code(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return Errc::InvalidArgument;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("twoi_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::initializer_list<std::string> args)
    {
        std::vector<std::string> a{"twoi-sim"};
        a.insert(a.end(), args);
        std::vector<const char*> argv;
        for (const auto& s : a) argv.push_back(s.c_str());
        out_.str("");
        err_.str("");
        return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};

TEST(ConfigDocParse, SectionsCommentsAndErrors)
{
    const ConfigDoc d = ConfigDoc::parse("# top\n[run]\nseed = 5  # trailing\n\n[slits]\n n_particles=10\n");
    EXPECT_EQ(d.get("run", "seed"), "5");
    EXPECT_EQ(d.get("slits", "n_particles"), "10");
    EXPECT_FALSE(d.get("run", "n_particles"));
    EXPECT_EQ(error_code([] { ConfigDoc::parse("seed = 1\n"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { ConfigDoc::parse("[run\nseed = 1\n"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { ConfigDoc::parse("[run]\nseed\n"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { ConfigDoc::parse("[run]\nseed = 1\nseed = 2\n"); }), Errc::ConfigError);
}

TEST(ConfigValues, Parsing)
{
    EXPECT_EQ(cfg::parse_u64("n", "1e5"), 100000u);
    EXPECT_EQ(cfg::parse_u64("n", "42"), 42u);
    EXPECT_EQ(error_code([] { cfg::parse_u64("n", "-3"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { cfg::parse_u64("n", "2.5"); }), Errc::ConfigError);
    EXPECT_DOUBLE_EQ(cfg::parse_double("x", "0.1"), 0.1);
    EXPECT_EQ(error_code([] { cfg::parse_double("x", "abc"); }), Errc::ConfigError);
    EXPECT_TRUE(cfg::parse_bool("b", "true"));
    EXPECT_FALSE(cfg::parse_bool("b", "false"));
    EXPECT_EQ(error_code([] { cfg::parse_bool("b", "maybe"); }), Errc::ConfigError);
    const auto v = cfg::parse_list("c", "-12.5, 0, 12.5");
    ASSERT_EQ(v.size(), 3u);
    EXPECT_DOUBLE_EQ(v[0], -12.5);
    EXPECT_DOUBLE_EQ(cfg::parse_double("x", cfg::format(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(ConfigRoundTrip, EveryPreset)
{
    std::vector<std::pair<RunKind, std::string>> cases = {{RunKind::Variant1D, "fig1"}, {RunKind::Reference, "fig1"}};
    for (auto p : kSlitPresets) {
        cases.emplace_back(RunKind::Slits, std::string(p));
        cases.emplace_back(RunKind::Trace, std::string(p));
        cases.emplace_back(RunKind::Reference, std::string(p));
    }
    for (auto p : kGhostPresets) {
        cases.emplace_back(RunKind::Ghost, std::string(p));
        cases.emplace_back(RunKind::Trace, std::string(p));
        cases.emplace_back(RunKind::Reference, std::string(p));
    }
    for (const auto& [kind, name] : cases) {
        const RunConfig rc = preset_config(kind, name);
        EXPECT_NO_THROW(validate_config(rc)) << name;
        const std::string text = dump_config(rc).dump();
        RunConfig back = preset_config(kind, name);
        apply_config(ConfigDoc::parse(text), back);
        EXPECT_EQ(dump_config(back).dump(), text) << name;
    }
}

TEST(ConfigApply, OverridesTakeEffect)
{
    RunConfig rc = preset_config(RunKind::Slits, "fig4");
    apply_config(ConfigDoc::parse("[run]\nseed = 99\n[slits]\nn_particles = 123\n[mask]\nslit_width = 4\n"
                                  "[integrator]\nrel_tol = 1e-7\n"),
                 rc);
    EXPECT_EQ(rc.seed, 99u);
    EXPECT_EQ(rc.slit.n_particles, 123u);
    EXPECT_DOUBLE_EQ(rc.slit.mask.slit_width, 4.0);
    EXPECT_DOUBLE_EQ(rc.slit.integrator.rel_tol, 1e-7);
}

TEST(ConfigApply, RejectsUnknownAndMisplaced)
{
    auto apply = [](RunKind k, const char* preset, const char* text) {
        return [=] {
            RunConfig rc = preset_config(k, preset);
            apply_config(ConfigDoc::parse(text), rc);
            validate_config(rc);
        };
    };
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[slits]\nbogus = 1\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[nonsense]\nx = 1\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[ghost]\nZ0 = 1\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[run]\nkind = ghost\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[slits]\nn_particles = many\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Slits, "fig3", "[mask]\nslit_width = -1\n")), Errc::ConfigError);
    EXPECT_EQ(error_code(apply(RunKind::Trace, "fig6", "[trace]\ncount = 101\n")), Errc::ConfigError);
    EXPECT_EQ(error_code([] { preset_config(RunKind::Slits, "fig8_ghost_single"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { preset_config(RunKind::Ghost, "fig3"); }), Errc::ConfigError);
    EXPECT_EQ(error_code([] { preset_config(RunKind::Slits, "fig99"); }), Errc::ConfigError);
}

TEST_F(CliTest, ConfigErrorExitsTwoAndWritesNothing)
{
    const fs::path out = dir_ / "run";
    EXPECT_EQ(run({"slits", "--preset", "fig3", "--set", "slits.bogus=1", "--out", out.string()}), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_NE(err_.str().find("\"error\":\"ConfigError\""), std::string::npos) << err_.str();

    EXPECT_EQ(run({"slits", "--no-such-flag", "--out", out.string()}), 2);
    EXPECT_EQ(run({"ghost", "--preset", "fig3", "--out", out.string()}), 2);
    EXPECT_EQ(run({"variant1d", "--config", (dir_ / "missing.conf").string(), "--out", out.string()}), 2);
    EXPECT_EQ(run({"slits", "--set", "nodot", "--out", out.string()}), 2);
    EXPECT_EQ(run({}), 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, DumpConfigRoundTripsThroughConfigFile)
{
    ASSERT_EQ(run({"ghost", "--preset", "fig9_ghost_triple", "--seed", "7", "--coincidences", "50", "--dump-config"}), 0);
    const std::string dumped = out_.str();
    EXPECT_NE(dumped.find("coincidences = 50"), std::string::npos);
    EXPECT_NE(dumped.find("seed = 7"), std::string::npos);
    {
        std::ofstream f(dir_ / "g.conf");
        f << dumped;
    }
    ASSERT_EQ(run({"ghost", "--config", (dir_ / "g.conf").string(), "--dump-config"}), 0);
    EXPECT_EQ(out_.str(), dumped);
}

TEST_F(CliTest, VersionFlag)
{
    EXPECT_EQ(run({"--version"}), 0);
    EXPECT_NE(out_.str().find(out::version_string()), std::string::npos);
}

TEST_F(CliTest, VariantRunWritesArtifacts)
{
    const fs::path a = dir_ / "w1";
    const fs::path b = dir_ / "w3";
    ASSERT_EQ(run({"variant1d", "-n", "3000", "--seed", "5", "--workers", "1", "--out", a.string()}), 0) << err_.str();
    ASSERT_EQ(run({"variant1d", "-n", "3000", "--seed", "5", "--workers", "3", "--out", b.string()}), 0) << err_.str();
    EXPECT_FALSE(fs::exists(a / out::kSentinel));
    const std::string csv = slurp(a / "histogram.csv");
    EXPECT_EQ(csv.rfind("bin_center,count,reference,scaled_reference\n", 0), 0u);
    EXPECT_EQ(csv, slurp(b / "histogram.csv"));

    const auto meta = nlohmann::json::parse(slurp(a / out::kMetadata));
    EXPECT_EQ(meta["schema_version"], out::kSchemaVersion);
    EXPECT_EQ(meta["status"], "complete");
    EXPECT_EQ(meta["command"], "variant1d");
    EXPECT_EQ(meta["seed"], 5);
    EXPECT_EQ(meta["workers"], 1);
    EXPECT_EQ(meta["config"]["variant"]["n"], "3000");
    EXPECT_TRUE(meta.contains("metrics"));
    EXPECT_EQ(meta["files"][0], "histogram.csv");
}

TEST_F(CliTest, SlitRunIdenticalAcrossWorkers)
{
    const fs::path a = dir_ / "w1";
    const fs::path b = dir_ / "w3";
    ASSERT_EQ(run({"slits", "--preset", "fig4", "-n", "120", "--workers", "1", "--set", "slits.block_size=16", "--out",
                   a.string()}),
              0)
        << err_.str();
    ASSERT_EQ(run({"slits", "--preset", "fig4", "-n", "120", "--workers", "3", "--set", "slits.block_size=16", "--out",
                   b.string()}),
              0)
        << err_.str();
    EXPECT_EQ(slurp(a / "screen.csv"), slurp(b / "screen.csv"));
    const auto meta = nlohmann::json::parse(slurp(a / out::kMetadata));
    int total = 0;
    for (const auto& [name, count] : meta["counts"]["outcomes"].items()) total += count.get<int>();
    EXPECT_EQ(total, 120);
    EXPECT_EQ(meta["counts"]["launched"], 120);
}

TEST_F(CliTest, TraceAndReferenceCommands)
{
    const fs::path t = dir_ / "trace";
    ASSERT_EQ(run({"trace", "--preset", "fig6", "-n", "6", "--out", t.string()}), 0) << err_.str();
    const std::string traces = slurp(t / "traces.csv");
    EXPECT_EQ(traces.rfind("trace,step,t,y,z,vel_y,vel_z,flow_gap\n", 0), 0u);
    EXPECT_EQ(slurp(t / "crossings.csv").rfind("trace,z,y\n", 0), 0u);
    const auto meta = nlohmann::json::parse(slurp(t / out::kMetadata));
    EXPECT_EQ(meta["metrics"]["traces"], 6);
    EXPECT_EQ(meta["metrics"]["crossing_pairs"], 0);

    const fs::path r = dir_ / "ref";
    ASSERT_EQ(run({"reference", "--preset", "fig8_ghost_single", "--out", r.string()}), 0) << err_.str();
    EXPECT_EQ(slurp(r / "reference.csv").rfind("bin_center,reference\n", 0), 0u);
}

TEST_F(CliTest, UnwritableOutputIsIoError)
{
    const fs::path blocker = dir_ / "file";
    {
        std::ofstream f(blocker);
        f << "x";
    }
    EXPECT_EQ(run({"reference", "--preset", "fig3", "--out", (blocker / "sub").string()}), 3);
    EXPECT_NE(err_.str().find("IoError"), std::string::npos);
}

} // namespace
} // namespace twoi
