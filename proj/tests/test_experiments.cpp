#include "cqed/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace cqed;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("cqed_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig undamped() {
    ExperimentConfig c;
    c.damping_enabled = false;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultInteractionTimes) {
    ExperimentConfig c;
    EXPECT_NEAR(c.interaction_time(), 32e-6, 0.5e-6);
    c.velocity = 200.0;
    EXPECT_NEAR(c.interaction_time(), 53e-6, 0.5e-6);
    const auto d = ExperimentConfig{}.with_t_i(53e-6);
    EXPECT_NEAR(d.interaction_time(), 53e-6, 1e-18);
    EXPECT_NEAR(d.profile().interaction_time(), 53e-6, 1e-18);
}

TEST(Config, SerializeParseRoundTrip) {
    ExperimentConfig c;
    c.n_bar = 22.5;
    c.n_bar_list = {15.5, 22.25, 1.0 / 3.0};
    c.condition_on = "g";
    c.thermal_photons = true;
    c.phi_points = 360;
    c.t_cav = 0.1 + 0.2;  // not exactly representable
    const std::string s = serialize_config(c);
    const ExperimentConfig back = parse_config(s);
    EXPECT_EQ(serialize_config(back), s);
    EXPECT_EQ(back.t_cav, c.t_cav);
    EXPECT_EQ(back.n_bar_list[2], 1.0 / 3.0);
    EXPECT_EQ(back.condition_on, "g");
}

TEST(Config, CommentsBlankLinesAndBase) {
    const auto c = parse_config("# header\n\n  n_bar = 15   # trailing\nt_i_list = 52e-6\ncat_n_bars=15\n");
    EXPECT_EQ(c.n_bar, 15.0);
    ASSERT_EQ(c.t_i_list.size(), 1u);
    EXPECT_EQ(c.t_i_list[0], 52e-6);
    EXPECT_EQ(c.omega, 3e5);
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("no_such_key = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("n_bar 15\n"), ConfigError);
    EXPECT_THROW(parse_config("n_bar = fifteen\n"), ConfigError);
    EXPECT_THROW(parse_config("t_cav = -1\n"), ConfigError);
    EXPECT_THROW(parse_config("damping_enabled = maybe\n"), ConfigError);
    EXPECT_THROW(parse_config("t_i_list = 32e-6\n"), ConfigError);  // cat_n_bars still has two entries
    EXPECT_THROW(load_config("/nonexistent/cqed.cfg"), ConfigError);
    ExperimentConfig c;
    EXPECT_THROW(set_config_value(c, "bogus", "1"), ConfigError);
}

TEST(Config, ExplicitTruncationIsChecked) {
    ExperimentConfig c;
    c.n_max = 40;
    EXPECT_THROW((void)c.truncation(36.0), TruncationTooSmall);
    c.n_max = 120;
    EXPECT_EQ(c.truncation(36.0).n_max, 120);
}

// ---------------------------------------------------------------------------
// Scenario directory layout read by the plotting scripts

TEST(ScenarioOutput, DirectoryLayoutAndFormats) {
    ScenarioResult r{"demo", serialize_config(ExperimentConfig{}), {}, {}, {}, {}};
    r.traces.emplace_back("a", Trace{{0.0, 1e-7}, {1.0, 0.1 + 0.2}});
    PhaseScan s;
    s.phi = {-kPi, 0.0};
    s.s_g = {0.25, 0.75};
    r.scans.emplace_back("b", s);
    r.wigners.emplace_back("c", WignerGrid{{-1.0, 1.0}, {0.0}, RMatrix::Constant(1, 2, 0.5)});
    r.metrics["x"] = 1.5;
    const auto dir = scratch_dir("layout");
    write_result(r, dir);

    EXPECT_EQ(slurp(dir / "trace_a.csv"), "t_seconds,P_g\n0,1\n9.9999999999999995e-08,0.30000000000000004\n");
    EXPECT_EQ(slurp(dir / "scan_b.csv"), "phi_radians,S_g\n-3.1415926535897931,0.25\n0,0.75\n");
    EXPECT_EQ(slurp(dir / "wigner_c.csv"), "beta_x,beta_y,W\n-1,0,0.5\n1,0,0.5\n");
    EXPECT_EQ(parse_config(slurp(dir / "config.snapshot")).n_bar, 36.0);
    const auto m = nlohmann::json::parse(slurp(dir / "metrics.json"));
    EXPECT_EQ(m["scenario"], "demo");
    EXPECT_EQ(m["generator"], std::string("cqed ") + kVersion);
    EXPECT_EQ(m["deterministic"], true);
    EXPECT_EQ(m["metrics"]["x"], 1.5);
}

TEST(ScenarioOutput, RunsAreByteIdentical) {
    const auto c = undamped();
    const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
    write_result(run_fig3(c, 1), d1);
    write_result(run_fig3(c, 2), d2);
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(d1)) {
        ++files;
        EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path().filename();
    }
    EXPECT_EQ(files, 6u);  // config, metrics, two scans, two traces
}

// ---------------------------------------------------------------------------
// Phase-splitting pipeline

TEST(Pipeline, ReferenceFieldPeaksAtZero) {
    for (bool damp : {false, true}) {
        ExperimentConfig c;
        c.damping_enabled = damp;
        const auto r = run_pipeline(c, 29.0, Variant::reference, 1);
        EXPECT_NEAR(r.scan.peaks[0].center, 0.0, 2e-3) << "damped=" << damp;
    }
}

TEST(Pipeline, UndampedPeaksFollowComponentPhase) {
    const auto c = undamped();
    for (double t : {32e-6, 53e-6})
        for (double nb : {15.0, 36.0}) {
            const auto r = run_pipeline(c.with_t_i(t), nb, Variant::undamped, 2);
            const double phi = component_phase(c.omega, t, nb);
            EXPECT_NEAR(r.scan.peaks[1].center, phi, 0.03) << "t=" << t << " n=" << nb;
            EXPECT_NEAR(r.scan.peaks[0].center, -phi, 0.03) << "t=" << t << " n=" << nb;
        }
}

TEST(Pipeline, SplittingShrinksWithPhotonNumberAndGrowsWithTime) {
    const auto c = undamped().with_t_i(32e-6);
    std::vector<double> sep;
    for (double nb : {18.0, 29.0, 36.0}) sep.push_back(splitting(run_pipeline(c, nb, Variant::undamped, 2).scan));
    EXPECT_GT(sep[0], sep[1]);
    EXPECT_GT(sep[1], sep[2]);
    EXPECT_GT(splitting(run_pipeline(c.with_t_i(53e-6), 29.0, Variant::undamped, 2).scan), sep[1]);
}

TEST(Pipeline, DampingPullsComponentsInward) {
    const ExperimentConfig c = ExperimentConfig{}.with_t_i(32e-6);
    const auto u = run_pipeline(c, 36.0, Variant::undamped, 2);
    const auto d = run_pipeline(c, 36.0, Variant::damped, 2);
    EXPECT_LT(splitting(d.scan), splitting(u.scan));
    EXPECT_LT(d.mean_photons, 36.0);
    EXPECT_NEAR(d.field.trace(), 1.0, 1e-6);
}

TEST(Fig2, MetricsTable) {
    auto c = undamped();
    c.n_bar_list = {22.0};
    c.phi_points = 360;
    const auto r = run_fig2(c, 1);
    ASSERT_EQ(r.scans.size(), 4u);
    EXPECT_EQ(r.scans[0].first, "t32us_n22_reference");
    EXPECT_EQ(r.scans[1].first, "t32us_n22_undamped");
    EXPECT_EQ(r.scans[3].first, "t53us_n22_undamped");
    const auto& rows = r.metrics["components"];
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_FALSE(rows[0].contains("splitting"));
    EXPECT_NEAR(rows[1]["splitting"].get<double>(), 2.0 * component_phase(c.omega, 32e-6, 22.0), 0.05);
}

TEST(Fig3, DipolePreparationsGiveOneComponentEach) {
    const auto c = undamped();
    const double phi = component_phase(c.omega, c.interaction_time(), c.n_bar);
    const auto plus = run_fig3_side(c, c.n_bar, DipoleState::plus);
    const auto minus = run_fig3_side(c, c.n_bar, DipoleState::minus);
    EXPECT_NEAR(plus.scan.peaks[0].center, phi, 0.03);
    EXPECT_NEAR(minus.scan.peaks[0].center, -phi, 0.03);
    for (const auto* s : {&plus, &minus}) {
        EXPECT_LT(s->secondary_ratio, 0.2);
        for (double p : s->trace.p_g) EXPECT_NEAR(p, 0.5, 0.05);
    }
}

// ---------------------------------------------------------------------------
// Collapse, revival and echo

TEST(Revival, SpontaneousRevivalAndDampingContrast) {
    ExperimentConfig c;
    c.n_bar = 15.0;
    c.trace_step = 0.2e-6;
    const auto r = run_collapse_revival(c, 1);
    const double predicted = r.metrics["predicted_revival_time"].get<double>();
    EXPECT_NEAR(predicted, 4 * kPi * std::sqrt(15.0) / 3e5, 1e-15);
    EXPECT_NEAR(r.metrics["undamped"]["revival_time"].get<double>() / predicted, 1.0, 0.10);
    EXPECT_LT(r.metrics["damped"]["revival_contrast"].get<double>(), r.metrics["undamped"]["revival_contrast"].get<double>());
    EXPECT_EQ(r.traces.size(), 3u);
    const auto& cl = r.metrics["classical_limit"];
    ASSERT_EQ(cl.size(), 3u);
    for (const auto& pt : cl) {
        const double s = pt["scale"].get<double>();
        EXPECT_NEAR(pt["rabi_frequency"].get<double>(), 3e5 * std::sqrt(15.0), 1e-6);
        EXPECT_NEAR(pt["collapse_time"].get<double>() / (s * cl[0]["collapse_time"].get<double>()), 1.0, 0.1);
    }
}

TEST(Revival, ClassicalScalingDoublesRevivalTime) {
    auto base = undamped();
    base.n_bar = 15.0;
    auto scaled = base;
    scaled.omega = base.omega / 2;
    scaled.n_bar = base.n_bar * 4;
    const auto r1 = run_collapse_revival(base, 1);
    const auto r2 = run_collapse_revival(scaled, 1);
    EXPECT_NEAR(r2.metrics["undamped"]["revival_time"].get<double>() / r1.metrics["undamped"]["revival_time"].get<double>(),
                4.0, 0.4);  // t_r = 4 pi sqrt(n) / Omega grows as s^2
    EXPECT_NEAR(r2.metrics["undamped"]["collapse_time"].get<double>() / r1.metrics["undamped"]["collapse_time"].get<double>(),
                2.0, 0.2);
}

TEST(Echo, RevivalAndDampedSweep) {
    ExperimentConfig c;
    c.trace_step = 0.05e-6;
    const auto r = run_echo(c, 1);
    EXPECT_NEAR(r.metrics["undamped"]["revival_time"].get<double>(), 40e-6, 1e-6);
    EXPECT_GE(r.metrics["undamped"]["revival_contrast"].get<double>(), 0.5);
    EXPECT_GE(r.metrics["damped"]["revival_contrast"].get<double>(), 0.3);
    const auto& sweep = r.metrics["damped_sweep"];
    ASSERT_EQ(sweep.size(), 3u);
    for (std::size_t i = 1; i < sweep.size(); ++i)
        EXPECT_LT(sweep[i]["revival_contrast"].get<double>(), sweep[i - 1]["revival_contrast"].get<double>());
}

// ---------------------------------------------------------------------------
// Cats

TEST(Cat, DecoherenceMatchesPrediction) {
    ExperimentConfig c;
    const auto f = fit_decoherence(c, 36.0, component_phase(c.omega, 32e-6, 36.0));
    EXPECT_NEAR(f.d_squared, 4 * 36.0 * std::pow(std::sin(0.4), 2), 1e-9);
    EXPECT_NEAR(f.fitted / f.predicted, 1.0, 0.15);
    EXPECT_NEAR(f.fitted / 85e-6, 1.0, 0.25);
    for (std::size_t i = 1; i < f.amplitude.size(); ++i) EXPECT_LT(f.amplitude[i], f.amplitude[i - 1]);
}

TEST(Cat, WignerSnapshotShowsTwoLobesAndFringes) {
    ExperimentConfig c;
    c.wigner_points = 81;
    const auto w = wigner_snapshot(c, 36.0);
    EXPECT_EQ(w.lobes, 2);
    EXPECT_GE(w.fringe_extremum, 0.2 * w.lobe_peak);
    EXPECT_NEAR(w.grid.integral(), 1.0, 1e-3);
    EXPECT_GT(w.probability_g, 0.0);
}

TEST(Cat, SeparationSweep) {
    ExperimentConfig c;
    c.wigner_points = 41;
    const auto r = run_cat_metrics(c, 1);
    const auto& a = r.metrics["d_squared"][0];
    EXPECT_GE(a["d_squared_min"].get<double>(), 17.0);
    EXPECT_LE(a["d_squared_max"].get<double>(), 25.0);
    EXPECT_LE(r.metrics["d_squared"][1]["ratio"].get<double>(), 1.3);
    EXPECT_EQ(r.metrics["decoherence"].size(), 2u);
    EXPECT_EQ(r.wigners.size(), 1u);
}
