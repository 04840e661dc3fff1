// experiments.hpp: configuration-driven scenarios on the common timeline
// (A1 axis crossing at t = 0):
//
//   F1 injection at -h - f1_lead, h = 3 w / v
//   A1 in the mode over [-h, h]
//   F2 injection at h + f2_delay, then A2 enters after a2_delay
//
// and their on-disk results.

#pragma once

#include "cqed/core.hpp"
#include "cqed/fock_space.hpp"
#include "cqed/jaynes_cummings.hpp"
#include "cqed/lindblad.hpp"
#include "cqed/measurement.hpp"
#include "cqed/mesoscopic.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace cqed {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
    double omega = 3e5;
    double t_cav = 850e-6;
    double t_atom = 30e-3;  // recorded only, atomic decay is not modelled
    double waist = 6e-3;
    double velocity = 335.0;
    double probe_velocity = 0.0;  // 0: same as A1
    double t_i = 0.0;             // > 0 overrides velocity through t_i = sqrt(pi) w / v
    double n_bar = 36.0;
    std::vector<double> n_bar_list{15.0, 22.0, 29.0, 36.0};
    std::vector<double> t_i_list{32e-6, 53e-6};
    std::vector<double> cat_n_bars{36.0, 15.0};  // photon number of the cat built at each t_i_list entry
    double temperature = 0.6;
    double frequency = 51.1e9;
    int n_max = 0;  // 0: smallest adequate truncation
    bool damping_enabled = true;
    bool thermal_photons = false;
    std::string condition_on = "none";
    double f1_lead = 1e-6;
    double f2_delay = 1e-6;
    double a2_delay = 0.0;
    int phi_points = 720;
    double echo_time = 20e-6;
    std::vector<double> echo_times{10e-6, 20e-6, 30e-6};
    double horizon = 0.0;  // 0: 1.5 x the spontaneous revival time
    double trace_step = 0.1e-6;
    double wigner_delay = 48e-6;
    double wigner_extent = 8.0;
    int wigner_points = 161;
    double dt = 0.0;  // 0: automatic step
    bool verify_steps = true;
    std::vector<double> classical_scales{1.0, 2.0, 4.0};

    [[nodiscard]] double a1_velocity() const { return t_i > 0.0 ? std::sqrt(kPi) * waist / t_i : velocity; }
    [[nodiscard]] double interaction_time() const { return std::sqrt(kPi) * waist / a1_velocity(); }
    [[nodiscard]] CouplingProfile profile() const { return CouplingProfile::gaussian(omega, waist, a1_velocity()); }
    [[nodiscard]] CouplingProfile probe_profile() const {
        return CouplingProfile::gaussian(omega, waist, probe_velocity > 0.0 ? probe_velocity : a1_velocity());
    }
    [[nodiscard]] DampingParams damping() const {
        return {1.0 / t_cav, thermal_photons ? thermal_occupation(temperature, frequency) : 0.0};
    }
    [[nodiscard]] Truncation truncation(double mean) const {
        if (n_max <= 0) return truncation_for(mean);
        Truncation t(n_max);
        require_truncation(t, mean, "config n_max");
        return t;
    }
    [[nodiscard]] StepControl step_control() const {
        StepControl c;
        if (dt > 0.0) c.fixed_dt = dt;
        c.verify = verify_steps;
        return c;
    }
    [[nodiscard]] ExperimentConfig with_t_i(double t) const {
        ExperimentConfig c = *this;
        c.t_i = t;
        return c;
    }
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_double(key, v);
    if (d != std::floor(d)) throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return int(d);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw ConfigError("config: '" + key + "' expects a comma-separated list");
    return out;
}

inline std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s;
}

struct ConfigKey {
    const char* name;
    const char* help;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define CQED_REAL(field, help) \
    ConfigKey{#field, help, [](const ExperimentConfig& c) { return fmt(c.field); }, \
              [](ExperimentConfig& c, const std::string& v) { c.field = parse_double(#field, v); }}
#define CQED_INT(field, help) \
    ConfigKey{#field, help, [](const ExperimentConfig& c) { return std::to_string(c.field); }, \
              [](ExperimentConfig& c, const std::string& v) { c.field = parse_int(#field, v); }}
#define CQED_BOOL(field, help) \
    ConfigKey{#field, help, [](const ExperimentConfig& c) { return std::string(c.field ? "true" : "false"); }, \
              [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }}
#define CQED_LIST(field, help) \
    ConfigKey{#field, help, [](const ExperimentConfig& c) { return format_list(c.field); }, \
              [](ExperimentConfig& c, const std::string& v) { c.field = parse_list(#field, v); }}

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys{
        CQED_REAL(omega, "vacuum Rabi angular frequency (rad/s)"),
        CQED_REAL(t_cav, "cavity energy damping time (s)"),
        CQED_REAL(t_atom, "atomic lifetime (s), recorded only"),
        CQED_REAL(waist, "mode waist (m)"),
        CQED_REAL(velocity, "atomic velocity (m/s)"),
        CQED_REAL(probe_velocity, "probe atom velocity (m/s), 0 = same as A1"),
        CQED_REAL(t_i, "interaction time (s), > 0 overrides velocity"),
        CQED_REAL(n_bar, "mean photon number of the injected field"),
        CQED_LIST(n_bar_list, "photon numbers for fig2"),
        CQED_LIST(t_i_list, "interaction times for fig2 and cat (s)"),
        CQED_LIST(cat_n_bars, "photon number of the decaying cat at each t_i_list entry"),
        CQED_REAL(temperature, "cavity temperature (K)"),
        CQED_REAL(frequency, "mode frequency (Hz)"),
        CQED_INT(n_max, "Fock truncation, 0 = automatic"),
        CQED_BOOL(damping_enabled, "run the damped variants"),
        CQED_BOOL(thermal_photons, "use the thermal occupation at temperature/frequency"),
        ConfigKey{"condition_on", "A1 outcome for the readout: none, e or g",
                  [](const ExperimentConfig& c) { return c.condition_on; },
                  [](ExperimentConfig& c, const std::string& v) {
                      if (v != "none" && v != "e" && v != "g")
                          throw ConfigError("config: 'condition_on' must be none, e or g, got '" + v + "'");
                      c.condition_on = v;
                  }},
        CQED_REAL(f1_lead, "F1 injection before A1 mode entry (s)"),
        CQED_REAL(f2_delay, "F2 injection after A1 mode exit (s)"),
        CQED_REAL(a2_delay, "A2 mode entry after F2 (s)"),
        CQED_INT(phi_points, "points of the phase scan over [-pi, pi)"),
        CQED_REAL(echo_time, "echo flip time T (s)"),
        CQED_LIST(echo_times, "echo flip times for the damped sweep (s)"),
        CQED_REAL(horizon, "collapse/revival trace length (s), 0 = automatic"),
        CQED_REAL(trace_step, "sampling step of P_g traces (s)"),
        CQED_REAL(wigner_delay, "Wigner snapshot after A1 axis crossing (s)"),
        CQED_REAL(wigner_extent, "Wigner grid half width"),
        CQED_INT(wigner_points, "Wigner grid points per axis"),
        CQED_REAL(dt, "integration step (s), 0 = automatic"),
        CQED_BOOL(verify_steps, "rerun damped integrations with half the step"),
        CQED_LIST(classical_scales, "scales s of the (Omega/s, n_bar s^2) sweep"),
    };
    return keys;
}

#undef CQED_REAL
#undef CQED_INT
#undef CQED_BOOL
#undef CQED_LIST

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
    const auto positive = [](double v, const char* k) {
        if (!(v > 0.0)) throw ConfigError(std::string("config: '") + k + "' must be > 0");
    };
    const auto nonneg = [](double v, const char* k) {
        if (!(v >= 0.0)) throw ConfigError(std::string("config: '") + k + "' must be >= 0");
    };
    positive(c.omega, "omega");
    positive(c.t_cav, "t_cav");
    positive(c.t_atom, "t_atom");
    positive(c.waist, "waist");
    positive(c.velocity, "velocity");
    nonneg(c.probe_velocity, "probe_velocity");
    nonneg(c.t_i, "t_i");
    nonneg(c.n_bar, "n_bar");
    positive(c.temperature, "temperature");
    positive(c.frequency, "frequency");
    nonneg(c.f1_lead, "f1_lead");
    nonneg(c.f2_delay, "f2_delay");
    nonneg(c.a2_delay, "a2_delay");
    positive(c.echo_time, "echo_time");
    nonneg(c.horizon, "horizon");
    positive(c.trace_step, "trace_step");
    nonneg(c.wigner_delay, "wigner_delay");
    positive(c.wigner_extent, "wigner_extent");
    nonneg(c.dt, "dt");
    if (c.n_max < 0) throw ConfigError("config: 'n_max' must be >= 0");
    if (c.phi_points < 16) throw ConfigError("config: 'phi_points' must be >= 16");
    if (c.wigner_points < 3) throw ConfigError("config: 'wigner_points' must be >= 3");
    for (double v : c.n_bar_list) nonneg(v, "n_bar_list");
    for (double v : c.t_i_list) positive(v, "t_i_list");
    for (double v : c.cat_n_bars) positive(v, "cat_n_bars");
    if (c.cat_n_bars.size() != c.t_i_list.size())
        throw ConfigError("config: 'cat_n_bars' needs one entry per 't_i_list' entry");
    for (double v : c.echo_times) positive(v, "echo_times");
    for (double v : c.classical_scales)
        if (v < 1.0) throw ConfigError("config: 'classical_scales' entries must be >= 1");
}

/// Apply one key=value assignment.
inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
    for (const auto& k : detail::config_keys())
        if (key == k.name) {
            k.set(c, detail::trim(value));
            return;
        }
    throw ConfigError("config: unknown key '" + key + "'");
}

/// Flat key = value text; '#' starts a comment.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        set_config_value(base, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    validate(base);
    return base;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

inline std::string serialize_config(const ExperimentConfig& c) {
    std::string s;
    for (const auto& k : detail::config_keys()) s += std::string(k.name) + " = " + k.get(c) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// Parallel helper: results go to preallocated slots, so output does not
// depend on scheduling.

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(n, threads > 0 ? std::size_t(threads) : hw);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Results

struct ScenarioResult {
    std::string id;
    std::string config_snapshot;
    std::vector<std::pair<std::string, Trace>> traces;
    std::vector<std::pair<std::string, PhaseScan>> scans;
    std::vector<std::pair<std::string, WignerGrid>> wigners;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << s;
}

inline std::string trace_csv(const Trace& t) {
    std::string s = "t_seconds,P_g\n";
    for (std::size_t i = 0; i < t.t.size(); ++i) s += fmt(t.t[i]) + "," + fmt(t.p_g[i]) + "\n";
    return s;
}

inline std::string scan_csv(const PhaseScan& sc) {
    std::string s = "phi_radians,S_g\n";
    for (std::size_t i = 0; i < sc.phi.size(); ++i) s += fmt(sc.phi[i]) + "," + fmt(sc.s_g[i]) + "\n";
    return s;
}

inline std::string wigner_csv(const WignerGrid& w) {
    std::string s = "beta_x,beta_y,W\n";
    for (std::size_t iy = 0; iy < w.beta_y.size(); ++iy)
        for (std::size_t ix = 0; ix < w.beta_x.size(); ++ix)
            s += fmt(w.beta_x[ix]) + "," + fmt(w.beta_y[iy]) + "," +
                 fmt(w.values(Eigen::Index(iy), Eigen::Index(ix))) + "\n";
    return s;
}

}  // namespace detail

/// Write one directory: config.snapshot, trace_*.csv, scan_*.csv,
/// wigner_*.csv and metrics.json.
inline void write_result(const ScenarioResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.snapshot", r.config_snapshot);
    for (const auto& [name, t] : r.traces) detail::write_text(dir / ("trace_" + name + ".csv"), detail::trace_csv(t));
    for (const auto& [name, s] : r.scans) detail::write_text(dir / ("scan_" + name + ".csv"), detail::scan_csv(s));
    for (const auto& [name, w] : r.wigners)
        detail::write_text(dir / ("wigner_" + name + ".csv"), detail::wigner_csv(w));
    nlohmann::ordered_json m;
    m["scenario"] = r.id;
    m["generator"] = std::string("cqed ") + kVersion;
    m["deterministic"] = true;
    m["metrics"] = r.metrics;
    detail::write_text(dir / "metrics.json", m.dump(2) + "\n");
}

inline nlohmann::ordered_json peaks_json(const PhaseScan& s) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : s.peaks)
        arr.push_back({{"center", p.center}, {"width", p.width}, {"amplitude", p.amplitude},
                       {"center_error", p.center_error}});
    return arr;
}

// ---------------------------------------------------------------------------
// The A1 -> readout pipeline

enum class Variant { reference, undamped, damped };
enum class Preparation { ground, dipole_plus, dipole_minus };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::reference: return "reference";
        case Variant::undamped: return "undamped";
        case Variant::damped: return "damped";
    }
    return "?";
}

struct PipelineResult {
    DensityOperator field;  // cavity field at F2 injection
    PhaseScan scan;
    double mean_photons = 0.0;  // at F2 injection
};

namespace detail {

inline DensityOperator reduce_for_readout(const DensityOperator& joint, const std::string& condition_on) {
    if (condition_on == "e") return conditional_field_state(joint, Level::e);
    if (condition_on == "g") return conditional_field_state(joint, Level::g);
    return partial_trace_field(joint);
}

inline JointState prepared_state(const ExperimentConfig& c, const FieldState& field, Preparation prep) {
    switch (prep) {
        case Preparation::dipole_plus:
            return prepare_dipole_state(DipoleState::plus, field, CouplingProfile::constant(c.omega));
        case Preparation::dipole_minus:
            return prepare_dipole_state(DipoleState::minus, field, CouplingProfile::constant(c.omega));
        case Preparation::ground: break;
    }
    return product_state(Level::g, field);
}

}  // namespace detail

/// Field left in the cavity when F2 is injected.
inline DensityOperator field_before_readout(const ExperimentConfig& c, double n_bar, Variant v,
                                            Preparation prep = Preparation::ground) {
    const auto p = CoherentParams::from_mean(n_bar);
    const Truncation tr = c.truncation(n_bar);
    const CouplingProfile prof = c.profile();
    const double h = prof.transit_half_width();
    const double total = c.f1_lead + 2.0 * h + c.f2_delay;

    if (v == Variant::undamped) {
        const JointState s = evolve_area(detail::prepared_state(c, coherent_state(p, tr), prep), prof.pulse_area(-h, h));
        return detail::reduce_for_readout(DensityOperator::pure(s), c.condition_on);
    }
    if (v == Variant::reference) {
        // no A1: the injected field only decays (damped) or stays put
        DensityOperator f = DensityOperator::pure(coherent_state(p, tr));
        if (!c.damping_enabled) return f;
        return evolve_density(f, {Segment::free(total)}, c.damping(), c.step_control());
    }
    Timeline tl;
    DensityOperator rho = DensityOperator::pure(product_state(Level::g, vacuum(tr)));
    if (prep == Preparation::ground)
        tl.push_back(Injection{p.alpha()});
    else
        rho = DensityOperator::pure(detail::prepared_state(c, coherent_state(p, tr), prep));
    tl.push_back(Segment::free(c.f1_lead));
    tl.push_back(Segment::coupled(prof, -h, h));
    tl.push_back(Segment::free(c.f2_delay));
    const DensityOperator out = evolve_density(rho, tl, c.damping(), c.step_control());
    out.check_invariants("A1 transit");
    return detail::reduce_for_readout(out, c.condition_on);
}

/// Full pipeline for one photon number: A1 transit, F2 scan, A2 readout,
/// peak extraction with `expected_peaks` Gaussians (0 skips the fit).
inline PipelineResult run_pipeline(const ExperimentConfig& c, double n_bar, Variant v, int expected_peaks,
                                   Preparation prep = Preparation::ground) {
    PipelineResult r{field_before_readout(c, n_bar, v, prep), {}, 0.0};
    r.mean_photons = mean_photon_number(r.field);
    HomodyneOptions opt;
    const bool damped = v == Variant::damped || (v == Variant::reference && c.damping_enabled);
    if (damped) opt.damping = c.damping();
    opt.probe_delay = c.a2_delay;
    opt.control = c.step_control();
    r.scan = homodyne_scan(r.field, std::sqrt(n_bar), c.probe_profile(), phase_grid(c.phi_points), opt);
    if (expected_peaks > 0) extract_peaks(r.scan, expected_peaks);
    return r;
}

/// Total splitting between the two fitted components (radians).
inline double splitting(const PhaseScan& s) {
    if (s.peaks.size() != 2) throw PeakCountMismatch("splitting: scan does not carry two fitted peaks");
    return s.peaks[1].center - s.peaks[0].center;
}

namespace detail {

inline std::string tag(double v, double scale = 1.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v * scale);
    return buf;
}

inline std::string ti_tag(double t) { return "t" + tag(std::round(t * 1e7) / 10.0) + "us"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenarios

/// Phase scans for every (t_i, n_bar): reference without A1, undamped and
/// (if enabled) damped, with fitted component phases.
inline ScenarioResult run_fig2(const ExperimentConfig& c, int threads = 0) {
    validate(c);
    ScenarioResult r{"fig2", serialize_config(c), {}, {}, {}, {}};
    struct Job {
        double t_i, n_bar;
        Variant v;
    };
    std::vector<Job> jobs;
    for (double t : c.t_i_list)
        for (double nb : c.n_bar_list) {
            jobs.push_back({t, nb, Variant::reference});
            jobs.push_back({t, nb, Variant::undamped});
            if (c.damping_enabled) jobs.push_back({t, nb, Variant::damped});
        }
    std::vector<PipelineResult> out(jobs.size(), PipelineResult{DensityOperator::pure(vacuum(Truncation(1))), {}, 0});
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        out[i] = run_pipeline(c.with_t_i(j.t_i), j.n_bar, j.v, j.v == Variant::reference ? 1 : 2);
    });
    auto table = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Job& j = jobs[i];
        const std::string name =
            detail::ti_tag(j.t_i) + "_n" + detail::tag(j.n_bar) + "_" + variant_name(j.v);
        r.scans.emplace_back(name, out[i].scan);
        nlohmann::ordered_json row{{"t_i", j.t_i},
                                   {"n_bar", j.n_bar},
                                   {"variant", variant_name(j.v)},
                                   {"phi_plus", component_phase(c.omega, j.t_i, j.n_bar)},
                                   {"mean_photons_at_readout", out[i].mean_photons},
                                   {"fit_residual", out[i].scan.fit_residual},
                                   {"peaks", peaks_json(out[i].scan)}};
        if (j.v != Variant::reference) {
            const double sep = splitting(out[i].scan);
            row["splitting"] = sep;
            row["effective_d_squared"] = 4.0 * out[i].mean_photons * std::pow(std::sin(0.5 * sep), 2);
        }
        table.push_back(row);
    }
    r.metrics["components"] = table;
    return r;
}

struct Fig3Side {
    PhaseScan scan;
    double secondary_ratio = 0.0;  // height of the mirrored feature relative to the main peak
    Trace trace;                   // P_g during the A1 transit after preparation
    double atomic_fidelity = 0.0;
};

namespace detail {

inline double mirrored_ratio(const PhaseScan& s) {
    const Peak& main = s.peaks.front();
    double best = -1e300;
    for (std::size_t i = 0; i < s.phi.size(); ++i)
        if (std::abs(s.phi[i] + main.center) <= 2.0 * main.width) best = std::max(best, s.s_g[i]);
    return std::max(0.0, best - s.baseline) / main.amplitude;
}

}  // namespace detail

inline Fig3Side run_fig3_side(const ExperimentConfig& c, double n_bar, DipoleState which) {
    const Preparation prep = which == DipoleState::plus ? Preparation::dipole_plus : Preparation::dipole_minus;
    Fig3Side side;
    side.scan = run_pipeline(c, n_bar, Variant::undamped, 1, prep).scan;
    side.secondary_ratio = detail::mirrored_ratio(side.scan);

    const auto p = CoherentParams::from_mean(n_bar);
    const Truncation tr = c.truncation(n_bar);
    const JointState s0 = detail::prepared_state(c, coherent_state(p, tr), prep);
    const Eigen::Matrix2cd a = partial_trace_atom(s0);
    Eigen::Vector2cd target(1.0, which == DipoleState::plus ? 1.0 : -1.0);
    target /= std::sqrt(2.0);
    side.atomic_fidelity = std::real(target.dot(a * target));

    const CouplingProfile prof = c.profile();
    const double h = prof.transit_half_width();
    for (double t = -h; t <= h + 1e-12; t += c.trace_step) {
        side.trace.t.push_back(t);
        side.trace.p_g.push_back(probability(evolve_area(s0, prof.pulse_area(-h, t)), Level::g));
    }
    return side;
}

/// Dipole-state preparations: each gives a single component.
inline ScenarioResult run_fig3(const ExperimentConfig& c, int threads = 0) {
    validate(c);
    ScenarioResult r{"fig3", serialize_config(c), {}, {}, {}, {}};
    std::vector<Fig3Side> sides(2);
    parallel_for(2, threads, [&](std::size_t i) {
        sides[i] = run_fig3_side(c, c.n_bar, i == 0 ? DipoleState::plus : DipoleState::minus);
    });
    const char* names[2] = {"plus", "minus"};
    for (int i = 0; i < 2; ++i) {
        r.scans.emplace_back(names[i], sides[i].scan);
        r.traces.emplace_back(names[i], sides[i].trace);
        const auto [mn, mx] = std::minmax_element(sides[i].trace.p_g.begin(), sides[i].trace.p_g.end());
        r.metrics[names[i]] = {{"peaks", peaks_json(sides[i].scan)},
                               {"fit_residual", sides[i].scan.fit_residual},
                               {"secondary_ratio", sides[i].secondary_ratio},
                               {"atomic_fidelity", sides[i].atomic_fidelity},
                               {"p_g_min", *mn},
                               {"p_g_max", *mx}};
    }
    r.metrics["phi_plus"] = component_phase(c.omega, c.interaction_time(), c.n_bar);
    return r;
}

struct RevivalReport {
    Trace trace;
    double collapse_time = 0.0;
    Revival revival;
};

inline RevivalReport analyse_revival(Trace tr, double omega, double n_bar, double t_from) {
    RevivalReport rep;
    const auto contrast = oscillation_contrast(tr.t, tr.p_g, rabi_period(omega, n_bar));
    rep.collapse_time = collapse_time(tr.t, contrast);
    const double from = std::max(t_from, std::isnan(rep.collapse_time) ? 0.0 : rep.collapse_time);
    rep.revival = find_revival(tr.t, contrast, from, tr.t.back());
    rep.trace = std::move(tr);
    return rep;
}

namespace detail {

inline std::vector<double> grid(double t_end, double step) {
    std::vector<double> t;
    const auto n = static_cast<std::size_t>(std::llround(t_end / step));
    for (std::size_t i = 0; i <= n; ++i) t.push_back(double(i) * step);
    return t;
}

/// Damped P_g trace of A1 under constant coupling, sampled every `step`.
inline Trace damped_trace(const ExperimentConfig& c, const DensityOperator& rho0, const Timeline& tl, double step) {
    Trace tr;
    StepControl ctl = c.step_control();
    ctl.sample_interval = step;
    ctl.observer = [&](double t, const DensityOperator& rho) {
        tr.t.push_back(t);
        tr.p_g.push_back(std::clamp(probability(rho, Level::g), 0.0, 1.0));
    };
    evolve_density(rho0, tl, c.damping(), ctl).check_invariants("damped trace");
    return tr;
}

}  // namespace detail

inline double spontaneous_revival_time(double omega, double n_bar) { return 4.0 * kPi * std::sqrt(n_bar) / omega; }

/// Exact P_g(t) under constant coupling (undamped and damped) with the
/// mesoscopic overlay; collapse and first spontaneous revival.
inline ScenarioResult run_collapse_revival(const ExperimentConfig& c, int threads = 0) {
    validate(c);
    ScenarioResult r{"rabi", serialize_config(c), {}, {}, {}, {}};
    const double nb = c.n_bar;
    const double horizon = c.horizon > 0.0 ? c.horizon : 1.5 * spontaneous_revival_time(c.omega, nb);
    const auto p = CoherentParams::from_mean(nb);
    const Truncation tr = c.truncation(nb);
    const auto prof = CouplingProfile::constant(c.omega);
    const JointState s0 = product_state(Level::g, coherent_state(p, tr));
    const auto t = detail::grid(horizon, c.trace_step);
    const double rev_from = 0.5 * spontaneous_revival_time(c.omega, nb);

    std::vector<RevivalReport> reports(c.damping_enabled ? 2 : 1);
    Trace approx{t, std::vector<double>(t.size())};
    parallel_for(reports.size() + 1, threads, [&](std::size_t i) {
        if (i == 0) {
            reports[0] = analyse_revival(Trace{t, rabi_trace(s0, prof, t)}, c.omega, nb, rev_from);
        } else if (i == 1 && c.damping_enabled) {
            const Timeline tl{Segment::coupled(prof, 0.0, horizon)};
            reports[1] = analyse_revival(detail::damped_trace(c, DensityOperator::pure(s0), tl, c.trace_step), c.omega,
                                         nb, rev_from);
        } else if (nb >= 4.0) {
            for (std::size_t k = 0; k < t.size(); ++k) approx.p_g[k] = approx_Pg(p, c.omega, t[k], tr);
        }
    });
    const char* names[2] = {"undamped", "damped"};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        r.traces.emplace_back(names[i], reports[i].trace);
        r.metrics[names[i]] = {{"collapse_time", reports[i].collapse_time},
                               {"revival_time", reports[i].revival.center},
                               {"contrast_maximum_time", reports[i].revival.time},
                               {"revival_contrast", reports[i].revival.contrast}};
    }
    if (nb >= 4.0) r.traces.emplace_back("approx", approx);
    r.metrics["predicted_revival_time"] = spontaneous_revival_time(c.omega, nb);
    if (nb >= 4.0) {
        auto scales = nlohmann::ordered_json::array();
        for (double s : c.classical_scales) {
            const ClassicalLimitPoint pt = classical_limit_check(s, c.omega, nb, c.interaction_time());
            scales.push_back({{"scale", s},
                              {"omega", pt.omega},
                              {"n_bar", pt.n_bar},
                              {"rabi_frequency", pt.rabi_frequency},
                              {"phi_plus", pt.phi_plus},
                              {"collapse_time", pt.collapse_time}});
        }
        r.metrics["classical_limit"] = scales;
    }
    return r;
}

struct EchoReport {
    Trace trace;
    Revival revival;
};

inline EchoReport analyse_echo(Trace tr, double omega, double n_bar, double T) {
    const auto contrast = oscillation_contrast(tr.t, tr.p_g, rabi_period(omega, n_bar));
    EchoReport e{std::move(tr), {}};
    e.revival = find_revival(e.trace.t, contrast, 1.5 * T, 2.5 * T);
    return e;
}

inline EchoReport damped_echo(const ExperimentConfig& c, double T) {
    const auto p = CoherentParams::from_mean(c.n_bar);
    const Truncation tr = c.truncation(c.n_bar);
    const auto prof = CouplingProfile::constant(c.omega);
    const auto rho0 = DensityOperator::pure(product_state(Level::g, coherent_state(p, tr)));
    const Timeline tl{Segment::coupled(prof, 0.0, T), StarkPulse{kPi}, Segment::coupled(prof, T, 2.5 * T)};
    return analyse_echo(detail::damped_trace(c, rho0, tl, c.trace_step), c.omega, c.n_bar, T);
}

/// Echo at echo_time (undamped, damped) and the damped sweep over echo_times.
inline ScenarioResult run_echo(const ExperimentConfig& c, int threads = 0) {
    validate(c);
    ScenarioResult r{"echo", serialize_config(c), {}, {}, {}, {}};
    const auto p = CoherentParams::from_mean(c.n_bar);
    const Truncation tr = c.truncation(c.n_bar);
    const double T = c.echo_time;

    // the damped sweep always includes echo_time, whose trace is written out
    std::vector<double> sweep = c.damping_enabled ? c.echo_times : std::vector<double>{};
    if (c.damping_enabled && std::find(sweep.begin(), sweep.end(), T) == sweep.end()) sweep.push_back(T);
    std::vector<EchoReport> damped(sweep.size());
    EchoReport undamped;
    parallel_for(damped.size() + 1, threads, [&](std::size_t i) {
        if (i == 0) {
            const JointState s0 = product_state(Level::g, coherent_state(p, tr));
            undamped = analyse_echo(echo_sequence(s0, CouplingProfile::constant(c.omega), T, c.trace_step), c.omega,
                                    c.n_bar, T);
        } else {
            damped[i - 1] = damped_echo(c, sweep[i - 1]);
        }
    });
    r.traces.emplace_back("undamped", undamped.trace);
    r.metrics["undamped"] = {{"revival_time", undamped.revival.center},
                             {"revival_contrast", undamped.revival.contrast}};
    if (c.damping_enabled) {
        const auto at_T = std::size_t(std::find(sweep.begin(), sweep.end(), T) - sweep.begin());
        r.traces.emplace_back("damped", damped[at_T].trace);
        r.metrics["damped"] = {{"revival_time", damped[at_T].revival.center},
                               {"revival_contrast", damped[at_T].revival.contrast}};
        auto arr = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < sweep.size(); ++i)
            arr.push_back({{"T", sweep[i]},
                           {"revival_time", damped[i].revival.center},
                           {"revival_contrast", damped[i].revival.contrast}});
        r.metrics["damped_sweep"] = arr;
    }
    r.metrics["echo_time"] = T;
    return r;
}

// ---------------------------------------------------------------------------
// Cat states: size, fringe decay, Wigner snapshot

struct DecoherenceFit {
    double n_bar = 0.0;
    double phi = 0.0;
    double d_squared = 0.0;
    double predicted = 0.0;  // 2 T_cav / d^2
    double fitted = 0.0;
    std::vector<double> t;
    std::vector<double> amplitude;
};

/// Even cat (|a e^{i phi}> + |a e^{-i phi}>)/N under field damping; the
/// fringe amplitude at the shrinking component midpoint is fitted to an
/// exponential over [0, span * 2 T_cav / d^2].
inline DecoherenceFit fit_decoherence(const ExperimentConfig& c, double n_bar, double phi, int samples = 16,
                                      double span = 1.5) {
    DecoherenceFit f;
    f.n_bar = n_bar;
    f.phi = phi;
    const Complex b1 = std::polar(std::sqrt(n_bar), phi), b2 = std::polar(std::sqrt(n_bar), -phi);
    f.d_squared = std::norm(b1 - b2);
    f.predicted = 2.0 * c.t_cav / f.d_squared;
    const Truncation tr = c.truncation(n_bar);
    const CVector v = coherent_state(CoherentParams(b1), tr).amplitudes() + coherent_state(CoherentParams(b2), tr).amplitudes();
    const DensityOperator rho0 = DensityOperator::pure(FieldState(v.normalized(), tr));
    const double kappa = 1.0 / c.t_cav;
    StepControl ctl = c.step_control();
    ctl.sample_interval = span * f.predicted / (samples - 1);
    ctl.observer = [&](double t, const DensityOperator& rho) {
        const double shrink = std::exp(-0.5 * kappa * t);
        f.t.push_back(t);
        f.amplitude.push_back(fringe_amplitude(rho, b1 * shrink, b2 * shrink).amplitude);
    };
    DampingParams d = c.damping();
    evolve_density(rho0, {Segment::free(span * f.predicted)}, d, ctl).check_invariants("cat decay");
    // least squares of ln A = a - t / tau
    Eigen::MatrixXd a(Eigen::Index(f.t.size()), 2);
    Eigen::VectorXd y(Eigen::Index(f.t.size()));
    for (std::size_t i = 0; i < f.t.size(); ++i) {
        a(Eigen::Index(i), 0) = 1.0;
        a(Eigen::Index(i), 1) = f.t[i];
        y[Eigen::Index(i)] = std::log(f.amplitude[i]);
    }
    const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(y);
    f.fitted = -1.0 / sol[1];
    return f;
}

struct WignerSnapshot {
    WignerGrid grid;
    double probability_g = 0.0;
    double lobe_peak = 0.0;
    double fringe_extremum = 0.0;  // max |W| within 0.75 of the state's mean amplitude
    int lobes = 0;  // maxima above half the peak, away from the fringe region
};

/// Damped A1 transit, atom found in g `wigner_delay` after the axis crossing.
inline WignerSnapshot wigner_snapshot(const ExperimentConfig& c, double n_bar) {
    const auto p = CoherentParams::from_mean(n_bar);
    const Truncation tr = c.truncation(n_bar);
    const CouplingProfile prof = c.profile();
    const double h = prof.transit_half_width();
    Timeline tl{Injection{p.alpha()}, Segment::free(c.f1_lead), Segment::coupled(prof, -h, c.wigner_delay)};
    const auto rho0 = DensityOperator::pure(product_state(Level::g, vacuum(tr)));
    const DampingParams d = c.damping_enabled ? c.damping() : DampingParams::none();
    const DensityOperator joint = evolve_density(rho0, tl, d, c.step_control());
    WignerSnapshot w;
    w.probability_g = probability(joint, Level::g);
    const DensityOperator field = conditional_field_state(joint, Level::g);
    const auto axis = linspace(-c.wigner_extent, c.wigner_extent, c.wigner_points);
    w.grid = wigner(field, axis, axis);
    const Complex mid = mean_amplitude(field);
    const RMatrix& v = w.grid.values;
    w.lobe_peak = v.maxCoeff();
    for (Eigen::Index iy = 0; iy < v.rows(); ++iy)
        for (Eigen::Index ix = 0; ix < v.cols(); ++ix) {
            const Complex b(axis[std::size_t(ix)], axis[std::size_t(iy)]);
            if (std::abs(b - mid) <= 0.75) w.fringe_extremum = std::max(w.fringe_extremum, std::abs(v(iy, ix)));
            // lobes: local maxima above half the global maximum
            if (ix == 0 || iy == 0 || ix + 1 == v.cols() || iy + 1 == v.rows()) continue;
            const double x = v(iy, ix);
            if (x < 0.5 * w.lobe_peak || std::abs(b - mid) <= 1.0) continue;
            if (x > v(iy - 1, ix) && x > v(iy + 1, ix) && x > v(iy, ix - 1) && x > v(iy, ix + 1)) ++w.lobes;
        }
    return w;
}

/// d^2 sweeps, cat decoherence fits for the t_i_list cats, and the Wigner snapshot.
inline ScenarioResult run_cat_metrics(const ExperimentConfig& c, int threads = 0) {
    validate(c);
    ScenarioResult r{"cat", serialize_config(c), {}, {}, {}, {}};
    auto sweeps = nlohmann::ordered_json::array();
    for (double ti : c.t_i_list) {
        auto pts = nlohmann::ordered_json::array();
        double lo = 1e300, hi = 0.0;
        for (int nb = 15; nb <= 36; ++nb) {
            const CatMetrics m = cat_metrics(c.omega, ti, nb, c.t_cav);
            lo = std::min(lo, m.d_squared);
            hi = std::max(hi, m.d_squared);
            pts.push_back({{"n_bar", nb}, {"d_squared", m.d_squared}, {"decoherence_time", m.decoherence_time}});
        }
        sweeps.push_back({{"t_i", ti}, {"d_squared_min", lo}, {"d_squared_max", hi}, {"ratio", hi / lo}, {"points", pts}});
    }
    r.metrics["d_squared"] = sweeps;

    std::vector<DecoherenceFit> fits(c.t_i_list.size());
    WignerSnapshot snap;
    parallel_for(fits.size() + 1, threads, [&](std::size_t i) {
        if (i == fits.size()) {
            snap = wigner_snapshot(c, c.n_bar);
            return;
        }
        const double nb = c.cat_n_bars[i];
        fits[i] = fit_decoherence(c, nb, component_phase(c.omega, c.t_i_list[i], nb));
    });
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        arr.push_back({{"t_i", c.t_i_list[i]},
                       {"n_bar", fits[i].n_bar},
                       {"d_squared", fits[i].d_squared},
                       {"predicted", fits[i].predicted},
                       {"fitted", fits[i].fitted},
                       {"sample_times", fits[i].t},
                       {"fringe_amplitudes", fits[i].amplitude}});
    }
    r.metrics["decoherence"] = arr;
    r.wigners.emplace_back("inset", snap.grid);
    r.metrics["wigner"] = {{"n_bar", c.n_bar},
                           {"delay", c.wigner_delay},
                           {"probability_g", snap.probability_g},
                           {"lobe_peak", snap.lobe_peak},
                           {"fringe_extremum", snap.fringe_extremum},
                           {"lobes", snap.lobes},
                           {"integral", snap.grid.integral()}};
    return r;
}

}  // namespace cqed
