// cqed: command-line front end for the scenarios.
//
//   cqed <subcommand> [--config FILE] [--out DIR] [--threads N]
//        [--set key=value ...] [--<key-with-dashes> value ...]
//
// Precedence: built-in defaults < config file < --set < named flags.
// Exit codes: 0 success, 1 numerical/validation failure, 2 usage error.

#include "CLI11.hpp"
#include "cqed/experiments.hpp"
#include "selftest.hpp"

#include <cstdio>
#include <iostream>
#include <map>

namespace {

using namespace cqed;

std::string dashed(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

void print_peaks(const char* label, const PhaseScan& s) {
    std::printf("  %-10s", label);
    for (const auto& p : s.peaks) std::printf(" %+.4f", p.center);
    std::printf(" rad  (fit rms %.3g)\n", s.fit_residual);
}

int run_split(const ExperimentConfig& c, int threads, const std::filesystem::path& out) {
    ScenarioResult r{"split", serialize_config(c), {}, {}, {}, {}};
    std::vector<Variant> variants{Variant::reference, Variant::undamped};
    if (c.damping_enabled) variants.push_back(Variant::damped);
    std::vector<PipelineResult> res(variants.size(), PipelineResult{DensityOperator::pure(vacuum(Truncation(1))), {}, 0});
    parallel_for(variants.size(), threads, [&](std::size_t i) {
        res[i] = run_pipeline(c, c.n_bar, variants[i], variants[i] == Variant::reference ? 1 : 2);
    });
    const double phi = component_phase(c.omega, c.interaction_time(), c.n_bar);
    std::printf("n_bar = %g, t_i = %.4g s, Phi+ = %.4f rad\n", c.n_bar, c.interaction_time(), phi);
    for (std::size_t i = 0; i < variants.size(); ++i) {
        r.scans.emplace_back(variant_name(variants[i]), res[i].scan);
        r.metrics[variant_name(variants[i])] = {{"peaks", peaks_json(res[i].scan)},
                                                {"fit_residual", res[i].scan.fit_residual},
                                                {"mean_photons_at_readout", res[i].mean_photons}};
        print_peaks(variant_name(variants[i]), res[i].scan);
    }
    r.metrics["phi_plus"] = phi;
    write_result(r, out);
    return 0;
}

void summarize(const ScenarioResult& r) {
    const auto& m = r.metrics;
    if (r.id == "fig2") {
        for (const auto& row : m["components"]) {
            std::printf("  t_i=%.3g n=%-4g %-9s", row["t_i"].get<double>(), row["n_bar"].get<double>(),
                        row["variant"].get<std::string>().c_str());
            for (const auto& p : row["peaks"]) std::printf(" %+.4f", p["center"].get<double>());
            std::printf("  (Phi+ %.4f)\n", row["phi_plus"].get<double>());
        }
    } else if (r.id == "fig3") {
        for (const char* side : {"plus", "minus"})
            std::printf("  %-5s peak %+.4f rad, secondary %.3f, P_g in [%.3f, %.3f], atomic fidelity %.4f\n", side,
                        m[side]["peaks"][0]["center"].get<double>(), m[side]["secondary_ratio"].get<double>(),
                        m[side]["p_g_min"].get<double>(), m[side]["p_g_max"].get<double>(),
                        m[side]["atomic_fidelity"].get<double>());
    } else if (r.id == "rabi" || r.id == "echo") {
        for (const char* v : {"undamped", "damped"})
            if (m.contains(v))
                std::printf("  %-9s revival at %.4g s, contrast %.3f\n", v, m[v]["revival_time"].get<double>(),
                            m[v]["revival_contrast"].get<double>());
    } else if (r.id == "cat") {
        for (const auto& s : m["d_squared"])
            std::printf("  t_i=%.3g  d^2 in [%.2f, %.2f]\n", s["t_i"].get<double>(), s["d_squared_min"].get<double>(),
                        s["d_squared_max"].get<double>());
        for (const auto& d : m["decoherence"])
            std::printf("  cat n=%g d^2=%.2f  decoherence time %.4g s (2 T_cav / d^2 = %.4g s)\n",
                        d["n_bar"].get<double>(), d["d_squared"].get<double>(), d["fitted"].get<double>(),
                        d["predicted"].get<double>());
    }
    if (m.contains("wigner"))
        std::printf("  Wigner: lobe peak %.3f, fringe extremum %.3f, %d lobes\n", m["wigner"]["lobe_peak"].get<double>(),
                    m["wigner"]["fringe_extremum"].get<double>(), m["wigner"]["lobes"].get<int>());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Atom / cavity-field simulator: phase splitting, cats, collapse and revival"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, out_dir;
    int threads = 0;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flag_values;
    app.add_option("--config", config_path, "flat key = value configuration file");
    app.add_option("--out", out_dir, "output directory (default out/<subcommand>)");
    app.add_option("--threads", threads, "cap on worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--set", sets, "override key=value (repeatable)");
    for (const auto& k : detail::config_keys())
        app.add_option("--" + dashed(k.name), flag_values[k.name], k.help);

    const std::vector<std::pair<const char*, const char*>> subs{
        {"rabi", "collapse and spontaneous revival of the Rabi oscillation"},
        {"split", "phase splitting for one photon number and interaction time"},
        {"fig2", "phase scans over n_bar_list x t_i_list"},
        {"fig3", "dipole-state preparations"},
        {"echo", "echo sequence"},
        {"cat", "cat size, decoherence fits and Wigner snapshot"},
        {"wigner", "Wigner snapshot of the conditioned field"},
        {"selftest", "invariant suite"}};
    for (const auto& [name, help] : subs) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        if (cmd == "selftest") return selftest::run() == 0 ? 0 : 1;

        ExperimentConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            set_config_value(cfg, detail::trim(s.substr(0, eq)), s.substr(eq + 1));
        }
        for (const auto& k : detail::config_keys())
            if (app.count("--" + dashed(k.name)) > 0) set_config_value(cfg, k.name, flag_values[k.name]);
        validate(cfg);

        const std::filesystem::path out = out_dir.empty() ? std::filesystem::path("out") / cmd : std::filesystem::path(out_dir);
        if (cmd == "split") return run_split(cfg, threads, out);

        ScenarioResult r;
        if (cmd == "rabi") r = run_collapse_revival(cfg, threads);
        else if (cmd == "fig2") r = run_fig2(cfg, threads);
        else if (cmd == "fig3") r = run_fig3(cfg, threads);
        else if (cmd == "echo") r = run_echo(cfg, threads);
        else if (cmd == "cat") r = run_cat_metrics(cfg, threads);
        else if (cmd == "wigner") {
            const WignerSnapshot w = wigner_snapshot(cfg, cfg.n_bar);
            r = ScenarioResult{"wigner", serialize_config(cfg), {}, {}, {{"inset", w.grid}}, {}};
            r.metrics["wigner"] = {{"n_bar", cfg.n_bar},         {"delay", cfg.wigner_delay},
                                   {"probability_g", w.probability_g}, {"lobe_peak", w.lobe_peak},
                                   {"fringe_extremum", w.fringe_extremum}, {"lobes", w.lobes},
                                   {"integral", w.grid.integral()}};
        }
        write_result(r, out);
        std::printf("%s -> %s\n", r.id.c_str(), out.string().c_str());
        summarize(r);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
