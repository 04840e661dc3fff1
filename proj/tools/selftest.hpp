// Quick invariant checks over every module, run by `cqed selftest`.

#pragma once

#include "cqed/experiments.hpp"

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace selftest {

using namespace cqed;

struct Check {
    std::string name;
    std::function<double()> measure;  // returns the observed error
    double tolerance;
};

inline std::vector<Check> checks() {
    std::vector<Check> c;
    const Truncation t36 = truncation_for(36.0);
    const auto coh36 = coherent_state(CoherentParams::from_mean(36.0), t36);

    c.push_back({"fock_space: coherent-state norm", [=] { return std::abs(coh36.norm() - 1.0); }, 1e-8});
    c.push_back({"fock_space: overlap law exp(-n(1-cos theta))",
                 [=] {
                     double worst = 0.0;
                     for (double th = 0.0; th < kPi; th += 0.1) {
                         const auto b = coherent_state(CoherentParams::from_mean(36.0, th), t36);
                         worst = std::max(worst, std::abs(std::abs(overlap(coh36, b)) - std::exp(-36.0 * (1 - std::cos(th)))));
                     }
                     return worst;
                 },
                 1e-8});
    c.push_back({"fock_space: displacement composition",
                 [] {
                     const Truncation t(80);
                     const auto s = coherent_state(CoherentParams(Complex(1.0, 0.5)), t);
                     const auto a = displace(displace(s, Complex(0.7, -0.2)), Complex(-0.3, 0.9));
                     const auto b = displace(s, Complex(0.4, 0.7));
                     return 1.0 - fidelity(a, b);
                 },
                 1e-6});
    c.push_back({"jaynes_cummings: unitarity and excitation number",
                 [=] {
                     const auto s0 = product_state(Level::g, coh36);
                     const auto s1 = evolve_area(s0, 9.6);
                     return std::max(std::abs(s1.norm() - s0.norm()),
                                     std::abs(mean_excitation(s1) - mean_excitation(s0)));
                 },
                 1e-8});
    c.push_back({"jaynes_cummings: Gaussian transit equals constant coupling over t_i",
                 [=] {
                     const auto g = CouplingProfile::gaussian(3e5, 6e-3, 335.0);
                     const auto s0 = product_state(Level::g, coh36);
                     const auto a = evolve(s0, g, std::numeric_limits<double>::infinity());
                     const auto b = evolve(s0, CouplingProfile::constant(3e5), g.interaction_time());
                     return 1.0 - std::norm(a.amplitudes().dot(b.amplitudes()));
                 },
                 1e-9});
    c.push_back({"mesoscopic: t = 0 reduces to |g>|alpha>",
                 [=] {
                     const auto s = approx_joint_state(CoherentParams::from_mean(36.0), 3e5, 0.0, t36);
                     return 1.0 - std::norm(s.amplitudes().dot(product_state(Level::g, coh36).amplitudes()));
                 },
                 1e-10});
    c.push_back({"mesoscopic: d^2 = 4 n sin^2(Phi+)",
                 [] { return std::abs(cat_metrics(3e5, 32e-6, 36.0, 850e-6).d_squared - 144.0 * std::pow(std::sin(0.4), 2)); },
                 1e-12});
    c.push_back({"lindblad: zero-damping evolution equals unitary evolution",
                 [] {
                     const Truncation t(30);
                     const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(4.0), t));
                     const auto prof = CouplingProfile::constant(3e5);
                     const auto rho = evolve_density(DensityOperator::pure(s0), {Segment::coupled(prof, 0.0, 10e-6)},
                                                     DampingParams::none());
                     return trace_distance(rho, DensityOperator::pure(evolve_area(s0, 3.0)));
                 },
                 1e-6});
    c.push_back({"lindblad: trace, Hermiticity and positivity under damping",
                 [] {
                     const Truncation t(30);
                     const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(4.0), t));
                     const auto prof = CouplingProfile::constant(3e5);
                     const auto rho =
                         evolve_density(DensityOperator::pure(s0), {Segment::coupled(prof, 0.0, 20e-6)},
                                        DampingParams::from_cavity(850e-6, 0.0171));
                     return std::max({std::abs(rho.trace() - 1.0), rho.hermiticity_error(), -rho.min_eigenvalue()});
                 },
                 1e-6});
    c.push_back({"measurement: vacuum Wigner function at the origin is 2/pi",
                 [] { return std::abs(wigner_at(DensityOperator::pure(vacuum(Truncation(10))).matrix(), 0.0) - 2.0 / kPi); },
                 1e-6});
    c.push_back({"measurement: Wigner function integrates to one",
                 [=] {
                     const auto ax = linspace(-4.0, 16.0, 201);
                     const auto ay = linspace(-10.0, 10.0, 201);
                     return std::abs(wigner(coh36, ax, ay).integral() - 1.0);
                 },
                 2e-2});
    c.push_back({"measurement: phase distribution normalisation",
                 [=] {
                     const auto grid = phase_grid(512);
                     const auto p = phase_distribution(coh36, grid);
                     double s = 0.0;
                     for (double v : p) s += v * 2.0 * kPi / 512;
                     return std::abs(s - 1.0);
                 },
                 1e-6});
    c.push_back({"experiments: config round trip",
                 [] {
                     ExperimentConfig cfg;
                     cfg.n_bar_list = {15.5, 22.25};
                     cfg.condition_on = "g";
                     const std::string s = serialize_config(cfg);
                     return s == serialize_config(parse_config(s)) ? 0.0 : 1.0;
                 },
                 0.0});
    c.push_back({"experiments: undamped pipeline peaks at +/-Phi+ (n=36, t=32us)",
                 [] {
                     ExperimentConfig cfg;
                     cfg.t_i = 32e-6;
                     const auto r = run_pipeline(cfg, 36.0, Variant::undamped, 2);
                     return std::max(std::abs(r.scan.peaks[1].center - 0.4), std::abs(r.scan.peaks[0].center + 0.4));
                 },
                 0.02});
    return c;
}

/// Runs every check, prints one line each, returns the number of failures.
inline int run() {
    int failures = 0;
    for (const auto& ch : checks()) {
        bool ok = false;
        std::string detail;
        try {
            const double err = ch.measure();
            ok = err <= ch.tolerance;
            char buf[96];
            std::snprintf(buf, sizeof buf, "error %.3g (tolerance %.3g)", err, ch.tolerance);
            detail = buf;
        } catch (const std::exception& e) {
            detail = std::string("threw: ") + e.what();
        }
        std::printf("%s  %s: %s\n", ok ? "PASS" : "FAIL", ch.name.c_str(), detail.c_str());
        failures += ok ? 0 : 1;
    }
    std::printf("%d/%zu checks passed\n", int(checks().size()) - failures, checks().size());
    return failures;
}

}  // namespace selftest
