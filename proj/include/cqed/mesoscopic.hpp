// mesoscopic.hpp: second-order expansion of the exact dynamics around n_bar.
//
// Replacing sqrt(n+1) by sqrt(n) + 1/(2 sqrt(n_bar)) and expanding to second
// order in (n - n_bar) splits |g>|alpha> into two quasi-coherent field
// components, each locked to a rotating atomic dipole state:
//
//   |psi(t)> = [e^{-i W sqrt(nb)/2} |a+>|p+> - e^{+i W sqrt(nb)/2} |a->|p->] / sqrt2,  W = Omega t
//   |a+-> = e^{-nb/2} e^{+-i W sqrt(nb)/4} sum_n e^{+-i W (n-nb)^2 / (16 nb^{3/2})} (alpha e^{-+i W/(4 sqrt nb)})^n / sqrt(n!) |n>
//   |p+-> = (e^{-+i W/(4 sqrt nb)} |e> +- |g>) / sqrt2
//   P_g   = [1 + Re(e^{-i W sqrt(nb)} <a-|a+>)] / 2

#pragma once

#include "cqed/core.hpp"
#include "cqed/fock_space.hpp"
#include "cqed/jaynes_cummings.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cqed {

enum class Branch { plus = +1, minus = -1 };

inline double sign_of(Branch b) { return b == Branch::plus ? 1.0 : -1.0; }

/// Phi+ = Omega t / (4 sqrt(n_bar)); the minus component sits at -Phi+.
inline double component_phase(double omega, double t, double n_bar) {
    if (n_bar <= 0.0) throw ZeroField("component_phase: n_bar must be > 0");
    return omega * t / (4.0 * std::sqrt(n_bar));
}

/// Field component |alpha+-(t)>, built term by term (the quadratic phase makes
/// it only quasi-coherent) and renormalized after truncation.
inline FieldState approx_field_component(Branch sign, const CoherentParams& p, double omega, double t,
                                         Truncation trunc) {
    const double nb = p.n_bar();
    if (nb < 4.0)
        throw FieldTooSmall("approx_field_component: n_bar=" + std::to_string(nb) + " is below the mesoscopic regime");
    require_truncation(trunc, nb, "approx_field_component");
    const double s = sign_of(sign);
    const double w = omega * t;
    const double drift = w / (4.0 * std::sqrt(nb));
    const double spread = w / (16.0 * std::pow(nb, 1.5));
    const double r = std::abs(p.alpha()), theta = std::arg(p.alpha());
    CVector v(trunc.dim());
    for (int n = 0; n <= trunc.n_max; ++n) {
        const double log_mag = -0.5 * nb + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
        const double dn = n - nb;
        const double phase = s * w * std::sqrt(nb) / 4.0 + s * spread * dn * dn + n * (theta - s * drift);
        v[n] = std::polar(std::exp(log_mag), phase);
    }
    return FieldState(v.normalized(), trunc);
}

/// |phi_a+-(t)> as (c_e, c_g).
inline Eigen::Vector2cd approx_atom_state(Branch sign, double omega, double t, double n_bar) {
    const double phi = component_phase(omega, t, n_bar);
    const double s = sign_of(sign);
    Eigen::Vector2cd v;
    v << std::polar(1.0, -s * phi), s;
    return v / std::sqrt(2.0);
}

struct SplitComponents {
    FieldState plus_field;
    FieldState minus_field;
    Eigen::Vector2cd plus_atom;
    Eigen::Vector2cd minus_atom;
    Complex plus_global;   // e^{-i Omega sqrt(nb) t / 2}
    Complex minus_global;  // e^{+i Omega sqrt(nb) t / 2}
};

inline SplitComponents split_components(const CoherentParams& p, double omega, double t, Truncation trunc) {
    const double nb = p.n_bar();
    const double half = 0.5 * omega * std::sqrt(nb) * t;
    return SplitComponents{approx_field_component(Branch::plus, p, omega, t, trunc),
                           approx_field_component(Branch::minus, p, omega, t, trunc),
                           approx_atom_state(Branch::plus, omega, t, nb),
                           approx_atom_state(Branch::minus, omega, t, nb),
                           std::polar(1.0, -half),
                           std::polar(1.0, half)};
}

/// The approximate joint state (not renormalized, so its norm measures the
/// quality of the expansion).
inline JointState reassemble(const SplitComponents& c) {
    const Truncation t = c.plus_field.truncation();
    const double r = 1.0 / std::sqrt(2.0);
    CVector v(2 * t.dim());
    const CVector& ap = c.plus_field.amplitudes();
    const CVector& am = c.minus_field.amplitudes();
    v.head(t.dim()) = r * (c.plus_global * c.plus_atom[0] * ap - c.minus_global * c.minus_atom[0] * am);
    v.tail(t.dim()) = r * (c.plus_global * c.plus_atom[1] * ap - c.minus_global * c.minus_atom[1] * am);
    return JointState(std::move(v), t);
}

inline JointState approx_joint_state(const CoherentParams& p, double omega, double t, Truncation trunc) {
    return reassemble(split_components(p, omega, t, trunc));
}

/// <alpha-(t)|alpha+(t)>
inline Complex component_overlap(const CoherentParams& p, double omega, double t, Truncation trunc) {
    return overlap(approx_field_component(Branch::minus, p, omega, t, trunc),
                   approx_field_component(Branch::plus, p, omega, t, trunc));
}

inline double approx_Pg(const CoherentParams& p, double omega, double t, Truncation trunc) {
    const double w = omega * t;
    const Complex ov = component_overlap(p, omega, t, trunc);
    const double pg = 0.5 * (1.0 + std::real(std::polar(1.0, -w * std::sqrt(p.n_bar())) * ov));
    return std::clamp(pg, 0.0, 1.0);
}

struct CatMetrics {
    double d_squared = 0.0;
    double decoherence_time = 0.0;  // +inf when the components coincide
    double phi_plus = 0.0;
};

/// d^2 = 4 n_bar sin^2(Phi+), decoherence time 2 T_cav / d^2.
/// Throws ZeroSeparation for d^2 < 1e-12 unless `allow_zero`, in which case the
/// decoherence time is reported as +inf.
inline CatMetrics cat_metrics(double omega, double t, double n_bar, double t_cav, bool allow_zero = false) {
    if (t_cav <= 0.0) throw std::invalid_argument("cat_metrics: t_cav must be > 0");
    CatMetrics m;
    m.phi_plus = component_phase(omega, t, n_bar);
    const double s = std::sin(m.phi_plus);
    m.d_squared = 4.0 * n_bar * s * s;
    if (m.d_squared < 1e-12) {
        if (!allow_zero) throw ZeroSeparation("cat_metrics: the two field components coincide (d^2 < 1e-12)");
        m.decoherence_time = std::numeric_limits<double>::infinity();
    } else {
        m.decoherence_time = 2.0 * t_cav / m.d_squared;
    }
    return m;
}

/// First time |<alpha-|alpha+>| drops below `threshold` (the envelope of the
/// approximate Rabi oscillation), located by bracketing on a coarse grid and
/// then bisection.
inline double approx_collapse_time(const CoherentParams& p, double omega, Truncation trunc, double threshold = 0.1) {
    const auto env = [&](double t) { return std::abs(component_overlap(p, omega, t, trunc)); };
    // the envelope is exp(-(Omega t)^2 / 8) to leading order
    const double step = 0.05 / omega;
    double lo = 0.0, hi = step;
    while (env(hi) >= threshold) {
        lo = hi;
        hi += step;
        if (hi * omega > 1e3) throw InvariantViolation("approx_collapse_time: envelope never collapses");
    }
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (env(mid) >= threshold ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct ClassicalLimitPoint {
    double scale = 1.0;
    double omega = 0.0;
    double n_bar = 0.0;
    double rabi_frequency = 0.0;  // Omega sqrt(n_bar)
    double phi_plus = 0.0;        // at the fixed reference time
    double collapse_time = 0.0;
};

/// Omega -> Omega / scale, n_bar -> n_bar scale^2: the classical Rabi frequency
/// Omega sqrt(n_bar) is invariant while Phi+ shrinks as 1/scale^2 and the
/// collapse time grows as scale.
inline ClassicalLimitPoint classical_limit_check(double scale, double omega, double n_bar, double t_fixed) {
    if (scale < 1.0) throw std::invalid_argument("classical_limit_check: scale must be >= 1");
    ClassicalLimitPoint pt;
    pt.scale = scale;
    pt.omega = omega / scale;
    pt.n_bar = n_bar * scale * scale;
    pt.rabi_frequency = pt.omega * std::sqrt(pt.n_bar);
    pt.phi_plus = component_phase(pt.omega, t_fixed, pt.n_bar);
    const auto p = CoherentParams::from_mean(pt.n_bar);
    pt.collapse_time = approx_collapse_time(p, pt.omega, truncation_for(pt.n_bar));
    return pt;
}

}  // namespace cqed
