// jaynes_cummings.hpp: exact resonant atom-field dynamics.
//
// The resonant Hamiltonian H/hbar = (Omega(t)/2)(a^dag sigma- + a sigma+) is
// block diagonal over the pairs {|g,n+1>, |e,n>}, and its time dependence is a
// scalar envelope, so evolution over any interval only depends on the pulse
// area A = \int Omega dt: each block rotates by theta_n = A sqrt(n+1) / 2.
// All states live in the interaction picture.

#pragma once

#include "cqed/core.hpp"
#include "cqed/fock_space.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cqed {

enum class Level { e = 0, g = 1 };

/// Atom+field amplitudes; index(level, n) = level * (n_max + 1) + n with e -> 0, g -> 1.
class JointState {
public:
    JointState(CVector amplitudes, Truncation trunc) : amps_(std::move(amplitudes)), trunc_(trunc) {
        if (amps_.size() != 2 * trunc_.dim())
            throw DimensionMismatch("JointState: amplitude vector length does not match truncation");
    }

    [[nodiscard]] static Eigen::Index index(Level l, int n, Truncation t) {
        return static_cast<Eigen::Index>(l) * t.dim() + n;
    }
    [[nodiscard]] Eigen::Index index(Level l, int n) const { return index(l, n, trunc_); }

    [[nodiscard]] const CVector& amplitudes() const { return amps_; }
    [[nodiscard]] CVector& amplitudes() { return amps_; }
    [[nodiscard]] const Truncation& truncation() const { return trunc_; }
    [[nodiscard]] Complex amplitude(Level l, int n) const { return amps_[index(l, n)]; }
    [[nodiscard]] double norm() const { return amps_.norm(); }

    /// Field amplitudes attached to one atomic level (unnormalized).
    [[nodiscard]] CVector level_block(Level l) const {
        return amps_.segment(static_cast<Eigen::Index>(l) * trunc_.dim(), trunc_.dim());
    }

private:
    CVector amps_;
    Truncation trunc_;
};

/// (c_e |e> + c_g |g>) (x) field
inline JointState product_state(Complex c_e, Complex c_g, const FieldState& field) {
    const Truncation t = field.truncation();
    CVector v(2 * t.dim());
    v.head(t.dim()) = c_e * field.amplitudes();
    v.tail(t.dim()) = c_g * field.amplitudes();
    return JointState(std::move(v), t);
}

inline JointState product_state(Level l, const FieldState& field) {
    return l == Level::e ? product_state(1.0, 0.0, field) : product_state(0.0, 1.0, field);
}

inline double probability(const JointState& s, Level l) {
    return s.level_block(l).squaredNorm() / s.amplitudes().squaredNorm();
}

inline double mean_excitation(const JointState& s) {
    const Truncation t = s.truncation();
    double m = 0.0;
    for (int n = 0; n <= t.n_max; ++n)
        m += (n + 1.0) * std::norm(s.amplitude(Level::e, n)) + n * std::norm(s.amplitude(Level::g, n));
    return m;
}

/// Coupling envelope of one atomic transit. For the Gaussian mode, time is
/// measured from the instant the atom crosses the cavity axis.
struct CouplingProfile {
    enum class Kind { Constant, GaussianMode };

    Kind kind = Kind::Constant;
    double omega = 0.0;     // vacuum Rabi angular frequency (rad/s)
    double waist = 0.0;     // m
    double velocity = 0.0;  // m/s

    static CouplingProfile constant(double omega) { return {Kind::Constant, omega, 0.0, 0.0}; }

    static CouplingProfile gaussian(double omega, double waist, double velocity) {
        if (waist <= 0.0 || velocity <= 0.0)
            throw std::invalid_argument("CouplingProfile: waist and velocity must be positive");
        return {Kind::GaussianMode, omega, waist, velocity};
    }

    /// t_i = sqrt(pi) w / v
    [[nodiscard]] double interaction_time() const {
        if (kind == Kind::Constant) return std::numeric_limits<double>::infinity();
        return std::sqrt(kPi) * waist / velocity;
    }

    /// Half-width of the in-mode window (atom counts as inside for |t| < 3 w / v).
    [[nodiscard]] double transit_half_width() const { return 3.0 * waist / velocity; }

    [[nodiscard]] double coupling(double t) const {
        if (kind == Kind::Constant) return omega;
        const double x = velocity * t / waist;
        return omega * std::exp(-x * x);
    }

    /// max of coupling() over [t0, t1]
    [[nodiscard]] double max_coupling(double t0, double t1) const {
        if (kind == Kind::Constant) return omega;
        if (t0 <= 0.0 && t1 >= 0.0) return omega;
        return coupling(std::min(std::abs(t0), std::abs(t1)));
    }

    /// \int_{t0}^{t1} Omega(t) dt
    [[nodiscard]] double pulse_area(double t0, double t1) const {
        if (kind == Kind::Constant) return omega * (t1 - t0);
        const double s = waist / velocity;
        return omega * s * 0.5 * std::sqrt(kPi) * (std::erf(t1 / s) - std::erf(t0 / s));
    }

    /// Area of the complete transit, Omega * t_i.
    [[nodiscard]] double full_transit_area() const {
        if (kind == Kind::Constant) return std::numeric_limits<double>::infinity();
        return omega * interaction_time();
    }
};

/// Rotation on (|g,n+1>, |e,n>): [[cos, -i sin], [-i sin, cos]].
inline Eigen::Matrix2cd evolve_block(int n, double theta) {
    if (n < 0) throw std::invalid_argument("evolve_block: n must be >= 0");
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2cd m;
    m << c, -kI * s, -kI * s, c;
    return m;
}

/// Exact evolution for pulse area `area`. |g,0> and the truncation-edge
/// state |e,n_max> are uncoupled.
inline JointState evolve_area(const JointState& s, double area) {
    const Truncation t = s.truncation();
    CVector out = s.amplitudes();
    for (int n = 0; n < t.n_max; ++n) {
        const double theta = 0.5 * area * std::sqrt(n + 1.0);
        const Eigen::Matrix2cd u = evolve_block(n, theta);
        const Eigen::Index ig = s.index(Level::g, n + 1), ie = s.index(Level::e, n);
        const Complex ag = out[ig], ae = out[ie];
        out[ig] = u(0, 0) * ag + u(0, 1) * ae;
        out[ie] = u(1, 0) * ag + u(1, 1) * ae;
    }
    return JointState(std::move(out), t);
}

/// Evolve for `duration`. Gaussian profiles use a window centred on the axis
/// crossing; an infinite duration is the full transit (area Omega t_i).
inline JointState evolve(const JointState& s, const CouplingProfile& profile, double duration) {
    double area = 0.0;
    if (profile.kind == CouplingProfile::Kind::Constant)
        area = profile.omega * duration;
    else if (std::isinf(duration))
        area = profile.full_transit_area();
    else
        area = profile.pulse_area(-0.5 * duration, 0.5 * duration);
    return evolve_area(s, area);
}

/// P_g at each time of the grid, each point evolved independently from
/// `initial`. Constant profiles count time from 0; Gaussian profiles count
/// from the axis crossing with `initial` taken before mode entry.
inline std::vector<double> rabi_trace(const JointState& initial, const CouplingProfile& profile,
                                      const std::vector<double>& t_grid) {
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] < t_grid[i - 1]) throw std::invalid_argument("rabi_trace: t_grid must be monotone");
    std::vector<double> out(t_grid.size());
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        const double area = profile.kind == CouplingProfile::Kind::Constant
                                ? profile.omega * t_grid[i]
                                : profile.pulse_area(-std::numeric_limits<double>::infinity(), t_grid[i]);
        out[i] = std::clamp(probability(evolve_area(initial, area), Level::g), 0.0, 1.0);
    }
    return out;
}

/// Instantaneous Stark pulse: e amplitudes pick up e^{i chi}.
inline JointState stark_phase_pulse(const JointState& s, double chi) {
    JointState out = s;
    const Eigen::Index d = s.truncation().dim();
    out.amplitudes().head(d) *= std::polar(1.0, chi);
    return out;
}

enum class DipoleState { plus, minus };

/// Rabi pi/2 pulse (constant coupling, calibrated so the block at the mean
/// photon number rotates by pi/4) followed by a pi/2 Stark pulse. Starting
/// from g this yields (|e>+|g>)/sqrt2, starting from e (|e>-|g>)/sqrt2.
inline JointState prepare_dipole_state(DipoleState which, const FieldState& field,
                                       const CouplingProfile& profile) {
    const double n_bar = mean_photon_number(field);
    if (n_bar < 4.0)
        throw FieldTooSmall("prepare_dipole_state: n_bar=" + std::to_string(n_bar) +
                            " < 4, the dipole-state preparation is meaningless");
    const double duration = kPi / (2.0 * profile.omega * std::sqrt(n_bar));
    const Level start = which == DipoleState::plus ? Level::g : Level::e;
    JointState s = evolve_area(product_state(start, field), profile.omega * duration);
    return stark_phase_pulse(s, 0.5 * kPi);
}

struct Trace {
    std::vector<double> t;
    std::vector<double> p_g;
};

/// Evolve to T, flip the sign of the e amplitudes, keep evolving up to 2.5 T.
/// Time is measured from the start of the constant-coupling interaction.
inline Trace echo_sequence(const JointState& initial, const CouplingProfile& profile, double T,
                           double dt) {
    if (dt <= 0.0) throw std::invalid_argument("echo_sequence: dt must be positive");
    const auto area = [&](double t0, double t1) {
        return profile.kind == CouplingProfile::Kind::Constant ? profile.omega * (t1 - t0)
                                                               : profile.pulse_area(t0, t1);
    };
    const JointState flipped = stark_phase_pulse(evolve_area(initial, area(0.0, T)), kPi);
    Trace tr;
    const auto steps = static_cast<std::size_t>(std::llround(2.5 * T / dt));
    for (std::size_t i = 0; i <= steps; ++i) {
        const double t = i * dt;
        const JointState s = t <= T ? evolve_area(initial, area(0.0, t)) : evolve_area(flipped, area(T, t));
        tr.t.push_back(t);
        tr.p_g.push_back(std::clamp(probability(s, Level::g), 0.0, 1.0));
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Oscillation-contrast analysis of P_g traces.

/// max - min of the signal over a centred window of width `window`
/// (one Rabi period in practice). The grid must be uniform.
inline std::vector<double> oscillation_contrast(const std::vector<double>& t, const std::vector<double>& p,
                                                double window) {
    std::vector<double> c(p.size(), 0.0);
    if (p.size() < 2) return c;
    const double dt = t[1] - t[0];
    const auto half = static_cast<std::ptrdiff_t>(std::ceil(0.5 * window / dt));
    const auto n = static_cast<std::ptrdiff_t>(p.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto lo = std::max<std::ptrdiff_t>(0, i - half), hi = std::min(n - 1, i + half);
        const auto [mn, mx] = std::minmax_element(p.begin() + lo, p.begin() + hi + 1);
        c[static_cast<std::size_t>(i)] = *mx - *mn;
    }
    return c;
}

/// Rabi period 2 pi / (Omega sqrt(n_bar)) of the dominant photon number.
inline double rabi_period(double omega, double n_bar) { return 2.0 * kPi / (omega * std::sqrt(n_bar)); }

/// First time the contrast falls below `threshold`; NaN if it never does.
inline double collapse_time(const std::vector<double>& t, const std::vector<double>& contrast,
                            double threshold = 0.1) {
    for (std::size_t i = 0; i < t.size(); ++i)
        if (contrast[i] < threshold) return t[i];
    return std::numeric_limits<double>::quiet_NaN();
}

struct Revival {
    double time = std::numeric_limits<double>::quiet_NaN();    // contrast maximum
    double center = std::numeric_limits<double>::quiet_NaN();  // middle of the half-maximum stretch around it
    double contrast = 0.0;
};

/// Contrast maximum on [t_from, t_to]. The revival is broad and flat-topped,
/// so its position is reported as the centre of the contiguous stretch (inside
/// the window) where the contrast stays above half the maximum.
inline Revival find_revival(const std::vector<double>& t, const std::vector<double>& contrast, double t_from,
                            double t_to) {
    Revival r;
    std::size_t imax = t.size();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_from || t[i] > t_to) continue;
        if (contrast[i] > r.contrast) {
            r.contrast = contrast[i];
            r.time = t[i];
            imax = i;
        }
    }
    if (imax == t.size()) return r;
    std::size_t lo = imax, hi = imax;
    while (lo > 0 && t[lo - 1] >= t_from && contrast[lo - 1] >= 0.5 * r.contrast) --lo;
    while (hi + 1 < t.size() && t[hi + 1] <= t_to && contrast[hi + 1] >= 0.5 * r.contrast) ++hi;
    r.center = 0.5 * (t[lo] + t[hi]);
    return r;
}

}  // namespace cqed
