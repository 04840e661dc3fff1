// lindblad.hpp: damped-cavity master equation for the joint atom-field
// density operator (or the field alone).
//
//   d rho/dt = -i [H(t), rho]
//              + kappa (n_th + 1) (a rho a^dag - {a^dag a, rho}/2)
//              + kappa n_th       (a^dag rho a - {a a^dag, rho}/2)
//   H(t) = (Omega(t)/2) (a^dag sigma- + a sigma+)           (interaction picture)
//
// The right-hand side is evaluated entry by entry from the sparse structure of
// H, a and a^dag, so one evaluation costs O(dim^2). Time stepping is fixed-step
// RK4 with Hermitian re-symmetrisation after each step and an optional
// halved-step verification of the whole run.

#pragma once

#include "cqed/core.hpp"
#include "cqed/fock_space.hpp"
#include "cqed/jaynes_cummings.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace cqed {

enum class Basis { Field, Joint };

class DensityOperator {
public:
    DensityOperator(CMatrix m, Truncation t, Basis b) : m_(std::move(m)), trunc_(t), basis_(b) {
        if (m_.rows() != dim() || m_.cols() != dim())
            throw DimensionMismatch("DensityOperator: matrix size does not match basis and truncation");
    }

    static DensityOperator pure(const FieldState& s) {
        return {s.amplitudes() * s.amplitudes().adjoint(), s.truncation(), Basis::Field};
    }
    static DensityOperator pure(const JointState& s) {
        return {s.amplitudes() * s.amplitudes().adjoint(), s.truncation(), Basis::Joint};
    }

    [[nodiscard]] const CMatrix& matrix() const { return m_; }
    [[nodiscard]] CMatrix& matrix() { return m_; }
    [[nodiscard]] const Truncation& truncation() const { return trunc_; }
    [[nodiscard]] Basis basis() const { return basis_; }
    [[nodiscard]] int levels() const { return basis_ == Basis::Joint ? 2 : 1; }
    [[nodiscard]] Eigen::Index dim() const { return levels() * trunc_.dim(); }

    [[nodiscard]] double trace() const { return m_.trace().real(); }
    [[nodiscard]] double hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }
    [[nodiscard]] double purity() const { return (m_ * m_).trace().real(); }
    [[nodiscard]] double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m_ + m_.adjoint()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Trace within 1e-6 of one, Hermitian within 1e-9, eigenvalues >= -1e-6.
    void check_invariants(const std::string& where, bool check_positivity = true) const {
        if (std::abs(trace() - 1.0) > 1e-6)
            throw InvariantViolation(where + ": trace drifted to " + std::to_string(trace()));
        if (hermiticity_error() > 1e-9)
            throw InvariantViolation(where + ": density operator is not Hermitian");
        if (check_positivity && min_eigenvalue() < -1e-6)
            throw InvariantViolation(where + ": density operator has a negative eigenvalue");
    }

private:
    CMatrix m_;
    Truncation trunc_;
    Basis basis_;
};

inline double trace_distance(const DensityOperator& a, const DensityOperator& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("trace_distance: dimensions differ");
    const CMatrix d = a.matrix() - b.matrix();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

struct DampingParams {
    double kappa = 0.0;      // 1 / T_cav
    double n_thermal = 0.0;

    static DampingParams from_cavity(double t_cav, double n_thermal = 0.0) {
        if (t_cav <= 0.0) throw std::invalid_argument("DampingParams: t_cav must be > 0");
        return {1.0 / t_cav, n_thermal};
    }
    static DampingParams none() { return {}; }
};

/// Planck occupation 1 / (e^{h nu / k_B T} - 1).
inline double thermal_occupation(double temperature, double frequency) {
    if (temperature <= 0.0 || frequency <= 0.0)
        throw std::invalid_argument("thermal_occupation: temperature and frequency must be > 0");
    const double x = units::planck * frequency / (units::boltzmann * temperature);
    return 1.0 / std::expm1(x);
}

namespace detail {

/// Writes the master-equation derivative of `rho` into `out` (same shape).
/// `levels` is 1 for a bare field and 2 for atom (x) field.
inline void lindblad_rhs_into(const CMatrix& rho, CMatrix& out, int levels, int n_max, double omega_t,
                              const DampingParams& damp) {
    const Eigen::Index fd = n_max + 1;
    const Eigen::Index dim = levels * fd;
    const double g_down = damp.kappa * (damp.n_thermal + 1.0);
    const double g_up = damp.kappa * damp.n_thermal;

    // Coupling partner of each basis state and its matrix element.
    thread_local std::vector<Eigen::Index> partner;
    thread_local std::vector<double> coup, nval, nup, sq, sqp;
    partner.assign(dim, -1);
    coup.assign(dim, 0.0);
    nval.resize(dim);
    nup.resize(dim);
    sq.resize(dim);
    sqp.resize(dim);
    for (Eigen::Index x = 0; x < dim; ++x) {
        const Eigen::Index n = x % fd;
        nval[x] = double(n);
        nup[x] = n < n_max ? double(n + 1) : 0.0;  // diagonal of truncated a a^dag
        sq[x] = std::sqrt(double(n));
        sqp[x] = std::sqrt(double(n + 1));
    }
    if (levels == 2 && omega_t != 0.0) {
        for (Eigen::Index n = 0; n < fd; ++n) {
            const Eigen::Index e = n, g = fd + n;
            if (n < n_max) {  // |e,n> <-> |g,n+1>
                partner[e] = fd + n + 1;
                coup[e] = 0.5 * omega_t * std::sqrt(double(n + 1));
            }
            if (n >= 1) {     // |g,n> <-> |e,n-1>
                partner[g] = n - 1;
                coup[g] = 0.5 * omega_t * std::sqrt(double(n));
            }
        }
    }

    for (Eigen::Index y = 0; y < dim; ++y) {
        const Eigen::Index ny = y % fd;
        const Eigen::Index py = partner[y];
        const double cy = coup[y];
        Complex* o = out.col(y).data();
        const Complex* r = rho.col(y).data();
        const Complex* rp = py >= 0 ? rho.col(py).data() : nullptr;
        const Complex* rdn = ny < n_max ? rho.col(y + 1).data() : nullptr;  // column (l_y, n_y+1)
        const Complex* rup = ny >= 1 ? rho.col(y - 1).data() : nullptr;     // column (l_y, n_y-1)
        for (Eigen::Index x = 0; x < dim; ++x) {
            const Eigen::Index nx = x % fd;
            Complex acc{};
            // -i [H, rho]
            if (partner[x] >= 0) acc += coup[x] * rho(partner[x], y);
            if (rp) acc -= rp[x] * cy;
            acc = Complex(acc.imag(), -acc.real());  // multiply by -i
            // decay
            if (g_down != 0.0) {
                Complex d = -0.5 * (nval[x] + nval[y]) * r[x];
                if (rdn && nx < n_max) d += sqp[x] * sqp[y] * rdn[x + 1];
                acc += g_down * d;
            }
            // thermal gain
            if (g_up != 0.0) {
                Complex u = -0.5 * (nup[x] + nup[y]) * r[x];
                if (rup && nx >= 1) u += sq[x] * sq[y] * rup[x - 1];
                acc += g_up * u;
            }
            o[x] = acc;
        }
    }
}

}  // namespace detail

/// Time derivative of rho for instantaneous coupling omega_t.
inline DensityOperator lindblad_rhs(const DensityOperator& rho, double omega_t, const DampingParams& damping) {
    CMatrix out(rho.dim(), rho.dim());
    detail::lindblad_rhs_into(rho.matrix(), out, rho.levels(), rho.truncation().n_max, omega_t, damping);
    return {std::move(out), rho.truncation(), rho.basis()};
}

// ---------------------------------------------------------------------------
// Timelines

/// Interval of free (damped) evolution, optionally with the atom coupled
/// through `profile`. `profile_start` is the profile's own clock at the start
/// of the segment (time since axis crossing for a Gaussian mode).
struct Segment {
    double duration = 0.0;
    std::optional<CouplingProfile> profile;
    double profile_start = 0.0;

    static Segment free(double duration) { return {duration, std::nullopt, 0.0}; }
    static Segment coupled(const CouplingProfile& p, double t_start, double t_end) {
        return {t_end - t_start, p, t_start};
    }
    [[nodiscard]] double coupling_at(double local_t) const {
        return profile ? profile->coupling(profile_start + local_t) : 0.0;
    }
    [[nodiscard]] double max_coupling(double t0, double t1) const {
        return profile ? profile->max_coupling(profile_start + t0, profile_start + t1) : 0.0;
    }
};

/// Instantaneous e-level phase e^{i chi}.
struct StarkPulse {
    double chi = 0.0;
};

/// Instantaneous coherent injection: field -> D(beta) field.
struct Injection {
    Complex beta;
};

using TimelineStep = std::variant<Segment, StarkPulse, Injection>;
using Timeline = std::vector<TimelineStep>;

struct StepControl {
    double rabi_resolution = 50.0;     // dt <= 1 / (rabi_resolution * Omega_max sqrt(n_max))
    double damping_resolution = 0.01;  // dt * (total damping rate at n_max) <= this
    int pieces_per_segment = 16;       // sub-intervals with their own step size
    std::optional<double> fixed_dt;    // overrides the automatic step
    bool verify = true;                // re-run with dt/2 and compare
    double verify_tolerance = 1e-4;    // trace distance
    double sample_interval = 0.0;      // > 0: call the observer on this grid
    std::function<void(double, const DensityOperator&)> observer;
};

namespace detail {

inline void apply_stark(CMatrix& m, Eigen::Index fd, double chi) {
    const Complex ph = std::polar(1.0, chi);
    m.topRightCorner(fd, fd) *= ph;
    m.bottomLeftCorner(fd, fd) *= std::conj(ph);
}

inline double mean_photons(const CMatrix& m, int levels, Eigen::Index fd) {
    double s = 0.0;
    for (Eigen::Index x = 0; x < levels * fd; ++x) s += double(x % fd) * m(x, x).real();
    return s;
}

inline Complex mean_field_amplitude(const CMatrix& m, int levels, Eigen::Index fd) {
    Complex s{};
    for (int l = 0; l < levels; ++l)
        for (Eigen::Index n = 1; n < fd; ++n) s += std::sqrt(double(n)) * m(l * fd + n, l * fd + n - 1);
    return s;
}

inline void apply_injection(CMatrix& m, int levels, Truncation t, Complex beta) {
    const Eigen::Index fd = t.dim();
    require_displacement_room(t, mean_photons(m, levels, fd), mean_field_amplitude(m, levels, fd), beta,
                              "injection");
    const CMatrix d = displacement_matrix(beta, t);
    for (int l = 0; l < levels; ++l)
        for (int k = 0; k < levels; ++k)
            m.block(l * fd, k * fd, fd, fd) = d * m.block(l * fd, k * fd, fd, fd) * d.adjoint();
}

struct Integrator {
    int levels;
    int n_max;
    DampingParams damping;
    CMatrix k1, k2, k3, k4, tmp;

    Integrator(int lv, int nm, const DampingParams& d) : levels(lv), n_max(nm), damping(d) {
        const Eigen::Index dim = lv * (nm + 1);
        for (CMatrix* m : {&k1, &k2, &k3, &k4, &tmp}) m->resize(dim, dim);
    }

    void step(CMatrix& rho, const Segment& seg, double t, double h) {
        lindblad_rhs_into(rho, k1, levels, n_max, seg.coupling_at(t), damping);
        tmp = rho + (0.5 * h) * k1;
        const double omega_mid = seg.coupling_at(t + 0.5 * h);
        lindblad_rhs_into(tmp, k2, levels, n_max, omega_mid, damping);
        tmp = rho + (0.5 * h) * k2;
        lindblad_rhs_into(tmp, k3, levels, n_max, omega_mid, damping);
        tmp = rho + h * k3;
        lindblad_rhs_into(tmp, k4, levels, n_max, seg.coupling_at(t + h), damping);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        tmp = rho.adjoint();
        rho = 0.5 * (rho + tmp);
    }
};

inline double max_step(const Segment& seg, double t0, double t1, int n_max, const DampingParams& damp,
                       const StepControl& ctl) {
    double dt = t1 - t0;
    const double om = seg.max_coupling(t0, t1);
    if (om > 0.0) dt = std::min(dt, 1.0 / (ctl.rabi_resolution * om * std::sqrt(double(n_max))));
    const double rate = damp.kappa * ((damp.n_thermal + 1.0) * n_max + damp.n_thermal * (n_max + 1.0));
    if (rate > 0.0) dt = std::min(dt, ctl.damping_resolution / rate);
    return dt;
}

// Integrates the timeline; `dt_scale` < 1 refines every step (verification).
inline void run_timeline(CMatrix& rho, int levels, Truncation trunc, const Timeline& tl,
                         const DampingParams& damp, const StepControl& ctl, double dt_scale, bool observe,
                         const Basis basis) {
    Integrator integ(levels, trunc.n_max, damp);
    const Eigen::Index fd = trunc.dim();
    double clock = 0.0;
    const bool sampling = observe && ctl.observer && ctl.sample_interval > 0.0;
    const auto notify = [&](double t) {
        if (observe && ctl.observer) ctl.observer(t, DensityOperator(rho, trunc, basis));
    };
    if (sampling) notify(0.0);
    for (const auto& st : tl) {
        if (const auto* sp = std::get_if<StarkPulse>(&st)) {
            if (levels != 2) throw DimensionMismatch("Stark pulse requires a joint atom-field state");
            apply_stark(rho, fd, sp->chi);
            continue;
        }
        if (const auto* inj = std::get_if<Injection>(&st)) {
            apply_injection(rho, levels, trunc, inj->beta);
            continue;
        }
        const auto& seg = std::get<Segment>(st);
        if (seg.duration < 0.0) throw std::invalid_argument("evolve_density: negative segment duration");
        if (seg.duration == 0.0) continue;
        // pieces: sample intervals when observing, else equal chunks
        int pieces = ctl.pieces_per_segment;
        if (sampling) pieces = std::max(1, int(std::llround(seg.duration / ctl.sample_interval)));
        const double piece_len = seg.duration / pieces;
        for (int p = 0; p < pieces; ++p) {
            const double t0 = p * piece_len, t1 = (p + 1) * piece_len;
            double h = ctl.fixed_dt ? *ctl.fixed_dt : max_step(seg, t0, t1, trunc.n_max, damp, ctl);
            h *= dt_scale;
            const auto nsteps = std::max<long long>(1, static_cast<long long>(std::ceil(piece_len / h - 1e-9)));
            h = piece_len / double(nsteps);
            for (long long k = 0; k < nsteps; ++k) integ.step(rho, seg, t0 + k * h, h);
            if (sampling) notify(clock + t1);
        }
        clock += seg.duration;
    }
}

}  // namespace detail

/// Integrate `rho` along the timeline. Pulse events are applied between
/// steps. Throws StepTooLarge if the halved-step rerun differs by more than
/// the verification tolerance in trace distance.
inline DensityOperator evolve_density(const DensityOperator& rho, const Timeline& timeline,
                                      const DampingParams& damping, const StepControl& control = {}) {
    CMatrix m = rho.matrix();
    detail::run_timeline(m, rho.levels(), rho.truncation(), timeline, damping, control, 1.0, true, rho.basis());
    DensityOperator out(std::move(m), rho.truncation(), rho.basis());
    if (control.verify) {
        CMatrix fine = rho.matrix();
        detail::run_timeline(fine, rho.levels(), rho.truncation(), timeline, damping, control, 0.5, false,
                             rho.basis());
        const double dist = trace_distance(out, DensityOperator(std::move(fine), rho.truncation(), rho.basis()));
        if (dist > control.verify_tolerance)
            throw StepTooLarge("evolve_density: halved-step rerun differs by trace distance " +
                               std::to_string(dist));
    }
    if (std::abs(out.trace() - rho.trace()) > 1e-6)
        throw InvariantViolation("evolve_density: trace drift " + std::to_string(out.trace() - rho.trace()));
    return out;
}

// ---------------------------------------------------------------------------
// Reductions and conditioning

/// Field-only reduction Tr_atom rho.
inline DensityOperator partial_trace_field(const DensityOperator& rho) {
    if (rho.basis() != Basis::Joint) throw DimensionMismatch("partial_trace_field: expects a joint operator");
    const Eigen::Index fd = rho.truncation().dim();
    CMatrix f = rho.matrix().topLeftCorner(fd, fd) + rho.matrix().bottomRightCorner(fd, fd);
    return {std::move(f), rho.truncation(), Basis::Field};
}

/// Atomic reduction Tr_field rho as a 2x2 matrix over (e, g).
inline Eigen::Matrix2cd partial_trace_atom(const DensityOperator& rho) {
    if (rho.basis() != Basis::Joint) throw DimensionMismatch("partial_trace_atom: expects a joint operator");
    const Eigen::Index fd = rho.truncation().dim();
    const CMatrix& m = rho.matrix();
    Eigen::Matrix2cd a;
    a(0, 0) = m.topLeftCorner(fd, fd).trace();
    a(0, 1) = m.topRightCorner(fd, fd).trace();
    a(1, 0) = m.bottomLeftCorner(fd, fd).trace();
    a(1, 1) = m.bottomRightCorner(fd, fd).trace();
    return a;
}

inline Eigen::Matrix2cd partial_trace_atom(const JointState& s) { return partial_trace_atom(DensityOperator::pure(s)); }

inline double probability(const DensityOperator& rho, Level l) {
    return partial_trace_atom(rho)(int(l), int(l)).real() / rho.trace();
}

/// Field state after a projective detection of the atom in `outcome`.
inline DensityOperator conditional_field_state(const DensityOperator& rho, Level outcome) {
    if (rho.basis() != Basis::Joint) throw DimensionMismatch("conditional_field_state: expects a joint operator");
    const Eigen::Index fd = rho.truncation().dim();
    const Eigen::Index off = static_cast<Eigen::Index>(outcome) * fd;
    CMatrix f = rho.matrix().block(off, off, fd, fd);
    const double p = f.trace().real();
    if (p < 1e-14) throw ZeroProbabilityOutcome("conditional_field_state: outcome has zero probability");
    return {f / p, rho.truncation(), Basis::Field};
}

inline FieldState conditional_field_state(const JointState& s, Level outcome) {
    const CVector block = s.level_block(outcome);
    const double nrm = block.norm();
    if (nrm < 1e-7) throw ZeroProbabilityOutcome("conditional_field_state: outcome has zero probability");
    return FieldState(block / nrm, s.truncation());
}

/// Zero-pad a field density operator onto a larger truncation.
inline DensityOperator embed(const DensityOperator& rho, Truncation t) {
    if (rho.basis() != Basis::Field) throw DimensionMismatch("embed: expects a field operator");
    if (t.n_max < rho.truncation().n_max) throw TruncationTooSmall("embed: target truncation is smaller");
    CMatrix m = CMatrix::Zero(t.dim(), t.dim());
    m.topLeftCorner(rho.dim(), rho.dim()) = rho.matrix();
    return {std::move(m), t, Basis::Field};
}

inline double mean_photon_number(const DensityOperator& rho) {
    return detail::mean_photons(rho.matrix(), rho.levels(), rho.truncation().dim()) / rho.trace();
}

inline Complex mean_amplitude(const DensityOperator& rho) {
    return detail::mean_field_amplitude(rho.matrix(), rho.levels(), rho.truncation().dim()) / rho.trace();
}

// ---------------------------------------------------------------------------
// Probe-atom readout in the Heisenberg picture.
//
// The probability that an atom entering in g leaves in g is linear in the
// incoming field state: P = Tr[E rho_field]. E is obtained by evolving the
// projector |g><g| (x) 1 backwards with the adjoint master equation. That
// projector only has entries between states of equal excitation number
// N = n + [atom in e], a property both the Hamiltonian and the damping
// preserve, so the evolution runs on 2x2 blocks (one per manifold
// {|e,N-1>, |g,N>}) and E comes out diagonal in the Fock basis.

namespace detail {

struct ManifoldOperator {
    int n_max;
    // blocks[k] over (e_k = |e,k-1>, g_k = |g,k>), k = 0 .. n_max+1
    std::vector<Eigen::Matrix2cd> blocks;

    explicit ManifoldOperator(int nm) : n_max(nm), blocks(nm + 2, Eigen::Matrix2cd::Zero()) {}
    [[nodiscard]] bool has_e(int k) const { return k >= 1 && k - 1 <= n_max; }
    [[nodiscard]] bool has_g(int k) const { return k <= n_max; }
};

inline void adjoint_rhs(const ManifoldOperator& o, ManifoldOperator& out, double omega_t, const DampingParams& d) {
    const int nm = o.n_max;
    const double g_down = d.kappa * (d.n_thermal + 1.0), g_up = d.kappa * d.n_thermal;
    for (int k = 0; k <= nm + 1; ++k) {
        const Eigen::Matrix2cd& b = o.blocks[k];
        Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
        const bool e_ok = o.has_e(k), g_ok = o.has_g(k);
        // photon numbers of e_k and g_k
        const double ne = k - 1.0, ng = k;
        if (e_ok && g_ok && omega_t != 0.0) {
            Eigen::Matrix2cd h;
            const double c = 0.5 * omega_t * std::sqrt(double(k));
            h << 0.0, c, c, 0.0;
            r += kI * (h * b - b * h);
        }
        if (g_down != 0.0) {
            // a^dag O a - {n, O}/2 ; a^dag O a pulls from manifold k-1
            Eigen::Matrix2cd t = Eigen::Matrix2cd::Zero();
            const double fn[2] = {std::sqrt(std::max(ne, 0.0)), std::sqrt(ng)};
            const double nn[2] = {std::max(ne, 0.0), ng};
            if (k >= 1) {
                const Eigen::Matrix2cd& lower = o.blocks[k - 1];
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) t(i, j) += fn[i] * fn[j] * lower(i, j);
            }
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) t(i, j) -= 0.5 * (nn[i] + nn[j]) * b(i, j);
            r += g_down * t;
        }
        if (g_up != 0.0) {
            // a O a^dag - {a a^dag, O}/2 ; a O a^dag pulls from manifold k+1
            Eigen::Matrix2cd t = Eigen::Matrix2cd::Zero();
            const double n_of[2] = {std::max(ne, 0.0), ng};
            double fu[2], aa[2];
            for (int i = 0; i < 2; ++i) {
                const bool room = n_of[i] + 1.0 <= nm;
                fu[i] = room ? std::sqrt(n_of[i] + 1.0) : 0.0;
                aa[i] = room ? n_of[i] + 1.0 : 0.0;
            }
            if (k + 1 <= nm + 1) {
                const Eigen::Matrix2cd& upper = o.blocks[k + 1];
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) t(i, j) += fu[i] * fu[j] * upper(i, j);
            }
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) t(i, j) -= 0.5 * (aa[i] + aa[j]) * b(i, j);
            r += g_up * t;
        }
        if (!e_ok) r.row(0).setZero(), r.col(0).setZero();
        if (!g_ok) r.row(1).setZero(), r.col(1).setZero();
        out.blocks[k] = r;
    }
}

}  // namespace detail

/// Diagonal of the survival operator E for a probe atom that enters in g and
/// follows `transit` (segments in forward time order, e.g. a free delay then
/// the coupled crossing), with cavity damping throughout.
inline RVector probe_survival_operator(const std::vector<Segment>& transit, const DampingParams& damping,
                                       Truncation trunc, const StepControl& ctl = {}) {
    const int nm = trunc.n_max;
    const bool damped = damping.kappa != 0.0 || damping.n_thermal != 0.0;
    RVector e(trunc.dim());
    if (!damped) {
        double area = 0.0;
        for (const auto& seg : transit)
            if (seg.profile) area += seg.profile->pulse_area(seg.profile_start, seg.profile_start + seg.duration);
        for (int n = 0; n <= nm; ++n) {
            const double c = std::cos(0.5 * area * std::sqrt(double(n)));
            e[n] = c * c;
        }
        return e;
    }
    detail::ManifoldOperator o(nm), k1(nm), k2(nm), k3(nm), k4(nm), tmp(nm);
    for (int k = 0; k <= nm; ++k) o.blocks[k](1, 1) = 1.0;
    const auto axpy = [&](const detail::ManifoldOperator& base, double h, const detail::ManifoldOperator& dir) {
        for (std::size_t k = 0; k < base.blocks.size(); ++k) tmp.blocks[k] = base.blocks[k] + h * dir.blocks[k];
    };
    // backwards in time: stepping the adjoint generator from the end of the
    // transit to its start
    for (auto it = transit.rbegin(); it != transit.rend(); ++it) {
        const Segment& seg = *it;
        if (seg.duration <= 0.0) continue;
        const int pieces = ctl.pieces_per_segment;
        const double piece_len = seg.duration / pieces;
        for (int p = pieces - 1; p >= 0; --p) {
            const double t0 = p * piece_len, t1 = (p + 1) * piece_len;
            double h = ctl.fixed_dt ? *ctl.fixed_dt : detail::max_step(seg, t0, t1, nm, damping, ctl);
            const auto nsteps = std::max<long long>(1, static_cast<long long>(std::ceil(piece_len / h - 1e-9)));
            h = piece_len / double(nsteps);
            for (long long s = 0; s < nsteps; ++s) {
                const double t = t1 - s * h;
                detail::adjoint_rhs(o, k1, seg.coupling_at(t), damping);
                axpy(o, 0.5 * h, k1);
                detail::adjoint_rhs(tmp, k2, seg.coupling_at(t - 0.5 * h), damping);
                axpy(o, 0.5 * h, k2);
                detail::adjoint_rhs(tmp, k3, seg.coupling_at(t - 0.5 * h), damping);
                axpy(o, h, k3);
                detail::adjoint_rhs(tmp, k4, seg.coupling_at(t - h), damping);
                for (std::size_t k = 0; k < o.blocks.size(); ++k)
                    o.blocks[k] +=
                        (h / 6.0) * (k1.blocks[k] + 2.0 * k2.blocks[k] + 2.0 * k3.blocks[k] + k4.blocks[k]);
            }
        }
    }
    for (int n = 0; n <= nm; ++n) e[n] = o.blocks[n](1, 1).real();
    return e;
}

/// Probe crossing [t_start, t_end] of its own profile clock.
inline RVector probe_survival_operator(const CouplingProfile& profile, double t_start, double t_end,
                                       const DampingParams& damping, Truncation trunc,
                                       const StepControl& ctl = {}) {
    return probe_survival_operator(std::vector<Segment>{Segment::coupled(profile, t_start, t_end)}, damping, trunc,
                                   ctl);
}

}  // namespace cqed
