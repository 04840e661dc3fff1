// fock_space.hpp: truncated single-mode Fock space: field states, coherent
// states, displacement, inner products and photon statistics.

#pragma once

#include "cqed/core.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace cqed {

/// Highest retained Fock level of a single-mode field.
struct Truncation {
    int n_max = 1;

    Truncation() = default;
    explicit Truncation(int n) : n_max(n) {
        if (n < 1) throw std::invalid_argument("Truncation: n_max must be >= 1");
    }

    [[nodiscard]] Eigen::Index dim() const { return n_max + 1; }

    friend bool operator==(const Truncation&, const Truncation&) = default;
};

namespace detail {

// log of the Poisson weight e^{-m} m^n / n!
inline double log_poisson(double mean, int n) {
    if (mean == 0.0) return n == 0 ? 0.0 : -INFINITY;
    return -mean + n * std::log(mean) - std::lgamma(n + 1.0);
}

inline int guard_level(double mean) {
    // the small offset keeps round-off in |alpha|^2 from bumping the guard by one level
    return static_cast<int>(std::ceil(mean + 6.0 * std::sqrt(std::max(mean, 0.0)) + 10.0 - 1e-9));
}

}  // namespace detail

/// Poisson mass above n_max for mean photon number `mean`, summed directly
/// (not as 1 - head) so that values near 1e-10 keep full relative precision.
inline double poisson_tail(double mean, int n_max) {
    if (mean <= 0.0) return 0.0;
    double tail = 0.0;
    for (int n = n_max + 1;; ++n) {
        const double term = std::exp(detail::log_poisson(mean, n));
        tail += term;
        if (n > mean && term < 1e-18 * std::max(tail, 1e-300)) break;
        if (n > n_max + 100000) break;
    }
    return tail;
}

inline bool truncation_adequate(const Truncation& t, double mean) {
    return t.n_max >= detail::guard_level(mean) && poisson_tail(mean, t.n_max) < 1e-10;
}

inline void require_truncation(const Truncation& t, double mean, const std::string& what) {
    if (!truncation_adequate(t, mean)) {
        throw TruncationTooSmall(what + ": n_max=" + std::to_string(t.n_max) +
                                 " is too small for mean photon number " + std::to_string(mean) +
                                 " (need n_max >= " + std::to_string(detail::guard_level(mean)) +
                                 " and Poisson tail < 1e-10)");
    }
}

/// Smallest truncation satisfying both guard invariants for `mean`.
inline Truncation truncation_for(double mean) {
    int n = std::max(detail::guard_level(mean), 1);
    while (poisson_tail(mean, n) >= 1e-10) ++n;
    return Truncation(n);
}

/// Coherent amplitude; the mean photon number is derived from it, never stored.
class CoherentParams {
public:
    explicit CoherentParams(Complex alpha) : alpha_(alpha) {}

    static CoherentParams from_mean(double n_bar, double phase = 0.0) {
        if (n_bar < 0.0) throw std::invalid_argument("CoherentParams: n_bar must be >= 0");
        return CoherentParams(std::polar(std::sqrt(n_bar), phase));
    }

    [[nodiscard]] Complex alpha() const { return alpha_; }
    [[nodiscard]] double n_bar() const { return std::norm(alpha_); }
    [[nodiscard]] double delta_n() const { return std::abs(alpha_); }
    [[nodiscard]] double delta_phi() const {
        if (alpha_ == Complex{}) throw ZeroField("CoherentParams: phase spread undefined for vacuum");
        return 1.0 / std::abs(alpha_);
    }

private:
    Complex alpha_;
};

/// Pure cavity field: amplitudes over |0>..|n_max>.
class FieldState {
public:
    FieldState(CVector amplitudes, Truncation trunc) : amps_(std::move(amplitudes)), trunc_(trunc) {
        if (amps_.size() != trunc_.dim())
            throw DimensionMismatch("FieldState: amplitude vector length does not match truncation");
    }

    [[nodiscard]] const CVector& amplitudes() const { return amps_; }
    [[nodiscard]] const Truncation& truncation() const { return trunc_; }
    [[nodiscard]] Complex operator[](Eigen::Index n) const { return amps_[n]; }
    [[nodiscard]] double norm() const { return amps_.norm(); }

    [[nodiscard]] FieldState normalized() const {
        const double nrm = norm();
        if (nrm == 0.0) throw ZeroProbabilityOutcome("FieldState: cannot normalize a null vector");
        return FieldState(amps_ / nrm, trunc_);
    }

private:
    CVector amps_;
    Truncation trunc_;
};

inline FieldState number_state(int n, Truncation t) {
    if (n < 0 || n > t.n_max) throw std::out_of_range("number_state: n outside truncation");
    CVector v = CVector::Zero(t.dim());
    v[n] = 1.0;
    return FieldState(std::move(v), t);
}

inline FieldState vacuum(Truncation t) { return number_state(0, t); }

/// c_n = e^{-|a|^2/2} a^n / sqrt(n!), evaluated in log space (stable past n=170).
inline FieldState coherent_state(const CoherentParams& p, Truncation t) {
    require_truncation(t, p.n_bar(), "coherent_state");
    CVector v = CVector::Zero(t.dim());
    const double r = std::abs(p.alpha());
    if (r == 0.0) {
        v[0] = 1.0;
        return FieldState(std::move(v), t);
    }
    const double theta = std::arg(p.alpha());
    for (int n = 0; n <= t.n_max; ++n) {
        const double log_mag = -0.5 * r * r + n * std::log(r) - 0.5 * std::lgamma(n + 1.0);
        v[n] = std::polar(std::exp(log_mag), n * theta);
    }
    return FieldState(std::move(v), t);
}

/// Zero-pad (or fail if it would drop amplitude) onto another truncation.
inline FieldState embed(const FieldState& s, Truncation t) {
    CVector v = CVector::Zero(t.dim());
    const Eigen::Index keep = std::min(s.truncation().dim(), t.dim());
    v.head(keep) = s.amplitudes().head(keep);
    if (keep < s.truncation().dim() &&
        s.amplitudes().tail(s.truncation().dim() - keep).squaredNorm() > 1e-20)
        throw TruncationTooSmall("embed: target truncation would discard amplitude");
    return FieldState(std::move(v), t);
}

inline CMatrix annihilation(Truncation t) {
    CMatrix a = CMatrix::Zero(t.dim(), t.dim());
    for (int n = 1; n <= t.n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

/// exp(beta a^dag - beta^* a) on the truncated space (Pade scaling-and-squaring).
inline CMatrix displacement_matrix(Complex beta, Truncation t) {
    const CMatrix a = annihilation(t);
    const CMatrix gen = beta * a.adjoint() - std::conj(beta) * a;
    return gen.exp();
}

inline Complex overlap(const FieldState& s1, const FieldState& s2) {
    if (!(s1.truncation() == s2.truncation()))
        throw DimensionMismatch("overlap: truncations differ");
    return s1.amplitudes().dot(s2.amplitudes());  // conjugates the first argument
}

inline double fidelity(const FieldState& s1, const FieldState& s2) {
    return std::norm(overlap(s1, s2)) / (s1.amplitudes().squaredNorm() * s2.amplitudes().squaredNorm());
}

/// <a>
inline Complex mean_amplitude(const FieldState& s) {
    const auto& c = s.amplitudes();
    Complex acc{};
    for (Eigen::Index n = 1; n < c.size(); ++n)
        acc += std::conj(c[n - 1]) * std::sqrt(static_cast<double>(n)) * c[n];
    return acc;
}

struct PhotonStatistics {
    double mean = 0.0;
    double variance = 0.0;
    RVector distribution;
};

inline PhotonStatistics photon_statistics(const FieldState& s) {
    const double nrm2 = s.amplitudes().squaredNorm();
    if (std::abs(nrm2 - 1.0) > 1e-6)
        throw InvariantViolation("photon_statistics: state is not normalized");
    PhotonStatistics st;
    st.distribution = s.amplitudes().cwiseAbs2();
    double m1 = 0.0, m2 = 0.0;
    for (Eigen::Index n = 0; n < st.distribution.size(); ++n) {
        m1 += n * st.distribution[n];
        m2 += double(n) * n * st.distribution[n];
    }
    st.mean = m1;
    st.variance = m2 - m1 * m1;
    return st;
}

inline double mean_photon_number(const FieldState& s) {
    double m = 0.0;
    for (Eigen::Index n = 0; n < s.amplitudes().size(); ++n) m += n * std::norm(s[n]);
    return m / s.amplitudes().squaredNorm();
}

/// Guard shared by every displacement: <n> after D(beta) plus six standard
/// deviations must stay below n_max.
inline void require_displacement_room(Truncation t, double mean_in, Complex mean_amp, Complex beta,
                                      const std::string& what) {
    const double mean_out =
        std::max(0.0, mean_in + 2.0 * std::real(std::conj(beta) * mean_amp) + std::norm(beta));
    if (mean_out + 6.0 * std::sqrt(mean_out) >= t.n_max)
        throw TruncationTooSmall(what + ": displaced field (<n>=" + std::to_string(mean_out) +
                                 ") does not fit in n_max=" + std::to_string(t.n_max));
}

inline FieldState displace(const FieldState& s, Complex beta) {
    const Truncation t = s.truncation();
    require_displacement_room(t, mean_photon_number(s), mean_amplitude(s), beta, "displace");
    return FieldState(displacement_matrix(beta, t) * s.amplitudes(), t);
}

}  // namespace cqed
