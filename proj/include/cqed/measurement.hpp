// measurement.hpp: readout of the cavity field: homodyne phase scan with a
// probe atom, Gaussian peak extraction, Wigner function, phase distribution.

#pragma once

#include "cqed/core.hpp"
#include "cqed/fock_space.hpp"
#include "cqed/jaynes_cummings.hpp"
#include "cqed/lindblad.hpp"

#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <vector>

namespace cqed {

struct Peak {
    double center = 0.0;
    double width = 0.0;  // Gaussian sigma
    double amplitude = 0.0;
    double center_error = 0.0;
};

struct PhaseScan {
    std::vector<double> phi;
    std::vector<double> s_g;
    std::vector<Peak> peaks;
    double baseline = 0.0;
    double fit_residual = 0.0;  // RMS
};

/// n points uniform on [-pi, pi)
inline std::vector<double> phase_grid(int n) {
    if (n < 2) throw std::invalid_argument("phase_grid: need at least two points");
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = -kPi + 2.0 * kPi * i / n;
    return g;
}

struct HomodyneOptions {
    DampingParams damping;   // applied during the probe transit
    double probe_delay = 0.0;  // free evolution between injection and mode entry
    StepControl control;
};

/// Truncation large enough to hold the field after adding |beta| at any phase.
inline Truncation readout_truncation(const DensityOperator& field, double beta_abs) {
    const double m = std::pow(std::sqrt(std::max(mean_photon_number(field), 0.0)) + beta_abs, 2);
    return Truncation(std::max(field.truncation().n_max, truncation_for(m).n_max));
}

/// S_g(phi): probability that the probe atom, entering in g after the field
/// is displaced by -amplitude e^{-i phi}, is still in g after crossing the
/// mode over its transit window [-3w/v, 3w/v].
///
/// P_g = Tr[E D rho D^dag] with E diagonal, and D(r e^{i theta}) = R D(r) R^dag
/// with R = e^{i theta a^dag a}, so a single displacement matrix serves the
/// whole scan: S = sum_d c_d e^{i theta d}, c_d = sum_{k-j=d} M_kj rho_jk,
/// M = D(r)^dag E D(r).
inline PhaseScan homodyne_scan(const DensityOperator& field, double injection_amplitude,
                               const CouplingProfile& probe, const std::vector<double>& phi_grid,
                               const HomodyneOptions& opt = {}) {
    if (field.basis() != Basis::Field) throw DimensionMismatch("homodyne_scan: expects a field operator");
    const double r = std::abs(injection_amplitude);
    const Truncation tr = readout_truncation(field, r);
    const DensityOperator rho = embed(field, tr);
    const Eigen::Index dim = tr.dim();

    if (probe.kind != CouplingProfile::Kind::GaussianMode)
        throw std::invalid_argument("homodyne_scan: the probe needs a Gaussian mode profile");
    std::vector<Segment> transit;
    if (opt.probe_delay > 0.0) transit.push_back(Segment::free(opt.probe_delay));
    const double h = probe.transit_half_width();
    transit.push_back(Segment::coupled(probe, -h, h));
    const RVector e = probe_survival_operator(transit, opt.damping, tr, opt.control);

    const double mean_in = mean_photon_number(rho);
    const Complex amp_in = mean_amplitude(rho);
    const CMatrix d = displacement_matrix(Complex(r, 0.0), tr);
    const CMatrix m = d.adjoint() * e.asDiagonal() * d;
    std::vector<Complex> c(2 * dim - 1, Complex{});
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index k = 0; k < dim; ++k) c[k - j + dim - 1] += m(k, j) * rho.matrix()(j, k);

    PhaseScan scan;
    scan.phi = phi_grid;
    scan.s_g.reserve(phi_grid.size());
    for (double phi : phi_grid) {
        const double theta = kPi - phi;  // beta = -r e^{-i phi} = r e^{i theta}
        require_displacement_room(tr, mean_in, amp_in, std::polar(r, theta), "homodyne_scan");
        Complex s{};
        for (Eigen::Index dd = -(dim - 1); dd <= dim - 1; ++dd) s += c[dd + dim - 1] * std::polar(1.0, theta * dd);
        scan.s_g.push_back(std::clamp(s.real(), 0.0, 1.0));
    }
    return scan;
}

inline PhaseScan homodyne_scan(const FieldState& field, double injection_amplitude, const CouplingProfile& probe,
                               const std::vector<double>& phi_grid, const HomodyneOptions& opt = {}) {
    return homodyne_scan(DensityOperator::pure(field), injection_amplitude, probe, phi_grid, opt);
}

// ---------------------------------------------------------------------------
// Peak extraction: constant baseline plus K Gaussians, Levenberg-Marquardt.

struct PeakFitOptions {
    int max_iterations = 200;
    double max_residual = 0.1;       // RMS, FitDidNotConverge above this
    double mismatch_residual = 0.03;  // RMS, PeakCountMismatch when the count also differs
    double significance = 2.0 / 3.0;  // a maximum counts if it rises this far from the median to the top
};

namespace detail {

struct GaussianSumFunctor {
    const std::vector<double>& x;
    const std::vector<double>& y;
    int k;

    [[nodiscard]] int inputs() const { return 1 + 3 * k; }
    [[nodiscard]] int values() const { return int(x.size()); }

    // p = [baseline, (amp, center, sigma) * k]
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = p[0];
            for (int j = 0; j < k; ++j) {
                const double u = (x[i] - p[2 + 3 * j]) / p[3 + 3 * j];
                v += p[1 + 3 * j] * std::exp(-0.5 * u * u);
            }
            f[Eigen::Index(i)] = v - y[i];
        }
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto r = Eigen::Index(i);
            jac(r, 0) = 1.0;
            for (int j = 0; j < k; ++j) {
                const double a = p[1 + 3 * j], c = p[2 + 3 * j], s = p[3 + 3 * j];
                const double u = (x[i] - c) / s;
                const double g = std::exp(-0.5 * u * u);
                jac(r, 1 + 3 * j) = g;
                jac(r, 2 + 3 * j) = a * g * u / s;
                jac(r, 3 + 3 * j) = a * g * u * u / s;
            }
        }
        return 0;
    }
};

struct Maximum {
    double x, y;
};

// Local maxima of y (interior points), refined by a parabola through the
// three neighbouring samples.
inline std::vector<Maximum> local_maxima(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<Maximum> out;
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
        const double den = y[i - 1] - 2.0 * y[i] + y[i + 1];
        double off = den != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / den : 0.0;
        off = std::clamp(off, -0.5, 0.5);
        const double dx = x[i + 1] - x[i];
        out.push_back({x[i] + off * dx, y[i] - 0.25 * (y[i - 1] - y[i + 1]) * off});
    }
    return out;
}

}  // namespace detail

/// Fit the scan with a baseline plus `expected` Gaussians. Peaks come back
/// sorted by center, with the fit's standard error on each center.
inline std::vector<Peak> extract_peaks(PhaseScan& scan, int expected, const PeakFitOptions& opt = {}) {
    if (expected < 1) throw std::invalid_argument("extract_peaks: expected must be >= 1");
    const auto& x = scan.phi;
    const auto& y = scan.s_g;
    if (x.size() < std::size_t(3 * expected + 4)) throw std::invalid_argument("extract_peaks: scan too short");

    std::vector<double> sorted = y;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double base = sorted[sorted.size() / 2];
    const double top = *std::max_element(y.begin(), y.end());

    std::vector<detail::Maximum> maxima;
    for (const auto& m : detail::local_maxima(x, y))
        if (m.y - base >= opt.significance * (top - base)) maxima.push_back(m);
    std::sort(maxima.begin(), maxima.end(), [](const auto& a, const auto& b) { return a.y > b.y; });
    const int detected = int(maxima.size());

    const double dx = x[1] - x[0];
    double sigma0 = 0.1;
    {
        // half width at half maximum of the tallest peak
        const auto imax = std::size_t(std::max_element(y.begin(), y.end()) - y.begin());
        const double half = base + 0.5 * (top - base);
        std::size_t i = imax;
        while (i > 0 && y[i] > half) --i;
        sigma0 = std::max(2.0 * dx, (double(imax) - double(i)) * dx / 1.1774);
    }

    Eigen::VectorXd p(1 + 3 * expected);
    p[0] = base;
    for (int j = 0; j < expected; ++j) {
        double c, a;
        if (j < detected) {
            c = maxima[j].x;
            a = maxima[j].y - base;
        } else if (detected > 0) {
            // unresolved: split the tallest maximum
            c = maxima[0].x + (j % 2 ? -1.0 : 1.0) * sigma0 * (1 + j / 2);
            a = 0.5 * (maxima[0].y - base);
        } else {
            c = x[0] + (j + 1) * (x.back() - x[0]) / (expected + 1);
            a = top - base;
        }
        p[1 + 3 * j] = a;
        p[2 + 3 * j] = c;
        p[3 + 3 * j] = sigma0;
    }

    detail::GaussianSumFunctor fn{x, y, expected};
    Eigen::LevenbergMarquardt<detail::GaussianSumFunctor> lm(fn);
    lm.parameters.maxfev = opt.max_iterations;
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-12;
    const auto status = lm.minimize(p);

    Eigen::VectorXd f(fn.values());
    fn(p, f);
    const double rms = std::sqrt(f.squaredNorm() / double(f.size()));
    scan.fit_residual = rms;
    scan.baseline = p[0];

    if (status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation || status < 0 ||
        status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters)
        throw FitDidNotConverge("extract_peaks: no convergence within " + std::to_string(opt.max_iterations) +
                                " iterations");
    if (detected != expected && rms > opt.mismatch_residual)
        throw PeakCountMismatch("extract_peaks: found " + std::to_string(detected) + " maxima, expected " +
                                std::to_string(expected) + " (fit RMS " + std::to_string(rms) + ")");
    if (!(rms <= opt.max_residual))
        throw FitDidNotConverge("extract_peaks: fit RMS residual " + std::to_string(rms) + " exceeds " +
                                std::to_string(opt.max_residual));

    // standard errors from (J^T J)^{-1} scaled by the residual variance
    Eigen::MatrixXd jac(fn.values(), fn.inputs());
    fn.df(p, jac);
    const int dof = std::max(1, fn.values() - fn.inputs());
    const Eigen::MatrixXd cov =
        (jac.transpose() * jac).completeOrthogonalDecomposition().pseudoInverse() * (f.squaredNorm() / dof);

    std::vector<Peak> peaks;
    for (int j = 0; j < expected; ++j)
        peaks.push_back({p[2 + 3 * j], std::abs(p[3 + 3 * j]), p[1 + 3 * j],
                         std::sqrt(std::max(0.0, cov(2 + 3 * j, 2 + 3 * j)))});
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.center < b.center; });
    scan.peaks = peaks;
    return peaks;
}

// ---------------------------------------------------------------------------
// Wigner function, W(0) = 2/pi for the vacuum and \int W d^2 beta = 1.

struct WignerGrid {
    std::vector<double> beta_x;
    std::vector<double> beta_y;
    RMatrix values;  // values(iy, ix)

    [[nodiscard]] double integral() const {
        if (beta_x.size() < 2 || beta_y.size() < 2) return 0.0;
        return values.sum() * (beta_x[1] - beta_x[0]) * (beta_y[1] - beta_y[0]);
    }
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

/// W at one point from the Fock-basis Laguerre recursion
/// W_mn(beta) built up from W_00 = (2/pi) e^{-2|beta|^2}.
inline double wigner_at(const CMatrix& rho, Complex beta) {
    const Eigen::Index dim = rho.rows();
    thread_local std::vector<Complex> w;
    w.assign(dim, Complex{});
    const Complex a = beta;
    w[0] = std::exp(-2.0 * std::norm(a)) / kPi;
    double acc = rho(0, 0).real() * w[0].real();
    for (Eigen::Index n = 1; n < dim; ++n) {
        w[n] = 2.0 * a * w[n - 1] / std::sqrt(double(n));
        acc += 2.0 * std::real(rho(0, n) * w[n]);
    }
    for (Eigen::Index m = 1; m < dim; ++m) {
        Complex tmp = w[m];
        const double sm = std::sqrt(double(m));
        w[m] = (2.0 * std::conj(a) * tmp - sm * w[m - 1]) / sm;
        acc += std::real(rho(m, m) * w[m]);
        for (Eigen::Index n = m + 1; n < dim; ++n) {
            const Complex next = (2.0 * a * w[n - 1] - sm * tmp) / std::sqrt(double(n));
            tmp = w[n];
            w[n] = next;
            acc += 2.0 * std::real(rho(m, n) * w[n]);
        }
    }
    return 2.0 * acc;
}

inline WignerGrid wigner(const DensityOperator& field, const std::vector<double>& bx, const std::vector<double>& by) {
    if (field.basis() != Basis::Field) throw DimensionMismatch("wigner: expects a field operator");
    // the grid must reach the state: its mean amplitude has to lie inside
    const Complex c = mean_amplitude(field);
    if (!bx.empty() && !by.empty() &&
        (c.real() < bx.front() || c.real() > bx.back() || c.imag() < by.front() || c.imag() > by.back()))
        throw std::invalid_argument("wigner: grid does not contain the field's mean amplitude");
    const double mean = mean_photon_number(field);
    if (mean + 6.0 * std::sqrt(mean) >= field.truncation().n_max)
        throw TruncationTooSmall("wigner: field populates the truncation edge");
    WignerGrid g{bx, by, RMatrix(Eigen::Index(by.size()), Eigen::Index(bx.size()))};
    for (std::size_t iy = 0; iy < by.size(); ++iy)
        for (std::size_t ix = 0; ix < bx.size(); ++ix)
            g.values(Eigen::Index(iy), Eigen::Index(ix)) = wigner_at(field.matrix(), Complex(bx[ix], by[iy]));
    return g;
}

inline WignerGrid wigner(const FieldState& s, const std::vector<double>& bx, const std::vector<double>& by) {
    return wigner(DensityOperator::pure(s), bx, by);
}

/// Displaced-parity form (2/pi) Tr[Pi D(-beta) rho D(-beta)^dag]. The field
/// is padded to `work` levels so the displaced state is not clipped.
inline double wigner_parity(const DensityOperator& field, Complex beta, Truncation work) {
    const DensityOperator big = embed(field, work);
    const CMatrix d = displacement_matrix(-beta, work);
    const CMatrix shifted = d * big.matrix() * d.adjoint();
    double acc = 0.0;
    for (Eigen::Index n = 0; n < work.dim(); ++n) acc += (n % 2 ? -1.0 : 1.0) * shifted(n, n).real();
    return 2.0 / kPi * acc;
}

/// P(phi) = |<phi|psi>|^2 with phase states sum_n e^{i n phi} |n> / sqrt(2 pi).
inline std::vector<double> phase_distribution(const DensityOperator& field, const std::vector<double>& phi_grid) {
    if (field.basis() != Basis::Field) throw DimensionMismatch("phase_distribution: expects a field operator");
    const Eigen::Index dim = field.dim();
    std::vector<Complex> c(dim, Complex{});  // c_d = sum_n rho_{n+d, n}
    for (Eigen::Index d = 0; d < dim; ++d)
        for (Eigen::Index n = 0; n + d < dim; ++n) c[d] += field.matrix()(n + d, n);
    std::vector<double> out;
    out.reserve(phi_grid.size());
    for (double phi : phi_grid) {
        double p = c[0].real();
        for (Eigen::Index d = 1; d < dim; ++d) p += 2.0 * std::real(c[d] * std::polar(1.0, -double(d) * phi));
        out.push_back(std::max(0.0, p) / (2.0 * kPi));
    }
    return out;
}

inline std::vector<double> phase_distribution(const FieldState& s, const std::vector<double>& phi_grid) {
    return phase_distribution(DensityOperator::pure(s), phi_grid);
}

// ---------------------------------------------------------------------------
// Cat interference fringes.

struct FringeFit {
    double amplitude = 0.0;  // sqrt(c1^2 + c2^2)
    double wavevector = 0.0;
};

/// Amplitude of the interference term between two components centred on
/// beta1 and beta2. W is sampled on the line through their midpoint,
/// perpendicular to their separation, where the cross term is
/// e^{-2 x^2} (c1 cos kx + c2 sin kx) with k = 2 |beta1 - beta2|.
inline FringeFit fringe_amplitude(const DensityOperator& field, Complex beta1, Complex beta2, int samples = 81) {
    const Complex delta = beta1 - beta2;
    if (std::abs(delta) < 1e-9) throw ZeroSeparation("fringe_amplitude: the two components coincide");
    const Complex mid = 0.5 * (beta1 + beta2);
    const Complex u = kI * delta / std::abs(delta);
    const double k = 2.0 * std::abs(delta);
    Eigen::MatrixXd a(samples, 2);
    Eigen::VectorXd w(samples);
    for (int i = 0; i < samples; ++i) {
        const double x = -1.5 + 3.0 * i / (samples - 1);
        const double env = std::exp(-2.0 * x * x);
        a(i, 0) = env * std::cos(k * x);
        a(i, 1) = env * std::sin(k * x);
        w[i] = wigner_at(field.matrix(), mid + x * u);
    }
    const Eigen::Vector2d c = a.colPivHouseholderQr().solve(w);
    return {c.norm(), k};
}

}  // namespace cqed
