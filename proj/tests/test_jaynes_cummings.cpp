#include "cqed/jaynes_cummings.hpp"
#include "cqed/mesoscopic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace cqed;

namespace {

constexpr double kOmega = 3e5;

std::vector<double> grid(double t0, double t1, double dt) {
    std::vector<double> g;
    for (std::size_t i = 0;; ++i) {
        const double t = t0 + i * dt;
        if (t > t1 + 1e-15) break;
        g.push_back(t);
    }
    return g;
}

// Closed-form P_g for a coherent field: the atom starting in g couples |g,n>
// to |e,n-1> with strength sqrt(n); starting in e it couples |e,n> to |g,n+1>.
double pg_scalar_sum(double n_bar, double area, Level start) {
    double s = 0.0;
    for (int n = 0; n < 400; ++n) {
        const double w = std::exp(-n_bar + n * std::log(n_bar) - std::lgamma(n + 1.0));
        if (start == Level::g) s += w * std::pow(std::cos(0.5 * area * std::sqrt(double(n))), 2);
        else s += w * std::pow(std::sin(0.5 * area * std::sqrt(n + 1.0)), 2);
    }
    return s;
}

JointState random_state(std::mt19937& rng, Truncation t) {
    std::normal_distribution<double> g;
    CVector v(2 * t.dim());
    for (auto& x : v) x = Complex(g(rng), g(rng));
    return JointState(v.normalized(), t);
}

}  // namespace

TEST(EvolveBlock, ZeroAngleIsIdentity) {
    EXPECT_TRUE(evolve_block(3, 0.0).isApprox(Eigen::Matrix2cd::Identity()));
}

TEST(EvolveBlock, SinglePhotonSwap) {
    // |e,0> -> -i |g,1> after a vacuum pi pulse
    const Eigen::Matrix2cd u = evolve_block(0, kPi / 2);
    Eigen::Vector2cd e0(0.0, 1.0);
    const Eigen::Vector2cd out = u * e0;
    EXPECT_NEAR(std::abs(out[0] - Complex(0.0, -1.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(out[1]), 0.0, 1e-12);
}

TEST(EvolveBlock, LargeBlockEntries) {
    const double theta = 0.5 * 9.6 * std::sqrt(36.0);
    const Eigen::Matrix2cd u = evolve_block(35, theta);
    EXPECT_NEAR(u(0, 0).real(), std::cos(28.8), 1e-12);
    EXPECT_NEAR(u(0, 1).imag(), -std::sin(28.8), 1e-12);
    EXPECT_TRUE((u.adjoint() * u).isApprox(Eigen::Matrix2cd::Identity(), 1e-12));
}

TEST(Evolve, GroundVacuumIsStationary) {
    const auto s0 = product_state(Level::g, vacuum(Truncation(5)));
    EXPECT_EQ(probability(evolve_area(s0, 7.3), Level::g), 1.0);
}

TEST(Evolve, VacuumRabiPiPulseEmitsThePhoton) {
    const auto s0 = product_state(Level::e, vacuum(Truncation(5)));
    const auto s = evolve(s0, CouplingProfile::constant(kOmega), kPi / kOmega);
    EXPECT_NEAR(probability(s, Level::g), 1.0, 1e-12);
    EXPECT_NEAR(std::norm(s.amplitude(Level::g, 1)), 1.0, 1e-12);
}

TEST(Evolve, ProbabilityMatchesScalarSum) {
    for (double nb : {1.0, 15.0, 36.0}) {
        const auto field = coherent_state(CoherentParams::from_mean(nb), truncation_for(nb));
        for (double t : {5e-6, 32e-6, 53e-6, 160e-6}) {
            const double area = kOmega * t;
            EXPECT_NEAR(probability(evolve_area(product_state(Level::g, field), area), Level::g),
                        pg_scalar_sum(nb, area, Level::g), 1e-9)
                << "n=" << nb << " t=" << t;
            EXPECT_NEAR(probability(evolve_area(product_state(Level::e, field), area), Level::g),
                        pg_scalar_sum(nb, area, Level::e), 1e-9)
                << "n=" << nb << " t=" << t;
        }
    }
}

TEST(Evolve, GaussianTransitEqualsConstantCouplingOverInteractionTime) {
    const auto g = CouplingProfile::gaussian(kOmega, 6e-3, 335.0);
    EXPECT_NEAR(g.interaction_time(), std::sqrt(kPi) * 6e-3 / 335.0, 1e-18);
    const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(36.0), truncation_for(36.0)));
    const auto a = evolve(s0, g, std::numeric_limits<double>::infinity());
    const auto b = evolve(s0, CouplingProfile::constant(kOmega), g.interaction_time());
    EXPECT_GE(std::norm(a.amplitudes().dot(b.amplitudes())), 1.0 - 1e-9);
}

TEST(Evolve, PulseAreaOfTheTransitWindow) {
    const auto g = CouplingProfile::gaussian(kOmega, 6e-3, 200.0);
    const double h = g.transit_half_width();
    EXPECT_NEAR(g.pulse_area(-h, h) / g.full_transit_area(), std::erf(3.0), 1e-12);
    EXPECT_NEAR(g.max_coupling(-1e-6, 1e-6), kOmega, 0.0);
    EXPECT_NEAR(g.max_coupling(h, 2 * h), kOmega * std::exp(-9.0), 1e-9);
}

TEST(RabiTrace, StaysInUnitInterval) {
    const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(15.0), truncation_for(15.0)));
    const auto tr = rabi_trace(s0, CouplingProfile::constant(kOmega), grid(0.0, 200e-6, 0.5e-6));
    for (double p : tr) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
    }
    EXPECT_THROW(rabi_trace(s0, CouplingProfile::constant(kOmega), {1.0, 0.5}), std::invalid_argument);
}

TEST(RabiTrace, CollapseTimeIndependentOfPhotonNumber) {
    std::vector<double> tc;
    for (double nb : {15.0, 36.0}) {
        const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(nb), truncation_for(nb)));
        const auto t = grid(0.0, 60e-6, 0.05e-6);
        const auto c = oscillation_contrast(t, rabi_trace(s0, CouplingProfile::constant(kOmega), t),
                                            rabi_period(kOmega, nb));
        tc.push_back(collapse_time(t, c));
    }
    EXPECT_NEAR(tc[0] / tc[1], 1.0, 0.10);
}

TEST(RabiTrace, ApproximatePgTracksExactBeforeCollapse) {
    const double nb = 36.0;
    const Truncation tr = truncation_for(nb);
    const auto p = CoherentParams::from_mean(nb);
    const auto s0 = product_state(Level::g, coherent_state(p, tr));
    for (double t = 0.0; t <= 60e-6; t += 0.5e-6)
        EXPECT_NEAR(probability(evolve_area(s0, kOmega * t), Level::g), approx_Pg(p, kOmega, t, tr), 0.05) << t;
}

TEST(RabiTrace, SpontaneousRevivalNearPrediction) {
    const double nb = 15.0;
    const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(nb), truncation_for(nb)));
    const auto t = grid(0.0, 250e-6, 0.1e-6);
    const auto c = oscillation_contrast(t, rabi_trace(s0, CouplingProfile::constant(kOmega), t),
                                        rabi_period(kOmega, nb));
    const double predicted = 4.0 * kPi * std::sqrt(nb) / kOmega;
    const auto r = find_revival(t, c, 0.5 * predicted, 1.5 * predicted);
    EXPECT_NEAR(r.time / predicted, 1.0, 0.10);
    EXPECT_NEAR(r.center / predicted, 1.0, 0.10);
    EXPECT_GT(r.contrast, 0.3);
}

TEST(StarkPulse, ZeroPhaseIsIdentityAndPiFlipsTheSign) {
    const Truncation t(4);
    const auto s = product_state(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), vacuum(t));
    EXPECT_TRUE(stark_phase_pulse(s, 0.0).amplitudes().isApprox(s.amplitudes()));
    const auto f = stark_phase_pulse(s, kPi);
    EXPECT_NEAR(std::abs(f.amplitude(Level::e, 0) + 1.0 / std::sqrt(2.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(f.amplitude(Level::g, 0) - 1.0 / std::sqrt(2.0)), 0.0, 1e-12);
    EXPECT_TRUE(stark_phase_pulse(f, kPi).amplitudes().isApprox(s.amplitudes(), 1e-14));
}

TEST(DipolePreparation, PulseProductMapsGroundToDipoleState) {
    // atomic 2x2 picture in the (g, e) ordering of evolve_block
    const Eigen::Matrix2cd rabi = evolve_block(26, kPi / 4);
    Eigen::Matrix2cd stark = Eigen::Matrix2cd::Identity();
    stark(1, 1) = std::polar(1.0, kPi / 2);
    const Eigen::Vector2cd g(1.0, 0.0), e(0.0, 1.0);
    const Eigen::Vector2cd plus = Eigen::Vector2cd(1.0, 1.0) / std::sqrt(2.0);
    const Eigen::Vector2cd minus = Eigen::Vector2cd(-1.0, 1.0) / std::sqrt(2.0);
    EXPECT_GE(std::norm(plus.dot(stark * rabi * g)), 1.0 - 1e-6);
    EXPECT_GE(std::norm(minus.dot(stark * rabi * e)), 1.0 - 1e-6);
}

TEST(DipolePreparation, AtomicFidelityWithCoherentField) {
    const auto prof = CouplingProfile::constant(kOmega);
    std::vector<double> minus;
    for (double nb : {15.0, 27.0, 36.0}) {
        const auto field = coherent_state(CoherentParams::from_mean(nb), truncation_for(nb));
        for (auto which : {DipoleState::plus, DipoleState::minus}) {
            const auto s = prepare_dipole_state(which, field, prof);
            // reduced atomic state
            const CVector e = s.level_block(Level::e), g = s.level_block(Level::g);
            Eigen::Matrix2cd rho;
            rho << e.squaredNorm(), g.dot(e), e.dot(g), g.squaredNorm();
            Eigen::Vector2cd target(which == DipoleState::plus ? 1.0 : -1.0, 1.0);
            target /= std::sqrt(2.0);
            const double f = (target.adjoint() * rho * target)(0, 0).real();
            RecordProperty(std::string(which == DipoleState::plus ? "plus_n" : "minus_n") +
                               std::to_string(int(nb)),
                           std::to_string(f));
            if (which == DipoleState::plus) EXPECT_GE(f, 0.99) << "n=" << nb;
            else minus.push_back(f);
        }
    }
    // Starting from e the calibrated pulse is slightly off (sqrt(n+1) vs sqrt(n));
    // the error falls as the field grows.
    EXPECT_LT(minus[0], minus[1]);
    EXPECT_LT(minus[1], minus[2]);
    EXPECT_GE(minus[2], 0.98);
}

TEST(DipolePreparation, RejectsWeakField) {
    const auto field = coherent_state(CoherentParams::from_mean(3.0), truncation_for(3.0));
    EXPECT_THROW(prepare_dipole_state(DipoleState::plus, field, CouplingProfile::constant(kOmega)), FieldTooSmall);
}

TEST(Echo, MatchesPlainEvolutionBeforeTheFlip) {
    const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(36.0), truncation_for(36.0)));
    const auto prof = CouplingProfile::constant(kOmega);
    const auto tr = echo_sequence(s0, prof, 20e-6, 0.1e-6);
    const auto plain = rabi_trace(s0, prof, tr.t);
    for (std::size_t i = 0; i < tr.t.size() && tr.t[i] <= 20e-6; ++i) EXPECT_NEAR(tr.p_g[i], plain[i], 1e-12);
}

TEST(Echo, RevivalAtTwiceTheFlipTime) {
    const double nb = 36.0, T = 20e-6;
    const auto s0 = product_state(Level::g, coherent_state(CoherentParams::from_mean(nb), truncation_for(nb)));
    const auto tr = echo_sequence(s0, CouplingProfile::constant(kOmega), T, 0.05e-6);
    const auto c = oscillation_contrast(tr.t, tr.p_g, rabi_period(kOmega, nb));
    const auto r = find_revival(tr.t, c, 1.5 * T, 2.5 * T);
    EXPECT_NEAR(r.center, 2 * T, 1e-6);
    EXPECT_GE(r.contrast, 0.5);
}

TEST(Echo, RejectsNonPositiveStep) {
    const auto s0 = product_state(Level::g, vacuum(Truncation(3)));
    EXPECT_THROW(echo_sequence(s0, CouplingProfile::constant(kOmega), 1e-6, 0.0), std::invalid_argument);
}

TEST(FindRevival, CenterOfFlatTop) {
    std::vector<double> t, c;
    for (int i = 0; i <= 100; ++i) {
        t.push_back(i);
        c.push_back(i >= 40 && i <= 60 ? (i == 42 ? 1.0 : 0.9) : 0.1);
    }
    const auto r = find_revival(t, c, 10, 90);
    EXPECT_EQ(r.time, 42);
    EXPECT_EQ(r.center, 50);
    EXPECT_EQ(r.contrast, 1.0);
}

// Properties over random states and areas.

TEST(JaynesCummingsProperties, UnitaryAndExcitationConserving) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> area(0.0, 40.0);
    const Truncation t(30);
    for (int trial = 0; trial < 25; ++trial) {
        const auto s = random_state(rng, t);
        // the truncation-edge state |e,n_max> is uncoupled, so drop it for a clean check
        JointState s0 = s;
        s0.amplitudes()[s0.index(Level::e, t.n_max)] = 0.0;
        s0.amplitudes().normalize();
        const auto s1 = evolve_area(s0, area(rng));
        EXPECT_NEAR(s1.norm(), 1.0, 1e-12);
        EXPECT_NEAR(mean_excitation(s1), mean_excitation(s0), 1e-9);
        // populations inside each excitation manifold are conserved
        for (int n = 0; n < t.n_max; ++n) {
            const double before = std::norm(s0.amplitude(Level::g, n + 1)) + std::norm(s0.amplitude(Level::e, n));
            const double after = std::norm(s1.amplitude(Level::g, n + 1)) + std::norm(s1.amplitude(Level::e, n));
            EXPECT_NEAR(before, after, 1e-12);
        }
    }
}

TEST(JaynesCummingsProperties, AreasCompose) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> area(0.0, 20.0);
    const Truncation t(25);
    for (int trial = 0; trial < 10; ++trial) {
        const auto s = random_state(rng, t);
        const double a1 = area(rng), a2 = area(rng);
        EXPECT_TRUE(evolve_area(evolve_area(s, a1), a2).amplitudes().isApprox(evolve_area(s, a1 + a2).amplitudes(), 1e-10));
    }
}
