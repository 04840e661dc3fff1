#include "cqed/mesoscopic.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cqed;

namespace {

constexpr double kOmega = 3e5;
constexpr double kTcav = 850e-6;

double joint_fidelity(const JointState& a, const JointState& b) {
    return std::norm(a.amplitudes().dot(b.amplitudes())) / (a.amplitudes().squaredNorm() * b.amplitudes().squaredNorm());
}

}  // namespace

TEST(ComponentPhase, Values) {
    EXPECT_EQ(component_phase(kOmega, 0.0, 36.0), 0.0);
    EXPECT_NEAR(component_phase(kOmega, 32e-6, 36.0), 0.4, 1e-12);
    EXPECT_NEAR(component_phase(kOmega, 52e-6, 15.0), 3e5 * 52e-6 / (4 * std::sqrt(15.0)), 1e-14);
    EXPECT_NEAR(component_phase(kOmega, 52e-6, 15.0), 1.007, 1e-3);
    EXPECT_THROW(component_phase(kOmega, 1e-6, 0.0), ZeroField);
}

TEST(FieldComponent, StartsAsTheCoherentState) {
    const auto p = CoherentParams::from_mean(36.0);
    const Truncation t = truncation_for(36.0);
    for (auto b : {Branch::plus, Branch::minus})
        EXPECT_GE(fidelity(approx_field_component(b, p, kOmega, 0.0, t), coherent_state(p, t)), 1.0 - 1e-10);
}

TEST(FieldComponent, ComponentsRotateInOppositeDirections) {
    const auto p = CoherentParams::from_mean(36.0);
    const Truncation t = truncation_for(36.0);
    const double ap = std::arg(mean_amplitude(approx_field_component(Branch::plus, p, kOmega, 32e-6, t)));
    const double am = std::arg(mean_amplitude(approx_field_component(Branch::minus, p, kOmega, 32e-6, t)));
    EXPECT_NEAR(ap, -0.4, 0.02);
    EXPECT_NEAR(am, 0.4, 0.02);
}

TEST(FieldComponent, RejectsSmallFields) {
    EXPECT_THROW(approx_field_component(Branch::plus, CoherentParams::from_mean(3.0), kOmega, 1e-6, truncation_for(3.0)),
                 FieldTooSmall);
}

TEST(AtomState, DipoleStatesAtZeroAndOverlap) {
    const auto p0 = approx_atom_state(Branch::plus, kOmega, 0.0, 36.0);
    const auto m0 = approx_atom_state(Branch::minus, kOmega, 0.0, 36.0);
    EXPECT_TRUE(p0.isApprox(Eigen::Vector2cd(1.0, 1.0) / std::sqrt(2.0)));
    EXPECT_TRUE(m0.isApprox(Eigen::Vector2cd(1.0, -1.0) / std::sqrt(2.0)));
    const auto p = approx_atom_state(Branch::plus, kOmega, 32e-6, 36.0);
    const auto m = approx_atom_state(Branch::minus, kOmega, 32e-6, 36.0);
    EXPECT_NEAR(std::abs(m.dot(p)), std::sin(0.4), 1e-12);
}

TEST(ApproxPg, StartsInGround) {
    EXPECT_NEAR(approx_Pg(CoherentParams::from_mean(36.0), kOmega, 0.0, truncation_for(36.0)), 1.0, 1e-10);
}

TEST(ApproxPg, CollapseOverlapIndependentOfPhotonNumber) {
    std::vector<double> tc;
    for (double nb : {15.0, 25.0, 36.0})
        tc.push_back(approx_collapse_time(CoherentParams::from_mean(nb), kOmega, truncation_for(nb)));
    for (double x : tc) EXPECT_NEAR(x / tc.back(), 1.0, 0.10);
    // leading order: exp(-(Omega t)^2 / 8) = 0.1
    EXPECT_NEAR(tc.back(), std::sqrt(8.0 * std::log(10.0)) / kOmega, 0.05 * tc.back());
}

TEST(CatMetrics, ClosedFormValues) {
    const auto a = cat_metrics(kOmega, 32e-6, 36.0, kTcav);
    EXPECT_NEAR(a.d_squared, 144.0 * std::pow(std::sin(0.4), 2), 1e-12);
    EXPECT_NEAR(a.d_squared, 21.84, 0.01);
    const auto b = cat_metrics(kOmega, 53e-6, 15.0, kTcav);
    EXPECT_NEAR(b.d_squared, 43.9, 0.1);
    EXPECT_NEAR(b.decoherence_time, 2 * kTcav / b.d_squared, 1e-18);
}

TEST(CatMetrics, DecoherenceTimeForSeparationForty) {
    const double nb = 36.0;
    const double t = 4.0 * std::sqrt(nb) * std::asin(std::sqrt(40.0 / (4.0 * nb))) / kOmega;
    const auto m = cat_metrics(kOmega, t, nb, kTcav);
    EXPECT_NEAR(m.d_squared, 40.0, 1e-9);
    EXPECT_NEAR(m.decoherence_time, 42.5e-6, 1e-9);
}

TEST(CatMetrics, ZeroSeparation) {
    EXPECT_THROW(cat_metrics(kOmega, 0.0, 36.0, kTcav), ZeroSeparation);
    EXPECT_TRUE(std::isinf(cat_metrics(kOmega, 0.0, 36.0, kTcav, true).decoherence_time));
}

TEST(ClassicalLimit, ScalingLaws) {
    const auto base = classical_limit_check(1.0, kOmega, 15.0, 32e-6);
    for (double s : {2.0, 4.0}) {
        const auto pt = classical_limit_check(s, kOmega, 15.0, 32e-6);
        EXPECT_NEAR(pt.rabi_frequency / base.rabi_frequency, 1.0, 1e-12);
        EXPECT_NEAR(pt.phi_plus / base.phi_plus, 1.0 / (s * s), 1e-12);
        EXPECT_NEAR(pt.collapse_time / base.collapse_time, s, 0.10 * s);
    }
    EXPECT_THROW(classical_limit_check(0.5, kOmega, 15.0, 32e-6), std::invalid_argument);
}

// Properties of the two-component expansion.

TEST(MesoscopicProperties, ReducesToInitialStateAtZero) {
    const auto p = CoherentParams::from_mean(36.0);
    const Truncation t = truncation_for(36.0);
    const auto s = approx_joint_state(p, kOmega, 0.0, t);
    EXPECT_GE(joint_fidelity(s, product_state(Level::g, coherent_state(p, t))), 1.0 - 1e-10);
}

TEST(MesoscopicProperties, ApproximatesExactJointState) {
    const auto p = CoherentParams::from_mean(36.0);
    const Truncation t = truncation_for(36.0);
    const auto s0 = product_state(Level::g, coherent_state(p, t));
    for (double area = 0.0; area <= 10.0; area += 0.5) {
        const auto approx = approx_joint_state(p, kOmega, area / kOmega, t);
        EXPECT_GE(joint_fidelity(approx, evolve_area(s0, area)), 0.98) << "Omega t=" << area;
    }
}

TEST(MesoscopicProperties, ReassembledNormErrorShrinksWithPhotonNumber) {
    // The norm defect is the cross term Re(e^{i Omega sqrt(n) t} <phi+|phi-><alpha+|alpha->),
    // which is O(1/sqrt(n_bar)) and largest around Omega t ~ 2.
    std::vector<double> worst;
    for (double nb : {15.0, 25.0, 36.0, 64.0}) {
        const auto p = CoherentParams::from_mean(nb);
        const Truncation t = truncation_for(nb);
        double w = 0.0;
        for (double area = 0.0; area <= 16.0; area += 0.1)
            w = std::max(w, std::abs(approx_joint_state(p, kOmega, area / kOmega, t).norm() - 1.0));
        worst.push_back(w);
        RecordProperty("norm_defect_n" + std::to_string(int(nb)), std::to_string(w));
        EXPECT_LT(w * std::sqrt(nb), 0.16) << "n=" << nb;
    }
    for (std::size_t i = 1; i < worst.size(); ++i) EXPECT_LT(worst[i], worst[i - 1]);
    EXPECT_LT(worst.back(), 0.02);
}

TEST(MesoscopicProperties, ComponentsMatchExactDecomposition) {
    // Split the exact state on the (non-orthogonal) pair |phi+>, |phi->: for each n
    // solve [phi+ phi-] (f+_n, f-_n) = (psi_e,n, psi_g,n).
    const double nb = 36.0, t = 32e-6;
    const auto p = CoherentParams::from_mean(nb);
    const Truncation tr = truncation_for(nb);
    const auto psi = evolve_area(product_state(Level::g, coherent_state(p, tr)), kOmega * t);
    const auto sp = split_components(p, kOmega, t, tr);
    Eigen::Matrix2cd basis;
    basis << sp.plus_atom, sp.minus_atom;
    const Eigen::Matrix2cd inv = basis.inverse();
    const CVector e = psi.level_block(Level::e), g = psi.level_block(Level::g);
    CVector fp(tr.dim()), fm(tr.dim());
    for (int n = 0; n <= tr.n_max; ++n) {
        const Eigen::Vector2cd c = inv * Eigen::Vector2cd(e[n], g[n]);
        fp[n] = c[0];
        fm[n] = c[1];
    }
    EXPECT_GE(fidelity(FieldState(fp.normalized(), tr), sp.plus_field), 0.95);
    EXPECT_GE(fidelity(FieldState(fm.normalized(), tr), sp.minus_field), 0.95);
}

TEST(MesoscopicProperties, OverlapConjugateSymmetry) {
    const auto p = CoherentParams::from_mean(20.0);
    const Truncation t = truncation_for(20.0);
    const auto plus = approx_field_component(Branch::plus, p, kOmega, 20e-6, t);
    const auto minus = approx_field_component(Branch::minus, p, kOmega, 20e-6, t);
    EXPECT_NEAR(std::abs(overlap(plus, minus) - std::conj(overlap(minus, plus))), 0.0, 1e-14);
}

TEST(MesoscopicProperties, SeparationGrowsUntilFirstMaximum) {
    const double nb = 36.0;
    // sin^2(Phi+) peaks at Phi+ = pi/2
    const double t_peak = 0.5 * kPi * 4.0 * std::sqrt(nb) / kOmega;
    double prev = 0.0;
    for (double t = t_peak / 50; t <= t_peak; t += t_peak / 50) {
        const double d2 = cat_metrics(kOmega, t, nb, kTcav).d_squared;
        EXPECT_GT(d2, prev);
        prev = d2;
    }
}

TEST(MesoscopicProperties, AccuracyDegradesAtSmallPhotonNumber) {
    // same interaction area, smaller field: the expansion in 1/n_bar gets worse
    std::vector<double> fid;
    for (double nb : {36.0, 15.0, 6.0}) {
        const auto p = CoherentParams::from_mean(nb);
        const Truncation t = truncation_for(nb);
        const double area = 12.0;
        fid.push_back(joint_fidelity(approx_joint_state(p, kOmega, area / kOmega, t),
                                     evolve_area(product_state(Level::g, coherent_state(p, t)), area)));
        RecordProperty("fidelity_n" + std::to_string(int(nb)), std::to_string(fid.back()));
    }
    EXPECT_GT(fid[0], fid[1]);
    EXPECT_GT(fid[1], fid[2]);
}
