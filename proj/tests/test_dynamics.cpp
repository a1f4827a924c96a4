#include <gtest/gtest.h>

#include "support.hpp"

#include <atomlaser/dynamics.hpp>

using namespace atomlaser;
using namespace testsupport;

namespace {

// two-mode toy trap: mode 0 pure particle, mode 1 with a v admixture
HfbSolution toy_trap() {
    HfbSolution h;
    const int n = 4;
    h.condensate.psi = VectorXd::Constant(n, 0.5);
    h.condensate.n0 = 1000;
    h.condensate.mu = 2;
    h.modes.E = (VectorXd(2) << 1.5, 3.0).finished();
    h.modes.u = MatrixXd::Zero(n, 2);
    h.modes.v = MatrixXd::Zero(n, 2);
    // dx = 1: int u^2 - int v^2 = 1
    h.modes.u(0, 0) = 1.0;
    h.modes.u(1, 1) = std::sqrt(1.25);
    h.modes.v(2, 1) = 0.5;
    h.occupation = (VectorXd(2) << 4.0, 2.0).finished();
    return h;
}

DecayRates rates(double g0, double gp0, double gm0, double gp1, double gm1) {
    DecayRates r;
    r.gamma0 = g0;
    r.gamma_plus = (VectorXd(2) << gp0, gp1).finished();
    r.gamma_minus = (VectorXd(2) << gm0, gm1).finished();
    r.level_shift = VectorXd::Zero(2);
    return r;
}

std::vector<double> grid(double t_end, int n) {
    std::vector<double> t;
    for (int i = 0; i < n; ++i) t.push_back(t_end * i / (n - 1));
    return t;
}

}  // namespace

TEST(Bookkeeping, EventDeltasSumToOneAtomOut) {
    for (double vv : {0.0, 0.3, 2.0}) {
        VectorXd v = VectorXd::Constant(4, std::sqrt(vv / 4));
        const EventDeltas d = bookkeeping_deltas(v, 1.0);
        EXPECT_DOUBLE_EQ(d.dnj_sqe + d.dn0_sqe, -1.0);
        EXPECT_DOUBLE_EQ(d.dnj_pb + d.dn0_pb, -1.0);
    }
    const EventDeltas z = bookkeeping_deltas(VectorXd::Zero(3), 1.0);
    EXPECT_EQ(z.dnj_sqe, -1.0);
    EXPECT_EQ(z.dn0_sqe, 0.0);
    EXPECT_EQ(z.dnj_pb, 1.0);
    EXPECT_EQ(z.dn0_pb, -2.0);
}

TEST(Bookkeeping, PairBreakingWeightForms) {
    // -2 (1 + int v^2) equals -2 int u^2 through the mode normalization
    const Prepared p = prepare(coarse_config(150));
    const ModeWeights w = mode_weights(p.h, p.s.dx());
    for (int j = 0; j < p.h.modes.count(); ++j) EXPECT_NEAR(-2.0 * (1.0 + w.vv[j]), -2.0 * w.uu[j], 1e-5);
}

TEST(Energy, RateExamples) {
    const VectorXd E = (VectorXd(2) << 1.0, 2.0).finished();
    EXPECT_EQ(energy_rate(2.5, -3.0, E, VectorXd::Zero(2)), -7.5);
    EXPECT_EQ(energy_rate(2.5, 0.0, E, VectorXd::Zero(2)), 0.0);
    // SQE event on an ideal-gas mode: dE = -(mu + E_j) per atom out
    EXPECT_EQ(energy_rate(2.5, -1.0, E, (VectorXd(2) << 0.0, -1.0).finished()), -(2.5 + 2.0));
}

TEST(Evolve, AnalyticExponentials) {
    const HfbSolution h = toy_trap();
    const DecayRates r = rates(0.01, 0.05, 0.0, 0.0, -0.02);
    const auto t = grid(50, 51);
    const PopulationTrajectory tr = evolve_adiabatic(r, h, 1.0, t);
    ASSERT_EQ(tr.t.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        EXPECT_NEAR(tr.n[i][0], 4.0 * std::exp(-0.1 * t[i]), 1e-7);
        EXPECT_NEAR(tr.n[i][1] + 1.0, 3.0 * std::exp(0.04 * t[i]), 1e-7 * std::exp(0.04 * t[i]));
    }
    EXPECT_LT(tr.closure_error(), 1e-9);
    EXPECT_FALSE(tr.terminated);
}

TEST(Evolve, CoherentOnlyOutput) {
    const HfbSolution h = toy_trap();
    const PopulationTrajectory tr = evolve_adiabatic(rates(0.02, 0, 0, 0, 0), h, 1.0, grid(30, 31));
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        EXPECT_NEAR(tr.N0[i], 1000 * std::exp(-0.04 * tr.t[i]), 1e-6);
        EXPECT_NEAR(tr.Et[i], h.mu() * (tr.Nt[i] - tr.Nt[0]), 1e-6);
        EXPECT_EQ(tr.excitations[i], tr.excitations[0]);
    }
}

TEST(Evolve, SqeEventsRefillTheCondensateFromV) {
    // mode 1 carries int v^2 = 0.25: each SQE event puts +0.5 atoms into the condensate
    const HfbSolution h = toy_trap();
    const PopulationTrajectory tr = evolve_adiabatic(rates(0, 0, 0, 0.03, 0), h, 1.0, grid(40, 41));
    const double lost = h.occupation[1] - tr.n.back()[1];
    EXPECT_NEAR(tr.N0.back() - h.n0(), 0.5 * lost, 1e-7);
    EXPECT_NEAR(tr.out_sqe.back(), lost, 1e-7);
    EXPECT_LT(tr.closure_error(), 1e-9);
}

TEST(Evolve, PairBreakingGrowsExponentially) {
    const HfbSolution h = toy_trap();
    const PopulationTrajectory tr = evolve_adiabatic(rates(0, 0, -0.05, 0, 0), h, 1.0, grid(60, 61));
    for (std::size_t i = 1; i < tr.t.size(); ++i) {
        EXPECT_LT(tr.N0[i], tr.N0[i - 1]);
        EXPECT_GT(tr.excitations[i], tr.excitations[i - 1]);
    }
    // late growth rate approaches -2 gamma_minus n
    const std::size_t k = tr.t.size() - 1;
    const double rate = (tr.n[k][0] - tr.n[k - 1][0]) / (tr.t[k] - tr.t[k - 1]);
    EXPECT_NEAR(rate / (0.1 * tr.n[k][0]), 1.0, 0.06);
    EXPECT_LT(tr.closure_error(), 1e-9);
}

TEST(Evolve, StopsWhenTheCondensateIsExhausted) {
    HfbSolution h = toy_trap();
    h.condensate.n0 = 5;
    const PopulationTrajectory tr = evolve_adiabatic(rates(0, 0, -0.5, 0, 0), h, 1.0, grid(100, 101));
    EXPECT_TRUE(tr.terminated);
    EXPECT_LT(tr.t.size(), 101u);
    for (double n0 : tr.N0) EXPECT_GE(n0, 0.0);
}

TEST(Evolve, ZeroCouplingIsStationary) {
    const HfbSolution h = toy_trap();
    const PopulationTrajectory tr = evolve_adiabatic(rates(0, 0, 0, 0, 0), h, 1.0, grid(10, 11));
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        EXPECT_EQ(tr.N0[i], h.n0());
        EXPECT_EQ(tr.Et[i], 0.0);
    }
}

TEST(DecayRates, SignStructureOnTheRealTrap) {
    const Prepared p = prepare(coarse_config(150));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 8.0));
    const DecayRates r = decay_rates(p.L, ch);
    EXPECT_GT(r.gamma0, 0.0);
    for (int j = 0; j < r.modes(); ++j) {
        EXPECT_GE(r.gamma_plus[j], 0.0);
        EXPECT_LE(r.gamma_minus[j], 0.0);
    }
    const RateAggregate g = golden_rule_rates(p.L, ch);
    EXPECT_NEAR(2.0 * r.gamma0 * p.h.n0(), g.condensate, 1e-12 * g.condensate);
}

TEST(Perturbative, TrapLossEqualsOutputCount) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.01, 2.0));
    const PerturbativeResult r = evolve_perturbative(p.L, ch, p.h, 5.0, 40.0);
    EXPECT_LT(r.loss_vs_output, 1e-12);
    EXPECT_LT(r.d2_mismatch, 1e-10);
    EXPECT_TRUE(r.valid);
    EXPECT_NEAR(p.h.n0() * r.depletion_d2[0], r.output_count[0], 1e-12 * r.output_count[0]);
}

TEST(Perturbative, PairBreakingFromVacuum) {
    const Prepared p = prepare(coarse_config(10));
    HfbSolution h = p.h;
    h.occupation.setZero();
    const auto ch = build_channels(p.s, h, make_coupling(p.s, 0.01, 8.0));
    const PerturbativeResult r = evolve_perturbative(p.L, ch, h, 5.0, 40.0);
    const int m = h.modes.count();
    int open = 0;
    for (int j = 0; j < m; ++j) {
        if (!ch[std::size_t(1 + m + j)].open()) continue;
        ++open;
        EXPECT_GT(r.n[j], 0.0);
        EXPECT_NEAR(r.n[j], r.depletion_d2[1 + m + j], 1e-15);
    }
    EXPECT_GT(open, 0);
}

TEST(Perturbative, ValidityWarning) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 2.0, 0.0));
    const PerturbativeResult r = evolve_perturbative(p.L, ch, p.h, 20.0, 40.0);
    EXPECT_FALSE(r.valid);
    EXPECT_FALSE(r.warning.empty());
}

TEST(Perturbative, MatchesRateEquationsInTheOverlapWindow) {
    // 1 / spectral width << t << 1 / gamma
    const Prepared p = prepare(coarse_config(10));
    const auto all = build_channels(p.s, p.h, make_coupling(p.s, 0.001, 0.0));
    std::vector<Channel> ch(all.begin(), all.begin() + 1);
    const DecayRates r = decay_rates(p.L, ch);
    const double t = 60.0;
    ASSERT_LT(r.gamma0 * t, 1e-3);
    const PerturbativeResult pr = evolve_perturbative(p.L, ch, p.h, t, 40.0);
    // golden rule plus the time-independent finite-part offset of the non-flat coupling
    const double markov = 1.0 - std::exp(-2.0 * r.gamma0 * t);
    const double offset = bound_number(p.L, ch[0], 40.0) / ch[0].population;
    EXPECT_NEAR(pr.depletion[0] / (markov + offset), 1.0, 2e-3);
}
