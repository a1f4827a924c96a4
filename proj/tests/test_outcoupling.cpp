#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

#include <atomlaser/outcoupling.hpp>

using namespace atomlaser;
using namespace testsupport;

TEST(Kernel, ResonantLimitAndZeroTime) {
    EXPECT_EQ(d_kernel(3.0, 3.0, 7.5), cplx(7.5, 0));
    EXPECT_EQ(std::abs(d_kernel(1.0, 3.0, 0.0)), 0.0);
    EXPECT_THROW(d_kernel(1.0, 2.0, -1.0), std::domain_error);
    // direct form i (e^{-iXt} - 1) / X
    const double X = 0.37, t = 11.0;
    const cplx direct = cplx(0, 1) * (std::exp(cplx(0, -X * t)) - 1.0) / X;
    EXPECT_NEAR(std::abs(d_kernel(2.0, 2.0 + X, t) - direct), 0.0, 1e-13);
}

TEST(Kernel, SquareEqualsTwiceRealSecondOrder) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> w(0.0, 50.0), tt(0.0, 200.0), tiny(-1e-4, 1e-4);
    double worst = 0;
    for (int i = 0; i < 20000; ++i) {
        const double wk = w(rng), t = tt(rng);
        const double wo = i % 4 == 0 ? wk + tiny(rng) : w(rng);
        const double a = std::norm(d_kernel(wk, wo, t));
        const double b = 2.0 * std::real(d2_kernel(wk, wo, t));
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, t * t));
        EXPECT_NEAR(a, d_kernel_sq(wk, wo, t), 1e-10 * std::max(1.0, t * t));
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(Kernel, SecondOrderSeriesIsContinuous) {
    const double t = 3.0;
    for (double X : {0.9e-2 / t, 1.1e-2 / t}) {
        const cplx direct = (cplx(1.0, -X * t) - std::exp(cplx(0, -X * t))) / (X * X);
        EXPECT_NEAR(std::abs(d2_kernel(0.0, X, t) - direct) / std::abs(direct), 0.0, 1e-6);
    }
}

TEST(Kernel, IntegralOverFrequencyIsTwoPiT) {
    for (double t : {1.0, 10.0, 100.0}) {
        const double W = 4000.0;
        const int panels = int(40 * W * t / (2 * pi));
        const Rule r = gauss_uniform(-W, W, std::min(panels, 400000));
        double acc = 0;
        for (std::size_t i = 0; i < r.size(); ++i) acc += r.w[i] * d_kernel_sq(r.x[i], 0.0, t);
        acc += 8.0 / W;  // tails: 2 int_W^inf 2 / X^2
        EXPECT_NEAR(acc / (2 * pi * t), 1.0, 1e-3) << "t=" << t;
    }
}

TEST(Coupling, RamanEffectiveCoupling) {
    EXPECT_EQ(raman_effective_coupling(cplx(2, 0), cplx(3, 0), 6.0), cplx(1, 0));
    EXPECT_EQ(raman_effective_coupling(cplx(0, 1), cplx(1, 0), 1.0), cplx(0, -1));
    EXPECT_THROW(raman_effective_coupling(1.0, 1.0, 0.0), std::domain_error);
}

TEST(Channels, LayoutAndResonances) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.3, -1.0));
    const int m = p.h.modes.count();
    ASSERT_EQ(int(ch.size()), 1 + 2 * m);
    EXPECT_EQ(ch[0].kind, ChannelKind::condensate);
    EXPECT_DOUBLE_EQ(ch[0].omega_out, p.h.mu() - 1.0);
    EXPECT_DOUBLE_EQ(ch[0].population, p.h.n0());
    for (int j = 0; j < m; ++j) {
        EXPECT_EQ(ch[1 + j].kind, ChannelKind::sqe);
        EXPECT_EQ(ch[1 + m + j].kind, ChannelKind::pb);
        EXPECT_DOUBLE_EQ(ch[1 + j].omega_out, p.h.mu() - 1.0 + p.h.modes.E[j]);
        EXPECT_DOUBLE_EQ(ch[1 + m + j].omega_out, p.h.mu() - 1.0 - p.h.modes.E[j]);
        EXPECT_DOUBLE_EQ(ch[1 + m + j].population, p.h.occupation[j] + 1.0);
        EXPECT_NEAR(std::abs(ch[1 + j].source[100] - 0.3 * p.h.modes.u(100, j)), 0.0, 1e-15);
    }
}

TEST(OutputModes, ScatteringStatesReduceToPlaneWavesWithoutPotential) {
    const Prepared p = prepare(coarse_config(10));
    const OutputLattice free = make_output_lattice(p.s, p.h, 0.0, false);
    for (double w : {0.3, 2.5, 17.0}) {
        const MatrixXcd b = output_basis(free, w);
        const double k = free.st.wavenumber(w).real();
        double worst = 0;
        for (int i = 0; i < free.n_trap; ++i) {
            const double x = free.x(free.pad + i);
            worst = std::max(worst, std::abs(b(i, 0) - std::exp(cplx(0, -k * x))));
            worst = std::max(worst, std::abs(b(i, 1) - std::exp(cplx(0, k * x))));
        }
        EXPECT_LT(worst, 1e-9) << "w=" << w;
    }
}

TEST(OutputModes, PlaneWaveElementMatchesDirectSum) {
    const Prepared p = prepare(coarse_config(10));
    const OutputLattice L = make_output_lattice(p.s, p.h, 0.0, true);
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    const double w = ch[0].omega_out;
    const double k = L.st.wavenumber(w).real();
    // direct trapezoid sum of lambda int e^{-ikx} sqrt... psi0
    cplx ref = 0;
    for (int i = 0; i < p.s.n(); ++i) ref += 0.2 * std::exp(cplx(0, -k * p.s.x[i])) * p.h.condensate.psi[i] * p.s.dx();
    const auto lam = matrix_element(L, w, ch[0].source);
    EXPECT_NEAR(std::abs(lam[0] - ref), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(lam[1] - std::conj(ref)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(plane_wave_element(p.s, k, ch[0].source) - ref), 0.0, 1e-12);
    const double rate_ref = 2.0 * pi * 0.5 * 2.0 * std::norm(ref) * p.h.n0();  // 2 pi rho_b sum over both branches
    EXPECT_NEAR(golden_rule_rates(L, ch).condensate / rate_ref, 1.0, 1e-12);
}

TEST(OutputModes, EnergyNormalizationDividesByFlux) {
    const Prepared p = prepare(coarse_config(10));
    const OutputLattice u = make_output_lattice(p.s, p.h, p.cfg.params.u1(), false, "unit");
    const OutputLattice e = make_output_lattice(p.s, p.h, p.cfg.params.u1(), false, "energy");
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    const double w = 4.0;
    const auto a = matrix_element(u, w, ch[0].source), b = matrix_element(e, w, ch[0].source);
    EXPECT_NEAR(std::abs(b[0] * std::sqrt(pi * u.velocity(w)) - a[0]), 0.0, 1e-12);
}

TEST(Rates, ThresholdAtMinusMu) {
    for (double T : {10.0, 150.0}) {
        const Prepared p = prepare(full_config(T));
        const double mu = p.h.mu();
        auto rate = [&](double delta) {
            const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, delta));
            std::vector<Channel> c0(ch.begin(), ch.begin() + 1);
            return golden_rule_rates(p.L, c0).condensate;
        };
        EXPECT_EQ(rate(-mu - 1.0), 0.0);
        EXPECT_EQ(rate(-mu - 1e-6), 0.0);
        EXPECT_GT(rate(-mu + 1e-6), 0.0);
        EXPECT_GT(rate(-mu + 1.0), 0.0);
    }
}

TEST(Rates, ClosedChannelsDoNotRadiate) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, -5.0));
    const RateAggregate r = golden_rule_rates(p.L, ch);
    EXPECT_EQ(r.condensate, 0.0);
    EXPECT_EQ(r.pb, 0.0);
    EXPECT_GT(r.sqe, 0.0);
    for (std::size_t q = 0; q < ch.size(); ++q)
        if (!ch[q].open()) EXPECT_EQ(r.channel[q], 0.0);
}

TEST(OutputModes, LatticeWavenumberOnAllThreeSides) {
    const Stencil st(0.15);
    for (double w : {-3.0, 0.5, 40.0, st.band_top() - 1e-6, st.band_top() + 2.0, 3.0 * st.band_top()}) {
        const cplx k = st.wavenumber(w);
        EXPECT_NEAR(std::abs(st.energy(k) - w), 0.0, 1e-9 * std::max(1.0, std::abs(w))) << w;
        EXPECT_GE(k.imag(), 0.0);
    }
    EXPECT_NEAR(st.wavenumber(st.band_top() + 2.0).real(), pi / st.h, 1e-12);
}

TEST(Rates, AboveBandChannelsDoNotRadiate) {
    const Prepared p = prepare(coarse_config(10));
    auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    ch[1].omega_out = p.L.st.band_top() + 5.0;
    EXPECT_FALSE(p.L.radiates(ch[1].omega_out));
    EXPECT_EQ(golden_rule_rates(p.L, ch).channel[1], 0.0);
    // the response far above the band stays on the cloud
    const VectorXcd g = p.L.resolvent(3.0 * p.L.st.band_top(), p.L.embed(ch[1].source));
    EXPECT_LT(std::abs(g[0]), 1e-8 * g.cwiseAbs().maxCoeff());
}

TEST(Rates, ScaleWithCouplingSquared) {
    const Prepared p = prepare(coarse_config(10));
    const auto a = golden_rule_rates(p.L, build_channels(p.s, p.h, make_coupling(p.s, 0.1, 1.0)));
    const auto b = golden_rule_rates(p.L, build_channels(p.s, p.h, make_coupling(p.s, 0.3, 1.0)));
    EXPECT_NEAR(b.total() / a.total(), 9.0, 1e-10);
}

TEST(Rates, LowTemperatureComposition) {
    const Prepared p = prepare(full_config(10));
    const auto at = [&](double d) { return golden_rule_rates(p.L, build_channels(p.s, p.h, make_coupling(p.s, 0.2, d))); };
    const auto m5 = at(-5), z = at(0), p8 = at(8);
    EXPECT_GT(m5.sqe, m5.condensate);
    EXPECT_GT(m5.sqe, m5.pb);
    EXPECT_GE(z.condensate, 10 * std::max(z.sqe, z.pb));
    EXPECT_GT(p8.pb, 0.0);
}

TEST(Spectrum, ChannelCountMatchesGridSumAndGrowsLinearly) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.05, 0.0));
    const double t1 = 40, t2 = 80, hi = 60;
    const double n1 = channel_output_count(p.L, ch[0], t1, hi), n2 = channel_output_count(p.L, ch[0], t2, hi);
    const double rate = golden_rule_rates(p.L, ch).channel[0];
    // golden rule: n(t2) - n(t1) -> rate (t2 - t1) once t >> 1 / spectral width
    EXPECT_NEAR((n2 - n1) / (rate * (t2 - t1)), 1.0, 0.02);

    OutputModeGrid g;
    g.omega_max = hi;
    g.n_omega = 24000;
    std::vector<Channel> c0(ch.begin(), ch.begin() + 1);
    const MatrixElementTable tab = matrix_elements(p.L, c0, g);
    const Spectrum sp = output_spectrum(tab, c0, t1);
    double sum = 0;
    for (std::size_t i = 0; i < sp.omega.size(); ++i) sum += (sp.total_plus[i] + sp.total_minus[i]) * branch_density * hi / g.n_omega;
    EXPECT_NEAR(sum / n1, 1.0, 5e-3);
}

TEST(Spectrum, GridMustCoverResonances) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.05, 0.0));
    OutputModeGrid g;
    g.omega_max = 5;
    g.n_omega = 10;
    try {
        matrix_elements(p.L, ch, g);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("sqe"), std::string::npos);
    }
}

TEST(LevelShift, MatchesExcludedIntervalPrincipalValue) {
    const Prepared p = prepare(coarse_config(10));
    const auto all = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    std::vector<Channel> ch = {all[0], all[3]};
    const double hi = 40;
    const auto shifts = level_shifts(p.L, ch, strength_table(p.L, ch, hi), hi);
    for (std::size_t q = 0; q < ch.size(); ++q) {
        const double x0 = ch[q].omega_out, eps = 1e-3;
        auto edges = [&](double a, double b) {
            std::vector<double> e = graded_edges(0, b - a, 1e-4, 1.1, 0.05);
            for (double& v : e) v += a;
            return e;
        };
        double pv = 0;
        for (auto [a, b] : {std::pair{0.0, x0 - eps}, std::pair{x0 + eps, hi}}) {
            // grade toward the excluded point
            std::vector<double> e = edges(0, b - a);
            const Rule r = gauss_panels(e);
            for (std::size_t i = 0; i < r.size(); ++i) {
                const double w = a < x0 ? b - r.x[i] : a + r.x[i];
                pv += r.w[i] * strength_at(p.L, ch[q], w) / (w - x0);
            }
        }
        EXPECT_NEAR(-pv, shifts[q], 2e-3 * std::abs(shifts[q]) + 1e-9) << "channel " << q;
    }
}

TEST(BoundComponent, NumberMatchesRegularizedIntegral) {
    const Prepared p = prepare(coarse_config(10));
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    const double hi = 40, x0 = ch[0].omega_out;
    const double fp = bound_number(p.L, ch[0], hi) / (2.0 * ch[0].population);
    // Re int g / (w - x0 + i eps)^2 -> FP int g / (w - x0)^2, Richardson in eps
    auto regularized = [&](double eps) {
        std::vector<double> e = refined_edges(0.0, hi, x0, 40 * eps, eps / 8, 400);
        const Rule r = gauss_panels(e);
        double acc = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double y = r.x[i] - x0;
            acc += r.w[i] * strength_at(p.L, ch[0], r.x[i]) * (y * y - eps * eps) / std::pow(y * y + eps * eps, 2);
        }
        return acc;
    };
    const double a = regularized(2e-3), b = regularized(1e-3);
    EXPECT_NEAR((2 * b - a) / fp, 1.0, 1e-4);
}

TEST(BoundComponent, FreeOutputNumberNearPerturbativeEstimate) {
    RunConfig c = coarse_config(10);
    c.output_modes = "plane";
    const Prepared p = prepare(c);
    const auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    const BoundComponent b = bound_component(p.L, ch[0], 40, 0.2);
    EXPECT_GT(b.number, 0.5 * b.estimate);
    EXPECT_LT(b.number, 2.0 * b.estimate);
}

TEST(BoundComponent, ThresholdIsAnError) {
    const Prepared p = prepare(coarse_config(10));
    auto ch = build_channels(p.s, p.h, make_coupling(p.s, 0.2, 0.0));
    ch[0].omega_out = 0;
    EXPECT_THROW(bound_component(p.L, ch[0], 40, 0.2), std::domain_error);
}

TEST(Widths, Estimates) {
    const auto w = spectral_width_estimates(2.0, 0.0);
    EXPECT_DOUBLE_EQ(w.delta_omega, 1.0 / 8.0);
    EXPECT_DOUBLE_EQ(spectral_width_estimates(2.0, 3.0).delta_omega, 0.75);
    EXPECT_EQ(spectral_width_estimates(INFINITY, 0.0).delta_omega, 0.0);
}
