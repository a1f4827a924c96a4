#pragma once
// Trap populations under output coupling: Markovian rate equations with number and energy
// bookkeeping, and the second-order perturbative short-time solution.

#include <cmath>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "outcoupling.hpp"

namespace atomlaser {

struct DecayRates {
    double gamma0 = 0;
    VectorXd gamma_plus, gamma_minus;  // >= 0 and <= 0
    double shift0 = 0;
    VectorXd level_shift;              // Im Gamma_jj, from the j+ and j- channels
    bool has_shifts = false;

    double gamma(int j) const { return gamma_plus[j] + gamma_minus[j]; }
    int modes() const { return int(gamma_plus.size()); }
};

// gamma_eta = pi rho sum_b rho_b |lambda_b|^2 with the resonance rule of golden_rule_rates
inline DecayRates decay_rates(const OutputLattice& L, const std::vector<Channel>& ch, bool with_shifts = false,
                              bool shift_feedback = false, double omega_hi = 0) {
    int m = 0;
    for (const auto& c : ch) m = std::max(m, c.mode + 1);
    DecayRates r;
    r.gamma_plus = VectorXd::Zero(m);
    r.gamma_minus = VectorXd::Zero(m);
    r.level_shift = VectorXd::Zero(m);
    std::vector<double> shifts(ch.size(), 0.0);
    if (with_shifts || shift_feedback) {
        double hi = omega_hi;
        for (const auto& c : ch) hi = std::max(hi, c.omega_out + 20.0);
        hi = std::min(hi, 0.95 * L.st.band_top());
        shifts = level_shifts(L, ch, strength_table(L, ch, hi), hi);
        r.has_shifts = true;
    }
    for (std::size_t q = 0; q < ch.size(); ++q) {
        Channel c = ch[q];
        if (shift_feedback) c.omega_out += shifts[q];
        const double g = pi * branch_density * resonant_strength(L, c);
        if (c.kind == ChannelKind::condensate) {
            r.gamma0 = g;
            r.shift0 = shifts[q];
        } else if (c.kind == ChannelKind::sqe) {
            r.gamma_plus[c.mode] = g;
            r.level_shift[c.mode] += shifts[q];
        } else {
            r.gamma_minus[c.mode] = -g;
            r.level_shift[c.mode] -= shifts[q];
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// bookkeeping

struct EventDeltas {
    double dnj_sqe, dn0_sqe, dnj_pb, dn0_pb;
};

inline EventDeltas bookkeeping_deltas(const VectorXd& v, double dx) {
    const double vv = v.squaredNorm() * dx;
    return {-1.0 - 2.0 * vv, 2.0 * vv, 1.0 + 2.0 * vv, -2.0 * (1.0 + vv)};
}

inline double energy_rate(double mu, double dNt, const VectorXd& E, const VectorXd& dn) { return mu * dNt + E.dot(dn); }

// ---------------------------------------------------------------------------
// adiabatic evolution

struct ModeWeights {
    VectorXd uu, vv;  // int |u_j|^2, int |v_j|^2
};

inline ModeWeights mode_weights(const HfbSolution& h, double dx) {
    ModeWeights w;
    w.uu = h.modes.u.colwise().squaredNorm().transpose() * dx;
    w.vv = h.modes.v.colwise().squaredNorm().transpose() * dx;
    return w;
}

inline double trap_number(double n0, const VectorXd& n, const ModeWeights& w) {
    return n0 + n.dot(w.uu + w.vv) + w.vv.sum();
}

struct PopulationTrajectory {
    std::vector<double> t, N0, Nt, Et, excitations, out_coherent, out_sqe, out_pb;
    std::vector<VectorXd> n;
    bool terminated = false;  // stopped because N0 reached zero
    double t_stop = 0;
    double closure_error() const {
        double e = 0;
        for (std::size_t i = 0; i < t.size(); ++i)
            e = std::max(e, std::abs(Nt[i] + out_coherent[i] + out_sqe[i] + out_pb[i] - Nt[0]) / Nt[0]);
        return e;
    }
    double n_out(std::size_t i) const { return out_coherent[i] + out_sqe[i] + out_pb[i]; }
};

// state: N0, n_1..n_m, out_coherent, out_sqe, out_pb, E_t - E_t(0)
inline PopulationTrajectory evolve_adiabatic(const DecayRates& r, const HfbSolution& h, double dx, const std::vector<double>& times,
                                             double rtol = 1e-9) {
    using State = std::vector<double>;
    const int m = r.modes();
    const ModeWeights w = mode_weights(h, dx);
    const double mu = h.mu();
    const VectorXd& E = h.modes.E;
    auto rhs = [&](const State& y, State& dy, double) {
        double dN0 = -2.0 * r.gamma0 * y[0];
        double sqe = 0, pb = 0, dNt = -2.0 * r.gamma0 * y[0], dE_modes = 0;
        for (int j = 0; j < m; ++j) {
            const double nj = y[1 + j];
            const double ds = -2.0 * r.gamma_plus[j] * nj;
            const double dp = -2.0 * r.gamma_minus[j] * (nj + 1.0);
            dy[1 + j] = ds + dp;
            dN0 -= 2.0 * (w.vv[j] * ds + w.uu[j] * dp);
            sqe -= ds;
            pb += dp;
            dNt += (ds + dp) * (w.uu[j] + w.vv[j]) - 2.0 * (w.vv[j] * ds + w.uu[j] * dp);
            dE_modes += E[j] * (ds + dp);
        }
        dy[0] = dN0;
        dy[1 + m] = 2.0 * r.gamma0 * y[0];
        dy[2 + m] = sqe;
        dy[3 + m] = pb;
        dy[4 + m] = mu * dNt + dE_modes;
    };
    State y(std::size_t(m) + 5, 0.0);
    y[0] = h.n0();
    for (int j = 0; j < m; ++j) y[1 + j] = h.occupation[j];
    PopulationTrajectory tr;
    auto record = [&](double t, const State& s) {
        VectorXd n(m);
        for (int j = 0; j < m; ++j) n[j] = s[1 + j];
        tr.t.push_back(t);
        tr.N0.push_back(s[0]);
        tr.n.push_back(n);
        tr.excitations.push_back(n.sum());
        tr.Nt.push_back(trap_number(s[0], n, w));
        tr.Et.push_back(s[4 + m]);
        tr.out_coherent.push_back(s[1 + m]);
        tr.out_sqe.push_back(s[2 + m]);
        tr.out_pb.push_back(s[3 + m]);
    };
    namespace ode = boost::numeric::odeint;
    auto stepper = ode::make_controlled(1e-12, rtol, ode::runge_kutta_dopri5<State>());
    if (times.empty()) return tr;
    double t = times.front();
    record(t, y);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double dt0 = std::max(1e-6, 1e-3 * (times[i] - t));
        ode::integrate_adaptive(stepper, rhs, y, t, times[i], dt0);
        t = times[i];
        if (y[0] < 0) {
            tr.terminated = true;
            tr.t_stop = t;
            break;
        }
        for (int j = 0; j < m; ++j)
            if (y[1 + j] < 0) {
                if (y[1 + j] < -1e-6 * (1.0 + h.occupation[j])) throw NumericalError("negative mode population beyond tolerance");
                y[1 + j] = 0.0;
            }
        record(t, y);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// perturbative solution

// sum_k |lambda_k|^2 |D_k(t)|^2 for one channel (without the population)
inline double channel_depletion(const OutputLattice& L, const Channel& c, double t, double omega_hi) {
    Channel u = c;
    u.population = 1.0;
    return channel_output_count(L, u, t, omega_hi);
}

// the same sum written with 2 Re D2
inline double channel_depletion_d2(const OutputLattice& L, const Channel& c, double t, double omega_hi, int background = 400) {
    const double near = std::min(20.0 * pi / std::max(t, 1e-12), 0.5 * omega_hi);
    const auto edges = refined_edges(0.0, omega_hi, c.omega_out, near, std::min(0.05, 0.2 / std::max(t, 1e-12)), background);
    const Rule r = gauss_panels(edges);
    double acc = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto lam = matrix_element(L, r.x[i], c.source);
        acc += r.w[i] * branch_density * (std::norm(lam[0]) + std::norm(lam[1])) * 2.0 * std::real(d2_kernel(r.x[i], c.omega_out, t));
    }
    return acc;
}

// strength table on uniform panels fine enough for |D(t)|^2 (width ~ 2 pi / t)
inline StrengthTable perturbative_table(const OutputLattice& L, const std::vector<Channel>& ch, double t, double omega_hi) {
    const double width = std::min(0.5, 1.0 / std::max(t, 1e-12));
    const int panels = std::max(8, int(std::ceil(omega_hi / width)));
    StrengthTable tab;
    tab.rule = gauss_uniform(0.0, omega_hi, panels);
    const MatrixXcd src = source_matrix(ch);
    tab.g.resize(Eigen::Index(tab.rule.size()), Eigen::Index(ch.size()));
    for (std::size_t i = 0; i < tab.rule.size(); ++i) {
        const MatrixXcd lam = matrix_elements_at(L, tab.rule.x[i], src);
        tab.g.row(Eigen::Index(i)) = branch_density * (lam.row(0).cwiseAbs2() + lam.row(1).cwiseAbs2());
    }
    return tab;
}

struct PerturbativeResult {
    double t = 0;
    double N0 = 0;
    VectorXd n;
    VectorXd depletion, depletion_d2;  // per channel: sum_k |lambda|^2 |D|^2 and sum_k |lambda|^2 2 Re D2
    VectorXd output_count;             // per channel: sum_k n_k^eta(t)
    double loss_vs_output = 0;         // max over channels of |trap change - output count|, relative
    double d2_mismatch = 0;
    bool valid = true;                 // population changes below 10%
    std::string warning;
};

inline PerturbativeResult evolve_perturbative(const StrengthTable& tab, const std::vector<Channel>& ch, const HfbSolution& h, double t) {
    PerturbativeResult p;
    p.t = t;
    const int m = h.modes.count();
    const Eigen::Index nc = Eigen::Index(ch.size());
    p.depletion = VectorXd::Zero(nc);
    p.depletion_d2 = VectorXd::Zero(nc);
    p.output_count = VectorXd::Zero(nc);
    for (Eigen::Index q = 0; q < nc; ++q) {
        const double w0 = ch[std::size_t(q)].omega_out;
        double d = 0, d2 = 0, out = 0;
        for (std::size_t i = 0; i < tab.rule.size(); ++i) {
            const double g = tab.g(Eigen::Index(i), q);
            const double k2 = std::norm(d_kernel(tab.rule.x[i], w0, t));
            d += tab.rule.w[i] * g * k2;
            d2 += tab.rule.w[i] * g * 2.0 * std::real(d2_kernel(tab.rule.x[i], w0, t));
            out += tab.rule.w[i] * g * k2 * ch[std::size_t(q)].population;
        }
        p.depletion[q] = d;
        p.depletion_d2[q] = d2;
        p.output_count[q] = out;
        if (d > 0) p.d2_mismatch = std::max(p.d2_mismatch, std::abs(d - d2) / d);
    }
    // trap side from the trap equation's kernel 2 Re D2, output side from |D|^2;
    // changes are formed directly, never as differences of populations
    p.n = h.occupation;
    double dep0 = 0;
    VectorXd dp = VectorXd::Zero(m), dm = VectorXd::Zero(m);
    for (Eigen::Index q = 0; q < nc; ++q) {
        const auto& c = ch[std::size_t(q)];
        if (c.kind == ChannelKind::condensate) {
            dep0 = p.depletion_d2[q];
            const double loss = h.n0() * dep0;
            p.N0 = h.n0() - loss;
            if (p.output_count[q] > 0)
                p.loss_vs_output = std::max(p.loss_vs_output, std::abs(loss - p.output_count[q]) / p.output_count[q]);
        } else if (c.kind == ChannelKind::sqe) {
            dp[c.mode] = p.depletion_d2[q];
        } else {
            dm[c.mode] = p.depletion_d2[q];
        }
    }
    double worst = dep0;
    for (int j = 0; j < m; ++j) {
        const double nj = h.occupation[j];
        const double loss = nj * dp[j], gain = (nj + 1.0) * dm[j];
        p.n[j] = nj - loss + gain;
        for (Eigen::Index q = 0; q < nc; ++q) {
            const auto& c = ch[std::size_t(q)];
            if (c.mode != j || p.output_count[q] <= 0) continue;
            const double change = c.kind == ChannelKind::sqe ? loss : gain;
            p.loss_vs_output = std::max(p.loss_vs_output, std::abs(change - p.output_count[q]) / p.output_count[q]);
        }
        worst = std::max(worst, std::abs(p.n[j] - nj) / std::max(nj, 1.0));
    }
    if (worst > 0.1) {
        p.valid = false;
        p.warning = "population change exceeds 10%, perturbative result outside its validity";
    }
    return p;
}

inline PerturbativeResult evolve_perturbative(const OutputLattice& L, const std::vector<Channel>& ch, const HfbSolution& h, double t,
                                              double omega_hi) {
    return evolve_perturbative(perturbative_table(L, ch, t, omega_hi), ch, h, t);
}

}  // namespace atomlaser
