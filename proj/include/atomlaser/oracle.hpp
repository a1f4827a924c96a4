#pragma once
// Brute-force coupled-mode reference: trapped channels plus a discretized bath of output modes,
// propagated exactly with a matrix exponential (no Markov or golden-rule step).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "dynamics.hpp"
#include "outcoupling.hpp"

namespace atomlaser {

struct TrappedChannel {
    double omega = 0;      // omega_out in the frame rotating with the bare output energies
    int signature = 1;     // +1 for condensate and SQE channels, -1 for pair breaking
    double population = 0; // initial n^t-type occupation of the trapped operator (n_j for both j+ and j-)
    VectorXcd coupling;    // to every bath mode
};

struct TruncatedSystem {
    std::vector<TrappedChannel> channels;
    VectorXd bath_omega, bath_weight;

    int n_trapped() const { return int(channels.size()); }
    int size() const { return n_trapped() + int(bath_omega.size()); }

    VectorXd signature() const {
        VectorXd s = VectorXd::Ones(size());
        for (int c = 0; c < n_trapped(); ++c) s[c] = channels[std::size_t(c)].signature;
        return s;
    }

    // G = sigma3 H with H Hermitian: i dX/dt = G X for X = (a or alpha^dagger, b_k)
    MatrixXcd generator() const {
        const int nt = n_trapped(), n = size();
        MatrixXcd g = MatrixXcd::Zero(n, n);
        for (int c = 0; c < nt; ++c) {
            const auto& ch = channels[std::size_t(c)];
            g(c, c) = ch.signature * ch.omega;
            for (int b = 0; b < bath_omega.size(); ++b) {
                g(nt + b, c) = ch.coupling[b];
                g(c, nt + b) = double(ch.signature) * std::conj(ch.coupling[b]);
            }
        }
        for (int b = 0; b < bath_omega.size(); ++b) g(nt + b, nt + b) = bath_omega[b];
        return g;
    }
};

struct BathComb {
    VectorXd omega, weight, taper;
};

// uniform comb around w0: flat core of the given width plus skirts on each side where the coupling
// rolls off smoothly (C-infinity) to zero, which removes the algebraic long-time tail of a sharp band edge
inline BathComb bath_comb(double w0, double width, double spacing, double skirt = 0) {
    const int half = int(std::ceil((0.5 * width + skirt) / spacing));
    BathComb c;
    c.omega.resize(2 * half + 1);
    c.weight = VectorXd::Constant(2 * half + 1, spacing);
    c.taper.resize(2 * half + 1);
    auto bump = [](double u) { return u <= 0 ? 0.0 : std::exp(-1.0 / u); };
    for (int i = -half; i <= half; ++i) {
        const double x = i * spacing;
        c.omega[i + half] = w0 + x;
        const double u = skirt > 0 ? (std::abs(x) - 0.5 * width) / skirt : (std::abs(x) <= 0.5 * width ? -1.0 : 2.0);
        c.taper[i + half] = u <= 0 ? 1.0 : u >= 1 ? 0.0 : bump(1.0 - u) / (bump(1.0 - u) + bump(u));
    }
    return c;
}

// one trapped channel on a comb of flat width 40 gamma, spacing gamma / 12, with 20 gamma skirts.
// The two output branches at each energy enter through their bright combination
// (coupling sqrt(|g+|^2 + |g-|^2)); the orthogonal combination decouples exactly.
inline TruncatedSystem single_channel_system(const OutputLattice& L, const Channel& c, double gamma, double width_factor = 40.0,
                                             double spacing_factor = 1.0 / 12.0, double skirt_factor = 20.0) {
    if (!(gamma > 0)) throw std::invalid_argument("oracle needs an open channel with gamma > 0");
    const BathComb comb = bath_comb(c.omega_out, width_factor * gamma, spacing_factor * gamma, skirt_factor * gamma);
    const int nb = int(comb.omega.size());
    TruncatedSystem s;
    s.bath_omega = comb.omega;
    s.bath_weight = comb.weight;
    TrappedChannel t;
    t.omega = c.omega_out;
    t.signature = c.kind == ChannelKind::pb ? -1 : 1;
    t.population = c.kind == ChannelKind::pb ? c.population - 1.0 : c.population;
    t.coupling.resize(nb);
    for (int i = 0; i < nb; ++i) {
        if (!(comb.omega[i] > 0)) throw std::invalid_argument("oracle comb reaches below the output threshold");
        const auto lam = matrix_element(L, comb.omega[i], c.source);
        t.coupling[i] = comb.taper[i] * std::sqrt((std::norm(lam[0]) + std::norm(lam[1])) * comb.weight[i] * branch_density);
    }
    s.channels.push_back(std::move(t));
    return s;
}

struct OracleTrajectory {
    std::vector<double> t;
    std::vector<VectorXd> trapped;  // population of each trapped channel operator
    VectorXd bath_final;            // n_k at the last time
    double max_sigma_drift = 0;
};

// evolves on the uniform grid k dt, k = 0..steps with U(dt) = expm(-i G dt)
inline OracleTrajectory integrate_coupled_modes(const TruncatedSystem& s, double dt, int steps, double drift_tol = 1e-6) {
    const int nt = s.n_trapped(), n = s.size();
    const VectorXd sig = s.signature();
    const MatrixXcd G = s.generator();
    const MatrixXcd Ustep = (cplx(0, -dt) * G).exp();
    // initial occupations seen from positive (a^dagger a) and negative (a a^dagger) rows
    VectorXd occ_pos = VectorXd::Zero(n), occ_neg = VectorXd::Ones(n);
    for (int c = 0; c < nt; ++c) {
        const auto& ch = s.channels[std::size_t(c)];
        occ_pos[c] = ch.signature > 0 ? ch.population : ch.population + 1.0;
        occ_neg[c] = ch.signature > 0 ? ch.population + 1.0 : ch.population;
    }
    MatrixXcd rows = MatrixXcd::Zero(nt, n);  // e_c^T U(t)
    MatrixXcd cols = MatrixXcd::Zero(n, nt);  // U(t) e_c
    for (int c = 0; c < nt; ++c) rows(c, c) = cols(c, c) = 1.0;
    OracleTrajectory tr;
    auto record = [&](double t) {
        VectorXd pop(nt);
        for (int c = 0; c < nt; ++c) {
            const VectorXd a2 = rows.row(c).cwiseAbs2().transpose();
            pop[c] = s.channels[std::size_t(c)].signature > 0 ? a2.dot(occ_pos) : a2.dot(occ_neg);
            const double drift = std::abs(a2.dot(sig) - sig[c]);
            tr.max_sigma_drift = std::max(tr.max_sigma_drift, drift);
        }
        tr.t.push_back(t);
        tr.trapped.push_back(pop);
    };
    record(0.0);
    for (int k = 1; k <= steps; ++k) {
        rows = rows * Ustep;
        cols = Ustep * cols;
        record(k * dt);
    }
    if (tr.max_sigma_drift > drift_tol)
        throw NumericalError("oracle sigma3 norm drift " + std::to_string(tr.max_sigma_drift) + " exceeds tolerance");
    tr.bath_final = VectorXd::Zero(n - nt);
    for (int b = nt; b < n; ++b) {
        double nb = 0;
        for (int c = 0; c < nt; ++c) nb += std::norm(cols(b, c)) * occ_pos[c];
        tr.bath_final[b - nt] = nb;
    }
    return tr;
}

// least-squares slope of log population over [t0, t1]; returns the decay rate -slope
inline double fit_decay(const OracleTrajectory& tr, int channel, double t0, double t1) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        if (tr.t[i] < t0 || tr.t[i] > t1) continue;
        const double y = std::log(std::abs(tr.trapped[i][channel]));
        sx += tr.t[i];
        sy += y;
        sxx += tr.t[i] * tr.t[i];
        sxy += tr.t[i] * y;
        ++m;
    }
    if (m < 3) throw std::invalid_argument("fit window holds fewer than 3 samples");
    return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// angular frequency of a periodic population from successive downward crossings of its mean
inline double oscillation_frequency(const std::vector<double>& t, const std::vector<double>& y) {
    double lo = y[0], hi = y[0];
    for (double v : y) lo = std::min(lo, v), hi = std::max(hi, v);
    const double mid = 0.5 * (lo + hi);
    std::vector<double> cross;
    for (std::size_t i = 1; i < y.size(); ++i)
        if (y[i - 1] > mid && y[i] <= mid) cross.push_back(t[i - 1] + (t[i] - t[i - 1]) * (y[i - 1] - mid) / (y[i - 1] - y[i]));
    if (cross.size() < 2) throw std::invalid_argument("fewer than two oscillation periods sampled");
    const double period = (cross.back() - cross.front()) / double(cross.size() - 1);
    return 2.0 * pi / period;
}

// one trapped mode resonant with one bath mode, coupling g
inline TruncatedSystem two_mode_system(double g, double omega = 1.0) {
    TruncatedSystem s;
    s.bath_omega = VectorXd::Constant(1, omega);
    s.bath_weight = VectorXd::Ones(1);
    TrappedChannel c;
    c.omega = omega;
    c.population = 1.0;
    c.coupling = VectorXcd::Constant(1, g);
    s.channels.push_back(c);
    return s;
}

// ---------------------------------------------------------------------------
// comparison harness

struct OracleReport {
    double gamma_golden = 0;     // from decay_rates (per amplitude)
    double gamma_fit = 0;        // fitted population decay / 2
    double rate_rel_error = 0;
    double t_pert = 0;
    double N0_pert = 0, N0_oracle = 0;
    double pert_rel_error = 0;        // on N0
    double depletion_rel_error = 0;   // on 1 - N0 / N0(0)
    double t_spec = 0;
    double spectrum_rel_error = 0;    // near-resonance bath populations vs |lambda|^2 |D|^2 n^t
    double two_mode_g = 0, two_mode_freq = 0, two_mode_rel_error = 0;
    double lambda_strength = 0, delta_omega = 0;
    bool weak_coupling = true;        // Lambda << Delta omega
    double sigma_drift = 0;
    std::string note;
};

// single-channel check: golden rule vs fitted decay, perturbative N0 vs oracle, spectrum near resonance
inline OracleReport compare_to_quasi_steady(const OutputLattice& L, const Channel& c, double lambda_strength, double delta_omega,
                                            double two_mode_g = 0.05) {
    OracleReport r;
    r.lambda_strength = lambda_strength;
    r.delta_omega = delta_omega;
    r.weak_coupling = lambda_strength < 0.1 * delta_omega;
    const double gamma = pi * branch_density * resonant_strength(L, c);
    r.gamma_golden = gamma;
    if (!r.weak_coupling) r.note = "coupling outside the weak regime; quasi-steady prediction not applicable";
    const TruncatedSystem sys = single_channel_system(L, c, gamma);
    const double sign = sys.channels[0].signature;

    // decay fit over [5/gamma, 10/gamma]
    {
        const int steps = 200;
        const double dt = 10.0 / gamma / steps;
        const auto tr = integrate_coupled_modes(sys, dt, steps);
        r.sigma_drift = tr.max_sigma_drift;
        OracleTrajectory scaled = tr;
        for (auto& p : scaled.trapped) p[0] = sign > 0 ? p[0] : p[0] + 1.0;
        r.gamma_fit = sign * 0.5 * fit_decay(scaled, 0, 5.0 / gamma, 10.0 / gamma);
        r.rate_rel_error = std::abs(r.gamma_fit - gamma) / gamma;
    }
    // perturbative window: Lambda^2 t^2 = 0.005, and bath spectrum well before any decay
    {
        r.t_pert = std::sqrt(0.005) / lambda_strength;
        const int steps = 50;
        const auto tr = integrate_coupled_modes(sys, r.t_pert / steps, steps);
        const double n0 = sys.channels[0].population;
        double dep = 0;
        for (int b = 0; b < sys.bath_omega.size(); ++b)
            dep += std::norm(sys.channels[0].coupling[b]) * std::norm(d_kernel(sys.bath_omega[b], c.omega_out, r.t_pert));
        r.N0_pert = n0 * (1.0 - sign * dep);
        r.N0_oracle = tr.trapped.back()[0];
        r.pert_rel_error = std::abs(r.N0_pert - r.N0_oracle) / std::abs(r.N0_oracle);
        const double dep_oracle = sign * (n0 - r.N0_oracle) / n0;
        r.depletion_rel_error = dep_oracle != 0 ? std::abs(dep - dep_oracle) / std::abs(dep_oracle) : 0.0;
    }
    {
        r.t_spec = 0.01 / gamma;
        const int steps = 20;
        const auto tr = integrate_coupled_modes(sys, r.t_spec / steps, steps);
        const double pop = c.population;
        double worst = 0;
        for (int b = 0; b < sys.bath_omega.size(); ++b) {
            if (std::abs(sys.bath_omega[b] - c.omega_out) > 5.0 * gamma) continue;
            // bright-mode population is the branch sum of n_k
            const double pred = std::norm(sys.channels[0].coupling[b]) * std::norm(d_kernel(sys.bath_omega[b], c.omega_out, r.t_spec)) * pop;
            if (pred <= 0) continue;
            worst = std::max(worst, std::abs(tr.bath_final[b] - pred) / pred);
        }
        r.spectrum_rel_error = worst;
    }
    // two-mode Rabi limit
    {
        r.two_mode_g = two_mode_g;
        const TruncatedSystem tm = two_mode_system(two_mode_g);
        const double period = pi / two_mode_g;
        const int steps = 4000;
        const auto tr = integrate_coupled_modes(tm, 5.0 * period / steps, steps);
        std::vector<double> y;
        for (const auto& p : tr.trapped) y.push_back(p[0]);
        r.two_mode_freq = oscillation_frequency(tr.t, y);
        r.two_mode_rel_error = std::abs(r.two_mode_freq - 2.0 * two_mode_g) / (2.0 * two_mode_g);
    }
    return r;
}

}  // namespace atomlaser
