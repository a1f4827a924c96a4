#pragma once
// Output modes, matrix elements, time kernels, golden-rule rates, spectra and the bound component.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "hfb.hpp"
#include "lattice.hpp"
#include "quadrature.hpp"

namespace atomlaser {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

inline cplx raman_effective_coupling(cplx rabi_ti, cplx rabi_fi, double detuning_i) {
    if (detuning_i == 0) throw std::domain_error("intermediate-level detuning must be nonzero");
    return std::conj(rabi_ti) * rabi_fi / detuning_i;
}

struct CouplingSpec {
    VectorXd amplitude;  // lambda-bar(x) on the trap grid
    double delta_em = 0;
    double k_em = 0;

    double strength(double dx) const { return std::sqrt(amplitude.squaredNorm() * dx); }
};

inline CouplingSpec make_coupling(const SimSetup& s, double lambda, double delta_em, double k_em = 0,
                                  const std::string& profile = "uniform", double width = 2.0) {
    CouplingSpec c;
    c.amplitude.resize(s.n());
    for (int i = 0; i < s.n(); ++i)
        c.amplitude[i] = profile == "gaussian" ? lambda * std::exp(-0.5 * s.x[i] * s.x[i] / (width * width)) : lambda;
    c.delta_em = delta_em;
    c.k_em = k_em;
    return c;
}

inline CouplingSpec make_coupling(const SimSetup& s, const RunConfig& c) {
    return make_coupling(s, c.lambda, c.delta_em, c.k_em, c.lambda_profile, c.lambda_width);
}

// ---------------------------------------------------------------------------
// channels eta = 0, j+, j-

enum class ChannelKind { condensate, sqe, pb };

inline const char* kind_name(ChannelKind k) {
    return k == ChannelKind::condensate ? "condensate" : k == ChannelKind::sqe ? "sqe" : "pb";
}

struct Channel {
    ChannelKind kind = ChannelKind::condensate;
    int mode = -1;          // j, -1 for the condensate
    double energy = 0;      // E_eta: 0, +E_j, -E_j
    double omega_out = 0;   // mu + Delta_em + E_eta
    double population = 0;  // n^t_eta
    VectorXcd source;       // lambda-bar e^{i k_em x} psi_t^eta
    bool open() const { return omega_out > 0; }
};

inline std::vector<Channel> build_channels(const SimSetup& s, const HfbSolution& h, const CouplingSpec& c) {
    const int n = s.n(), m = h.modes.count();
    VectorXcd phase(n);
    for (int i = 0; i < n; ++i) phase[i] = c.amplitude[i] * std::exp(cplx(0, c.k_em * s.x[i]));
    std::vector<Channel> out;
    out.reserve(1 + 2 * m);
    Channel c0;
    c0.omega_out = h.mu() + c.delta_em;
    c0.population = h.n0();
    c0.source = phase.cwiseProduct(h.condensate.psi.cast<cplx>());
    out.push_back(std::move(c0));
    for (int j = 0; j < m; ++j) {
        Channel cp;
        cp.kind = ChannelKind::sqe;
        cp.mode = j;
        cp.energy = h.modes.E[j];
        cp.omega_out = h.mu() + c.delta_em + cp.energy;
        cp.population = h.occupation[j];
        cp.source = phase.cwiseProduct(h.modes.u.col(j).cast<cplx>());
        out.push_back(std::move(cp));
    }
    for (int j = 0; j < m; ++j) {
        Channel cm;
        cm.kind = ChannelKind::pb;
        cm.mode = j;
        cm.energy = -h.modes.E[j];
        cm.omega_out = h.mu() + c.delta_em + cm.energy;
        cm.population = h.occupation[j] + 1.0;
        cm.source = phase.cwiseProduct(h.modes.v.col(j).cast<cplx>());  // v_j real, so v_j^* = v_j
        out.push_back(std::move(cm));
    }
    return out;
}

inline MatrixXcd source_matrix(const std::vector<Channel>& ch) {
    MatrixXcd s(ch.front().source.size(), Eigen::Index(ch.size()));
    for (std::size_t q = 0; q < ch.size(); ++q) s.col(Eigen::Index(q)) = ch[q].source;
    return s;
}

// ---------------------------------------------------------------------------
// output lattice: the trap grid padded on both sides, H_f = K + W with W = U1 n_t

struct OutputLattice {
    Stencil st;
    int n_trap = 0;
    int pad = 16;
    double x0 = 0;     // coordinate of extended index 0
    VectorXd W;        // on the extended lattice
    bool plane = false;
    std::string normalization = "unit";

    int size() const { return n_trap + 2 * pad; }
    double x(int i) const { return x0 + i * st.h; }
    double dx() const { return st.h; }
    double velocity(double w) const { return st.velocity(st.wavenumber(w)).real(); }
    // an open channel only emits into propagating lattice states
    bool radiates(double w) const { return w > 0 && w < st.band_top(); }

    VectorXcd embed(const VectorXcd& f) const {
        VectorXcd e = VectorXcd::Zero(size());
        e.segment(pad, n_trap) = f;
        return e;
    }
    MatrixXcd embed(const MatrixXcd& f) const {
        MatrixXcd e = MatrixXcd::Zero(size(), f.cols());
        e.middleRows(pad, n_trap) = f;
        return e;
    }

    // (eps(k) - H_f)^{-1} rhs with the outgoing lattice radiation condition at wavenumber k
    MatrixXcd green(cplx k, const MatrixXcd& rhs) const {
        const cplx w = st.energy(k);
        auto m = shifted_operator<cplx>(st, W, size(), w);
        add_outgoing_ends(m, st, k);
        MatrixXcd x = rhs;
        m.solve(x.data(), int(x.cols()));
        return x;
    }
    VectorXcd green(cplx k, const VectorXcd& rhs) const {
        MatrixXcd r = rhs;
        return green(k, r).col(0);
    }
    // G+(w) S for real w (closed channels get the decaying solution)
    VectorXcd resolvent(double w, const VectorXcd& rhs_ext) const { return green(st.wavenumber(w), rhs_ext); }
};

inline OutputLattice make_output_lattice(const SimSetup& s, const HfbSolution& h, double U1, bool plane,
                                         const std::string& normalization = "unit") {
    OutputLattice L;
    L.st = s.stencil;
    L.n_trap = s.n();
    L.x0 = s.x[0] - L.pad * s.dx();
    L.W = VectorXd::Zero(L.size());
    L.plane = plane;
    L.normalization = normalization;
    if (!plane)
        for (int i = 0; i < s.n(); ++i) L.W[L.pad + i] = U1 * (h.n0() * h.condensate.psi[i] * h.condensate.psi[i] + h.nbar[i]);
    return L;
}

inline OutputLattice make_output_lattice(const SimSetup& s, const HfbSolution& h, const RunConfig& c) {
    return make_output_lattice(s, h, c.params.u1(), c.output_modes == "plane", c.normalization);
}

// unit-amplitude in-states on the trap grid; lambda_b = sum_x basis_b(x) S(x) dx.
// column 0: branch +k (outgoing to the right), column 1: branch -k
inline MatrixXcd output_basis(const OutputLattice& L, double w) {
    if (!(w > 0)) throw std::domain_error("output modes need omega > 0");
    const double k = L.st.wavenumber(w).real();
    MatrixXcd b(L.n_trap, 2);
    if (L.plane) {
        for (int i = 0; i < L.n_trap; ++i) {
            const double x = L.x(L.pad + i);
            b(i, 0) = std::exp(cplx(0, -k * x));
            b(i, 1) = std::exp(cplx(0, k * x));
        }
        return b;
    }
    const int n = L.size();
    const int sr = n - 1, sl = 0;  // point sources at the far pad ends
    MatrixXcd rhs = MatrixXcd::Zero(n, 2);
    rhs(sr, 0) = 1.0 / L.dx();
    rhs(sl, 1) = 1.0 / L.dx();
    const MatrixXcd g = L.green(cplx(k, 0), rhs);
    const double v = L.st.velocity(k);
    const cplx ar = cplx(0, v) * std::exp(cplx(0, -k * L.x(sr)));
    const cplx al = cplx(0, v) * std::exp(cplx(0, k * L.x(sl)));
    b.col(0) = ar * g.col(0).segment(L.pad, L.n_trap);
    b.col(1) = al * g.col(1).segment(L.pad, L.n_trap);
    return b;
}

// per-branch amplitudes of every source column at energy w: 2 x n_src
inline MatrixXcd matrix_elements_at(const OutputLattice& L, double w, const MatrixXcd& sources) {
    const MatrixXcd b = output_basis(L, w);
    MatrixXcd lam = b.transpose() * sources * L.dx();
    if (L.normalization == "energy") lam /= std::sqrt(pi * L.velocity(w));
    return lam;
}

inline std::array<cplx, 2> matrix_element(const OutputLattice& L, double w, const VectorXcd& source) {
    MatrixXcd s = source;
    const MatrixXcd lam = matrix_elements_at(L, w, s);
    return {lam(0, 0), lam(1, 0)};
}

// plane-wave element int e^{-i k x} S(x) dx on the trap grid (k signed)
inline cplx plane_wave_element(const SimSetup& s, double k, const VectorXcd& source) {
    cplx acc = 0;
    for (int i = 0; i < s.n(); ++i) acc += std::exp(cplx(0, -k * s.x[i])) * source[i];
    return acc * s.dx();
}

struct MatrixElementTable {
    std::vector<double> omega;            // uniform grid (0, omega_max]
    std::vector<MatrixXcd> lambda;        // per omega: 2 x n_channels
};

inline MatrixElementTable matrix_elements(const OutputLattice& L, const std::vector<Channel>& ch, const OutputModeGrid& g) {
    std::vector<std::string> uncovered;
    for (std::size_t q = 0; q < ch.size(); ++q)
        if (L.radiates(ch[q].omega_out) && ch[q].omega_out > g.omega_max) {
            std::ostringstream os;
            os << kind_name(ch[q].kind) << ch[q].mode << "@" << ch[q].omega_out;
            uncovered.push_back(os.str());
        }
    if (!uncovered.empty()) {
        std::string msg = "omega grid does not cover resonances:";
        for (const auto& u : uncovered) msg += " " + u;
        throw std::invalid_argument(msg);
    }
    const MatrixXcd src = source_matrix(ch);
    MatrixElementTable t;
    for (int i = 1; i <= g.n_omega; ++i) {
        const double w = g.omega_max * i / g.n_omega;
        t.omega.push_back(w);
        t.lambda.push_back(matrix_elements_at(L, w, src));
    }
    return t;
}

// ---------------------------------------------------------------------------
// time kernels

// D(t) = i (e^{-i(w_out - w_k) t} - 1) / (w_out - w_k), limit t on resonance
inline cplx d_kernel(double omega_k, double omega_out, double t) {
    if (t < 0) throw std::domain_error("d_kernel needs t >= 0");
    const double X = omega_out - omega_k;
    if (X == 0) return t;
    const double s = std::sin(0.5 * X * t);
    const cplx em1(-2.0 * s * s, -std::sin(X * t));  // e^{-iXt} - 1
    return cplx(0, 1) * em1 / X;
}

// D2(t) = (1 - iXt - e^{-iXt}) / X^2 with X = w_out - w_k
inline cplx d2_kernel(double omega_k, double omega_out, double t) {
    const double X = omega_out - omega_k;
    const double y = X * t;
    if (std::abs(y) < 1e-2) {
        // t^2 sum_{n>=2} (-i y)^{n-2} / n!
        cplx acc = 0, term = 1;
        double fact = 2;
        for (int n = 2; n < 14; ++n) {
            acc += term / fact;
            term *= cplx(0, -y);
            fact *= (n + 1);
        }
        return acc * t * t;
    }
    return (cplx(1.0, -y) - std::exp(cplx(0, -y))) / (X * X);
}

// explicit sinc^2 form of |D|^2
inline double d_kernel_sq(double omega_k, double omega_out, double t) {
    const double X = omega_out - omega_k;
    if (X == 0) return t * t;
    const double s = std::sin(0.5 * X * t);
    return 4.0 * s * s / (X * X);
}

// ---------------------------------------------------------------------------
// golden rule

struct RateAggregate {
    std::vector<double> channel;  // dn_f^eta / dt per channel
    double condensate = 0, sqe = 0, pb = 0;
    double total() const { return condensate + sqe + pb; }
};

inline constexpr double branch_density = 0.5;  // rho / 2 per branch

// sum_b |lambda_b|^2 at the channel resonance, 0 if closed
inline double resonant_strength(const OutputLattice& L, const Channel& c) {
    if (!L.radiates(c.omega_out)) return 0.0;
    const auto lam = matrix_element(L, c.omega_out, c.source);
    return std::norm(lam[0]) + std::norm(lam[1]);
}

inline RateAggregate golden_rule_rates(const OutputLattice& L, const std::vector<Channel>& ch, double rho = 1.0) {
    RateAggregate r;
    r.channel.resize(ch.size(), 0.0);
    for (std::size_t q = 0; q < ch.size(); ++q) {
        const double rate = 2.0 * pi * rho * 0.5 * resonant_strength(L, ch[q]) * ch[q].population;
        r.channel[q] = rate;
        if (ch[q].kind == ChannelKind::condensate) r.condensate += rate;
        else if (ch[q].kind == ChannelKind::sqe) r.sqe += rate;
        else r.pb += rate;
    }
    return r;
}

// ---------------------------------------------------------------------------
// spectrum n_k^eta(t) = |lambda|^2 |D|^2 n^t on the table grid

struct Spectrum {
    std::vector<double> omega;
    // [omega][channel] per branch
    std::vector<std::vector<double>> plus, minus;
    std::vector<double> total_plus, total_minus;
};

inline Spectrum output_spectrum(const MatrixElementTable& tab, const std::vector<Channel>& ch, double t) {
    Spectrum s;
    s.omega = tab.omega;
    const std::size_t nc = ch.size();
    for (std::size_t i = 0; i < tab.omega.size(); ++i) {
        std::vector<double> p(nc), m(nc);
        double tp = 0, tm = 0;
        for (std::size_t q = 0; q < nc; ++q) {
            const double d2 = std::norm(d_kernel(tab.omega[i], ch[q].omega_out, t));
            p[q] = std::norm(tab.lambda[i](0, Eigen::Index(q))) * d2 * ch[q].population;
            m[q] = std::norm(tab.lambda[i](1, Eigen::Index(q))) * d2 * ch[q].population;
            tp += p[q];
            tm += m[q];
        }
        s.plus.push_back(std::move(p));
        s.minus.push_back(std::move(m));
        s.total_plus.push_back(tp);
        s.total_minus.push_back(tm);
    }
    return s;
}

// sum_k n_k^eta(t) = sum_b rho_b int dw |lambda_b|^2 |D|^2 n^t on a resonance-refined rule
inline double channel_output_count(const OutputLattice& L, const Channel& c, double t, double omega_hi, int background = 400) {
    const double near = std::min(20.0 * pi / std::max(t, 1e-12), 0.5 * omega_hi);
    const auto edges = refined_edges(0.0, omega_hi, c.omega_out, near, std::min(0.05, 0.2 / std::max(t, 1e-12)), background);
    const Rule r = gauss_panels(edges);
    double acc = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto lam = matrix_element(L, r.x[i], c.source);
        acc += r.w[i] * branch_density * (std::norm(lam[0]) + std::norm(lam[1])) * std::norm(d_kernel(r.x[i], c.omega_out, t));
    }
    return acc * c.population;
}

// ---------------------------------------------------------------------------
// strength function g(w) = sum_b rho_b |lambda_b(w)|^2 on a shared rule, all channels at once

struct StrengthTable {
    Rule rule;
    MatrixXd g;  // rule node x channel
};

inline std::vector<double> strength_edges(double omega_hi) {
    return graded_edges(0.0, omega_hi, 0.05, 1.02, 2.0);
}

inline StrengthTable strength_table(const OutputLattice& L, const std::vector<Channel>& ch, double omega_hi) {
    StrengthTable t;
    t.rule = gauss_panels(strength_edges(omega_hi));
    const MatrixXcd src = source_matrix(ch);
    t.g.resize(Eigen::Index(t.rule.size()), Eigen::Index(ch.size()));
    for (std::size_t i = 0; i < t.rule.size(); ++i) {
        const MatrixXcd lam = matrix_elements_at(L, t.rule.x[i], src);
        t.g.row(Eigen::Index(i)) = branch_density * (lam.row(0).cwiseAbs2() + lam.row(1).cwiseAbs2());
    }
    return t;
}

inline double strength_at(const OutputLattice& L, const Channel& c, double w) {
    if (!(w > 0)) return 0.0;
    const auto lam = matrix_element(L, w, c.source);
    return branch_density * (std::norm(lam[0]) + std::norm(lam[1]));
}

// level shift PV sum_k |lambda_k|^2 / (w_out - w_k) for each channel
inline std::vector<double> level_shifts(const OutputLattice& L, const std::vector<Channel>& ch, const StrengthTable& t,
                                        double omega_hi) {
    std::vector<double> out(ch.size());
    for (std::size_t q = 0; q < ch.size(); ++q) {
        const double x0 = ch[q].omega_out;
        const double g0 = (x0 > 0 && x0 < omega_hi) ? strength_at(L, ch[q], x0) : 0.0;
        double acc = 0;
        for (std::size_t i = 0; i < t.rule.size(); ++i)
            acc += t.rule.w[i] * (t.g(Eigen::Index(i), Eigen::Index(q)) - g0) / (t.rule.x[i] - x0);
        if (x0 > 0 && x0 < omega_hi) acc += g0 * std::log((omega_hi - x0) / x0);
        else acc += g0 * std::log(std::abs((omega_hi - x0) / x0));
        out[q] = -acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// bound component

struct BoundComponent {
    VectorXcd field;       // PV part of the long-time field, complete-set normalization, trap grid
    VectorXcd resonant;    // delta part (standing wave)
    double number = 0;     // 2 n^t FP sum_k |lambda_k|^2 / (w_k - w_out)^2
    double estimate = 0;   // 2 N0 (lambda(0) / w_out)^2, condensate only
};

// 2 n^t FP int dw g(w) / (w - w_out)^2, subtracted at the resonance
inline double bound_number(const OutputLattice& L, const Channel& c, double omega_hi) {
    const double x0 = c.omega_out;
    if (x0 == 0) throw std::domain_error("resonance at threshold: bound component undefined");
    const Rule r = gauss_panels(strength_edges(omega_hi));
    std::vector<double> gx(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) gx[i] = strength_at(L, c, r.x[i]);
    double fp;
    if (x0 < 0 || x0 >= omega_hi) {
        fp = 0;
        for (std::size_t i = 0; i < r.size(); ++i) fp += r.w[i] * gx[i] / ((r.x[i] - x0) * (r.x[i] - x0));
    } else {
        const double d = std::min(1e-3, 0.25 * x0);
        const double g0 = strength_at(L, c, x0);
        const double gp1 = strength_at(L, c, x0 + d), gm1 = strength_at(L, c, x0 - d);
        const double gp2 = strength_at(L, c, x0 + 2 * d), gm2 = strength_at(L, c, x0 - 2 * d);
        const double d0 = (8.0 * (gp1 - gm1) - (gp2 - gm2)) / (12.0 * d);
        fp = finite_part_from_samples(r, gx, 0.0, omega_hi, x0, g0, d0);
    }
    return 2.0 * c.population * fp;
}

inline BoundComponent bound_component(const OutputLattice& L, const Channel& c, double omega_hi, double lambda_center) {
    if (c.omega_out == 0) throw std::domain_error("resonance at threshold: bound component undefined");
    BoundComponent b;
    const VectorXcd s = L.embed(c.source);
    const VectorXcd gp = L.resolvent(c.omega_out, s);
    VectorXcd gm = gp;
    if (L.radiates(c.omega_out)) gm = L.resolvent(c.omega_out, s.conjugate()).conjugate();
    b.field = (0.5 * (gp + gm)).segment(L.pad, L.n_trap);
    b.resonant = (0.5 * (gp - gm)).segment(L.pad, L.n_trap);
    b.number = bound_number(L, c, omega_hi);
    if (c.kind == ChannelKind::condensate) b.estimate = 2.0 * c.population * std::pow(lambda_center / c.omega_out, 2);
    return b;
}

// ---------------------------------------------------------------------------
// spectral widths

struct SpectralWidths {
    double delta_omega = 0;  // Delta omega_0
    double delta_small = 0;  // delta omega_0
};

inline SpectralWidths spectral_width_estimates(double r0, double k_em) {
    SpectralWidths w;
    if (k_em == 0) {
        w.delta_omega = w.delta_small = std::isinf(r0) ? 0.0 : 1.0 / (2.0 * r0 * r0);
    } else {
        w.delta_omega = w.delta_small = std::isinf(r0) ? 0.0 : std::abs(k_em) / (2.0 * r0);
    }
    return w;
}

// Lambda << Delta omega
inline bool weak_coupling(const CouplingSpec& c, double dx, double delta_omega, double margin = 0.1) {
    return c.strength(dx) < margin * delta_omega;
}

}  // namespace atomlaser
