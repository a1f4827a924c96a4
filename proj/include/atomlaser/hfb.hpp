#pragma once
// Self-consistent HFB-Popov ground state of the trapped gas.

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "lattice.hpp"

namespace atomlaser {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double thermal_occupation(double energy, double temperature) {
    if (!(energy > 0)) throw std::domain_error("thermal_occupation needs E > 0");
    if (temperature < 0) throw std::domain_error("thermal_occupation needs T >= 0");
    if (temperature == 0) return 0.0;
    return 1.0 / std::expm1(energy / temperature);
}

struct CondensateState {
    VectorXd psi;
    double mu = 0;
    double n0 = 0;
    double residual = 0;
    int iterations = 0;
};

// columns of u, v are the modes; E ascending
struct Modes {
    VectorXd E;
    MatrixXd u, v;
    int count() const { return int(E.size()); }
};

struct HfbSolution {
    CondensateState condensate;
    Modes modes;
    VectorXd occupation;  // n_j
    VectorXd nbar;
    double temperature = 0;
    double e_cut = 0;
    int iterations = 0;
    std::vector<double> mu_trace;

    double n0() const { return condensate.n0; }
    double mu() const { return condensate.mu; }
};

inline double grid_norm(const VectorXd& f, double dx) { return std::sqrt(f.squaredNorm() * dx); }

// GPE potential part: V + U0 (N0 psi^2 + 2 nbar)
inline VectorXd gpe_potential(const SimSetup& s, const VectorXd& psi, const VectorXd& nbar, double n0) {
    const double U0 = s.params.U0;
    VectorXd p(s.n());
    for (int i = 0; i < s.n(); ++i) p[i] = s.trap[i] + U0 * (n0 * psi[i] * psi[i] + 2.0 * nbar[i]);
    return p;
}

inline double gpe_residual(const SimSetup& s, const VectorXd& psi, const VectorXd& nbar, double n0, double mu) {
    const VectorXd hp = apply_hamiltonian(s.stencil, gpe_potential(s, psi, nbar, n0), psi);
    return grid_norm(hp - mu * psi, s.dx());
}

inline VectorXd gaussian_guess(const SimSetup& s) {
    VectorXd g(s.n());
    for (int i = 0; i < s.n(); ++i) g[i] = std::exp(-0.5 * s.x[i] * s.x[i]);
    return g / grid_norm(g, s.dx());
}

// nodeless ground state of the generalized GPE by shifted inverse iteration
inline CondensateState solve_gpe(const SimSetup& s, const VectorXd& nbar, double n0, const VectorXd* guess = nullptr,
                                 double tol = 1e-8, int max_iter = 5000) {
    if (n0 < 0) throw std::domain_error("solve_gpe needs N0 >= 0");
    if ((nbar.array() < 0).any()) throw std::domain_error("solve_gpe needs nbar >= 0");
    const double dx = s.dx();
    const int n = s.n();
    VectorXd psi = guess ? *guess : gaussian_guess(s);
    psi /= grid_norm(psi, dx);
    if (psi.sum() < 0) psi = -psi;

    double gap = 1.0;
    for (int attempt = 0; attempt < 3; ++attempt, gap *= 3.0) {
        CondensateState st;
        for (int it = 0; it < max_iter; ++it) {
            const VectorXd pot = gpe_potential(s, psi, nbar, n0);
            const VectorXd hp = apply_hamiltonian(s.stencil, pot, psi);
            const double mu = psi.dot(hp) * dx;
            const double res = grid_norm(hp - mu * psi, dx);
            st = {psi, mu, n0, res, it};
            if (res <= tol) break;
            auto m = shifted_operator<double>(s.stencil, pot, n, mu - gap);
            VectorXd p = psi;
            m.solve(p.data(), 1);
            p /= grid_norm(p, dx);
            if (p.dot(psi) < 0) p = -p;
            psi = 0.5 * (psi + p);
            psi /= grid_norm(psi, dx);
        }
        if (st.residual > tol) {
            std::ostringstream os;
            os << "GPE did not converge: residual " << st.residual;
            throw NumericalError(os.str());
        }
        if (st.psi.minCoeff() >= -1e-8 * st.psi.maxCoeff()) return st;
        psi = gaussian_guess(s);
    }
    throw NumericalError("GPE converged to a state with nodes");
}

// positive-energy projected BdG modes with E <= e_cut
inline Modes solve_bdg(const SimSetup& s, const CondensateState& c, const VectorXd& nbar, double e_cut) {
    const int n = s.n();
    const double dx = s.dx(), U0 = s.params.U0;
    const auto& st = s.stencil;
    VectorXd da(n), db(n);  // diagonals of A = L - D and B = L + D
    for (int i = 0; i < n; ++i) {
        const double p2 = c.psi[i] * c.psi[i];
        const double hd = st.c0 + s.trap[i] - c.mu + 2.0 * U0 * (c.n0 * p2 + nbar[i]);
        const double d = U0 * c.n0 * p2;
        da[i] = hd - d;
        db[i] = hd + d;
    }
    auto A = [&](int i, int j) -> double {
        const int k = std::abs(i - j);
        return k == 0 ? da[i] : k == 1 ? st.c1 : k == 2 ? st.c2 : 0.0;
    };

    // B = L L^T, banded Cholesky
    const int kb = 2;
    std::vector<double> lb(std::size_t(kb + 1) * n, 0.0);
    for (int j = 0; j < n; ++j) {
        lb[0 + std::size_t(j) * 3] = db[j];
        if (j + 1 < n) lb[1 + std::size_t(j) * 3] = st.c1;
        if (j + 2 < n) lb[2 + std::size_t(j) * 3] = st.c2;
    }
    if (LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', n, kb, lb.data(), kb + 1) != 0)
        throw NumericalError("BdG metric operator is not positive definite");
    auto L = [&](int i, int j) -> double { return (i >= j && i - j <= kb) ? lb[std::size_t(i - j) + std::size_t(j) * 3] : 0.0; };

    // M = L^T A L, bandwidth 4
    const int km = 4;
    std::vector<double> mb(std::size_t(km + 1) * n, 0.0);
    std::vector<double> z(n, 0.0);
    for (int j = 0; j < n; ++j) {
        const int k0 = std::max(0, j - 2), k1 = std::min(n - 1, j + 4);
        for (int k = k0; k <= k1; ++k) {
            double acc = 0;
            for (int r = j; r <= std::min(n - 1, j + 2); ++r) acc += A(k, r) * L(r, j);
            z[k] = acc;
        }
        for (int i = j; i <= std::min(n - 1, j + km); ++i) {
            double acc = 0;
            for (int k = i; k <= std::min(n - 1, i + 2); ++k)
                if (k >= k0 && k <= k1) acc += L(k, i) * z[k];
            mb[std::size_t(i - j) + std::size_t(j) * (km + 1)] = acc;
        }
        for (int k = k0; k <= k1; ++k) z[k] = 0;
    }
    VectorXd w(n);
    MatrixXd g(n, n);
    if (LAPACKE_dsbevd(LAPACK_COL_MAJOR, 'V', 'L', n, km, mb.data(), km + 1, w.data(), g.data(), n) != 0)
        throw NumericalError("BdG eigensolver failed");

    const double zero_tol = 1e-4;
    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        if (w[i] < -zero_tol) {
            std::ostringstream os;
            os << "anomalous BdG mode " << i << " with E^2 = " << w[i];
            throw NumericalError(os.str());
        }
        if (w[i] > zero_tol && w[i] <= e_cut * e_cut) keep.push_back(i);
    }
    Modes m;
    const int nm = int(keep.size());
    m.E.resize(nm);
    m.u.resize(n, nm);
    m.v.resize(n, nm);
    VectorXd fm(n), fp(n);
    for (int q = 0; q < nm; ++q) {
        const int col = keep[q];
        const double E = std::sqrt(w[col]);
        const double scale = 1.0 / std::sqrt(E * dx);
        for (int i = 0; i < n; ++i) {
            double acc = 0;
            for (int k = std::max(0, i - kb); k <= i; ++k) acc += L(i, k) * g(k, col);
            fm[i] = acc * scale;
        }
        fp = apply_hamiltonian(st, da - VectorXd::Constant(n, st.c0), fm) / E;
        VectorXd u = 0.5 * (fp + fm), v = 0.5 * (fp - fm);
        u -= c.psi * (c.psi.dot(u) * dx);
        v -= c.psi * (c.psi.dot(v) * dx);
        Eigen::Index imax;
        u.cwiseAbs().maxCoeff(&imax);
        if (u[imax] < 0) {
            u = -u;
            v = -v;
        }
        m.E[q] = E;
        m.u.col(q) = u;
        m.v.col(q) = v;
    }
    return m;
}

inline VectorXd occupations(const VectorXd& E, double T) {
    VectorXd n(E.size());
    for (Eigen::Index j = 0; j < E.size(); ++j) n[j] = thermal_occupation(E[j], T);
    return n;
}

inline VectorXd noncondensate_density(const Modes& m, const VectorXd& occ) {
    VectorXd nb = VectorXd::Zero(m.u.rows());
    for (int j = 0; j < m.count(); ++j)
        nb += occ[j] * (m.u.col(j).array().square() + m.v.col(j).array().square()).matrix() + m.v.col(j).array().square().matrix();
    return nb;
}

struct HfbOptions {
    double e_cut = 10;
    double mixing = 0.3;
    double tol = 1e-6;
    double gpe_tol = 1e-8;
    int max_outer = 400;
    std::function<void(int, double, double, double)> progress;  // iteration, mu, N0, change
};

inline HfbOptions hfb_options(const RunConfig& c) {
    HfbOptions o;
    o.e_cut = excitation_cutoff(c);
    o.mixing = c.mixing;
    o.tol = c.hfb_tol;
    o.gpe_tol = c.gpe_tol;
    o.max_outer = c.max_outer;
    return o;
}

inline HfbSolution self_consistent_solve(const SimSetup& s, const HfbOptions& o) {
    const double dx = s.dx();
    const double Nt = s.params.n_atoms, T = s.params.temperature;
    HfbSolution sol;
    sol.temperature = T;
    sol.e_cut = o.e_cut;
    VectorXd nbar = VectorXd::Zero(s.n());
    VectorXd psi = gaussian_guess(s);
    double mu_prev = 0;
    std::ostringstream trace;
    for (int it = 1; it <= o.max_outer; ++it) {
        const double n0 = Nt - nbar.sum() * dx;
        if (n0 < 0) throw NumericalError("non-condensate number exceeds N_t");
        CondensateState c = solve_gpe(s, nbar, n0, &psi, o.gpe_tol);
        psi = c.psi;
        Modes m = solve_bdg(s, c, nbar, o.e_cut);
        VectorXd occ = occupations(m.E, T);
        VectorXd fresh = noncondensate_density(m, occ);
        const double scale = std::max(fresh.cwiseAbs().maxCoeff(), 1e-12);
        const double change = (fresh - nbar).cwiseAbs().maxCoeff() / scale;
        const double dmu = std::abs(c.mu - mu_prev);
        sol.mu_trace.push_back(c.mu);
        if (o.progress) o.progress(it, c.mu, n0, change);
        trace << " [" << it << ": mu=" << c.mu << " dn=" << change << "]";
        if (change < o.tol && (it == 1 || dmu < o.tol)) {
            sol.condensate = c;
            sol.modes = std::move(m);
            sol.occupation = occ;
            sol.nbar = nbar;
            sol.iterations = it;
            return sol;
        }
        mu_prev = c.mu;
        nbar = (1.0 - o.mixing) * nbar + o.mixing * fresh;
    }
    std::string t = trace.str();
    if (t.size() > 600) t = "..." + t.substr(t.size() - 600);
    throw NumericalError("self-consistency did not converge:" + t);
}

inline HfbSolution self_consistent_solve(const RunConfig& c) { return self_consistent_solve(build_setup(c), hfb_options(c)); }

inline double noncondensate_fraction(const HfbSolution& h, const SimSetup& s) {
    return h.nbar.sum() * s.dx() / s.params.n_atoms;
}

// rms width of |psi0|^2
inline double condensate_rms_width(const HfbSolution& h, const SimSetup& s) {
    double m2 = 0;
    for (int i = 0; i < s.n(); ++i) m2 += s.x[i] * s.x[i] * h.condensate.psi[i] * h.condensate.psi[i];
    return std::sqrt(m2 * s.dx());
}

}  // namespace atomlaser
