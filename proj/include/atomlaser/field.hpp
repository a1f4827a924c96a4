#pragma once
// Output fields Psi_f^eta(x, t) = i F_t(H_f) S_eta with F_t(E) = (e^{-i w t} - e^{-i E t}) / (w - E).
//
// Long times: Psi = i [e^{-i w t} G+(w) S - T(t)], where the transient T is the spectral integral
// deformed onto steepest-descent rays k = s e^{-i pi/4} (band bottom) and k = pi/h - s e^{i pi/4}
// (band top). Short times: Chebyshev expansion of F_t on a Dirichlet box wide enough that nothing
// reaches its walls.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "outcoupling.hpp"
#include "quadrature.hpp"

namespace atomlaser {

struct FieldSet {
    std::vector<double> x;  // output-lattice coordinates
    MatrixXcd psi;          // x by channel
    double t = 0;
};

// steady outgoing fields G+(w_q) S_q on the output lattice
inline MatrixXcd steady_fields(const OutputLattice& L, const std::vector<Channel>& ch) {
    MatrixXcd out(L.size(), Eigen::Index(ch.size()));
    for (std::size_t q = 0; q < ch.size(); ++q) out.col(Eigen::Index(q)) = L.resolvent(ch[q].omega_out, L.embed(ch[q].source));
    return out;
}

// earliest time for the ray representation: conditioning needs t >~ a^2/10, and barrier-top
// resonances of W (curvature ~ trap frequency) crossed by the rays must have decayed, e^{-t/2}
inline double ray_min_time(const OutputLattice& L) {
    const double a = std::max(std::abs(L.x(0)), std::abs(L.x(L.size() - 1)));
    return std::max(a * a / 10.0, 40.0);
}

namespace detail {

// int_ray dk Phi(k) e^{-i eps t} / (w - eps) accumulated into acc for every channel
inline void ray_leg(const OutputLattice& L, const MatrixXcd& src, const std::vector<double>& omega, double t, cplx k0,
                    cplx dir, MatrixXcd& acc, double sign) {
    const double curv = k0 == cplx(0) ? 1.0 : std::abs(L.st.h * L.st.h * (-2.0 * L.st.c1 + 8.0 * L.st.c2));
    const double smax = std::sqrt(80.0 / (curv * t));
    const Rule r = gauss_panels(graded_edges(0.0, smax, std::min(0.01, 0.1 * smax), 1.25, std::max(0.02, smax / 12)));
    for (std::size_t i = 0; i < r.size(); ++i) {
        const cplx k = k0 + r.x[i] * dir;
        const cplx eps = L.st.energy(k);
        const cplx vel = L.st.velocity(k);
        const MatrixXcd gp = L.green(k, src);
        const MatrixXcd gm = L.green(-k, src);
        const cplx pref = sign * r.w[i] * dir * cplx(0, 1) * vel / (2.0 * pi) * std::exp(cplx(0, -1) * eps * t);
        for (Eigen::Index q = 0; q < src.cols(); ++q) acc.col(q) += (pref / (omega[std::size_t(q)] - eps)) * (gp.col(q) - gm.col(q));
    }
}

}  // namespace detail

inline MatrixXcd transient_fields(const OutputLattice& L, const std::vector<Channel>& ch, double t) {
    MatrixXcd src(L.size(), Eigen::Index(ch.size()));
    std::vector<double> omega(ch.size());
    for (std::size_t q = 0; q < ch.size(); ++q) {
        src.col(Eigen::Index(q)) = L.embed(ch[q].source);
        omega[q] = ch[q].omega_out;
    }
    MatrixXcd acc = MatrixXcd::Zero(L.size(), src.cols());
    const cplx down = std::exp(cplx(0, -pi / 4));
    detail::ray_leg(L, src, omega, t, cplx(0), down, acc, 1.0);
    detail::ray_leg(L, src, omega, t, cplx(pi / L.st.h, 0), -std::exp(cplx(0, pi / 4)), acc, -1.0);
    return acc;
}

// Chebyshev evaluation of i F_t(H) S on a Dirichlet box padded by the maximal lattice speed times t
inline MatrixXcd chebyshev_fields(const OutputLattice& L, const std::vector<Channel>& ch, double t, int margin = 64) {
    const int n_core = L.size();
    double vmax = 0;
    for (int i = 1; i < 400; ++i) vmax = std::max(vmax, L.st.velocity(pi / L.st.h * i / 400.0));
    const int extra = int(std::ceil(vmax * t / L.st.h)) + margin;
    const int n = n_core + 2 * extra;
    VectorXd pot = VectorXd::Zero(n);
    pot.segment(extra, n_core) = L.W;
    const double emin = 0.0, emax = L.st.band_top() + L.W.maxCoeff() + 1e-9;
    const double c = 0.5 * (emax + emin), r = 0.5 * (emax - emin);
    const int deg = int(std::ceil(r * t * 1.1)) + 60;
    const int m = deg + 1;

    // coefficients per channel by Chebyshev-Gauss interpolation
    const std::size_t nc = ch.size();
    MatrixXcd coef = MatrixXcd::Zero(m, Eigen::Index(nc));
    std::vector<double> theta(m);
    for (int j = 0; j < m; ++j) theta[j] = pi * (j + 0.5) / m;
    for (std::size_t q = 0; q < nc; ++q) {
        const double w = ch[q].omega_out;
        std::vector<cplx> f(m);
        for (int j = 0; j < m; ++j) {
            const double E = c + r * std::cos(theta[j]);
            const double X = 0.5 * (w - E) * t;
            const double sinc = X == 0 ? 1.0 : std::sin(X) / X;
            f[j] = t * std::exp(cplx(0, -0.5 * (w + E) * t)) * sinc;
        }
        for (int p = 0; p < m; ++p) {
            cplx s = 0;
            for (int j = 0; j < m; ++j) s += f[j] * std::cos(p * theta[j]);
            coef(p, Eigen::Index(q)) = s * ((p == 0 ? 1.0 : 2.0) / m);
        }
    }

    MatrixXcd S = MatrixXcd::Zero(n, Eigen::Index(nc));
    for (std::size_t q = 0; q < nc; ++q) S.block(extra + L.pad, Eigen::Index(q), L.n_trap, 1) = ch[q].source;
    auto apply = [&](const MatrixXcd& X) {
        MatrixXcd Y(n, X.cols());
        for (Eigen::Index col = 0; col < X.cols(); ++col) {
            VectorXcd y = apply_hamiltonian(L.st, pot, VectorXcd(X.col(col)));
            Y.col(col) = (y - c * X.col(col)) / r;
        }
        return Y;
    };
    MatrixXcd t0 = S, t1 = apply(S);
    MatrixXcd acc = t0 * coef.row(0).asDiagonal();
    acc += t1 * coef.row(1).asDiagonal();
    for (int p = 2; p < m; ++p) {
        MatrixXcd t2 = 2.0 * apply(t1) - t0;
        acc += t2 * coef.row(p).asDiagonal();
        t0.swap(t1);
        t1.swap(t2);
    }
    return acc.middleRows(extra, n_core);
}

// output fields on the output lattice for every channel at time t
inline FieldSet output_fields(const OutputLattice& L, const std::vector<Channel>& ch, double t) {
    if (t < 0) throw std::domain_error("output field needs t >= 0");
    FieldSet f;
    f.t = t;
    for (int i = 0; i < L.size(); ++i) f.x.push_back(L.x(i));
    if (t == 0) {
        f.psi = MatrixXcd::Zero(L.size(), Eigen::Index(ch.size()));
        return f;
    }
    if (t < ray_min_time(L)) {
        f.psi = chebyshev_fields(L, ch, t);
        return f;
    }
    const MatrixXcd steady = steady_fields(L, ch);
    const MatrixXcd tr = transient_fields(L, ch, t);
    f.psi.resize(L.size(), Eigen::Index(ch.size()));
    for (std::size_t q = 0; q < ch.size(); ++q)
        f.psi.col(Eigen::Index(q)) = cplx(0, 1) * (std::exp(cplx(0, -ch[q].omega_out * t)) * steady.col(Eigen::Index(q)) - tr.col(Eigen::Index(q)));
    return f;
}

// long-time fields i e^{-i w t} G+ S split into propagating (resonant) and bound parts
struct SteadySplit {
    MatrixXcd resonant, bound;
};

inline SteadySplit steady_split(const OutputLattice& L, const std::vector<Channel>& ch, double t) {
    SteadySplit s;
    s.resonant.resize(L.size(), Eigen::Index(ch.size()));
    s.bound.resize(L.size(), Eigen::Index(ch.size()));
    for (std::size_t q = 0; q < ch.size(); ++q) {
        const VectorXcd src = L.embed(ch[q].source);
        const VectorXcd gp = L.resolvent(ch[q].omega_out, src);
        const VectorXcd gm = L.radiates(ch[q].omega_out) ? VectorXcd(L.resolvent(ch[q].omega_out, VectorXcd(src.conjugate())).conjugate()) : gp;
        const cplx ph = cplx(0, 1) * std::exp(cplx(0, -ch[q].omega_out * t));
        s.resonant.col(Eigen::Index(q)) = ph * 0.5 * (gp - gm);
        s.bound.col(Eigen::Index(q)) = ph * 0.5 * (gp + gm);
    }
    return s;
}

// per-channel densities n^t_eta |Psi_eta|^2 and their sum
inline MatrixXd channel_densities(const MatrixXcd& psi, const std::vector<Channel>& ch) {
    MatrixXd d(psi.rows(), psi.cols());
    for (Eigen::Index q = 0; q < psi.cols(); ++q) d.col(q) = ch[std::size_t(q)].population * psi.col(q).cwiseAbs2();
    return d;
}

inline VectorXd output_density(const MatrixXcd& psi, const std::vector<Channel>& ch) {
    return channel_densities(psi, ch).rowwise().sum();
}

}  // namespace atomlaser
