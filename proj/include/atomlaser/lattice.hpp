#pragma once
// Five-point lattice kinetic operator, its dispersion, and banded LAPACK helpers.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <lapacke.h>

namespace atomlaser {

using cplx = std::complex<double>;
inline constexpr double pi = 3.14159265358979323846;

// -1/2 d^2/dx^2 with weights (-1/12, 4/3, -5/2, 4/3, -1/12)/h^2
struct Stencil {
    double h = 1.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0;

    Stencil() = default;
    explicit Stencil(double spacing) : h(spacing) {
        const double s = -0.5 / (h * h);
        c0 = s * (-5.0 / 2.0);
        c1 = s * (4.0 / 3.0);
        c2 = s * (-1.0 / 12.0);
    }

    // dispersion eps(k) = c0 + 2 c1 cos(kh) + 2 c2 cos(2kh), analytic in k
    template <class T>
    T energy(T k) const {
        using std::cos;
        return c0 + 2.0 * c1 * cos(k * h) + 2.0 * c2 * cos(2.0 * k * h);
    }
    // group velocity d eps / dk
    template <class T>
    T velocity(T k) const {
        using std::sin;
        return -h * (2.0 * c1 * sin(k * h) + 4.0 * c2 * sin(2.0 * k * h));
    }
    double band_top() const { return c0 - 2.0 * c1 + 2.0 * c2; }

    // lattice wavenumber at energy w: real in (0, pi/h) inside the band,
    // positive imaginary below it (decaying), pi/h + i kappa above it (decaying, staggered),
    // complex with Im k > 0 far above it
    cplx wavenumber(double w) const {
        // 4 c2 c^2 + 2 c1 c + (c0 - 2 c2 - w) = 0 with c = cos(kh)
        const double a = 4.0 * c2, b = 2.0 * c1, cc = c0 - 2.0 * c2 - w;
        const double disc = b * b - 4.0 * a * cc;
        if (disc < 0) {
            // far above the band cos(kh) is complex; take the decaying branch
            const cplx cz = (-b - cplx(0.0, std::sqrt(-disc))) / (2.0 * a);
            const cplx k = std::acos(cz) / h;
            return k.imag() < 0 ? -k : k;
        }
        const double c = (-b - std::sqrt(disc)) / (2.0 * a);
        if (c > 1.0) return cplx(0.0, std::acosh(c) / h);
        if (c >= -1.0) return cplx(std::acos(c) / h, 0.0);
        return cplx(pi / h, std::acosh(-c) / h);
    }
};

// outgoing (z_p = e^{ikh}) and evanescent (|z_e| < 1) exterior roots at wavenumber k
struct ExteriorRoots {
    cplx zp, ze;
};

inline ExteriorRoots exterior_roots(const Stencil& st, cplx k) {
    ExteriorRoots r;
    r.zp = std::exp(cplx(0.0, 1.0) * k * st.h);
    const cplx wp = r.zp + 1.0 / r.zp;
    const cplx we = -st.c1 / st.c2 - wp;
    cplx ze = 0.5 * (we - std::sqrt(we * we - 4.0));
    if (std::abs(ze) > 1.0) ze = 1.0 / ze;
    r.ze = ze;
    return r;
}

// general band matrix in LAPACK gb layout with room for pivoting fill-in
template <class T>
class BandMatrix {
public:
    BandMatrix(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(std::size_t(ld_) * n, T(0)) {}

    int size() const { return n_; }
    T& operator()(int i, int j) { return ab_[std::size_t(kl_ + ku_ + i - j) + std::size_t(j) * ld_]; }
    T operator()(int i, int j) const { return ab_[std::size_t(kl_ + ku_ + i - j) + std::size_t(j) * ld_]; }
    bool in_band(int i, int j) const { return i - j <= kl_ && j - i <= ku_ && i >= 0 && j >= 0 && i < n_ && j < n_; }

    // solves in place for nrhs column-major right-hand sides; the matrix is consumed
    void solve(T* rhs, int nrhs) {
        std::vector<lapack_int> piv(n_);
        lapack_int info;
        if constexpr (std::is_same_v<T, double>)
            info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n_, kl_, ku_, nrhs, ab_.data(), ld_, piv.data(), rhs, n_);
        else
            info = LAPACKE_zgbsv(LAPACK_COL_MAJOR, n_, kl_, ku_, nrhs, reinterpret_cast<lapack_complex_double*>(ab_.data()), ld_,
                                 piv.data(), reinterpret_cast<lapack_complex_double*>(rhs), n_);
        if (info != 0) throw std::runtime_error("banded solve failed, info=" + std::to_string(info));
    }

private:
    int n_, kl_, ku_, ld_;
    std::vector<T> ab_;
};

// y = (K + diag(pot)) x with Dirichlet walls (ghosts zero)
template <class Vec, class Pot>
Vec apply_hamiltonian(const Stencil& st, const Pot& pot, const Vec& x) {
    const int n = int(x.size());
    Vec y(n);
    for (int i = 0; i < n; ++i) {
        auto s = (st.c0 + pot[i]) * x[i];
        if (i >= 1) s += st.c1 * x[i - 1];
        if (i + 1 < n) s += st.c1 * x[i + 1];
        if (i >= 2) s += st.c2 * x[i - 2];
        if (i + 2 < n) s += st.c2 * x[i + 2];
        y[i] = s;
    }
    return y;
}

// (shift - K - diag(pot)) in band form
template <class T, class Pot>
BandMatrix<T> shifted_operator(const Stencil& st, const Pot& pot, int n, T shift) {
    BandMatrix<T> m(n, 2, 2);
    for (int i = 0; i < n; ++i) {
        m(i, i) = shift - st.c0 - pot[i];
        if (i >= 1) m(i, i - 1) = -st.c1;
        if (i + 1 < n) m(i, i + 1) = -st.c1;
        if (i >= 2) m(i, i - 2) = -st.c2;
        if (i + 2 < n) m(i, i + 2) = -st.c2;
    }
    return m;
}

// exact lattice radiation condition on both ends for (w - H) at wavenumber k
inline void add_outgoing_ends(BandMatrix<cplx>& m, const Stencil& st, cplx k) {
    const auto [p, e] = exterior_roots(st, k);
    const int n = m.size();
    const cplx s1 = p + e, s2 = p * p + p * e + e * e, pe = p * e;
    // right: phi_n = s1 phi_{n-1} - pe phi_{n-2}, phi_{n+1} = s2 phi_{n-1} - pe s1 phi_{n-2}
    m(n - 2, n - 1) += -st.c2 * s1;
    m(n - 2, n - 2) += st.c2 * pe;
    m(n - 1, n - 1) += -st.c1 * s1 - st.c2 * s2;
    m(n - 1, n - 2) += st.c1 * pe + st.c2 * pe * s1;
    m(1, 0) += -st.c2 * s1;
    m(1, 1) += st.c2 * pe;
    m(0, 0) += -st.c1 * s1 - st.c2 * s2;
    m(0, 1) += st.c1 * pe + st.c2 * pe * s1;
}

}  // namespace atomlaser
