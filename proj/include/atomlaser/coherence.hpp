#pragma once
// Equal-time first- and second-order coherence of the output beam.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "field.hpp"

namespace atomlaser {

// component densities of the output on the field grid
struct OutputComponents {
    VectorXd n_out;      // total, shared with output_density
    VectorXd n0;         // N0 |Psi^0|^2
    VectorXd n_tilde;    // sum_j n_j |Psi^{j+}|^2 + (n_j + 1) |Psi^{j-}|^2
    VectorXcd m_tilde;   // sum_j Psi^{j+} Psi^{j-} (2 n_j + 1)
    VectorXcd psi0;      // sqrt(N0) Psi^0
    double max_density = 0;
};

inline OutputComponents output_components(const MatrixXcd& psi, const std::vector<Channel>& ch) {
    OutputComponents c;
    const Eigen::Index nx = psi.rows();
    c.n_out = output_density(psi, ch);
    c.n0 = VectorXd::Zero(nx);
    c.n_tilde = VectorXd::Zero(nx);
    c.m_tilde = VectorXcd::Zero(nx);
    c.psi0 = VectorXcd::Zero(nx);
    std::vector<Eigen::Index> plus, minus;
    for (std::size_t q = 0; q < ch.size(); ++q) {
        const auto Q = Eigen::Index(q);
        if (ch[q].kind == ChannelKind::condensate) {
            c.n0 += ch[q].population * psi.col(Q).cwiseAbs2();
            c.psi0 += std::sqrt(ch[q].population) * psi.col(Q);
        } else {
            c.n_tilde += ch[q].population * psi.col(Q).cwiseAbs2();
            if (ch[q].mode >= 0) {
                auto& v = ch[q].kind == ChannelKind::sqe ? plus : minus;
                if (std::size_t(ch[q].mode) >= v.size()) v.resize(std::size_t(ch[q].mode) + 1, -1);
                v[std::size_t(ch[q].mode)] = Q;
            }
        }
    }
    for (std::size_t j = 0; j < std::min(plus.size(), minus.size()); ++j) {
        if (plus[j] < 0 || minus[j] < 0) continue;
        const double nj = ch[std::size_t(plus[j])].population;
        c.m_tilde += (2.0 * nj + 1.0) * psi.col(plus[j]).cwiseProduct(psi.col(minus[j]));
    }
    c.max_density = c.n_out.maxCoeff();
    return c;
}

inline bool is_node(const OutputComponents& c, Eigen::Index i, double node_fraction) {
    return !(c.n_out[i] > node_fraction * c.max_density) || c.n_out[i] <= 0;
}

// g1(x1, x2) at equal times; nullopt marks a node at either point
inline std::optional<cplx> g1(const MatrixXcd& psi, const std::vector<Channel>& ch, const OutputComponents& c, Eigen::Index i1,
                              Eigen::Index i2, double node_fraction) {
    if (is_node(c, i1, node_fraction) || is_node(c, i2, node_fraction)) return std::nullopt;
    cplx num = 0;
    for (std::size_t q = 0; q < ch.size(); ++q) num += ch[q].population * std::conj(psi(i1, Eigen::Index(q))) * psi(i2, Eigen::Index(q));
    const double den2 = c.n_out[i1] * c.n_out[i2];
    if (std::norm(num) > den2 * (1.0 + 1e-9)) throw NumericalError("Cauchy-Schwarz violated in g1");
    if (i1 == i2) return cplx(1.0, 0.0);
    return num / std::sqrt(den2);
}

inline std::vector<std::optional<cplx>> g1_row(const MatrixXcd& psi, const std::vector<Channel>& ch, const OutputComponents& c,
                                               Eigen::Index i1, double node_fraction) {
    std::vector<std::optional<cplx>> out(std::size_t(psi.rows()));
    for (Eigen::Index i = 0; i < psi.rows(); ++i) out[std::size_t(i)] = g1(psi, ch, c, i1, i, node_fraction);
    return out;
}

inline std::optional<double> g2(const OutputComponents& c, Eigen::Index i, double node_fraction) {
    if (is_node(c, i, node_fraction)) return std::nullopt;
    const double n = c.n_out[i], nt = c.n_tilde[i];
    const cplx m = c.m_tilde[i];
    const cplx p0c = std::conj(c.psi0[i]);
    const double num = 2.0 * std::real(c.n0[i] * nt + p0c * p0c * m) + nt * nt + std::norm(m);
    return 1.0 + num / (n * n);
}

inline std::vector<std::optional<double>> g2_profile(const OutputComponents& c, double node_fraction) {
    std::vector<std::optional<double>> out(std::size_t(c.n_out.size()));
    for (Eigen::Index i = 0; i < c.n_out.size(); ++i) out[std::size_t(i)] = g2(c, i, node_fraction);
    return out;
}

inline Eigen::Index nearest_index(const std::vector<double>& x, double x0) {
    Eigen::Index best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (std::abs(x[i] - x0) < std::abs(x[std::size_t(best)] - x0)) best = Eigen::Index(i);
    return best;
}

}  // namespace atomlaser
