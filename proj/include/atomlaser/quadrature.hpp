#pragma once
// Composite Gauss-Legendre panels and singular-integral subtraction rules.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace atomlaser {

struct Rule {
    std::vector<double> x, w;
    std::size_t size() const { return x.size(); }
    void append(const Rule& r) {
        x.insert(x.end(), r.x.begin(), r.x.end());
        w.insert(w.end(), r.w.begin(), r.w.end());
    }
};

// 8-point Gauss-Legendre on each panel [edges[i], edges[i+1]]
inline Rule gauss_panels(const std::vector<double>& edges) {
    using G = boost::math::quadrature::gauss<double, 8>;
    const auto& ab = G::abscissa();
    const auto& wt = G::weights();
    Rule r;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        for (std::size_t i = 0; i < ab.size(); ++i) {
            r.x.push_back(c - h * ab[i]);
            r.w.push_back(h * wt[i]);
            r.x.push_back(c + h * ab[i]);
            r.w.push_back(h * wt[i]);
        }
    }
    return r;
}

inline std::vector<double> uniform_edges(double a, double b, int n) {
    std::vector<double> e(n + 1);
    for (int i = 0; i <= n; ++i) e[i] = a + (b - a) * i / n;
    return e;
}

inline Rule gauss_uniform(double a, double b, int panels) { return gauss_panels(uniform_edges(a, b, panels)); }

// panels of width ~width near the origin growing by factor growth, capped at max_width
inline std::vector<double> graded_edges(double a, double b, double width, double growth, double max_width) {
    std::vector<double> e{a};
    double w = width;
    while (e.back() < b) {
        e.push_back(std::min(b, e.back() + w));
        w = std::min(max_width, w * growth);
    }
    if (e.size() >= 3 && e.back() - e[e.size() - 2] < 0.25 * width) e.erase(e.end() - 2);
    return e;
}

// edges covering [a, b] with geometric refinement toward x0 (inside) down to min_width
inline std::vector<double> refined_edges(double a, double b, double x0, double near, double min_width, int background) {
    std::vector<double> e = uniform_edges(a, b, background);
    if (!(x0 > a && x0 < b)) return e;
    std::vector<double> extra;
    for (double d = near; d >= min_width; d *= 0.5) {
        if (x0 - d > a) extra.push_back(x0 - d);
        if (x0 + d < b) extra.push_back(x0 + d);
        // a few uniform points per ring keep panels well shaped
        if (x0 - 1.5 * d > a) extra.push_back(x0 - 1.5 * d);
        if (x0 + 1.5 * d < b) extra.push_back(x0 + 1.5 * d);
    }
    extra.push_back(x0);
    e.insert(e.end(), extra.begin(), extra.end());
    std::sort(e.begin(), e.end());
    std::vector<double> out;
    for (double v : e)
        if (out.empty() || v - out.back() > 1e-14 * (1 + std::abs(v))) out.push_back(v);
    return out;
}

// PV int_a^b f(x) / (x - x0) dx from samples on a rule, with f0 = f(x0)
template <class F>
auto pv_integral(const Rule& r, F&& f, double a, double b, double x0, decltype(f(0.0)) f0) -> decltype(f(0.0)) {
    using T = decltype(f(0.0));
    T acc = T(0);
    for (std::size_t i = 0; i < r.size(); ++i) acc += r.w[i] * (f(r.x[i]) - f0) / (r.x[i] - x0);
    if (x0 > a && x0 < b) return acc + f0 * std::log((b - x0) / (x0 - a));
    return acc + f0 * std::log(std::abs((b - x0) / (a - x0)));
}

// Hadamard finite part of int_a^b f(x) / (x - x0)^2 dx with f0 = f(x0), d0 = f'(x0), a < x0 < b
template <class T>
T finite_part_from_samples(const Rule& r, const std::vector<T>& fx, double a, double b, double x0, T f0, T d0) {
    T acc = T(0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double d = r.x[i] - x0;
        acc += r.w[i] * (fx[i] - f0 - d0 * d) / (d * d);
    }
    return acc + f0 * (-1.0 / (b - x0) - 1.0 / (x0 - a)) + d0 * std::log((b - x0) / (x0 - a));
}

}  // namespace atomlaser
