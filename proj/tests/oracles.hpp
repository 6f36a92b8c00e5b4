// Independent reference evaluations used only by the tests. Nothing here calls into the library's
// numerical kernels: sums are carried in long double and quadrature is fixed-grid Gauss-Legendre.

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Real = long double;

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<Real>, std::vector<Real>> gauss_legendre(int n) {
    std::vector<Real> x(n), w(n);
    const Real pi = 3.141592653589793238462643383279502884L;
    for (int i = 0; i < (n + 1) / 2; ++i) {
        Real z = std::cos(pi * (i + 0.75L) / (n + 0.5L));
        Real dp = 0;
        for (int iter = 0; iter < 100; ++iter) {
            Real p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const Real pk = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (z * p1 - p0) / (z * z - 1);
            const Real dz = p1 / dp;
            z -= dz;
            if (std::fabs(dz) < 1e-19L) break;
        }
        Real p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
            const Real pk = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = pk;
        }
        dp = n * (z * p1 - p0) / (z * z - 1);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2 / ((1 - z * z) * dp * dp);
    }
    return {x, w};
}

// Composite Gauss-Legendre over equal panels.
inline Real composite_gl(const std::function<Real(Real)>& f, Real a, Real b, int panels, int order = 20) {
    static thread_local int cached_order = -1;
    static thread_local std::pair<std::vector<Real>, std::vector<Real>> rule;
    if (cached_order != order) {
        rule = gauss_legendre(order);
        cached_order = order;
    }
    const Real h = (b - a) / panels;
    Real total = 0;
    for (int p = 0; p < panels; ++p) {
        const Real c = a + (p + 0.5L) * h;
        Real s = 0;
        for (int i = 0; i < order; ++i) s += rule.second[i] * f(c + 0.5L * h * rule.first[i]);
        total += 0.5L * h * s;
    }
    return total;
}

// Composite Gauss-Legendre on geometrically graded panels towards the origin, for integrable
// endpoint singularities: panels [r^{j+1} b, r^j b] down to `depth` levels, then one panel to 0.
inline Real graded_gl(const std::function<Real(Real)>& f, Real b, int depth = 60, Real ratio = 0.5L, int order = 20) {
    Real total = 0;
    Real hi = b;
    for (int j = 0; j < depth; ++j) {
        const Real lo = hi * ratio;
        total += composite_gl(f, lo, hi, 1, order);
        hi = lo;
    }
    total += composite_gl(f, 0, hi, 1, order);
    return total;
}

struct Moments {
    Real z, mean, variance;
};

// Direct long-double Boltzmann sums.
inline Moments boltzmann_moments(const std::vector<Real>& e, const std::vector<Real>& d, Real beta) {
    Real z = 0, s1 = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const Real w = d[k] * std::exp(-beta * e[k]);
        z += w;
        s1 += w * e[k];
    }
    const Real mean = s1 / z;
    Real var = 0;
    for (std::size_t k = 0; k < e.size(); ++k) {
        const Real w = d[k] * std::exp(-beta * e[k]) / z;
        var += w * (e[k] - mean) * (e[k] - mean);
    }
    return {z, mean, var};
}

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

// Five-point stencil, O(h⁴).
inline double central_difference4(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

}  // namespace oracle
