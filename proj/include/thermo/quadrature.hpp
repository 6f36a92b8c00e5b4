// quadrature.hpp: globally adaptive Gauss–Kronrod (7/15) integration on finite intervals.

#pragma once

#include "thermo/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace thermo::quad {

struct Options {
    double rel_tol = 1e-10;
    double abs_tol = 0.0;
    int max_intervals = 4000;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& other) const { return error < other.error; }
};

template <typename F>
Segment gauss_kronrod_15(F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double f_centre = f(centre);
    double kronrod = f_centre * kKronrodWeights[7];
    double gauss = f_centre * kGaussWeights[3];
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kKronrodNodes[i];
        const double sum = f(centre - dx) + f(centre + dx);
        kronrod += kKronrodWeights[i] * sum;
        if (i % 2 == 1) {
            gauss += kGaussWeights[i / 2] * sum;
        }
    }
    kronrod *= half;
    gauss *= half;
    return Segment{a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

// Integrates f over [a, b]. Throws NumericalError when the error estimate
// cannot be pushed below max(abs_tol, rel_tol·|I|) within max_intervals.
template <typename F>
Result integrate(F f, double a, double b, const Options& opts = {}) {
    if (a == b) {
        return {};
    }
    if (!(std::isfinite(a) && std::isfinite(b))) {
        throw std::invalid_argument("quad::integrate: limits must be finite");
    }
    const double sign = b > a ? 1.0 : -1.0;
    if (sign < 0) {
        std::swap(a, b);
    }

    std::priority_queue<detail::Segment> heap;
    heap.push(detail::gauss_kronrod_15(f, a, b));
    double total = heap.top().value;
    double total_error = heap.top().error;
    int intervals = 1;

    auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };

    while (total_error > target() && intervals < opts.max_intervals) {
        const detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;  // interval exhausted at machine resolution
        }
        const auto left = detail::gauss_kronrod_15(f, worst.a, mid);
        const auto right = detail::gauss_kronrod_15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++intervals;
    }

    // re-sum to shed accumulated cancellation in the running totals
    total = 0.0;
    total_error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        total_error += heap.top().error;
        heap.pop();
    }
    if (!std::isfinite(total)) {
        throw NumericalError("quad::integrate: non-finite integrand on [" + std::to_string(a) + ", " +
                             std::to_string(b) + "]");
    }
    // a floor of a few ulps of the result prevents spurious failure on exactly-converged panels
    const double achievable = std::max(target(), 64.0 * std::numeric_limits<double>::epsilon() * std::abs(total));
    if (total_error > 10.0 * achievable && total_error > 1e-300) {
        std::ostringstream msg;
        msg << "quad::integrate: no convergence on [" << a << ", " << b << "] after " << intervals
            << " intervals (estimate " << total << ", error " << total_error << ")";
        throw NumericalError(msg.str());
    }
    return Result{sign * total, total_error, intervals};
}

// Integrates f over [0, upper] where f(x) ~ x^{power−1} near the origin (power > 0).
// The first panel [0, split] is mapped through x = split·v^{1/power}, which makes the
// transformed integrand finite at v = 0.
template <typename F>
Result integrate_origin_singular(F f, double power, double split, double upper, const Options& opts = {}) {
    if (!(power > 0.0)) {
        throw std::invalid_argument("quad::integrate_origin_singular: power must be positive");
    }
    split = std::min(split, upper);
    const double inv = 1.0 / power;
    auto mapped = [&](double v) {
        if (v <= 0.0) {
            v = std::numeric_limits<double>::min();
        }
        const double x = split * std::pow(v, inv);
        const double jacobian = split * inv * std::pow(v, inv - 1.0);
        return f(x) * jacobian;
    };
    Result head = integrate(mapped, 0.0, 1.0, opts);
    if (split >= upper) {
        return head;
    }
    // geometric panels keep a rapidly decaying tail from being under-sampled by the first estimate
    Result total = head;
    for (double lo = split; lo < upper;) {
        const double hi = std::min(upper, 4.0 * lo);
        const Result part = integrate(f, lo, hi, opts);
        total.value += part.value;
        total.error += part.error;
        total.intervals += part.intervals;
        lo = hi;
    }
    return total;
}

}  // namespace thermo::quad
