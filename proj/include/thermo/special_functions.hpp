// special_functions.hpp: Gamma (Lanczos) and Riemann zeta (Euler–Maclaurin), templated on scalar.

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace thermo::special {

namespace detail {

// Lanczos g = 7, n = 9 (Godfrey's coefficients); relative error below 2e-15 on the positive axis.
inline constexpr double kLanczosG = 7.0;
inline constexpr std::array<double, 9> kLanczosCoeffs = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

// B_{2k} / (2k)! for k = 1..10, used by the Euler–Maclaurin tail.
inline constexpr std::array<double, 10> kBernoulliOverFactorial = {
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
    -174611.0 / 802857662698291200000.0};

}  // namespace detail

// ln Γ(x) for x > 0.
template <typename Scalar>
Scalar log_gamma(Scalar x) {
    using std::log;
    using std::sin;
    if (!(x > Scalar(0))) {
        throw std::domain_error("log_gamma: argument must be positive");
    }
    if (x < Scalar(0.5)) {
        // reflection keeps the series in its accurate half-plane
        const Scalar pi = std::numbers::pi_v<Scalar>;
        return log(pi / sin(pi * x)) - log_gamma(Scalar(1) - x);
    }
    const Scalar z = x - Scalar(1);
    Scalar series = Scalar(detail::kLanczosCoeffs[0]);
    for (std::size_t i = 1; i < detail::kLanczosCoeffs.size(); ++i) {
        series += Scalar(detail::kLanczosCoeffs[i]) / (z + Scalar(i));
    }
    const Scalar t = z + Scalar(detail::kLanczosG) + Scalar(0.5);
    const Scalar half_log_two_pi = Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar>);
    return half_log_two_pi + (z + Scalar(0.5)) * log(t) - t + log(series);
}

// Γ(x) for x > 0.
template <typename Scalar>
Scalar gamma(Scalar x) {
    using std::exp;
    if (!(x > Scalar(0))) {
        throw std::domain_error("gamma: argument must be positive");
    }
    if (x >= Scalar(1) && x <= Scalar(2)) {
        // exp(log_gamma) loses a few ulps near the minimum; direct product form is tighter here
        const Scalar z = x - Scalar(1);
        Scalar series = Scalar(detail::kLanczosCoeffs[0]);
        for (std::size_t i = 1; i < detail::kLanczosCoeffs.size(); ++i) {
            series += Scalar(detail::kLanczosCoeffs[i]) / (z + Scalar(i));
        }
        const Scalar t = z + Scalar(detail::kLanczosG) + Scalar(0.5);
        using std::pow;
        using std::sqrt;
        return sqrt(Scalar(2) * std::numbers::pi_v<Scalar>) * pow(t, z + Scalar(0.5)) * exp(-t) * series;
    }
    if (x < Scalar(1)) {
        return gamma(x + Scalar(1)) / x;
    }
    return exp(log_gamma(x));
}

// Riemann ζ(s) for real s > 1.
template <typename Scalar>
Scalar zeta(Scalar s) {
    using std::pow;
    if (!(s > Scalar(1))) {
        throw std::domain_error("zeta: argument must exceed 1");
    }
    constexpr int kDirect = 12;
    Scalar sum = Scalar(0);
    for (int n = kDirect - 1; n >= 1; --n) {
        sum += pow(Scalar(n), -s);
    }
    const Scalar N = Scalar(kDirect);
    sum += pow(N, Scalar(1) - s) / (s - Scalar(1)) + Scalar(0.5) * pow(N, -s);

    // Σ_k B_{2k}/(2k)! · s(s+1)…(s+2k−2) · N^{−s−2k+1}
    Scalar rising = s;
    Scalar power = pow(N, -s - Scalar(1));
    for (std::size_t k = 0; k < detail::kBernoulliOverFactorial.size(); ++k) {
        const Scalar term = Scalar(detail::kBernoulliOverFactorial[k]) * rising * power;
        sum += term;
        rising *= (s + Scalar(2 * k + 1)) * (s + Scalar(2 * k + 2));
        power /= N * N;
    }
    return sum;
}

}  // namespace thermo::special
