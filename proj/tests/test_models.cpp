#include <doctest.h>

#include "oracles.hpp"
#include "thermo/models.hpp"
#include "thermo/scaling.hpp"

#include <cmath>

using namespace thermo;

namespace {

std::vector<double> fisher_on(const std::vector<double>& grid, const std::function<double(double)>& f) {
    std::vector<double> out;
    for (double t : grid) out.push_back(f(t));
    return out;
}

// ∫₀^∞ ρ(ω) g(ω) dω by graded Gauss-Legendre in long double, independent of the library quadrature
oracle::Real bath_oracle(const SpectralDensity& sd, const std::function<oracle::Real(oracle::Real)>& g,
                         oracle::Real thermal) {
    auto rho = [&](oracle::Real w) {
        return 2 * sd.alpha * std::pow(static_cast<oracle::Real>(sd.wc), 1 - sd.s) *
               std::pow(w, static_cast<oracle::Real>(sd.s)) * std::exp(-w / sd.wc);
    };
    auto f = [&](oracle::Real w) { return rho(w) * g(w); };
    const oracle::Real split = std::min<oracle::Real>(10 * thermal, sd.wc);
    return oracle::graded_gl(f, split, 120, 0.7L, 30) + oracle::composite_gl(f, split, 80 * sd.wc, 4000, 20);
}

}  // namespace

TEST_CASE("exponential POVM probabilities") {
    const Dos dos(1.0, 1.0, 0.5);
    const auto [q0, q1] = exp_povm_probability(dos, 1e-12, Thermal(2.0));
    CHECK(q0 == doctest::Approx(1.0));
    CHECK(q1 < 1e-11);
    CHECK(q1 > 0.0);

    const auto gapped = Spectrum::from_levels({{0.0, 1.0}, {0.5, 2.0}, {1.0, 4.0}});
    const auto [c0, c1] = exp_povm_probability(gapped, 1.0, Thermal(200.0));
    CHECK(c0 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c1 < 1e-40);

    const Thermal point(1.3);
    const auto p = outcome_probabilities(gapped, exp_family_povm(gapped, 0.7, exp_binary_elements()), point);
    const auto [d0, d1] = exp_povm_probability(gapped, 0.7, point);
    CHECK(std::abs(p[0] - d0) < 1e-12);
    CHECK(std::abs(p[1] - d1) < 1e-12);
}

TEST_CASE("synthetic power-law spectrum reproduces the partition function") {
    const Dos dos(1.0, 1.0, 0.5);
    const double scale = 1e9;
    const auto s = synthetic_powerlaw_spectrum(dos, 0.4, 4000, scale);
    for (double T : {1e-3, 3e-3, 1e-2}) {
        const double z = partition_function(s, Thermal::from_temperature(T)) / scale;
        CHECK(std::abs(z / powerlaw_partition(dos, Thermal::from_temperature(T)) - 1.0) < 1e-4);
    }
}

TEST_CASE("exact exponential-resolution Fisher information") {
    const Dos dos(1.0, 1.0, 0.5);
    CHECK(exp_povm_fisher_exact(dos, 1e-10, Thermal(10.0)) < 1e-8);

    // dense discrete spectrum through the generic POVM pipeline
    const double T = 1e-2;
    const auto s = synthetic_powerlaw_spectrum(dos, 40 * T, 4000);
    const Thermal point = Thermal::from_temperature(T);
    const auto en = povm_energetics(s, exp_family_povm(s, 1.0, exp_binary_elements()), point, 0);
    CHECK(std::abs(fisher_gap_form(en, point) / exp_povm_fisher_exact(dos, 1.0, point) - 1.0) < 1e-2);

    // closed form equals the exponential-family pipeline
    const auto st = exp_family_state(dos, 1.0, point);
    const auto data = exp_family_energetics(st, exp_binary_elements(), point);
    CHECK(gap_variance_fisher(data.probabilities, data.gaps, point) ==
          doctest::Approx(exp_povm_fisher_exact(dos, 1.0, point)).epsilon(1e-10));
    CHECK(fisher_direct(data.probabilities, data.dp_dT) ==
          doctest::Approx(exp_povm_fisher_exact(dos, 1.0, point)).epsilon(1e-10));
}

TEST_CASE("leading-order exponential-resolution Fisher information") {
    const Dos dos(1.0, 1.0, 0.5);
    const double kappa = 1.0;
    const auto lead = exp_povm_fisher_leading(dos, kappa, Thermal::from_temperature(1e-4));
    CHECK(lead.valid);
    CHECK(std::abs(exp_povm_fisher_exact(dos, kappa, Thermal::from_temperature(1e-4)) / lead.value - 1.0) < 0.02);

    // γ = 1: 4ακ, temperature independent
    const Dos linear(1.0, 0.3, 1.0);
    for (double T : {1e-5, 1e-3}) {
        CHECK(exp_povm_fisher_leading(linear, 2.0, Thermal::from_temperature(T)).value ==
              doctest::Approx(4 * 0.3 * 2.0).epsilon(1e-14));
    }
    // the exponent approaches −1 as γ → 0
    const Dos thin(1.0, 1.0, 1e-3);
    const double r = exp_povm_fisher_leading(thin, 1.0, Thermal::from_temperature(1e-6)).value /
                     exp_povm_fisher_leading(thin, 1.0, Thermal::from_temperature(1e-5)).value;
    CHECK(std::log10(r) == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));

    // agreement improves monotonically as T decreases
    double prev = INFINITY;
    for (double T : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const auto point = Thermal::from_temperature(T);
        const double dev = std::abs(exp_povm_fisher_exact(dos, kappa, point) / exp_povm_fisher_leading(dos, kappa, point).value - 1.0);
        CHECK(dev < prev);
        prev = dev;
    }
}

TEST_CASE("white-noise POVM") {
    const Dos dos(1.0, 1.0, 0.5);
    const double kappa = 1.0;
    const Thermal point = Thermal::from_temperature(1e-3);

    // fine-grained information does not depend on η
    const auto st = exp_family_state(dos, kappa, point);
    const double f02 = exp_family_fisher(st, white_noise_elements(0.2), point);
    for (double eta : {0.5, 0.9}) {
        CHECK(std::abs(exp_family_fisher(st, white_noise_elements(eta), point) / f02 - 1.0) < 1e-10);
    }
    CHECK(std::abs(f02 / exp_povm_fisher_exact(dos, kappa, point) - 1.0) < 1e-10);

    // completeness on a discrete spectrum, and coarse filters of the form η e^{−κε} + (1−η)/2
    const auto s = synthetic_powerlaw_spectrum(dos, 0.04, 4000);
    const auto fine = white_noise_fine_povm(s, kappa, 0.5);
    const auto coarse = coarse_grain(s, fine, noise_coarse_graining());
    for (Eigen::Index k = 0; k < s.size(); k += 97) {
        CHECK(coarse.filter(0, k) == doctest::Approx(0.5 * std::exp(-kappa * s.energy(k)) + 0.25).epsilon(1e-14));
    }

    // fine gaps: 00 and 11 degenerate with the reference, 01 and 10 split linearly by (1+γ)T
    const auto data = exp_family_energetics(st, white_noise_elements(0.5), point);
    CHECK(*data.gaps[3] == 0.0);
    CHECK(*data.gaps[1] == doctest::Approx(1.5e-3).epsilon(0.03));
    CHECK(*data.gaps[2] == doctest::Approx(1.5e-3).epsilon(0.03));

    // coarse leading order against the discrete pipeline
    const auto en = povm_energetics(s, fine, point, 0);
    const auto cg = noise_coarse_graining();
    const double pipeline = coarse_fisher(coarse_probabilities(en.probabilities, cg), coarse_gaps(en, cg), point);
    const double lead = white_noise_coarse_fisher_leading(dos, kappa, 0.5, point).value;
    CHECK(std::abs(pipeline / lead - 1.0) < 0.05);
    CHECK(white_noise_coarse_fisher_leading(dos, kappa, 1e-9, point).value < 1e-15 * lead);

    // slope 2γ
    const auto grid = log_grid(1e-4, 1e-3, 11);
    const auto coarse_el = merge_elements(white_noise_elements(0.5), cg);
    const auto fc = fisher_on(grid, [&](double T) {
        const auto p = Thermal::from_temperature(T);
        return exp_family_fisher(exp_family_state(dos, kappa, p), coarse_el, p);
    });
    CHECK(fit_power_law(grid, fc, 1e-4, 1e-3).exponent == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("alternative noise model") {
    const Dos dos(1.0, 1.0, 0.5);
    const double kappa = 1.0;
    const auto cg = noise_coarse_graining();
    // η → 1: Π₀₁ vanishes and the prefactor tends to (Aκ(1+γ))²
    const auto nearly = alt_noise_elements(1.0 - 1e-12);
    CHECK(nearly[1].u < 1e-12);
    const Thermal point = Thermal::from_temperature(1e-3);
    const double c = dos.energy_coefficient() * kappa * 1.5;
    CHECK(alt_noise_fisher_leading(dos, kappa, 1.0 - 1e-12, point).value ==
          doctest::Approx(c * c * std::pow(1e-3, 1.0)).epsilon(1e-10));

    const auto grid = log_grid(1e-4, 1e-3, 11);
    const auto fine_el = alt_noise_elements(0.5);
    const auto coarse_el = merge_elements(fine_el, cg);
    std::vector<double> ff, fc;
    for (double T : grid) {
        const auto p = Thermal::from_temperature(T);
        const auto st = exp_family_state(dos, kappa, p);
        ff.push_back(exp_family_fisher(st, fine_el, p));
        fc.push_back(exp_family_fisher(st, coarse_el, p));
        CHECK(fc.back() <= ff.back());
    }
    CHECK(fit_power_law(grid, ff, 1e-4, 1e-3).exponent == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(fit_power_law(grid, fc, 1e-4, 1e-3).exponent == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fc.front() / alt_noise_fisher_leading(dos, kappa, 0.5, Thermal::from_temperature(grid.front())).value ==
          doctest::Approx(1.0).epsilon(0.05));

    // fine gaps of the alternative model
    const auto st = exp_family_state(dos, kappa, point);
    const auto data = exp_family_energetics(st, fine_el, point);
    CHECK(*data.gaps[1] == 0.0);
    CHECK(*data.gaps[2] == doctest::Approx(1.5e-3).epsilon(0.03));
    const double expect11 = 1.5 * dos.energy_coefficient() * kappa / 0.5 * std::pow(1e-3, 2.5);
    CHECK(*data.gaps[3] == doctest::Approx(expect11).epsilon(0.1));
}

TEST_CASE("spectral density and Bose-Einstein occupation") {
    const SpectralDensity ohmic(0.1, 1.0, 10.0);
    CHECK(ohmic(0.0) == 0.0);
    CHECK(ohmic(10.0) == doctest::Approx(2 * 0.1 * 10.0 * std::exp(-1.0)).epsilon(1e-15));
    CHECK(ohmic(9.9) < ohmic(10.0));
    CHECK(ohmic(10.1) < ohmic(10.0));
    for (double s : {0.5, 1.0, 2.0}) {
        const SpectralDensity sd(0.3, s, 2.0);
        const double ref = static_cast<double>(bath_oracle(sd, [](oracle::Real) { return 1.0L; }, 2.0));
        CHECK(sd.integral() == doctest::Approx(ref).epsilon(1e-10));
    }
    CHECK_THROWS_AS(SpectralDensity(0.1, 0.0, 1.0), std::invalid_argument);

    CHECK(bose_einstein(std::log(2.0), Thermal(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bose_einstein(20.0, Thermal(1.0)) == doctest::Approx(std::exp(-20.0)).epsilon(1e-6));
    CHECK(bose_einstein(0.01, Thermal(1.0)) == doctest::Approx(100.0).epsilon(0.01));
    CHECK_THROWS_AS(bose_einstein(0.0, Thermal(1.0)), std::domain_error);
}

TEST_CASE("excitation-preserving probe") {
    for (double s : {0.5, 1.0}) {
        const SpectralDensity sd(0.1, s, 10.0);
        const double t = 0.02;
        const auto point = Thermal::from_temperature(1e-3 * sd.wc);
        const auto r = qubit_p1_preserving(sd, t, point);
        CHECK(r.exact / r.leading == doctest::Approx(1.0).epsilon(0.01));
        const double beta = point.beta();
        const double ref = static_cast<double>(
            t * t * bath_oracle(sd, [beta](oracle::Real w) { return 1 / std::expm1(beta * w); }, 1 / beta));
        CHECK(r.exact == doctest::Approx(ref).epsilon(1e-8));
    }
    const SpectralDensity sd(0.1, 1.0, 10.0);
    const auto zero = qubit_p1_preserving(sd, 0.0, Thermal(1.0));
    CHECK(zero.exact == 0.0);
    CHECK(zero.leading == 0.0);
    CHECK(qubit_p1_preserving(sd, 0.02, Thermal(1e6)).exact < 1e-12);

    double prev = 0.0;
    for (double T : {1e-3, 1e-2, 1e-1, 1.0}) {
        const double p = qubit_p1_preserving(sd, 0.02, Thermal::from_temperature(T)).exact;
        CHECK(p > prev);
        CHECK(p <= 1.0);
        prev = p;
    }
}

TEST_CASE("spin-boson probe") {
    const SpectralDensity sd(0.1, 0.5, 10.0);
    const double t = 0.2;  // ω_c t = 2
    const auto point = Thermal::from_temperature(1e-3 * sd.wc);
    const auto r = qubit_p1_spin_boson(sd, t, point);
    CHECK(r.constant_term == doctest::Approx(2 * 0.1 * std::pow(sd.wc * t, 2) * std::tgamma(1.5)).epsilon(1e-14));
    CHECK(r.leading_T_term / qubit_p1_preserving(sd, t, point).leading == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(r.exact / (r.leading_T_term + r.constant_term) == doctest::Approx(1.0).epsilon(0.01));
    const auto cold = qubit_p1_spin_boson(sd, t, Thermal(1e8));
    CHECK(cold.exact == doctest::Approx(cold.constant_term).epsilon(1e-10));

    double prev = 0.0;
    for (double T : {1e-3, 1e-2, 1e-1}) {
        const double p = qubit_p1_spin_boson(SpectralDensity(0.1, 0.5, 10.0), 0.02, Thermal::from_temperature(T)).exact;
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("short-time Fisher exponents") {
    const auto grid = log_grid(1e-4, 1e-3, 9);
    auto slope = [&](double s, CouplingMode mode) {
        const SpectralDensity sd(0.1, s, 1.0);
        const auto f = fisher_on(grid, [&](double T) { return qubit_fisher_shorttime(sd, 0.1, Thermal::from_temperature(T), mode); });
        return fit_power_law(grid, f, 1e-4, 1e-3).exponent;
    };
    CHECK(slope(0.5, CouplingMode::excitation_preserving) == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(slope(1.0, CouplingMode::excitation_preserving) == doctest::Approx(0.0).epsilon(0.05));
    CHECK(slope(1.0, CouplingMode::spin_boson) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(slope(0.5, CouplingMode::spin_boson) == doctest::Approx(1.0).epsilon(0.05));

    // analytic temperature derivative against finite differences of p₁
    const SpectralDensity sd(0.1, 0.5, 1.0);
    const double T = 3e-3;
    const double p1 = qubit_p1_spin_boson(sd, 0.1, Thermal::from_temperature(T)).exact;
    const double dp = oracle::central_difference4(
        [&](double x) { return qubit_p1_spin_boson(sd, 0.1, Thermal::from_temperature(x)).exact; }, T, 1e-2 * T);
    CHECK(qubit_fisher_shorttime(sd, 0.1, Thermal::from_temperature(T), CouplingMode::spin_boson) ==
          doctest::Approx(dp * dp / (p1 * (1 - p1))).epsilon(1e-6));
}

TEST_CASE("spin-boson fine decomposition") {
    const SpectralDensity sd(0.1, 0.5, 1.0);
    const double t = 0.1;
    const auto point = Thermal::from_temperature(1e-3);
    const auto fine = spin_boson_fine_decomposition(sd, t, point);
    CHECK(fine.eta == doctest::Approx(1 - 2 * t * t * sd.integral()).epsilon(1e-15));
    CHECK(fine.gaps[1] == doctest::Approx(1.5e-3).epsilon(0.01));
    CHECK(fine.gaps[3] == fine.gaps[1]);
    CHECK(fine.coarse_gaps[1] == doctest::Approx(fine.p[3] / (fine.p[3] + fine.p[2]) * 1.5e-3).epsilon(0.01));
    CHECK(fine.coarse_p[1] == doctest::Approx(qubit_p1_spin_boson(sd, t, point).exact).epsilon(1e-13));
    CHECK(fine.coarse_fisher ==
          doctest::Approx(qubit_fisher_shorttime(sd, t, point, CouplingMode::spin_boson)).epsilon(1e-8));
    CHECK(fine.coarse_fisher <= fine.fine_fisher);

    // no spin-boson flip term: only 00 and 11 remain
    const auto none = spin_boson_fine_decomposition(SpectralDensity(0.0, 0.5, 1.0), t, point);
    CHECK(none.eta == 1.0);
    CHECK(none.p[1] == 0.0);
    CHECK(none.p[2] == 0.0);

    CHECK_THROWS_AS(spin_boson_fine_decomposition(sd, 3.0, point), std::domain_error);

    const auto grid = log_grid(1e-4, 1e-3, 9);
    std::vector<double> ff, fc, gap;
    for (double T : grid) {
        const auto d = spin_boson_fine_decomposition(sd, t, Thermal::from_temperature(T));
        ff.push_back(d.fine_fisher);
        fc.push_back(d.coarse_fisher);
        gap.push_back(d.coarse_gaps[1]);
    }
    CHECK(fit_power_law(grid, ff, 1e-4, 1e-3).exponent == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(fit_power_law(grid, fc, 1e-4, 1e-3).exponent == doctest::Approx(1.0).epsilon(0.05));
    CHECK(fit_power_law(grid, gap, 1e-4, 1e-3).exponent == doctest::Approx(2.5).epsilon(0.05 / 2.5));
}

TEST_CASE("finite-time second-order probability reduces to the short-time form") {
    const SpectralDensity sd(0.1, 1.0, 10.0);
    const auto point = Thermal(2.0);
    const double t = 1e-3;
    CHECK(qubit_p1_second_order(sd, 1.0, t, point) ==
          doctest::Approx(qubit_p1_spin_boson(sd, t, point).exact).epsilon(1e-4));
    // at longer times the sinc window suppresses the ultraviolet part of the bath
    CHECK(qubit_p1_second_order(sd, 1.0, 0.2, point) < qubit_p1_spin_boson(sd, 0.2, point).exact);
}
