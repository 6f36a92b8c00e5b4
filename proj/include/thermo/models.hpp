// models.hpp: closed-form reference models.
//
// Exponential-resolution measurements and their noisy variants on a power-law density of states,
// the bath spectral density, and short-time excitation probabilities of a single-qubit probe.

#pragma once

#include "thermo/core.hpp"
#include "thermo/povm.hpp"
#include "thermo/spectra.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace thermo {

using Dos = PowerLawDOS<double>;

struct ExpResolutionParams {
    double kappa = 1.0;
    explicit ExpResolutionParams(double kappa_) : kappa(kappa_) {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("kappa must be positive");
    }
};

struct NoiseParams {
    double eta = 1.0;
    explicit NoiseParams(double eta_) : eta(eta_) {
        if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
    }
};

// A leading-order value together with the small parameter controlling its validity.
struct LeadingOrder {
    double value = 0.0;
    double small_parameter = 0.0;
    bool valid = false;
};

// Exponential-resolution family ----------------------------------------------
//
// Every element is f(ε) = u·e^{−κε} + v·(1 − e^{−κε}), so probabilities are u p₀ + v p₁ with
// p₀ = Z_{β+κ}/Z_β, and POVM energies follow from ⟨H⟩_β and ⟨H⟩_{β+κ}.

struct ExpFamilyElement {
    double u = 0.0;
    double v = 0.0;
    std::string label;
};

struct ExpFamilyState {
    double p0 = 1.0;          // Z_{β+κ}/Z_β
    double p1 = 0.0;          // 1 − p₀, without cancellation
    double mean_shifted = 0;  // ⟨H⟩_{β+κ}
    double energy_drop = 0;   // D = ⟨H⟩_β − ⟨H⟩_{β+κ}
};

ExpFamilyState exp_family_state(const Dos& dos, double kappa, const Thermal& point);
ExpFamilyState exp_family_state(const Spectrum& spectrum, double kappa, const Thermal& point);

struct ExpFamilyData {
    Vector<double> probabilities;
    std::vector<std::optional<double>> gaps;
    Vector<double> dp_dT;
    Eigen::Index reference = 0;
};

ExpFamilyData exp_family_energetics(const ExpFamilyState& state, const std::vector<ExpFamilyElement>& elements,
                                    const Thermal& point, Eigen::Index reference = 0);

// Σ (∂_T p_m)²/p_m; free of the cancellation that the variance form suffers under coarse graining.
double exp_family_fisher(const ExpFamilyState& state, const std::vector<ExpFamilyElement>& elements,
                         const Thermal& point);

std::vector<ExpFamilyElement> merge_elements(const std::vector<ExpFamilyElement>& fine, const CoarseGraining& grouping);

// Filter matrix of the family on a discrete spectrum.
Povm exp_family_povm(const Spectrum& spectrum, double kappa, const std::vector<ExpFamilyElement>& elements);

std::vector<ExpFamilyElement> exp_binary_elements();
std::vector<ExpFamilyElement> white_noise_elements(double eta);
std::vector<ExpFamilyElement> alt_noise_elements(double eta);

// Fine outcomes are ordered 00, 01, 10, 11; the observed outcome is the first digit.
CoarseGraining noise_coarse_graining();

std::pair<double, double> exp_povm_probability(const Dos& dos, double kappa, const Thermal& point);
std::pair<double, double> exp_povm_probability(const Spectrum& spectrum, double kappa, const Thermal& point);

// T⁴F = [Z_{β+κ}/(Z_β − Z_{β+κ})] (⟨H⟩_β − ⟨H⟩_{β+κ})²
double exp_povm_fisher_exact(const Dos& dos, double kappa, const Thermal& point);

// α_dos κ γ² Γ(γ) (1+γ)² T^{γ−1} / d₀, valid for κT ≪ 1
LeadingOrder exp_povm_fisher_leading(const Dos& dos, double kappa, const Thermal& point);

Povm white_noise_fine_povm(const Spectrum& spectrum, double kappa, double eta);
Povm alt_noise_povm(const Spectrum& spectrum, double kappa, double eta);

// [4η²/(1−η²)] (Aκ(1+γ))² T^{2γ} with ⟨H⟩ = A β^{−(1+γ)}
LeadingOrder white_noise_coarse_fisher_leading(const Dos& dos, double kappa, double eta, const Thermal& point);

// [(2−η)/η] (Aκ)² (1+γ)² T^{2γ}
LeadingOrder alt_noise_fisher_leading(const Dos& dos, double kappa, double eta, const Thermal& point);

// Discrete spectrum reproducing the power-law counting function: levels ε_j = (j/J)^{1/γ} E_max
// carrying the measure of their bin, all degeneracies scaled by `scale` and rounded to integers.
Spectrum synthetic_powerlaw_spectrum(const Dos& dos, double e_max, int levels = 4000, double scale = 1e9);

// Bath and probe ---------------------------------------------------------------

struct SpectralDensity {
    double alpha = 0.1;
    double s = 1.0;
    double wc = 10.0;

    SpectralDensity() = default;
    SpectralDensity(double alpha_, double s_, double wc_) : alpha(alpha_), s(s_), wc(wc_) {
        if (!(alpha >= 0.0)) throw std::invalid_argument("SpectralDensity: coupling must be non-negative");
        if (!(s > 0.0)) throw std::invalid_argument("SpectralDensity: ohmicity must be positive");
        if (!(wc > 0.0)) throw std::invalid_argument("SpectralDensity: cutoff must be positive");
    }

    // ρ(ω) = 2α ω_c^{1−s} ω^s e^{−ω/ω_c}
    double operator()(double w) const;
    // ∫₀^∞ ρ = 2α ω_c² Γ(1+s)
    double integral() const;
};

double spectral_density_eval(const SpectralDensity& sd, double w);

// 1/(e^{βω} − 1); throws std::domain_error at ω = 0
double bose_einstein(double w, const Thermal& point);

enum class CouplingMode { excitation_preserving, spin_boson };

std::string to_string(CouplingMode mode);
CouplingMode coupling_mode_from_string(const std::string& name);

struct ProbeParams {
    double omega = 1.0;
    double t = 0.2;
    CouplingMode mode = CouplingMode::spin_boson;
};

// α t² Γ(1+s) ω_c² < 0.1
bool short_time_valid(const SpectralDensity& sd, double t);

struct PreservingP1 {
    double exact = 0.0;
    double leading = 0.0;
};

// exact = t² ∫ρ n_β; leading = 2α(ω_c t)² Γ(1+s) ζ(1+s) (T/ω_c)^{1+s}
PreservingP1 qubit_p1_preserving(const SpectralDensity& sd, double t, const Thermal& point);

struct SpinBosonP1 {
    double exact = 0.0;
    double leading_T_term = 0.0;
    double constant_term = 0.0;
};

// exact = t² ∫ρ (2n_β + 1); thermal term twice the preserving one, constant 2α(ω_c t)²Γ(1+s)
SpinBosonP1 qubit_p1_spin_boson(const SpectralDensity& sd, double t, const Thermal& point);

// (∂_T p₁)² / (p₁(1 − p₁)) for the binary qubit readout
double qubit_fisher_shorttime(const SpectralDensity& sd, double t, const Thermal& point, CouplingMode mode);

struct SpinBosonFine {
    double eta = 1.0;
    double x = 0.0;                   // thermal flip weight, (2t²/η)∫ρ n
    std::array<double, 4> p{};        // 00, 01, 10, 11
    std::array<double, 4> gaps{};     // relative to 00
    std::array<double, 2> coarse_p{};  // qubit outcome 0 = {00, 01}, outcome 1 = {10, 11}
    std::array<double, 2> coarse_gaps{};  // probability-weighted fine gaps, relative to 00
    double fine_fisher = 0.0;
    double coarse_fisher = 0.0;
};

// Splits the spin-boson readout into a thermal (sample-resolving) part and a temperature-independent
// flip with weight (1−η)/2. Throws std::domain_error if η ≤ 0.
SpinBosonFine spin_boson_fine_decomposition(const SpectralDensity& sd, double t, const Thermal& point);

// Second-order (finite-time) excitation probability of a qubit with splitting Ω coupled through σ_x:
// ∫ρ [n F(ω−Ω) + (n+1) F(ω+Ω)] dω with F(x) = (2 sin(xt/2)/x)². Reduces to the spin-boson
// short-time expression as t → 0.
double qubit_p1_second_order(const SpectralDensity& sd, double omega, double t, const Thermal& point);

}  // namespace thermo
