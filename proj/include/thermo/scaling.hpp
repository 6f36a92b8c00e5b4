// scaling.hpp: low-temperature asymptotics of POVM gaps and Fisher information.
//
// Gap series Δ(T) = Δ₀ + Δ₁T + Δ₂T² + ... are fitted over the low end of a temperature grid,
// outcomes are sorted into ground / sub-exponential / exponential sets, and Fisher-information
// grids are checked against the finite-resolution bounds.

#pragma once

#include "thermo/core.hpp"
#include "thermo/povm.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thermo {

struct GapCoefficients {
    // coefficients[k] multiplies T^k
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    double residual = 0.0;  // RMS of the weighted fit residual
    // p_m/p_ref ≈ g T^{Δ₁} e^{−Δ₀/T} × corrections; absent when probabilities were not supplied
    std::optional<double> prefactor;
    double prefactor_residual = 0.0;

    double coefficient(std::size_t k) const { return k < coefficients.size() ? coefficients[k] : 0.0; }
    double standard_error(std::size_t k) const { return k < standard_errors.size() ? standard_errors[k] : 0.0; }
};

struct GapExpansion {
    std::vector<GapCoefficients> outcomes;
    Eigen::Index reference = 0;
    double t_min = 0.0;
    double t_max = 0.0;
    int correction_orders = 2;
};

struct GapFitOptions {
    int degree = 2;
    // the fit uses grid points with T ≤ T_lowest · 10^{window_decades}
    double window_decades = 1.0;
    int correction_orders = 2;
};

// Gap samples are indexed [outcome][grid point]; absent gaps are not allowed inside the window.
GapCoefficients fit_gap_series(const std::vector<double>& temperatures, const std::vector<double>& gaps,
                               const GapFitOptions& opts = {});

GapExpansion extract_gap_expansion(const std::vector<double>& temperatures,
                                   const std::vector<std::vector<double>>& gaps,
                                   const std::vector<std::vector<double>>& probabilities, Eigen::Index reference,
                                   const GapFitOptions& opts = {});

// Convenience: evaluates povm_energetics over the grid and fits every outcome.
GapExpansion extract_gap_expansion(const Spectrum& spectrum, const Povm& povm, const std::vector<double>& temperatures,
                                   const GapFitOptions& opts = {});

// ln(p_m/p_ref) reconstructed from the series: ln g − Δ₀β − Δ₁ ln β + Σ_{k≥2} Δ_k β^{1−k}/(k−1),
// keeping at most `orders` correction terms.
double reconstructed_log_ratio(const GapCoefficients& c, double beta, int orders);

// Δ₀ is compared with zero_tolerance (energy units). Δ₁ is a dimensionless exponent and gets its own
// tolerance: a gap vanishing faster than T (e.g. as T^{3/2}) leaves a small spurious Δ₁ in the fit.
OutcomeClassification classify_outcomes(const GapExpansion& expansion, double zero_tolerance = 1e-6,
                                        double exponent_tolerance = 1e-3);

struct PowerLawFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    double residual = 0.0;
    double exponent_error = 0.0;
    int points = 0;
};

// Least-squares line through (ln T, ln F) over T ∈ [window_min, window_max].
PowerLawFit fit_power_law(const std::vector<double>& temperatures, const std::vector<double>& fisher, double window_min,
                          double window_max);

// Fit over the lowest `decades` of the grid.
PowerLawFit fit_power_law_lowest(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                                 double decades = 1.0);

// Σ_{m∈Ω̃} p_ref g_m Δ_{m,1}² T^{Δ_{m,1}−2}. std::nullopt when Ω̃ is empty (only exponential scaling).
std::optional<double> predicted_subexponential_fisher(const OutcomeClassification& classification,
                                                      const GapExpansion& expansion, const Thermal& point,
                                                      double reference_probability = 1.0);

// Leading ground-set term (1/2T²) Σ_{m,n∈Ω} p_m p_n (Δ_{m,j} − Δ_{n,j})² T^{2(j−1)} at the lowest order j ≥ 2
// on which the ground-set coefficients differ. `ground_probabilities` is aligned with classification.ground_set.
double ground_set_contribution(const OutcomeClassification& classification, const GapExpansion& expansion,
                               const std::vector<double>& ground_probabilities, const Thermal& point,
                               double zero_tolerance = 1e-6);

struct FrcEntry {
    Eigen::Index outcome = 0;
    double delta1 = 0.0;
    double margin = 0.0;
    bool pass = false;
};

struct FrcReport {
    std::vector<FrcEntry> entries;
    bool pass = true;
};

// Δ_{m,1} ≥ 1 + γ for every m ∈ Ω̃, with margins reported.
FrcReport verify_frc_bound(const GapExpansion& expansion, const OutcomeClassification& classification, double gamma,
                           double fit_tolerance = 0.05);

struct TFLimitReport {
    bool pass = false;
    bool decreasing_lowest_decade = false;
    double final_over_max = 0.0;
    bool final_below_tenth = false;
    double tail_slope = 0.0;  // d ln(T·F) / d ln T over the lowest decade
    std::vector<double> tf;
};

// lim T·F = 0: T·F strictly decreasing over the lowest decade and either below 10% of its
// maximum at the lowest point or vanishing as a positive power of T (slope ≥ min_slope).
TFLimitReport verify_tF_limit(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                              double min_slope = 0.05);

struct AbsoluteErrorReport {
    std::vector<double> delta_t2;
    std::vector<double> delta_t2_over_t;
    double growth_two_decades = 0.0;  // (δT²/T at T_lowest) / (δT²/T at 100·T_lowest)
    bool relative_diverges = false;   // growth ≥ 10
    double absolute_slope = 0.0;      // d ln δT² / d ln T over the lowest decade
    bool absolute_vanishes = false;   // δT² decreasing towards T → 0
    bool third_law_violation = false;
};

AbsoluteErrorReport absolute_error_scaling(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                                           long long rounds);

// Logarithmically spaced grid from t_min to t_max inclusive, ascending.
std::vector<double> log_grid(double t_min, double t_max, int points);

}  // namespace thermo
