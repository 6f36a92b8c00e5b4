// tempo.hpp: spin-boson dynamics from the discretised Feynman–Vernon influence functional.
//
// H = Ω σ_z/2 + σ_x B + H_bath with ⟨B(t)B(0)⟩ = ∫ρ(ω)[coth(βω/2) cos ωt − i sin ωt] dω, the
// normalisation under which p₁ = t²∫ρ(2n+1) at short times. The qubit starts in the ground state
// |0⟩ of Ωσ_z/2 and p₀ is read out after each Trotter step together with ∂_β p₀.

#pragma once

#include "thermo/core.hpp"
#include "thermo/models.hpp"

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace thermo {

using Complex = std::complex<double>;
using Liouville = Eigen::Matrix<Complex, 4, 4>;

struct TempoConfig {
    double omega = 1.0;  // qubit splitting Ω
    SpectralDensity sd{0.1, 1.0, 10.0};
    double beta = 10.0;
    double dt = 0.1;  // full Trotter step
    int steps = 2;
    // retained step lags: influence between steps further apart than this is dropped
    int memory_cutoff = 10;
    // 0 selects the exact dense contraction; otherwise relative singular-value cutoff of the MPS mode
    double svd_threshold = 0.0;
    int max_bond = 512;

    void validate() const;
};

// Compound index α = (s, r) of σ_x eigenvalues, α = 2·[s = −1] + [r = −1].
inline constexpr std::array<int, 4> kSpinS = {1, 1, -1, -1};
inline constexpr std::array<int, 4> kSpinR = {1, -1, 1, -1};

// C(t), adaptive quadrature to rel_tol.
Complex bath_correlation(const SpectralDensity& sd, double beta, double t, double rel_tol = 1e-8);

struct BathKernel {
    double dt_half = 0.0;
    std::vector<Complex> eta;  // η_l over half-step windows, l = 0..max_lag
    std::vector<Complex> mu;   // −∂_β η_l

    int max_lag() const { return static_cast<int>(eta.size()) - 1; }
};

// η_l for any integer lag; negative lags swap the two windows, so η_{−l} = η_l*.
Complex kernel_element(const SpectralDensity& sd, double beta, double dt_half, int lag);
Complex kernel_element_beta_derivative(const SpectralDensity& sd, double beta, double dt_half, int lag);

BathKernel memory_kernel(const SpectralDensity& sd, double beta, double dt_half, int max_lag);

// Low-temperature series for μ_l (terms = 1..3 retained).
double mu_low_temperature_series(const SpectralDensity& sd, double beta, double dt, int lag, int terms = 2);

// |η_l| non-increasing (within rel_slack) over the last quarter of the lags.
bool kernel_envelope_decaying(const BathKernel& kernel, double rel_slack = 1e-3);

// Liouville map of V = exp(−iδtΩσ_z/2) in the σ_x basis: L[(s,r),(s',r')] = V_{ss'} V*_{rr'}.
Liouville trotter_factors(double omega, double dt);

using InfluenceTensor = Liouville;

// A^{α_i α_j} = exp(−(s_i − r_i)(η s_j − η* r_j)), rows index α_i.
InfluenceTensor influence_tensor(Complex eta);
InfluenceTensor influence_tensor(const BathKernel& kernel, int lag);

// Kernel between merged step variables. Variable 0 spans the first half-step, variables 1..k−1
// span two half-steps each, and the readout variable k spans the final half-step.
enum class VariableKind { initial, middle, terminal };

Complex merged_kernel(const std::vector<Complex>& eta, VariableKind later, VariableKind earlier, int step_lag);

struct TempoRun {
    std::vector<double> p0;         // after steps 1..k
    std::vector<double> dp0_dbeta;  // same steps
    std::vector<double> imaginary_residue;
    int bond_dim_max = 0;
    double discarded_weight = 0.0;  // MPS mode: summed squared discarded singular values (relative)
};

// Uses a precomputed kernel with at least 2·min(k, K) + 1 lags.
TempoRun tempo_run(const TempoConfig& config, const BathKernel& kernel);
TempoRun tempo_run(const TempoConfig& config);

std::vector<double> propagate(const TempoConfig& config);
std::vector<double> propagate_beta_derivative(const TempoConfig& config);

struct TempoFisherPoint {
    double temperature = 0.0;
    double p0 = 0.0;
    double dp0_dbeta = 0.0;
    double fisher = 0.0;
    bool dropped = false;       // p₀(1 − p₀) below the probability floor
    double delta_k = 0.0;       // |p₀(K) − p₀(K − 2)|, zero when K ≥ steps (no truncation)
    bool converged = false;     // delta_k < convergence_tolerance
    TempoRun run;                     // every step at memory_cutoff K
    std::vector<double> step_delta_k;  // per step, zero for steps ≤ K; empty without the memory check
};

struct TempoFisherOptions {
    double convergence_tolerance = 1e-5;
    bool check_memory = true;
    int jobs = 1;
};

// F_T = (β² ∂_β p₀)² / (p₀(1 − p₀)) at the final step, one point per temperature (config.beta ignored).
std::vector<TempoFisherPoint> tempo_fisher(const TempoConfig& config, const std::vector<double>& temperatures,
                                           const TempoFisherOptions& opts = {});

// Binary kernel cache: "TEMPOK01", uint64 lag count, then (Re, Im) float64 pairs for η followed by μ,
// all little-endian.
std::string kernel_cache_key(const SpectralDensity& sd, double beta, double dt, int max_lag);
void save_kernel(const std::string& path, const BathKernel& kernel);
BathKernel load_kernel(const std::string& path, double dt_half);

}  // namespace thermo
