// spectra.hpp: canonical ensembles over discrete spectra and power-law densities of states.
//
// Every weight is accumulated in the log domain with the largest exponent subtracted, so
// sweeps down to beta ~ 1e6 in reference units neither overflow nor underflow.

#pragma once

#include "thermo/core.hpp"
#include "thermo/special_functions.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermo {

// Sorted energy levels with integer degeneracies; the lowest energy is pinned to zero.
template <typename Scalar = double>
class DiscreteSpectrum {
public:
    DiscreteSpectrum(Vector<Scalar> energies, Vector<Scalar> degeneracies)
        : energies_(std::move(energies)), degeneracies_(std::move(degeneracies)) {
        validate();
    }

    static DiscreteSpectrum from_levels(const std::vector<std::pair<Scalar, Scalar>>& levels) {
        Vector<Scalar> e(static_cast<Eigen::Index>(levels.size()));
        Vector<Scalar> d(static_cast<Eigen::Index>(levels.size()));
        for (std::size_t k = 0; k < levels.size(); ++k) {
            e[static_cast<Eigen::Index>(k)] = levels[k].first;
            d[static_cast<Eigen::Index>(k)] = levels[k].second;
        }
        return DiscreteSpectrum(std::move(e), std::move(d));
    }

    Eigen::Index size() const noexcept { return energies_.size(); }
    const Vector<Scalar>& energies() const noexcept { return energies_; }
    const Vector<Scalar>& degeneracies() const noexcept { return degeneracies_; }
    Scalar energy(Eigen::Index k) const { return energies_[k]; }
    Scalar degeneracy(Eigen::Index k) const { return degeneracies_[k]; }

private:
    void validate() const {
        using std::floor;
        using std::isfinite;
        if (energies_.size() == 0) {
            throw std::invalid_argument("DiscreteSpectrum: at least one level required");
        }
        if (energies_.size() != degeneracies_.size()) {
            throw std::invalid_argument("DiscreteSpectrum: energies and degeneracies differ in length");
        }
        if (energies_[0] != Scalar(0)) {
            throw std::invalid_argument("DiscreteSpectrum: lowest energy must be exactly 0");
        }
        for (Eigen::Index k = 0; k < energies_.size(); ++k) {
            if (!isfinite(energies_[k])) {
                throw std::invalid_argument("DiscreteSpectrum: non-finite energy at level " + std::to_string(k));
            }
            if (k > 0 && !(energies_[k] > energies_[k - 1])) {
                throw std::invalid_argument(
                    "DiscreteSpectrum: energies must be strictly increasing (merge repeated energies into "
                    "degeneracies), violated at level " +
                    std::to_string(k));
            }
            const Scalar d = degeneracies_[k];
            if (!(d >= Scalar(1)) || !isfinite(d) || floor(d) != d) {
                throw std::invalid_argument("DiscreteSpectrum: degeneracy at level " + std::to_string(k) +
                                            " must be a positive integer");
            }
        }
    }

    Vector<Scalar> energies_;
    Vector<Scalar> degeneracies_;
};

using Spectrum = DiscreteSpectrum<double>;

// Effective low-energy measure dσ = [d0 δ(ε) + α γ ε^{γ−1}] dε, closed under the
// stretched-exponential partition function Z = d0 exp(αγΓ(γ) β^{−γ} / d0).
template <typename Scalar = double>
struct PowerLawDOS {
    Scalar d0{1};
    Scalar alpha{1};
    Scalar gamma{1};

    PowerLawDOS() = default;
    PowerLawDOS(Scalar d0_, Scalar alpha_, Scalar gamma_) : d0(d0_), alpha(alpha_), gamma(gamma_) {
        if (!(d0 >= Scalar(1))) throw std::invalid_argument("PowerLawDOS: d0 must be >= 1");
        if (!(alpha > Scalar(0))) throw std::invalid_argument("PowerLawDOS: alpha must be positive");
        if (!(gamma > Scalar(0))) throw std::invalid_argument("PowerLawDOS: gamma must be positive");
    }

    // a in ln Z = ln d0 + a β^{−γ}
    Scalar log_partition_coefficient() const { return alpha * gamma * special::gamma(gamma) / d0; }

    // A in ⟨H⟩ = A β^{−(1+γ)}
    Scalar energy_coefficient() const { return gamma * log_partition_coefficient(); }
};

// Log-domain helpers ----------------------------------------------------------

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    using std::exp;
    using std::log;
    const Scalar m = x.maxCoeff();
    if (!std::isfinite(static_cast<double>(m))) {
        return m;
    }
    return m + log((x.array() - m).exp().sum());
}

template <typename Scalar>
Vector<Scalar> log_boltzmann_weights(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    return (spectrum.degeneracies().array().log() - point.beta() * spectrum.energies().array()).matrix();
}

// Operations ------------------------------------------------------------------

template <typename Scalar>
Scalar log_partition_function(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    return log_sum_exp(log_boltzmann_weights(spectrum, point));
}

template <typename Scalar>
Scalar partition_function(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    using std::exp;
    const Scalar log_z = log_partition_function(spectrum, point);
    if (log_z < Scalar(600)) {
        // direct sum keeps the ground term d_0 exact; underflowing terms are negligible
        return (spectrum.degeneracies().array() * (-point.beta() * spectrum.energies().array()).exp()).sum();
    }
    return exp(log_z);
}

template <typename Scalar>
Vector<Scalar> boltzmann_distribution(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    const Vector<Scalar> logw = log_boltzmann_weights(spectrum, point);
    const Scalar log_z = log_sum_exp(logw);
    return (logw.array() - log_z).exp().matrix();
}

template <typename Scalar>
struct EnergyMoments {
    Scalar mean;
    Scalar variance;
};

template <typename Scalar>
EnergyMoments<Scalar> energy_moments(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    const Vector<Scalar> p = boltzmann_distribution(spectrum, point);
    const Scalar mean = p.dot(spectrum.energies());
    const Scalar variance = (p.array() * (spectrum.energies().array() - mean).square()).sum();
    return {mean, variance};
}

// F_Q = Var(H) / T⁴, attained by the projective energy measurement.
template <typename Scalar>
Scalar quantum_fisher_information(const DiscreteSpectrum<Scalar>& spectrum, const ThermalPoint<Scalar>& point) {
    const Scalar b2 = point.beta() * point.beta();
    return energy_moments(spectrum, point).variance * b2 * b2;
}

template <typename Scalar>
Scalar powerlaw_log_partition(const PowerLawDOS<Scalar>& dos, const ThermalPoint<Scalar>& point) {
    using std::log;
    using std::pow;
    return log(dos.d0) + dos.log_partition_coefficient() * pow(point.beta(), -dos.gamma);
}

template <typename Scalar>
Scalar powerlaw_partition(const PowerLawDOS<Scalar>& dos, const ThermalPoint<Scalar>& point) {
    using std::exp;
    return exp(powerlaw_log_partition(dos, point));
}

// ⟨H⟩ = −∂_β ln Z = α γ² Γ(γ) β^{−(1+γ)} / d0
template <typename Scalar>
Scalar powerlaw_mean_energy(const PowerLawDOS<Scalar>& dos, const ThermalPoint<Scalar>& point) {
    using std::pow;
    return dos.energy_coefficient() * pow(point.beta(), -(Scalar(1) + dos.gamma));
}

// Non-interacting bosonic modes with mode density g(ω) = α ω^γ:
// ln Z = −∫ g(ω) ln(1 − e^{−βω}) dω = α ζ(γ+2) Γ(γ+1) β^{−(1+γ)}.
template <typename Scalar>
Scalar bosonic_log_partition(Scalar mode_density_alpha, Scalar mode_density_gamma, const ThermalPoint<Scalar>& point) {
    using std::pow;
    if (!(mode_density_alpha > Scalar(0)) || !(mode_density_gamma > Scalar(0))) {
        throw std::invalid_argument("bosonic_log_partition: parameters must be positive");
    }
    const Scalar g = mode_density_gamma;
    return mode_density_alpha * special::zeta(g + Scalar(2)) * special::gamma(g + Scalar(1)) *
           pow(point.beta(), -(Scalar(1) + g));
}

// Power-law DOS (d0 = 1) whose log partition function coincides with the bosonic one,
// i.e. the density-of-states exponent is the mode exponent plus one.
template <typename Scalar>
PowerLawDOS<Scalar> bosonic_equivalent_dos(Scalar mode_density_alpha, Scalar mode_density_gamma) {
    const Scalar g = mode_density_gamma;
    const Scalar dos_gamma = g + Scalar(1);
    // α_dos γ Γ(γ) = α_dos Γ(γ+1) must equal α ζ(g+2) Γ(g+1)
    const Scalar alpha_dos =
        mode_density_alpha * special::zeta(g + Scalar(2)) * special::gamma(g + Scalar(1)) / special::gamma(dos_gamma + Scalar(1));
    return PowerLawDOS<Scalar>(Scalar(1), alpha_dos, dos_gamma);
}

}  // namespace thermo
