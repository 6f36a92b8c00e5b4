// core.hpp: shared types for the thermometry engine: thermal points, errors, aliases.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace thermo {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Raised when a numerical routine cannot deliver its stated accuracy
// (quadrature non-convergence, collapsed tensor networks, failed fits).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Inverse temperature with k_B = 1. Energies and temperatures share the caller's reference unit.
template <typename Scalar = double>
class ThermalPoint {
public:
    explicit ThermalPoint(Scalar beta) : beta_(beta) {
        using std::isfinite;
        if (!(beta > Scalar(0)) || !isfinite(beta)) {
            throw std::invalid_argument("ThermalPoint: beta must be positive and finite");
        }
    }

    static ThermalPoint from_temperature(Scalar temperature) {
        using std::isfinite;
        if (!(temperature > Scalar(0)) || !isfinite(temperature)) {
            throw std::invalid_argument("ThermalPoint: temperature must be positive and finite");
        }
        return ThermalPoint(Scalar(1) / temperature);
    }

    Scalar beta() const noexcept { return beta_; }
    Scalar temperature() const noexcept { return Scalar(1) / beta_; }

private:
    Scalar beta_;
};

using Thermal = ThermalPoint<double>;

// Probabilities below this floor are treated as absent outcomes.
inline constexpr double kProbabilityFloor = 1e-300;

}  // namespace thermo
