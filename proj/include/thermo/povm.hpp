// povm.hpp: energy-diagonal POVMs on canonical thermal states.
//
// A POVM is carried by its filter values f_m(ε_k) = tr[Π_m 1_{ε_k}]/d_k, one row per outcome and
// one column per spectrum level. For thermal states nothing else about Π_m is observable.

#pragma once

#include "thermo/core.hpp"
#include "thermo/spectra.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermo {

template <typename Scalar = double>
class FilterPovm {
public:
    // rows: outcomes, columns: spectrum levels
    explicit FilterPovm(Matrix<Scalar> filters, std::vector<std::string> labels = {})
        : filters_(std::move(filters)), labels_(std::move(labels)) {
        if (labels_.empty()) {
            for (Eigen::Index m = 0; m < filters_.rows(); ++m) labels_.push_back(std::to_string(m));
        }
        validate();
    }

    static FilterPovm identity(Eigen::Index levels) {
        return FilterPovm(Matrix<Scalar>::Ones(1, levels), {"1"});
    }

    static FilterPovm projective(Eigen::Index levels) {
        return FilterPovm(Matrix<Scalar>::Identity(levels, levels));
    }

    Eigen::Index outcome_count() const noexcept { return filters_.rows(); }
    Eigen::Index level_count() const noexcept { return filters_.cols(); }
    const Matrix<Scalar>& filters() const noexcept { return filters_; }
    Scalar filter(Eigen::Index m, Eigen::Index k) const { return filters_(m, k); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(Eigen::Index m) const { return labels_.at(static_cast<std::size_t>(m)); }

    Eigen::Index index_of(const std::string& label) const {
        for (std::size_t m = 0; m < labels_.size(); ++m) {
            if (labels_[m] == label) return static_cast<Eigen::Index>(m);
        }
        throw std::out_of_range("FilterPovm: no outcome labelled '" + label + "'");
    }

private:
    void validate() const {
        using std::abs;
        if (filters_.rows() == 0 || filters_.cols() == 0) {
            throw std::invalid_argument("FilterPovm: need at least one outcome and one level");
        }
        if (static_cast<Eigen::Index>(labels_.size()) != filters_.rows()) {
            throw std::invalid_argument("FilterPovm: label count differs from outcome count");
        }
        for (Eigen::Index k = 0; k < filters_.cols(); ++k) {
            for (Eigen::Index m = 0; m < filters_.rows(); ++m) {
                const Scalar f = filters_(m, k);
                if (!(f >= Scalar(0) && f <= Scalar(1))) {
                    throw std::invalid_argument("FilterPovm: filter value outside [0,1] at outcome " +
                                                std::to_string(m) + ", level " + std::to_string(k));
                }
            }
            const Scalar total = filters_.col(k).sum();
            if (abs(total - Scalar(1)) > Scalar(1e-12)) {
                throw std::invalid_argument("FilterPovm: completeness violated at level " + std::to_string(k));
            }
        }
    }

    Matrix<Scalar> filters_;
    std::vector<std::string> labels_;
};

using Povm = FilterPovm<double>;

// Per-outcome data at one temperature. Outcomes whose probability is below kProbabilityFloor
// have no POVM energy or gap (std::nullopt).
template <typename Scalar = double>
struct PovmEnergetics {
    Vector<Scalar> probabilities;
    std::vector<std::optional<Scalar>> energies;
    std::vector<std::optional<Scalar>> gaps;
    Eigen::Index reference = 0;
    Scalar mean_energy = Scalar(0);

    Eigen::Index size() const noexcept { return probabilities.size(); }
    bool defined(Eigen::Index m) const { return energies[static_cast<std::size_t>(m)].has_value(); }
    Scalar gap(Eigen::Index m) const { return gaps[static_cast<std::size_t>(m)].value(); }
    Scalar energy(Eigen::Index m) const { return energies[static_cast<std::size_t>(m)].value(); }
};

struct OutcomeClassification {
    std::vector<Eigen::Index> ground_set;
    std::vector<Eigen::Index> sub_exponential_set;
    std::vector<Eigen::Index> exponential_set;
};

// Coarse outcome c collects fine outcomes groups[c].
struct CoarseGraining {
    std::vector<std::vector<Eigen::Index>> groups;
    std::vector<std::string> labels;

    void validate(Eigen::Index fine_outcomes) const {
        std::vector<int> seen(static_cast<std::size_t>(fine_outcomes), 0);
        for (const auto& g : groups) {
            if (g.empty()) throw std::invalid_argument("CoarseGraining: empty group");
            for (Eigen::Index m : g) {
                if (m < 0 || m >= fine_outcomes) {
                    throw std::invalid_argument("CoarseGraining: fine outcome " + std::to_string(m) + " out of range");
                }
                ++seen[static_cast<std::size_t>(m)];
            }
        }
        for (std::size_t m = 0; m < seen.size(); ++m) {
            if (seen[m] != 1) {
                throw std::invalid_argument("CoarseGraining: fine outcome " + std::to_string(m) +
                                            " must appear in exactly one group");
            }
        }
        if (!labels.empty() && labels.size() != groups.size()) {
            throw std::invalid_argument("CoarseGraining: label count differs from group count");
        }
    }
};

namespace detail {

template <typename Scalar>
void check_alignment(const DiscreteSpectrum<Scalar>& spectrum, const FilterPovm<Scalar>& povm) {
    if (spectrum.size() != povm.level_count()) {
        throw std::invalid_argument("POVM has " + std::to_string(povm.level_count()) + " levels but spectrum has " +
                                    std::to_string(spectrum.size()));
    }
}

// ln of the joint weights d_k f_m(ε_k) e^{−βε_k}/Z_β, outcome-major.
template <typename Scalar>
Matrix<Scalar> log_joint_weights(const DiscreteSpectrum<Scalar>& spectrum, const FilterPovm<Scalar>& povm,
                                 const ThermalPoint<Scalar>& point) {
    Vector<Scalar> logw = log_boltzmann_weights(spectrum, point);
    logw.array() -= log_sum_exp(logw);
    Matrix<Scalar> out(povm.outcome_count(), povm.level_count());
    for (Eigen::Index m = 0; m < povm.outcome_count(); ++m) {
        for (Eigen::Index k = 0; k < povm.level_count(); ++k) {
            const Scalar f = povm.filter(m, k);
            out(m, k) = f > Scalar(0) ? std::log(f) + logw[k] : -std::numeric_limits<Scalar>::infinity();
        }
    }
    return out;
}

}  // namespace detail

// Operations ------------------------------------------------------------------

template <typename Scalar>
Vector<Scalar> outcome_probabilities(const DiscreteSpectrum<Scalar>& spectrum, const FilterPovm<Scalar>& povm,
                                     const ThermalPoint<Scalar>& point) {
    detail::check_alignment(spectrum, povm);
    const Matrix<Scalar> logj = detail::log_joint_weights(spectrum, povm, point);
    Vector<Scalar> p(povm.outcome_count());
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        p[m] = std::exp(log_sum_exp(logj.row(m).transpose()));
    }
    return p;
}

template <typename Scalar>
PovmEnergetics<Scalar> povm_energetics(const DiscreteSpectrum<Scalar>& spectrum, const FilterPovm<Scalar>& povm,
                                       const ThermalPoint<Scalar>& point, Eigen::Index reference) {
    detail::check_alignment(spectrum, povm);
    if (reference < 0 || reference >= povm.outcome_count()) {
        throw std::out_of_range("povm_energetics: reference outcome out of range");
    }
    const Matrix<Scalar> logj = detail::log_joint_weights(spectrum, povm, point);
    const auto M = static_cast<std::size_t>(povm.outcome_count());

    PovmEnergetics<Scalar> out;
    out.probabilities.resize(povm.outcome_count());
    out.energies.assign(M, std::nullopt);
    out.gaps.assign(M, std::nullopt);
    out.reference = reference;

    for (Eigen::Index m = 0; m < povm.outcome_count(); ++m) {
        const Scalar log_p = log_sum_exp(logj.row(m).transpose());
        const Scalar p = std::exp(log_p);
        out.probabilities[m] = p;
        if (p < Scalar(kProbabilityFloor)) continue;
        // conditional weights within the outcome are normalized in the log domain
        const Scalar e = ((logj.row(m).array() - log_p).exp() * spectrum.energies().transpose().array()).sum();
        out.energies[static_cast<std::size_t>(m)] = e;
    }
    const auto& ref_energy = out.energies[static_cast<std::size_t>(reference)];
    if (!ref_energy) {
        throw NumericalError("povm_energetics: reference outcome has vanishing probability");
    }
    Scalar mean = Scalar(0);
    for (std::size_t m = 0; m < M; ++m) {
        if (!out.energies[m]) continue;
        out.gaps[m] = m == static_cast<std::size_t>(reference) ? Scalar(0) : *out.energies[m] - *ref_energy;
        mean += out.probabilities[static_cast<Eigen::Index>(m)] * *out.energies[m];
    }
    out.mean_energy = mean;
    return out;
}

// Largest probability at the supplied (lowest-temperature) energetics; ties go to the lowest index.
template <typename Scalar>
Eigen::Index select_reference_outcome(const Vector<Scalar>& probabilities_at_lowest_T) {
    Eigen::Index best = 0;
    for (Eigen::Index m = 1; m < probabilities_at_lowest_T.size(); ++m) {
        if (probabilities_at_lowest_T[m] > probabilities_at_lowest_T[best]) best = m;
    }
    return best;
}

template <typename Scalar>
Eigen::Index select_reference_outcome(const PovmEnergetics<Scalar>& energetics_at_lowest_T) {
    return select_reference_outcome(energetics_at_lowest_T.probabilities);
}

// ∂_T p_m = (E_m − ⟨H⟩) p_m β², exact for canonical states.
template <typename Scalar>
Vector<Scalar> probability_temperature_derivatives(const PovmEnergetics<Scalar>& energetics,
                                                   const ThermalPoint<Scalar>& point) {
    const Scalar b2 = point.beta() * point.beta();
    Vector<Scalar> d = Vector<Scalar>::Zero(energetics.size());
    for (Eigen::Index m = 0; m < energetics.size(); ++m) {
        if (!energetics.defined(m)) continue;
        d[m] = (energetics.energy(m) - energetics.mean_energy) * energetics.probabilities[m] * b2;
    }
    return d;
}

// Σ_m (∂_T p_m)² / p_m over outcomes above the probability floor.
template <typename Scalar>
Scalar fisher_direct(const Vector<Scalar>& p, const Vector<Scalar>& dp_dT) {
    using std::abs;
    if (p.size() != dp_dT.size()) {
        throw std::invalid_argument("fisher_direct: probability and derivative vectors differ in length");
    }
    if ((p.array() < Scalar(0)).any()) {
        throw std::invalid_argument("fisher_direct: negative probability");
    }
    const Scalar scale = std::max(Scalar(1), dp_dT.cwiseAbs().sum());
    if (abs(dp_dT.sum()) > Scalar(1e-8) * scale) {
        throw std::invalid_argument("fisher_direct: derivatives do not sum to zero");
    }
    Scalar f = Scalar(0);
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        if (p[m] < Scalar(kProbabilityFloor)) continue;
        f += dp_dT[m] * dp_dT[m] / p[m];
    }
    return f;
}

// Probability-weighted variance of the gaps, divided by T⁴.
template <typename Scalar>
Scalar gap_variance_fisher(const Vector<Scalar>& p, const std::vector<std::optional<Scalar>>& gaps,
                           const ThermalPoint<Scalar>& point) {
    Scalar mean = Scalar(0);
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        if (gaps[static_cast<std::size_t>(m)]) mean += p[m] * *gaps[static_cast<std::size_t>(m)];
    }
    // centred second pass avoids the cancellation in ⟨Δ²⟩ − ⟨Δ⟩²
    Scalar var = Scalar(0);
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        if (!gaps[static_cast<std::size_t>(m)]) continue;
        const Scalar d = *gaps[static_cast<std::size_t>(m)] - mean;
        var += p[m] * d * d;
    }
    const Scalar b2 = point.beta() * point.beta();
    return var * b2 * b2;
}

// F_T = [Σ p_m Δ_m² − (Σ p_m Δ_m)²] / T⁴
template <typename Scalar>
Scalar fisher_gap_form(const PovmEnergetics<Scalar>& energetics, const ThermalPoint<Scalar>& point) {
    return gap_variance_fisher(energetics.probabilities, energetics.gaps, point);
}

// Pairwise form (1/2T²) Σ_{m,n} p_m p_n (βΔ_m − βΔ_n)² on arbitrary probability/gap data.
template <typename Scalar>
Scalar pairwise_fisher(const Vector<Scalar>& p, const std::vector<std::optional<Scalar>>& gaps,
                       const ThermalPoint<Scalar>& point) {
    Scalar sum = Scalar(0);
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        if (!gaps[static_cast<std::size_t>(m)]) continue;
        for (Eigen::Index n = m + 1; n < p.size(); ++n) {
            if (!gaps[static_cast<std::size_t>(n)]) continue;
            const Scalar d = *gaps[static_cast<std::size_t>(m)] - *gaps[static_cast<std::size_t>(n)];
            sum += p[m] * p[n] * d * d;
        }
    }
    // the unordered sum counts each pair once, cancelling the 1/2
    const Scalar b2 = point.beta() * point.beta();
    return sum * b2 * b2;
}

template <typename Scalar>
Scalar fisher_pairwise(const PovmEnergetics<Scalar>& energetics, const ThermalPoint<Scalar>& point) {
    return pairwise_fisher(energetics.probabilities, energetics.gaps, point);
}

// δT² ≥ 1/(νF). Zero information gives an unbounded (infinite) variance bound.
template <typename Scalar>
Scalar cramer_rao_variance_bound(Scalar fisher, long long rounds) {
    if (!(fisher >= Scalar(0))) throw std::invalid_argument("cramer_rao_variance_bound: fisher must be non-negative");
    if (rounds < 1) throw std::invalid_argument("cramer_rao_variance_bound: rounds must be positive");
    if (fisher == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
    return Scalar(1) / (static_cast<Scalar>(rounds) * fisher);
}

template <typename Scalar>
FilterPovm<Scalar> coarse_grain(const DiscreteSpectrum<Scalar>& spectrum, const FilterPovm<Scalar>& povm,
                                const CoarseGraining& grouping) {
    detail::check_alignment(spectrum, povm);
    grouping.validate(povm.outcome_count());
    Matrix<Scalar> coarse = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(grouping.groups.size()), povm.level_count());
    std::vector<std::string> labels;
    for (std::size_t c = 0; c < grouping.groups.size(); ++c) {
        std::string joined;
        for (Eigen::Index m : grouping.groups[c]) {
            coarse.row(static_cast<Eigen::Index>(c)) += povm.filters().row(m);
            joined += (joined.empty() ? "" : "+") + povm.label(m);
        }
        labels.push_back(grouping.labels.empty() ? joined : grouping.labels[c]);
    }
    // summed filters may exceed 1 by an ulp
    coarse = coarse.cwiseMin(Scalar(1));
    return FilterPovm<Scalar>(std::move(coarse), std::move(labels));
}

template <typename Scalar>
Vector<Scalar> coarse_probabilities(const Vector<Scalar>& fine_probabilities, const CoarseGraining& grouping) {
    grouping.validate(fine_probabilities.size());
    Vector<Scalar> p = Vector<Scalar>::Zero(static_cast<Eigen::Index>(grouping.groups.size()));
    for (std::size_t c = 0; c < grouping.groups.size(); ++c) {
        for (Eigen::Index m : grouping.groups[c]) p[static_cast<Eigen::Index>(c)] += fine_probabilities[m];
    }
    return p;
}

// Δ^{(c)}_c = Σ_{μ∈c} (p_μ / p_c) Δ_μ
template <typename Scalar>
std::vector<std::optional<Scalar>> coarse_gaps(const PovmEnergetics<Scalar>& fine, const CoarseGraining& grouping) {
    grouping.validate(fine.size());
    std::vector<std::optional<Scalar>> out;
    for (const auto& group : grouping.groups) {
        Scalar p = Scalar(0);
        Scalar weighted = Scalar(0);
        for (Eigen::Index m : group) {
            if (!fine.defined(m)) continue;
            p += fine.probabilities[m];
            weighted += fine.probabilities[m] * fine.gap(m);
        }
        if (p < Scalar(kProbabilityFloor)) {
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(weighted / p);
        }
    }
    return out;
}

template <typename Scalar>
Scalar coarse_fisher(const Vector<Scalar>& coarse_p, const std::vector<std::optional<Scalar>>& coarse_gap,
                     const ThermalPoint<Scalar>& point) {
    if (static_cast<std::size_t>(coarse_p.size()) != coarse_gap.size()) {
        throw std::invalid_argument("coarse_fisher: probability and gap vectors differ in length");
    }
    return pairwise_fisher(coarse_p, coarse_gap, point);
}

// D(p‖q) = Σ p ln(p/q), summed as Σ p[x − ln(1+x)] with x = q/p − 1 so every term is
// non-negative; the two forms agree when both vectors are normalized.
template <typename Scalar>
Scalar relative_entropy(const Vector<Scalar>& p, const Vector<Scalar>& q) {
    using std::log1p;
    if (p.size() != q.size()) throw std::invalid_argument("relative_entropy: length mismatch");
    Scalar d = Scalar(0);
    for (Eigen::Index m = 0; m < p.size(); ++m) {
        if (p[m] < Scalar(0) || q[m] < Scalar(0)) throw std::invalid_argument("relative_entropy: negative entry");
        if (p[m] == Scalar(0)) continue;
        if (q[m] == Scalar(0)) throw std::invalid_argument("relative_entropy: q vanishes where p does not");
        const Scalar x = (q[m] - p[m]) / p[m];
        d += p[m] * (x - log1p(x));
    }
    return d;
}

}  // namespace thermo
