#include "thermo/models.hpp"

#include "thermo/quadrature.hpp"
#include "thermo/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace thermo {

namespace {

void check_kappa(double kappa) { ExpResolutionParams{kappa}; }

void check_eta_open(double eta) {
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1) for a noisy POVM");
}

// Integrates ρ(ω)·g(ω) over (0, ∞) for integrands that behave like ω^{power−1} at the origin.
// The cutoff e^{−ω/ω_c} bounds the tail: beyond 60 ω_c it is below e^{−60} of the peak.
template <typename G>
double bath_integral(const SpectralDensity& sd, double beta, double power, G g, double rel_tol = 1e-11) {
    if (sd.alpha == 0.0) return 0.0;
    const double upper = 60.0 * sd.wc;
    // the thermal window sits at ω ~ 1/(β + 1/ω_c); resolve it with the mapped first panel
    const double thermal = 1.0 / (beta + 1.0 / sd.wc);
    const double split = std::min(upper, 4.0 * thermal);
    auto integrand = [&](double w) { return w > 0.0 ? sd(w) * g(w) : 0.0; };
    return quad::integrate_origin_singular(integrand, power, split, upper, {rel_tol, 0.0, 20000}).value;
}

double bose(double w, double beta) { return 1.0 / std::expm1(beta * w); }

// −∂_β n(ω) = ω / (4 sinh²(βω/2))
double bose_beta_slope(double w, double beta) {
    const double sh = std::sinh(0.5 * beta * w);
    if (!std::isfinite(sh)) return 0.0;
    return w / (4.0 * sh * sh);
}

// ∫ρ n and ∫ρ (−∂_β n)
double thermal_moment(const SpectralDensity& sd, const Thermal& point) {
    const double beta = point.beta();
    return bath_integral(sd, beta, sd.s, [beta](double w) { return bose(w, beta); });
}

double thermal_slope(const SpectralDensity& sd, const Thermal& point) {
    const double beta = point.beta();
    return bath_integral(sd, beta, sd.s, [beta](double w) { return bose_beta_slope(w, beta); });
}

}  // namespace

// Exponential-resolution family ------------------------------------------------

ExpFamilyState exp_family_state(const Dos& dos, double kappa, const Thermal& point) {
    check_kappa(kappa);
    const double beta = point.beta();
    const double a = dos.log_partition_coefficient();
    const double big_a = dos.energy_coefficient();
    const double g = dos.gamma;
    const double lr = std::log1p(kappa / beta);
    // ln p₀ = a β^{−γ}[(1 + κ/β)^{−γ} − 1]
    const double log_p0 = a * std::pow(beta, -g) * std::expm1(-g * lr);
    ExpFamilyState s;
    s.p0 = std::exp(log_p0);
    s.p1 = -std::expm1(log_p0);
    s.mean_shifted = big_a * std::pow(beta + kappa, -(1.0 + g));
    s.energy_drop = -big_a * std::pow(beta, -(1.0 + g)) * std::expm1(-(1.0 + g) * lr);
    return s;
}

ExpFamilyState exp_family_state(const Spectrum& spectrum, double kappa, const Thermal& point) {
    check_kappa(kappa);
    const Thermal shifted(point.beta() + kappa);
    const double log_p0 = log_partition_function(spectrum, shifted) - log_partition_function(spectrum, point);
    ExpFamilyState s;
    s.p0 = std::exp(log_p0);
    s.p1 = -std::expm1(log_p0);
    s.mean_shifted = energy_moments(spectrum, shifted).mean;
    s.energy_drop = energy_moments(spectrum, point).mean - s.mean_shifted;
    return s;
}

ExpFamilyData exp_family_energetics(const ExpFamilyState& state, const std::vector<ExpFamilyElement>& elements,
                                    const Thermal& point, Eigen::Index reference) {
    const auto n = static_cast<Eigen::Index>(elements.size());
    if (reference < 0 || reference >= n) throw std::out_of_range("exp_family_energetics: reference out of range");
    ExpFamilyData out;
    out.reference = reference;
    out.probabilities.resize(n);
    out.dp_dT.resize(n);
    const double b2 = point.beta() * point.beta();
    for (Eigen::Index m = 0; m < n; ++m) {
        const auto& e = elements[static_cast<std::size_t>(m)];
        out.probabilities[m] = e.u * state.p0 + e.v * state.p1;
        // ∂_β p₀ = p₀ D and ∂_β p₁ = −p₀ D
        out.dp_dT[m] = -b2 * state.p0 * state.energy_drop * (e.u - e.v);
    }
    const double p_ref = out.probabilities[reference];
    if (!(p_ref >= kProbabilityFloor)) throw NumericalError("exp_family_energetics: reference outcome has vanishing probability");
    const double v_ref = elements[static_cast<std::size_t>(reference)].v;
    for (Eigen::Index m = 0; m < n; ++m) {
        const double p = out.probabilities[m];
        if (p < kProbabilityFloor) {
            out.gaps.emplace_back(std::nullopt);
            continue;
        }
        // E_m = ⟨H⟩_{β+κ} + v_m D / p_m
        const double v = elements[static_cast<std::size_t>(m)].v;
        out.gaps.emplace_back(m == reference ? 0.0 : state.energy_drop * (v / p - v_ref / p_ref));
    }
    return out;
}

double exp_family_fisher(const ExpFamilyState& state, const std::vector<ExpFamilyElement>& elements,
                         const Thermal& point) {
    const double b2 = point.beta() * point.beta();
    double sum = 0.0;
    for (const auto& e : elements) {
        const double p = e.u * state.p0 + e.v * state.p1;
        if (p < kProbabilityFloor) continue;
        const double d = e.u - e.v;
        sum += d * d / p;
    }
    const double scale = b2 * state.p0 * state.energy_drop;
    return scale * scale * sum;
}

std::vector<ExpFamilyElement> merge_elements(const std::vector<ExpFamilyElement>& fine, const CoarseGraining& grouping) {
    grouping.validate(static_cast<Eigen::Index>(fine.size()));
    std::vector<ExpFamilyElement> out;
    for (std::size_t c = 0; c < grouping.groups.size(); ++c) {
        ExpFamilyElement merged;
        for (Eigen::Index m : grouping.groups[c]) {
            const auto& e = fine[static_cast<std::size_t>(m)];
            merged.u += e.u;
            merged.v += e.v;
            merged.label += (merged.label.empty() ? "" : "+") + e.label;
        }
        if (!grouping.labels.empty()) merged.label = grouping.labels[c];
        out.push_back(merged);
    }
    return out;
}

Povm exp_family_povm(const Spectrum& spectrum, double kappa, const std::vector<ExpFamilyElement>& elements) {
    check_kappa(kappa);
    Matrix<double> f(static_cast<Eigen::Index>(elements.size()), spectrum.size());
    std::vector<std::string> labels;
    for (std::size_t m = 0; m < elements.size(); ++m) {
        const auto& e = elements[m];
        for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
            const double resolved = std::exp(-kappa * spectrum.energy(k));
            const double rest = -std::expm1(-kappa * spectrum.energy(k));
            f(static_cast<Eigen::Index>(m), k) = std::clamp(e.u * resolved + e.v * rest, 0.0, 1.0);
        }
        labels.push_back(e.label.empty() ? std::to_string(m) : e.label);
    }
    return Povm(std::move(f), std::move(labels));
}

std::vector<ExpFamilyElement> exp_binary_elements() { return {{1.0, 0.0, "0"}, {0.0, 1.0, "1"}}; }

std::vector<ExpFamilyElement> white_noise_elements(double eta) {
    check_eta_open(eta);
    return {{0.5 * (1.0 + eta), 0.0, "00"},
            {0.0, 0.5 * (1.0 - eta), "01"},
            {0.0, 0.5 * (1.0 + eta), "10"},
            {0.5 * (1.0 - eta), 0.0, "11"}};
}

std::vector<ExpFamilyElement> alt_noise_elements(double eta) {
    check_eta_open(eta);
    return {{0.5, 0.0, "00"}, {0.5 * (1.0 - eta), 0.0, "01"}, {0.0, 0.5, "10"}, {0.5 * eta, 0.5, "11"}};
}

CoarseGraining noise_coarse_graining() { return CoarseGraining{{{0, 1}, {2, 3}}, {"0", "1"}}; }

std::pair<double, double> exp_povm_probability(const Dos& dos, double kappa, const Thermal& point) {
    const auto s = exp_family_state(dos, kappa, point);
    return {s.p0, s.p1};
}

std::pair<double, double> exp_povm_probability(const Spectrum& spectrum, double kappa, const Thermal& point) {
    const auto s = exp_family_state(spectrum, kappa, point);
    return {s.p0, s.p1};
}

double exp_povm_fisher_exact(const Dos& dos, double kappa, const Thermal& point) {
    const auto s = exp_family_state(dos, kappa, point);
    if (s.p1 <= 0.0) return 0.0;
    const double b2 = point.beta() * point.beta();
    return b2 * b2 * s.p0 / s.p1 * s.energy_drop * s.energy_drop;
}

LeadingOrder exp_povm_fisher_leading(const Dos& dos, double kappa, const Thermal& point) {
    check_kappa(kappa);
    const double g = dos.gamma;
    LeadingOrder out;
    out.value = dos.alpha * kappa * g * g * special::gamma(g) * (1.0 + g) * (1.0 + g) / dos.d0 *
                std::pow(point.temperature(), g - 1.0);
    out.small_parameter = kappa * point.temperature();
    out.valid = out.small_parameter < 0.1;
    return out;
}

Povm white_noise_fine_povm(const Spectrum& spectrum, double kappa, double eta) {
    return exp_family_povm(spectrum, kappa, white_noise_elements(eta));
}

Povm alt_noise_povm(const Spectrum& spectrum, double kappa, double eta) {
    return exp_family_povm(spectrum, kappa, alt_noise_elements(eta));
}

LeadingOrder white_noise_coarse_fisher_leading(const Dos& dos, double kappa, double eta, const Thermal& point) {
    check_kappa(kappa);
    check_eta_open(eta);
    const double c = dos.energy_coefficient() * kappa * (1.0 + dos.gamma);
    LeadingOrder out;
    out.value = 4.0 * eta * eta / (1.0 - eta * eta) * c * c * std::pow(point.temperature(), 2.0 * dos.gamma);
    out.small_parameter = kappa * point.temperature();
    out.valid = out.small_parameter < 0.1;
    return out;
}

LeadingOrder alt_noise_fisher_leading(const Dos& dos, double kappa, double eta, const Thermal& point) {
    check_kappa(kappa);
    check_eta_open(eta);
    const double c = dos.energy_coefficient() * kappa * (1.0 + dos.gamma);
    LeadingOrder out;
    out.value = (2.0 - eta) / eta * c * c * std::pow(point.temperature(), 2.0 * dos.gamma);
    out.small_parameter = kappa * point.temperature();
    out.valid = out.small_parameter < 0.1;
    return out;
}

Spectrum synthetic_powerlaw_spectrum(const Dos& dos, double e_max, int levels, double scale) {
    if (!(e_max > 0.0) || levels < 2 || !(scale >= 1.0)) {
        throw std::invalid_argument("synthetic_powerlaw_spectrum: need e_max > 0, at least two levels, scale >= 1");
    }
    const double a = dos.log_partition_coefficient();
    const double g = dos.gamma;
    // N(ε) = d₀ Σ_{n≥1} aⁿ ε^{nγ} / (n! Γ(nγ+1)), the measure of (0, ε]
    auto counting = [&](double e) {
        if (e <= 0.0) return 0.0;
        double sum = 0.0;
        const double log_ae = std::log(a) + g * std::log(e);
        for (int n = 1; n < 400; ++n) {
            const double term = std::exp(n * log_ae - std::lgamma(n + 1.0) - std::lgamma(n * g + 1.0));
            sum += term;
            if (n > 3 && term < 1e-17 * sum) break;
        }
        return dos.d0 * sum;
    };
    auto level = [&](double j) { return std::pow(j / levels, 1.0 / g) * e_max; };

    std::vector<std::pair<double, double>> lv;
    lv.emplace_back(0.0, std::max(1.0, std::round(scale * dos.d0)));
    double lower = 0.0;
    for (int j = 1; j <= levels; ++j) {
        const double upper = counting(level(j + 0.5));
        const double weight = std::round(scale * (upper - lower));
        lower = upper;
        if (weight >= 1.0) lv.emplace_back(level(j), weight);
    }
    return Spectrum::from_levels(lv);
}

// Bath and probe -------------------------------------------------------------------

double SpectralDensity::operator()(double w) const {
    if (w < 0.0) throw std::domain_error("spectral density evaluated at negative frequency");
    if (w == 0.0) return 0.0;
    return 2.0 * alpha * std::pow(wc, 1.0 - s) * std::pow(w, s) * std::exp(-w / wc);
}

double SpectralDensity::integral() const { return 2.0 * alpha * wc * wc * special::gamma(1.0 + s); }

double spectral_density_eval(const SpectralDensity& sd, double w) { return sd(w); }

double bose_einstein(double w, const Thermal& point) {
    if (!(w > 0.0)) throw std::domain_error("bose_einstein: occupation diverges at zero frequency");
    return bose(w, point.beta());
}

std::string to_string(CouplingMode mode) {
    return mode == CouplingMode::spin_boson ? "spin_boson" : "excitation_preserving";
}

CouplingMode coupling_mode_from_string(const std::string& name) {
    if (name == "spin_boson" || name == "spin-boson") return CouplingMode::spin_boson;
    if (name == "excitation_preserving" || name == "excitation-preserving" || name == "preserving") {
        return CouplingMode::excitation_preserving;
    }
    throw std::invalid_argument("unknown coupling mode '" + name + "'");
}

bool short_time_valid(const SpectralDensity& sd, double t) {
    return sd.alpha * t * t * special::gamma(1.0 + sd.s) * sd.wc * sd.wc < 0.1;
}

PreservingP1 qubit_p1_preserving(const SpectralDensity& sd, double t, const Thermal& point) {
    if (!(t >= 0.0)) throw std::invalid_argument("interaction time must be non-negative");
    PreservingP1 out;
    out.exact = t * t * thermal_moment(sd, point);
    const double s = sd.s;
    out.leading = 2.0 * sd.alpha * std::pow(sd.wc * t, 2) * special::gamma(1.0 + s) * special::zeta(1.0 + s) *
                  std::pow(point.temperature() / sd.wc, 1.0 + s);
    return out;
}

SpinBosonP1 qubit_p1_spin_boson(const SpectralDensity& sd, double t, const Thermal& point) {
    const auto pres = qubit_p1_preserving(sd, t, point);
    SpinBosonP1 out;
    out.constant_term = t * t * sd.integral();
    out.exact = 2.0 * pres.exact + out.constant_term;
    out.leading_T_term = 2.0 * pres.leading;
    return out;
}

double qubit_fisher_shorttime(const SpectralDensity& sd, double t, const Thermal& point, CouplingMode mode) {
    const double weight = mode == CouplingMode::spin_boson ? 2.0 : 1.0;
    const double p1 = mode == CouplingMode::spin_boson ? qubit_p1_spin_boson(sd, t, point).exact
                                                       : qubit_p1_preserving(sd, t, point).exact;
    if (!(p1 > 0.0 && p1 < 1.0)) return 0.0;
    // ∂_T n = β² (−∂_β n)
    const double b2 = point.beta() * point.beta();
    const double dp_dT = weight * t * t * b2 * thermal_slope(sd, point);
    return dp_dT * dp_dT / (p1 * (1.0 - p1));
}

SpinBosonFine spin_boson_fine_decomposition(const SpectralDensity& sd, double t, const Thermal& point) {
    SpinBosonFine out;
    out.eta = 1.0 - 2.0 * t * t * sd.integral();
    if (!(out.eta > 0.0)) {
        throw std::domain_error("spin_boson_fine_decomposition: interaction time too long (eta <= 0)");
    }
    const double moment = thermal_moment(sd, point);
    const double slope = thermal_slope(sd, point);  // −∂_β ∫ρ n
    out.x = 2.0 * t * t / out.eta * moment;
    const double dx_dbeta = -2.0 * t * t / out.eta * slope;
    const double a = 0.5 * (1.0 + out.eta), b = 0.5 * (1.0 - out.eta);
    out.p = {a * (1.0 - out.x), b * out.x, b * (1.0 - out.x), a * out.x};
    // x-type outcomes carry −∂_β ln x relative to the (1−x)-type reference
    const double thermal_gap = -dx_dbeta / (out.x * (1.0 - out.x));
    out.gaps = {0.0, thermal_gap, 0.0, thermal_gap};
    out.coarse_p = {out.p[0] + out.p[1], out.p[2] + out.p[3]};
    out.coarse_gaps = {out.p[1] / out.coarse_p[0] * thermal_gap, out.p[3] / out.coarse_p[1] * thermal_gap};

    Vector<double> fine_p(4);
    fine_p << out.p[0], out.p[1], out.p[2], out.p[3];
    std::vector<std::optional<double>> fine_g(out.gaps.begin(), out.gaps.end());
    out.fine_fisher = pairwise_fisher(fine_p, fine_g, point);
    Vector<double> cp(2);
    cp << out.coarse_p[0], out.coarse_p[1];
    std::vector<std::optional<double>> cg(out.coarse_gaps.begin(), out.coarse_gaps.end());
    out.coarse_fisher = pairwise_fisher(cp, cg, point);
    return out;
}

double qubit_p1_second_order(const SpectralDensity& sd, double omega, double t, const Thermal& point) {
    const double beta = point.beta();
    // F(x) = t² sinc²(xt/2)
    auto window = [t](double x) {
        const double y = 0.5 * x * t;
        const double sinc = std::abs(y) < 1e-6 ? 1.0 - y * y / 6.0 : std::sin(y) / y;
        return t * t * sinc * sinc;
    };
    auto g = [&](double w) {
        const double n = bose(w, beta);
        return n * window(w - omega) + (n + 1.0) * window(w + omega);
    };
    return bath_integral(sd, beta, sd.s, g);
}

}  // namespace thermo
