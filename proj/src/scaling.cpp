#include "thermo/scaling.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace thermo {

namespace {

std::vector<std::size_t> ascending_order(const std::vector<double>& t) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return t[a] < t[b]; });
    return idx;
}

// Indices (ascending in T) of grid points inside the lowest `decades` of the grid.
std::vector<std::size_t> lowest_window(const std::vector<double>& t, double decades) {
    if (t.empty()) throw std::invalid_argument("empty temperature grid");
    const auto order = ascending_order(t);
    const double limit = t[order.front()] * std::pow(10.0, decades) * (1.0 + 1e-12);
    std::vector<std::size_t> out;
    for (std::size_t i : order) {
        if (t[i] <= limit) out.push_back(i);
    }
    return out;
}

struct LinearFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd standard_errors;
    double rss = 0.0;
};

LinearFit least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(s.size() - 1) <= 1e-13 * s(0)) {
        throw NumericalError("least-squares fit is rank deficient (grid too narrow for the requested degree)");
    }
    LinearFit fit;
    fit.beta = svd.solve(b);
    fit.rss = (a * fit.beta - b).squaredNorm();
    const auto n = a.rows();
    const auto p = a.cols();
    const double sigma2 = n > p ? fit.rss / static_cast<double>(n - p) : 0.0;
    const Eigen::MatrixXd v_over_s = svd.matrixV() * s.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd cov = sigma2 * v_over_s * v_over_s.transpose();
    fit.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return fit;
}

}  // namespace

std::vector<double> log_grid(double t_min, double t_max, int points) {
    if (!(t_min > 0.0) || !(t_max > t_min) || points < 2) {
        throw std::invalid_argument("log_grid: need 0 < t_min < t_max and at least two points");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double step = std::log(t_max / t_min) / (points - 1);
    for (int i = 0; i < points; ++i) grid[static_cast<std::size_t>(i)] = t_min * std::exp(step * i);
    grid.back() = t_max;
    return grid;
}

GapCoefficients fit_gap_series(const std::vector<double>& temperatures, const std::vector<double>& gaps,
                               const GapFitOptions& opts) {
    if (temperatures.size() != gaps.size()) {
        throw std::invalid_argument("fit_gap_series: temperature and gap samples differ in length");
    }
    if (opts.degree < 1) throw std::invalid_argument("fit_gap_series: degree must be at least 1");
    const auto window = lowest_window(temperatures, opts.window_decades);
    const auto p = static_cast<Eigen::Index>(opts.degree + 1);
    if (window.size() < 6 || static_cast<Eigen::Index>(window.size()) <= p) {
        std::ostringstream msg;
        msg << "fit_gap_series: " << window.size() << " grid points in the fit window, need at least "
            << std::max<Eigen::Index>(6, p + 1);
        throw std::invalid_argument(msg.str());
    }
    const double t_lo = temperatures[window.front()];
    const double t_hi = temperatures[window.back()];
    if (t_hi < 9.99 * t_lo && opts.window_decades >= 1.0) {
        throw std::invalid_argument("fit_gap_series: fit window spans less than one decade");
    }

    // rows weighted by 1/T so residuals are measured relative to the thermal scale
    const auto n = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd a(n, p);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = temperatures[window[static_cast<std::size_t>(i)]];
        const double g = gaps[window[static_cast<std::size_t>(i)]];
        if (!std::isfinite(g)) throw std::invalid_argument("fit_gap_series: non-finite gap inside the fit window");
        const double x = t / t_hi;
        double xk = 1.0;
        for (Eigen::Index k = 0; k < p; ++k) {
            a(i, k) = xk / t;
            xk *= x;
        }
        b(i) = g / t;
    }
    const auto fit = least_squares(a, b);

    GapCoefficients out;
    double scale = 1.0;
    for (Eigen::Index k = 0; k < p; ++k) {
        out.coefficients.push_back(fit.beta(k) / scale);
        out.standard_errors.push_back(fit.standard_errors(k) / scale);
        scale *= t_hi;
    }
    out.residual = std::sqrt(fit.rss / static_cast<double>(n));
    return out;
}

double reconstructed_log_ratio(const GapCoefficients& c, double beta, int orders) {
    const double log_g = std::log(c.prefactor.value_or(1.0));
    double out = log_g - c.coefficient(0) * beta - c.coefficient(1) * std::log(beta);
    for (int k = 2; k < 2 + orders && static_cast<std::size_t>(k) < c.coefficients.size(); ++k) {
        out += c.coefficients[static_cast<std::size_t>(k)] * std::pow(beta, 1 - k) / (k - 1);
    }
    return out;
}

GapExpansion extract_gap_expansion(const std::vector<double>& temperatures,
                                   const std::vector<std::vector<double>>& gaps,
                                   const std::vector<std::vector<double>>& probabilities, Eigen::Index reference,
                                   const GapFitOptions& opts) {
    if (reference < 0 || static_cast<std::size_t>(reference) >= gaps.size()) {
        throw std::invalid_argument("extract_gap_expansion: reference outcome out of range");
    }
    if (!probabilities.empty() && probabilities.size() != gaps.size()) {
        throw std::invalid_argument("extract_gap_expansion: probability and gap outcome counts differ");
    }
    GapExpansion out;
    out.reference = reference;
    out.correction_orders = opts.correction_orders;
    const auto window = lowest_window(temperatures, opts.window_decades);
    out.t_min = temperatures[window.front()];
    out.t_max = temperatures[window.back()];

    for (std::size_t m = 0; m < gaps.size(); ++m) {
        GapCoefficients c;
        if (static_cast<Eigen::Index>(m) == reference) {
            c.coefficients.assign(static_cast<std::size_t>(opts.degree + 1), 0.0);
            c.standard_errors.assign(static_cast<std::size_t>(opts.degree + 1), 0.0);
            c.prefactor = 1.0;
            out.outcomes.push_back(c);
            continue;
        }
        try {
            c = fit_gap_series(temperatures, gaps[m], opts);
        } catch (const std::exception& e) {
            throw NumericalError("extract_gap_expansion: outcome " + std::to_string(m) + ": " + e.what());
        }
        if (!probabilities.empty()) {
            const auto& pm = probabilities[m];
            const auto& pr = probabilities[static_cast<std::size_t>(reference)];
            std::vector<double> log_g;
            bool usable = true;
            for (std::size_t i : window) {
                if (!(pm[i] > kProbabilityFloor) || !(pr[i] > kProbabilityFloor)) {
                    usable = false;
                    break;
                }
                const double beta = 1.0 / temperatures[i];
                GapCoefficients unit = c;
                unit.prefactor = 1.0;
                log_g.push_back(std::log(pm[i] / pr[i]) - reconstructed_log_ratio(unit, beta, opts.correction_orders));
            }
            if (usable && !log_g.empty()) {
                const double mean = std::accumulate(log_g.begin(), log_g.end(), 0.0) / static_cast<double>(log_g.size());
                double ss = 0.0;
                for (double v : log_g) ss += (v - mean) * (v - mean);
                c.prefactor = std::exp(mean);
                c.prefactor_residual = std::sqrt(ss / static_cast<double>(log_g.size()));
            }
        }
        out.outcomes.push_back(c);
    }
    return out;
}

GapExpansion extract_gap_expansion(const Spectrum& spectrum, const Povm& povm, const std::vector<double>& temperatures,
                                   const GapFitOptions& opts) {
    const auto order = ascending_order(temperatures);
    const Thermal coldest = Thermal::from_temperature(temperatures[order.front()]);
    const Eigen::Index reference = select_reference_outcome(outcome_probabilities(spectrum, povm, coldest));
    const auto m_count = static_cast<std::size_t>(povm.outcome_count());
    std::vector<std::vector<double>> gaps(m_count, std::vector<double>(temperatures.size()));
    std::vector<std::vector<double>> probs(m_count, std::vector<double>(temperatures.size()));
    for (std::size_t i = 0; i < temperatures.size(); ++i) {
        const auto en = povm_energetics(spectrum, povm, Thermal::from_temperature(temperatures[i]), reference);
        for (std::size_t m = 0; m < m_count; ++m) {
            probs[m][i] = en.probabilities[static_cast<Eigen::Index>(m)];
            gaps[m][i] = en.gaps[m].value_or(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return extract_gap_expansion(temperatures, gaps, probs, reference, opts);
}

OutcomeClassification classify_outcomes(const GapExpansion& expansion, double zero_tolerance,
                                        double exponent_tolerance) {
    auto is_zero = [&](const GapCoefficients& c, std::size_t k) {
        const double tol = k == 1 ? exponent_tolerance : zero_tolerance;
        return std::abs(c.coefficient(k)) < std::max(tol, 3.0 * c.standard_error(k));
    };
    OutcomeClassification out;
    for (std::size_t m = 0; m < expansion.outcomes.size(); ++m) {
        const auto idx = static_cast<Eigen::Index>(m);
        const auto& c = expansion.outcomes[m];
        if (idx == expansion.reference || (is_zero(c, 0) && is_zero(c, 1))) {
            out.ground_set.push_back(idx);
        } else if (is_zero(c, 0)) {
            out.sub_exponential_set.push_back(idx);
        } else {
            out.exponential_set.push_back(idx);
        }
    }
    return out;
}

PowerLawFit fit_power_law(const std::vector<double>& temperatures, const std::vector<double>& fisher, double window_min,
                          double window_max) {
    if (temperatures.size() != fisher.size()) {
        throw std::invalid_argument("fit_power_law: temperature and value grids differ in length");
    }
    if (!(window_min < window_max)) throw std::invalid_argument("fit_power_law: empty window");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < temperatures.size(); ++i) {
        const double t = temperatures[i];
        if (t < window_min * (1 - 1e-12) || t > window_max * (1 + 1e-12)) continue;
        if (!(fisher[i] > 0.0) || !std::isfinite(fisher[i])) {
            std::ostringstream msg;
            msg << "fit_power_law: non-positive value " << fisher[i] << " at T = " << t;
            throw std::invalid_argument(msg.str());
        }
        x.push_back(std::log(t));
        y.push_back(std::log(fisher[i]));
    }
    if (x.size() < 2) throw std::invalid_argument("fit_power_law: fewer than two points in the window");

    // centre the abscissa so the two fitted parameters are uncorrelated
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    Eigen::MatrixXd a(static_cast<Eigen::Index>(x.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        a(static_cast<Eigen::Index>(i), 0) = 1.0;
        a(static_cast<Eigen::Index>(i), 1) = x[i] - xm;
        b(static_cast<Eigen::Index>(i)) = y[i];
    }
    const auto fit = least_squares(a, b);
    PowerLawFit out;
    out.exponent = fit.beta(1);
    out.prefactor = std::exp(fit.beta(0) - fit.beta(1) * xm);
    out.t_min = std::exp(*std::min_element(x.begin(), x.end()));
    out.t_max = std::exp(*std::max_element(x.begin(), x.end()));
    out.residual = std::sqrt(fit.rss / static_cast<double>(x.size()));
    out.exponent_error = fit.standard_errors(1);
    out.points = static_cast<int>(x.size());
    return out;
}

PowerLawFit fit_power_law_lowest(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                                 double decades) {
    const auto window = lowest_window(temperatures, decades);
    return fit_power_law(temperatures, fisher, temperatures[window.front()], temperatures[window.back()]);
}

std::optional<double> predicted_subexponential_fisher(const OutcomeClassification& classification,
                                                      const GapExpansion& expansion, const Thermal& point,
                                                      double reference_probability) {
    if (classification.sub_exponential_set.empty()) return std::nullopt;
    const double t = point.temperature();
    double f = 0.0;
    for (Eigen::Index m : classification.sub_exponential_set) {
        const auto& c = expansion.outcomes[static_cast<std::size_t>(m)];
        if (!c.prefactor) {
            throw NumericalError("predicted_subexponential_fisher: outcome " + std::to_string(m) +
                                 " has no fitted prefactor");
        }
        const double d1 = c.coefficient(1);
        f += *c.prefactor * d1 * d1 * std::pow(t, d1 - 2.0);
    }
    return reference_probability * f;
}

double ground_set_contribution(const OutcomeClassification& classification, const GapExpansion& expansion,
                               const std::vector<double>& ground_probabilities, const Thermal& point,
                               double zero_tolerance) {
    const auto& omega = classification.ground_set;
    if (ground_probabilities.size() != omega.size()) {
        throw std::invalid_argument("ground_set_contribution: one probability per ground-set outcome required");
    }
    if (omega.size() < 2) return 0.0;
    std::size_t max_order = 0;
    for (Eigen::Index m : omega) {
        max_order = std::max(max_order, expansion.outcomes[static_cast<std::size_t>(m)].coefficients.size());
    }
    const double t = point.temperature();
    for (std::size_t j = 2; j < max_order; ++j) {
        double sum = 0.0;
        bool differs = false;
        for (std::size_t a = 0; a < omega.size(); ++a) {
            const auto& ca = expansion.outcomes[static_cast<std::size_t>(omega[a])];
            for (std::size_t b = a + 1; b < omega.size(); ++b) {
                const auto& cb = expansion.outcomes[static_cast<std::size_t>(omega[b])];
                const double d = ca.coefficient(j) - cb.coefficient(j);
                const double tol = std::max(zero_tolerance, 3.0 * (ca.standard_error(j) + cb.standard_error(j)));
                if (std::abs(d) >= tol) differs = true;
                sum += ground_probabilities[a] * ground_probabilities[b] * d * d;
            }
        }
        if (differs) {
            // unordered pairs: the 1/2 cancels against the double count
            return sum * std::pow(t, 2.0 * (static_cast<double>(j) - 1.0)) / (t * t);
        }
    }
    return 0.0;
}

FrcReport verify_frc_bound(const GapExpansion& expansion, const OutcomeClassification& classification, double gamma,
                           double fit_tolerance) {
    if (!(gamma > 0.0)) throw std::invalid_argument("verify_frc_bound: gamma must be positive");
    FrcReport report;
    for (Eigen::Index m : classification.sub_exponential_set) {
        FrcEntry e;
        e.outcome = m;
        e.delta1 = expansion.outcomes[static_cast<std::size_t>(m)].coefficient(1);
        e.margin = e.delta1 - (1.0 + gamma);
        e.pass = e.margin >= -fit_tolerance;
        report.pass = report.pass && e.pass;
        report.entries.push_back(e);
    }
    return report;
}

TFLimitReport verify_tF_limit(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                              double min_slope) {
    if (temperatures.size() != fisher.size()) {
        throw std::invalid_argument("verify_tF_limit: temperature and value grids differ in length");
    }
    const auto order = ascending_order(temperatures);
    if (temperatures[order.back()] < 99.9 * temperatures[order.front()]) {
        throw std::invalid_argument("verify_tF_limit: grid must span at least two decades");
    }
    TFLimitReport report;
    for (std::size_t i : order) report.tf.push_back(temperatures[i] * fisher[i]);

    const auto window = lowest_window(temperatures, 1.0);
    report.decreasing_lowest_decade = true;
    for (std::size_t k = 1; k < window.size(); ++k) {
        // ascending T: T·F must grow with T, i.e. shrink towards T → 0
        if (!(temperatures[window[k]] * fisher[window[k]] > temperatures[window[k - 1]] * fisher[window[k - 1]])) {
            report.decreasing_lowest_decade = false;
        }
    }
    const double max_tf = *std::max_element(report.tf.begin(), report.tf.end());
    report.final_over_max = report.tf.front() / max_tf;
    report.final_below_tenth = report.final_over_max < 0.1;

    std::vector<double> tf(temperatures.size());
    for (std::size_t i = 0; i < tf.size(); ++i) tf[i] = temperatures[i] * fisher[i];
    bool positive = std::all_of(window.begin(), window.end(), [&](std::size_t i) { return tf[i] > 0.0; });
    if (positive && window.size() >= 2) {
        report.tail_slope = fit_power_law(temperatures, tf, temperatures[window.front()], temperatures[window.back()]).exponent;
    }
    report.pass = report.decreasing_lowest_decade && (report.final_below_tenth || report.tail_slope >= min_slope);
    return report;
}

AbsoluteErrorReport absolute_error_scaling(const std::vector<double>& temperatures, const std::vector<double>& fisher,
                                           long long rounds) {
    if (temperatures.size() != fisher.size()) {
        throw std::invalid_argument("absolute_error_scaling: temperature and value grids differ in length");
    }
    const auto order = ascending_order(temperatures);
    const double t_low = temperatures[order.front()];
    if (temperatures[order.back()] < 99.9 * t_low) {
        throw std::invalid_argument("absolute_error_scaling: grid must span at least two decades");
    }
    AbsoluteErrorReport report;
    std::vector<double> ratio(temperatures.size());
    for (std::size_t i = 0; i < temperatures.size(); ++i) {
        const double d = cramer_rao_variance_bound(fisher[i], rounds);
        report.delta_t2.push_back(d);
        report.delta_t2_over_t.push_back(d / temperatures[i]);
        ratio[i] = d / temperatures[i];
    }

    // log-linear interpolation of δT²/T at 100·T_lowest
    const double t_ref = 100.0 * t_low;
    double at_ref = ratio[order.back()];
    for (std::size_t k = 1; k < order.size(); ++k) {
        const double t0 = temperatures[order[k - 1]], t1 = temperatures[order[k]];
        if (t1 >= t_ref * (1 - 1e-12)) {
            const double w = t1 > t0 ? std::log(t_ref / t0) / std::log(t1 / t0) : 1.0;
            at_ref = std::exp((1 - w) * std::log(ratio[order[k - 1]]) + w * std::log(ratio[order[k]]));
            break;
        }
    }
    report.growth_two_decades = ratio[order.front()] / at_ref;
    report.relative_diverges = report.growth_two_decades >= 10.0;

    const auto window = lowest_window(temperatures, 1.0);
    const bool finite = std::all_of(window.begin(), window.end(),
                                    [&](std::size_t i) { return std::isfinite(report.delta_t2[i]); });
    if (finite && window.size() >= 2) {
        report.absolute_slope =
            fit_power_law(temperatures, report.delta_t2, temperatures[window.front()], temperatures[window.back()])
                .exponent;
    }
    report.absolute_vanishes = report.absolute_slope > 0.0;
    report.third_law_violation = !report.relative_diverges;
    return report;
}

}  // namespace thermo
