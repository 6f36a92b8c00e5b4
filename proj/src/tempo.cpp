#include "thermo/tempo.hpp"

#include "thermo/parallel.hpp"
#include "thermo/quadrature.hpp"
#include "thermo/special_functions.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace thermo {

namespace {

constexpr double kUpperCutoffs = 60.0;

// ∫₀^∞ ρ(ω) g(ω) dω for g·ρ ~ ω^{s−1} at the origin; same panelling as the probe integrals.
template <typename G>
double spectral_integral(const SpectralDensity& sd, double beta, G g, double rel_tol, double abs_tol = 0.0) {
    if (sd.alpha == 0.0) return 0.0;
    const double upper = kUpperCutoffs * sd.wc;
    const double split = std::min(upper, 4.0 / (beta + 1.0 / sd.wc));
    auto integrand = [&](double w) { return w > 0.0 ? sd(w) * g(w) : 0.0; };
    return quad::integrate_origin_singular(integrand, sd.s, split, upper, {rel_tol, abs_tol, 20000}).value;
}

double coth_half(double beta, double w) { return 1.0 / std::tanh(0.5 * beta * w); }

// −∂_β coth(βω/2) = ω / (2 sinh²(βω/2))
double coth_half_slope(double beta, double w) {
    const double sh = std::sinh(0.5 * beta * w);
    if (!std::isfinite(sh)) return 0.0;
    return w / (2.0 * sh * sh);
}

// Double time integrals of e^{iω(t'−t'')} over the window pair at half-step lag l.
struct Window {
    double h;
    int lag;

    double cos_part(double w) const {
        const double sh = std::sin(0.5 * w * h);
        if (lag == 0) return 2.0 * sh * sh / (w * w);
        return 4.0 * sh * sh / (w * w) * std::cos(w * h * lag);
    }
    double sin_part(double w) const {
        if (lag == 0) {
            const double x = w * h;
            // (x − sin x)/ω², series below x = 1e-2 to avoid cancellation
            const double num = x < 1e-2 ? x * x * x / 6.0 * (1.0 - x * x / 20.0) : x - std::sin(x);
            return num / (w * w);
        }
        const double sh = std::sin(0.5 * w * h);
        return 4.0 * sh * sh / (w * w) * std::sin(w * h * lag);
    }
};

// absolute floor for kernel integrals that cancel to (near) zero
double kernel_scale(const SpectralDensity& sd, double h) { return 1e-14 * h * h * sd.integral(); }

int spin_s(int a) { return kSpinS[static_cast<std::size_t>(a)]; }
int spin_r(int a) { return kSpinR[static_cast<std::size_t>(a)]; }

// exponent −(s_i − r_i)(η s_j − η* r_j) and its β-derivative (s_i − r_i)(μ s_j − μ* r_j)
Complex influence_exponent(Complex eta, int ai, int aj) {
    return -static_cast<double>(spin_s(ai) - spin_r(ai)) *
           (eta * static_cast<double>(spin_s(aj)) - std::conj(eta) * static_cast<double>(spin_r(aj)));
}

Complex influence_slope(Complex mu, int ai, int aj) { return -influence_exponent(mu, ai, aj); }

// ρ₀ = |0⟩⟨0| and P₀ in the σ_x basis: both sr/2 for the σ_z = −1 ground state
double ground_weight(int a) { return 0.5 * spin_s(a) * spin_r(a); }

struct PairFactor {
    std::array<std::array<Complex, 4>, 4> value;  // [new][held]
    std::array<std::array<Complex, 4>, 4> slope;
};

PairFactor pair_factor(Complex eta, Complex mu, double slope_scale) {
    PairFactor f;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            f.value[a][b] = std::exp(influence_exponent(eta, a, b));
            f.slope[a][b] = slope_scale * influence_slope(mu, a, b);
        }
    }
    return f;
}

// Factors for attaching a new variable of a given kind to the held variables.
struct Attachment {
    std::vector<PairFactor> lags;         // lags[q] couples to the held variable q+1 steps back
    std::array<Complex, 4> self_value{};  // includes the readout weight when terminal
    std::array<Complex, 4> self_slope{};
    Liouville free;
};

Attachment make_attachment(const BathKernel& kernel, VariableKind kind, int new_index, int held, double slope_scale,
                           const Liouville& free) {
    Attachment at;
    at.free = free;
    for (int q = 0; q < held; ++q) {
        const int older = new_index - 1 - q;
        const VariableKind ok = older == 0 ? VariableKind::initial : VariableKind::middle;
        at.lags.push_back(pair_factor(merged_kernel(kernel.eta, kind, ok, q + 1),
                                      merged_kernel(kernel.mu, kind, ok, q + 1), slope_scale));
    }
    const Complex eta0 = merged_kernel(kernel.eta, kind, kind, 0);
    const Complex mu0 = merged_kernel(kernel.mu, kind, kind, 0);
    for (int a = 0; a < 4; ++a) {
        const double readout = kind == VariableKind::terminal ? ground_weight(a) : 1.0;
        at.self_value[static_cast<std::size_t>(a)] = readout * std::exp(influence_exponent(eta0, a, a));
        at.self_slope[static_cast<std::size_t>(a)] = slope_scale * influence_slope(mu0, a, a);
    }
    return at;
}

double merged_mu_scale(const BathKernel& kernel, int lags) {
    double m = 0.0;
    for (int l = 0; l <= std::min(lags, kernel.max_lag()); ++l) m = std::max(m, std::abs(kernel.mu[static_cast<std::size_t>(l)]));
    return m > 0.0 ? 1.0 / m : 1.0;
}

// Dense augmented state --------------------------------------------------------
//
// psi holds the last n variables, digit q of the index being the variable q steps back (newest q = 0).
// dpsi carries the β-derivative scaled by slope_scale.

struct DenseState {
    std::vector<Complex> psi;
    std::vector<Complex> dpsi;
    int n = 0;
};

struct DigitTable {
    std::vector<Complex> value;
    std::vector<Complex> slope;
};

// Products (and sums of slopes) over digits [first, first + count) of the held-variable factors.
DigitTable digit_table(const Attachment& at, int a, int first, int count) {
    DigitTable t;
    t.value.assign(1, Complex(1.0));
    t.slope.assign(1, Complex(0.0));
    for (int q = first; q < first + count; ++q) {
        const auto size = t.value.size();
        std::vector<Complex> v(size * 4), s(size * 4);
        const auto& f = at.lags[static_cast<std::size_t>(q)];
        for (int d = 0; d < 4; ++d) {
            Complex fv = f.value[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)];
            const Complex fs = f.slope[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)];
            if (q == 0) fv *= at.free(a, d);
            for (std::size_t x = 0; x < size; ++x) {
                v[x + size * static_cast<std::size_t>(d)] = t.value[x] * fv;
                s[x + size * static_cast<std::size_t>(d)] = t.slope[x] + fs;
            }
        }
        t.value = std::move(v);
        t.slope = std::move(s);
    }
    return t;
}

// Attaches a variable. If keep < 0 the result is summed to a scalar (readout); otherwise the new
// state keeps the newest `keep` held variables plus the new one.
std::pair<Complex, Complex> dense_attach(DenseState& st, const Attachment& at, int keep) {
    const int n = st.n;
    const int lo = (n + 1) / 2;
    const int hi = n - lo;
    const std::size_t lo_size = std::size_t{1} << (2 * lo);
    const std::size_t keep_mask = keep >= 0 ? (std::size_t{1} << (2 * keep)) - 1 : 0;
    std::vector<Complex> out, dout;
    if (keep >= 0) {
        out.assign(std::size_t{1} << (2 * (keep + 1)), Complex(0.0));
        dout.assign(out.size(), Complex(0.0));
    }
    Complex total(0.0), dtotal(0.0);
    for (int a = 0; a < 4; ++a) {
        const Complex sv = at.self_value[static_cast<std::size_t>(a)];
        const Complex ss = at.self_slope[static_cast<std::size_t>(a)];
        if (sv == Complex(0.0)) continue;
        const auto tlo = digit_table(at, a, 0, lo);
        const auto thi = digit_table(at, a, lo, hi);
        for (std::size_t y = 0; y < thi.value.size(); ++y) {
            const Complex hv = sv * thi.value[y];
            const Complex hs = ss + thi.slope[y];
            for (std::size_t x = 0; x < lo_size; ++x) {
                const std::size_t idx = y * lo_size + x;
                const Complex p = st.psi[idx];
                const Complex dp = st.dpsi[idx];
                if (p == Complex(0.0) && dp == Complex(0.0)) continue;
                const Complex w = hv * tlo.value[x];
                const Complex v = p * w;
                const Complex d = (dp + p * (hs + tlo.slope[x])) * w;
                if (keep >= 0) {
                    const std::size_t ni = ((idx & keep_mask) << 2) | static_cast<std::size_t>(a);
                    out[ni] += v;
                    dout[ni] += d;
                } else {
                    total += v;
                    dtotal += d;
                }
            }
        }
    }
    if (keep >= 0) {
        st.psi = std::move(out);
        st.dpsi = std::move(dout);
        st.n = keep + 1;
    }
    return {total, dtotal};
}

// Matrix-product state --------------------------------------------------------
//
// Sites: [dual, oldest held, ..., newest held]. The dual site (dimension 2) separates the value
// (0) from the scaled β-derivative (1); each held site has dimension 4.

using CMat = Eigen::MatrixXcd;

struct Site {
    std::vector<CMat> a;  // one χ_l × χ_r matrix per physical index
    Eigen::Index left() const { return a.front().rows(); }
    Eigen::Index right() const { return a.front().cols(); }
};

struct Mps {
    std::vector<Site> sites;
    int held() const { return static_cast<int>(sites.size()) - 1; }
};

// MPO bond channel: (new variable a, flag) with flag 1 = derivative insertion still pending.
constexpr int kChannels = 8;
int channel(int a, int pending) { return 2 * a + pending; }

struct Truncation {
    double threshold = 0.0;
    int max_bond = 512;
    double discarded = 0.0;
    int bond_max = 1;
};

// Applies the attachment MPO. The returned chain has one extra site for the new variable unless
// readout is requested, in which case the new site is a 1-dimensional closure.
std::vector<Site> apply_attachment(const Mps& mps, const Attachment& at, bool readout) {
    const int n = mps.held();
    std::vector<Site> out(mps.sites.size() + 1);

    // dual site: identity channels (flag done) and the 0 → 1 channel (flag pending)
    {
        const Site& s = mps.sites[0];
        Site o;
        o.a.assign(2, CMat::Zero(s.left(), s.right() * kChannels));
        for (int a = 0; a < 4; ++a) {
            for (int d = 0; d < 2; ++d) {
                // value → value and derivative → derivative, no insertion pending
                o.a[static_cast<std::size_t>(d)].middleCols(s.right() * channel(a, 0), s.right()) =
                    s.a[static_cast<std::size_t>(d)];
            }
            // value → derivative with one pending insertion
            o.a[1].middleCols(s.right() * channel(a, 1), s.right()) = s.a[0];
        }
        out[0] = std::move(o);
    }
    for (int i = 1; i <= n; ++i) {
        const int q = n - i;  // steps back
        const Site& s = mps.sites[static_cast<std::size_t>(i)];
        const auto& f = at.lags[static_cast<std::size_t>(q)];
        Site o;
        o.a.assign(4, CMat::Zero(s.left() * kChannels, s.right() * kChannels));
        for (int d = 0; d < 4; ++d) {
            for (int a = 0; a < 4; ++a) {
                Complex fv = f.value[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)];
                if (q == 0) fv *= at.free(a, d);
                const Complex fs = f.slope[static_cast<std::size_t>(a)][static_cast<std::size_t>(d)];
                auto block = [&](int from, int to) {
                    return o.a[static_cast<std::size_t>(d)].block(s.left() * from, s.right() * to, s.left(), s.right());
                };
                block(channel(a, 0), channel(a, 0)) = fv * s.a[static_cast<std::size_t>(d)];
                block(channel(a, 1), channel(a, 1)) = fv * s.a[static_cast<std::size_t>(d)];
                block(channel(a, 1), channel(a, 0)) = fv * fs * s.a[static_cast<std::size_t>(d)];
            }
        }
        out[static_cast<std::size_t>(i)] = std::move(o);
    }
    // closure on the new variable: pending channels close through the self slope
    Site o;
    const int dim = readout ? 1 : 4;
    o.a.assign(static_cast<std::size_t>(dim), CMat::Zero(kChannels, 1));
    for (int a = 0; a < 4; ++a) {
        const Complex sv = at.self_value[static_cast<std::size_t>(a)];
        const Complex ss = at.self_slope[static_cast<std::size_t>(a)];
        const auto p = static_cast<std::size_t>(readout ? 0 : a);
        o.a[p](channel(a, 0), 0) += sv;
        o.a[p](channel(a, 1), 0) += sv * ss;
    }
    out[static_cast<std::size_t>(n + 1)] = std::move(o);
    return out;
}

// Sums the physical index of site 1 (oldest held) into the dual site.
void drop_oldest(std::vector<Site>& chain) {
    const Site& d = chain[0];
    const Site& s = chain[1];
    CMat summed = s.a[0];
    for (std::size_t p = 1; p < s.a.size(); ++p) summed += s.a[p];
    Site merged;
    for (const auto& m : d.a) merged.a.push_back(m * summed);
    chain.erase(chain.begin(), chain.begin() + 2);
    chain.insert(chain.begin(), std::move(merged));
}

CMat stack_left(const Site& s) {
    CMat m(s.left() * static_cast<Eigen::Index>(s.a.size()), s.right());
    for (std::size_t p = 0; p < s.a.size(); ++p) m.middleRows(s.left() * static_cast<Eigen::Index>(p), s.left()) = s.a[p];
    return m;
}

CMat stack_right(const Site& s) {
    CMat m(s.left(), s.right() * static_cast<Eigen::Index>(s.a.size()));
    for (std::size_t p = 0; p < s.a.size(); ++p) m.middleCols(s.right() * static_cast<Eigen::Index>(p), s.right()) = s.a[p];
    return m;
}

void compress(std::vector<Site>& chain, Truncation& tr) {
    // left-orthonormalise
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const CMat m = stack_left(chain[i]);
        Eigen::HouseholderQR<CMat> qr(m);
        const Eigen::Index k = std::min(m.rows(), m.cols());
        const CMat q = qr.householderQ() * CMat::Identity(m.rows(), k);
        const CMat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        const Eigen::Index l = chain[i].left();
        for (std::size_t p = 0; p < chain[i].a.size(); ++p) chain[i].a[p] = q.middleRows(l * static_cast<Eigen::Index>(p), l);
        for (auto& next : chain[i + 1].a) next = r * next;
    }
    // right-to-left truncated SVD
    for (std::size_t i = chain.size() - 1; i > 0; --i) {
        const CMat m = stack_right(chain[i]);
        Eigen::BDCSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv.size() == 0 || !(sv(0) > 0.0) || !std::isfinite(sv(0))) {
            std::ostringstream msg;
            msg << "tempo: matrix-product state collapsed at bond " << i << " (largest singular value "
                << (sv.size() ? sv(0) : 0.0) << ", cumulative discarded weight " << tr.discarded << ")";
            throw NumericalError(msg.str());
        }
        Eigen::Index keep = 0;
        while (keep < sv.size() && sv(keep) > tr.threshold * sv(0)) ++keep;
        keep = std::max<Eigen::Index>(1, std::min<Eigen::Index>(keep, tr.max_bond));
        const double total = sv.squaredNorm();
        tr.discarded += sv.tail(sv.size() - keep).squaredNorm() / total;
        tr.bond_max = std::max<int>(tr.bond_max, static_cast<int>(keep));
        const CMat vt = svd.matrixV().leftCols(keep).adjoint();
        const Eigen::Index r = chain[i].right();
        for (std::size_t p = 0; p < chain[i].a.size(); ++p) {
            chain[i].a[p] = vt.middleCols(r * static_cast<Eigen::Index>(p), r);
        }
        const CMat us = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
        for (auto& prev : chain[i - 1].a) prev = prev * us;
    }
}

std::pair<Complex, Complex> contract_readout(const std::vector<Site>& chain) {
    // left boundary on the dual site: value row 0, derivative row 1
    CMat left_v = chain[0].a[0];
    CMat left_d = chain[0].a[1];
    for (std::size_t i = 1; i < chain.size(); ++i) {
        CMat sum = chain[i].a[0];
        for (std::size_t p = 1; p < chain[i].a.size(); ++p) sum += chain[i].a[p];
        left_v = left_v * sum;
        left_d = left_d * sum;
    }
    return {left_v(0, 0), left_d(0, 0)};
}

}  // namespace

// ------------------------------------------------------------------------------

void TempoConfig::validate() const {
    if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("TempoConfig: omega must be non-negative");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("TempoConfig: beta must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TempoConfig: dt must be positive");
    if (steps < 1) throw std::invalid_argument("TempoConfig: steps must be at least 1");
    if (memory_cutoff < 1) throw std::invalid_argument("TempoConfig: memory_cutoff must be at least 1");
    if (!(svd_threshold >= 0.0 && svd_threshold < 1.0)) {
        throw std::invalid_argument("TempoConfig: svd_threshold must lie in [0, 1)");
    }
    if (svd_threshold == 0.0 && memory_cutoff > 13) {
        throw std::invalid_argument("TempoConfig: exact contraction limited to memory_cutoff <= 13 (4^K state)");
    }
    if (max_bond < 1) throw std::invalid_argument("TempoConfig: max_bond must be positive");
}

Complex bath_correlation(const SpectralDensity& sd, double beta, double t, double rel_tol) {
    if (!(beta > 0.0)) throw std::invalid_argument("bath_correlation: beta must be positive");
    const double scale = 1e-14 * sd.integral();
    const double re = spectral_integral(
        sd, beta, [&](double w) { return coth_half(beta, w) * std::cos(w * t); }, rel_tol, scale);
    const double im = spectral_integral(sd, beta, [&](double w) { return -std::sin(w * t); }, rel_tol, scale);
    return {re, im};
}

Complex kernel_element(const SpectralDensity& sd, double beta, double dt_half, int lag) {
    if (!(dt_half > 0.0)) throw std::invalid_argument("kernel_element: dt_half must be positive");
    if (lag < 0) return std::conj(kernel_element(sd, beta, dt_half, -lag));
    const Window win{dt_half, lag};
    const double abs_tol = kernel_scale(sd, dt_half);
    const double re = spectral_integral(
        sd, beta, [&](double w) { return coth_half(beta, w) * win.cos_part(w); }, 1e-10, abs_tol);
    const double im = spectral_integral(sd, beta, [&](double w) { return -win.sin_part(w); }, 1e-10, abs_tol);
    return {re, im};
}

Complex kernel_element_beta_derivative(const SpectralDensity& sd, double beta, double dt_half, int lag) {
    if (!(dt_half > 0.0)) throw std::invalid_argument("kernel_element_beta_derivative: dt_half must be positive");
    const Window win{dt_half, std::abs(lag)};
    // only the coth factor depends on β, so μ is real; relative tolerance suffices since the
    // integrand is dominated by the thermal window
    const double mu = spectral_integral(
        sd, beta, [&](double w) { return coth_half_slope(beta, w) * win.cos_part(w); }, 1e-10, 1e-300);
    return {mu, 0.0};
}

BathKernel memory_kernel(const SpectralDensity& sd, double beta, double dt_half, int max_lag) {
    if (max_lag < 0) throw std::invalid_argument("memory_kernel: max_lag must be non-negative");
    BathKernel k;
    k.dt_half = dt_half;
    for (int l = 0; l <= max_lag; ++l) {
        k.eta.push_back(kernel_element(sd, beta, dt_half, l));
        k.mu.push_back(kernel_element_beta_derivative(sd, beta, dt_half, l));
        if (!std::isfinite(k.eta.back().real()) || !std::isfinite(k.eta.back().imag()) ||
            !std::isfinite(k.mu.back().real())) {
            throw NumericalError("memory_kernel: non-finite kernel element at lag " + std::to_string(l));
        }
    }
    return k;
}

double mu_low_temperature_series(const SpectralDensity& sd, double beta, double dt, int lag, int terms) {
    using special::gamma;
    using special::zeta;
    const double s = sd.s;
    const double l2 = static_cast<double>(lag) * lag * dt * dt / (beta * beta);
    double bracket = gamma(s + 2.0) * zeta(s + 1.0);
    if (terms >= 2) bracket -= l2 / 8.0 * gamma(s + 4.0) * zeta(s + 3.0);
    if (terms >= 3) bracket += l2 * l2 / 384.0 * gamma(s + 6.0) * zeta(s + 5.0);
    const double out = sd.alpha * dt * dt * std::pow(sd.wc, 1.0 - s) * std::pow(beta, -(s + 2.0)) * bracket;
    return lag == 0 ? 0.5 * out : out;
}

bool kernel_envelope_decaying(const BathKernel& kernel, double rel_slack) {
    const auto n = kernel.eta.size();
    if (n < 4) return true;
    const double top = std::abs(kernel.eta.front());
    for (std::size_t l = n - n / 4; l < n; ++l) {
        if (std::abs(kernel.eta[l]) > std::abs(kernel.eta[l - 1]) + rel_slack * top) return false;
    }
    return true;
}

Liouville trotter_factors(double omega, double dt) {
    // V = cos θ − i sin θ σ_z, θ = Ωδt/2; σ_z exchanges the σ_x eigenstates
    const double theta = 0.5 * omega * dt;
    Eigen::Matrix2cd v;
    v << Complex(std::cos(theta), 0.0), Complex(0.0, -std::sin(theta)), Complex(0.0, -std::sin(theta)),
        Complex(std::cos(theta), 0.0);
    Liouville l;
    for (int s = 0; s < 2; ++s)
        for (int r = 0; r < 2; ++r)
            for (int sp = 0; sp < 2; ++sp)
                for (int rp = 0; rp < 2; ++rp) l(2 * s + r, 2 * sp + rp) = v(s, sp) * std::conj(v(r, rp));
    return l;
}

InfluenceTensor influence_tensor(Complex eta) {
    InfluenceTensor a;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) a(i, j) = std::exp(influence_exponent(eta, i, j));
    return a;
}

InfluenceTensor influence_tensor(const BathKernel& kernel, int lag) {
    if (lag < 0 || lag > kernel.max_lag()) throw std::out_of_range("influence_tensor: lag outside the kernel");
    return influence_tensor(kernel.eta[static_cast<std::size_t>(lag)]);
}

Complex merged_kernel(const std::vector<Complex>& eta, VariableKind later, VariableKind earlier, int m) {
    auto at = [&](int l) -> Complex {
        if (l < 0 || l >= static_cast<int>(eta.size())) {
            throw std::out_of_range("merged_kernel: lag " + std::to_string(l) + " outside the kernel");
        }
        return eta[static_cast<std::size_t>(l)];
    };
    if (m == 0) {
        if (later != earlier) throw std::invalid_argument("merged_kernel: self term needs matching kinds");
        return later == VariableKind::middle ? 2.0 * at(0) + at(1) : at(0);
    }
    if (m < 0 || later == VariableKind::initial || earlier == VariableKind::terminal) {
        throw std::invalid_argument("merged_kernel: later variable must follow the earlier one");
    }
    if (later == VariableKind::middle) {
        return earlier == VariableKind::middle ? at(2 * m - 1) + 2.0 * at(2 * m) + at(2 * m + 1)
                                               : at(2 * m - 1) + at(2 * m);
    }
    return earlier == VariableKind::middle ? at(2 * m - 1) + at(2 * m) : at(2 * m - 1);
}

TempoRun tempo_run(const TempoConfig& cfg, const BathKernel& kernel) {
    cfg.validate();
    const int k = cfg.steps;
    const int mem = std::min(cfg.memory_cutoff, k);
    if (kernel.max_lag() < 2 * mem + 1 && !(k == 1 && kernel.max_lag() >= 1)) {
        throw std::invalid_argument("tempo_run: kernel needs " + std::to_string(2 * mem + 1) + " lags");
    }
    const Liouville free = trotter_factors(cfg.omega, cfg.dt);
    const double scale = merged_mu_scale(kernel, 2 * mem + 1);

    // initial variable: ρ₀ and its self influence
    const Complex eta0 = merged_kernel(kernel.eta, VariableKind::initial, VariableKind::initial, 0);
    const Complex mu0 = merged_kernel(kernel.mu, VariableKind::initial, VariableKind::initial, 0);
    std::array<Complex, 4> init{}, dinit{};
    for (int a = 0; a < 4; ++a) {
        init[static_cast<std::size_t>(a)] = ground_weight(a) * std::exp(influence_exponent(eta0, a, a));
        dinit[static_cast<std::size_t>(a)] = init[static_cast<std::size_t>(a)] * scale * influence_slope(mu0, a, a);
    }

    TempoRun run;
    auto record = [&](std::pair<Complex, Complex> r) {
        const Complex d = r.second / scale;
        run.p0.push_back(r.first.real());
        run.dp0_dbeta.push_back(d.real());
        run.imaginary_residue.push_back(std::max(std::abs(r.first.imag()), std::abs(d.imag())));
    };

    if (cfg.svd_threshold == 0.0) {
        DenseState st;
        st.psi.assign(init.begin(), init.end());
        st.dpsi.assign(dinit.begin(), dinit.end());
        st.n = 1;
        for (int j = 1; j <= k; ++j) {
            const auto term = make_attachment(kernel, VariableKind::terminal, j, st.n, scale, free);
            record(dense_attach(st, term, -1));
            if (j < k) {
                const auto mid = make_attachment(kernel, VariableKind::middle, j, st.n, scale, free);
                dense_attach(st, mid, std::min(st.n, cfg.memory_cutoff - 1));
            }
        }
        run.bond_dim_max = 1 << (2 * std::min(cfg.memory_cutoff, k));
        return run;
    }

    Truncation tr;
    tr.threshold = cfg.svd_threshold;
    tr.max_bond = cfg.max_bond;
    Mps mps;
    {
        // the dual site selects the value or derivative row of the first held site
        Site dual;
        dual.a = {CMat::Zero(1, 2), CMat::Zero(1, 2)};
        dual.a[0](0, 0) = 1.0;
        dual.a[1](0, 1) = 1.0;
        Site first;
        first.a.assign(4, CMat::Zero(2, 1));
        for (int a = 0; a < 4; ++a) {
            first.a[static_cast<std::size_t>(a)](0, 0) = init[static_cast<std::size_t>(a)];
            first.a[static_cast<std::size_t>(a)](1, 0) = dinit[static_cast<std::size_t>(a)];
        }
        mps.sites = {dual, first};
    }
    for (int j = 1; j <= k; ++j) {
        const auto term = make_attachment(kernel, VariableKind::terminal, j, mps.held(), scale, free);
        record(contract_readout(apply_attachment(mps, term, true)));
        if (j < k) {
            const auto mid = make_attachment(kernel, VariableKind::middle, j, mps.held(), scale, free);
            auto chain = apply_attachment(mps, mid, false);
            if (mps.held() >= cfg.memory_cutoff) drop_oldest(chain);
            compress(chain, tr);
            mps.sites = std::move(chain);
        }
    }
    run.bond_dim_max = tr.bond_max;
    run.discarded_weight = tr.discarded;
    return run;
}

TempoRun tempo_run(const TempoConfig& cfg) {
    cfg.validate();
    const int mem = std::min(cfg.memory_cutoff, cfg.steps);
    return tempo_run(cfg, memory_kernel(cfg.sd, cfg.beta, 0.5 * cfg.dt, 2 * mem + 1));
}

std::vector<double> propagate(const TempoConfig& cfg) { return tempo_run(cfg).p0; }

std::vector<double> propagate_beta_derivative(const TempoConfig& cfg) { return tempo_run(cfg).dp0_dbeta; }

std::vector<TempoFisherPoint> tempo_fisher(const TempoConfig& cfg, const std::vector<double>& temperatures,
                                           const TempoFisherOptions& opts) {
    cfg.validate();
    std::vector<TempoFisherPoint> out(temperatures.size());
    parallel_for(temperatures.size(), opts.jobs, [&](std::size_t i) {
        TempoConfig c = cfg;
        c.beta = Thermal::from_temperature(temperatures[i]).beta();
        const int mem = std::min(c.memory_cutoff, c.steps);
        const auto kernel = memory_kernel(c.sd, c.beta, 0.5 * c.dt, 2 * mem + 1);
        const auto run = tempo_run(c, kernel);
        TempoFisherPoint& pt = out[i];
        pt.temperature = temperatures[i];
        pt.p0 = run.p0.back();
        pt.dp0_dbeta = run.dp0_dbeta.back();
        const double var = pt.p0 * (1.0 - pt.p0);
        if (!(var > kProbabilityFloor)) {
            pt.dropped = true;
        } else {
            const double dT = -c.beta * c.beta * pt.dp0_dbeta;
            pt.fisher = dT * dT / var;
        }
        if (opts.check_memory && c.memory_cutoff > 2 && c.steps > c.memory_cutoff - 2) {
            TempoConfig shorter = c;
            shorter.memory_cutoff -= 2;
            const auto coarse = tempo_run(shorter, kernel);
            for (std::size_t j = 0; j < coarse.p0.size(); ++j) {
                // steps j + 1 ≤ K keep the whole history and are exact in K
                const bool exact = static_cast<int>(j) + 1 <= c.memory_cutoff;
                pt.step_delta_k.push_back(exact ? 0.0 : std::abs(coarse.p0[j] - run.p0[j]));
            }
            pt.delta_k = pt.step_delta_k.back();
        }
        pt.converged = pt.delta_k < opts.convergence_tolerance;
        pt.run = run;
    });
    return out;
}

std::string kernel_cache_key(const SpectralDensity& sd, double beta, double dt, int max_lag) {
    // FNV-1a over the bit patterns of the defining parameters
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (double x : {sd.alpha, sd.s, sd.wc, beta, dt}) mix(std::bit_cast<std::uint64_t>(x));
    mix(static_cast<std::uint64_t>(max_lag));
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("kernel cache: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_kernel(const std::string& path, const BathKernel& kernel) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("kernel cache: cannot write " + path);
    os.write("TEMPOK01", 8);
    put_u64(os, kernel.eta.size());
    for (const auto* v : {&kernel.eta, &kernel.mu}) {
        for (const Complex& c : *v) {
            put_u64(os, std::bit_cast<std::uint64_t>(c.real()));
            put_u64(os, std::bit_cast<std::uint64_t>(c.imag()));
        }
    }
    if (!os) throw std::runtime_error("kernel cache: write failed for " + path);
}

BathKernel load_kernel(const std::string& path, double dt_half) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("kernel cache: cannot read " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "TEMPOK01", 8) != 0) throw std::runtime_error("kernel cache: bad header in " + path);
    const std::uint64_t n = get_u64(is);
    if (n == 0 || n > (1U << 20)) throw std::runtime_error("kernel cache: implausible lag count");
    BathKernel k;
    k.dt_half = dt_half;
    for (auto* v : {&k.eta, &k.mu}) {
        for (std::uint64_t i = 0; i < n; ++i) {
            const double re = std::bit_cast<double>(get_u64(is));
            const double im = std::bit_cast<double>(get_u64(is));
            v->emplace_back(re, im);
        }
    }
    return k;
}

}  // namespace thermo
