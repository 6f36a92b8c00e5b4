#include "thermo/scenario.hpp"

#include "thermo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace thermo {

namespace fs = std::filesystem;

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::qfi: return "qfi";
        case ScenarioKind::povm_fisher: return "povm-fisher";
        case ScenarioKind::exp_resolution: return "exp-resolution";
        case ScenarioKind::noisy: return "noisy";
        case ScenarioKind::qubit_shorttime: return "qubit-shorttime";
        case ScenarioKind::tempo: return "tempo";
    }
    return "unknown";
}

std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name) {
    for (auto k : {ScenarioKind::qfi, ScenarioKind::povm_fisher, ScenarioKind::exp_resolution, ScenarioKind::noisy,
                   ScenarioKind::qubit_shorttime, ScenarioKind::tempo}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

std::vector<double> TemperatureGrid::values() const {
    if (log_spacing) return log_grid(t_min, t_max, points);
    std::vector<double> out(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = t_min + (t_max - t_min) * i / (points - 1);
    out.back() = t_max;
    return out;
}

// Parsing ------------------------------------------------------------------------

namespace {

std::set<std::string> allowed_parameters(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::qfi: return {"spectrum"};
        case ScenarioKind::povm_fisher: return {"spectrum", "povm", "rounds", "gamma", "fit_decades"};
        case ScenarioKind::exp_resolution: return {"d0", "alpha_dos", "gamma", "kappa", "rounds", "fit_decades"};
        case ScenarioKind::noisy:
            return {"d0", "alpha_dos", "gamma", "kappa", "eta", "model", "rounds", "fit_decades"};
        case ScenarioKind::qubit_shorttime: return {"alpha", "s", "wc", "t", "mode", "rounds"};
        case ScenarioKind::tempo:
            return {"alpha", "s", "wc", "omega", "dt", "steps", "memory_cutoff", "svd_threshold", "max_bond",
                    "convergence_tolerance", "rounds"};
    }
    return {};
}

void reject_unknown(const IniDocument& doc, const std::string& section, const std::set<std::string>& allowed) {
    const auto* s = doc.section(section);
    if (!s) return;
    for (const auto& [key, value] : *s) {
        if (!allowed.count(key)) doc.fail(section, key, "unknown key for this scenario");
    }
}

double positive(const IniDocument& doc, const std::string& section, const std::string& key) {
    const double v = doc.number(section, key);
    if (!(v > 0.0)) doc.fail(section, key, "must be positive");
    return v;
}

double positive_or(const IniDocument& doc, const std::string& section, const std::string& key, double fallback) {
    return doc.has(section, key) ? positive(doc, section, key) : fallback;
}

int int_in(const IniDocument& doc, const std::string& section, const std::string& key, long long lo, long long hi,
           std::optional<long long> fallback = std::nullopt) {
    if (!doc.has(section, key) && fallback) return static_cast<int>(*fallback);
    const long long v = doc.integer(section, key);
    if (v < lo || v > hi) {
        doc.fail(section, key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<int>(v);
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).lexically_normal().string();
}

// Rethrows file-format errors as they are; constructor complaints become anchored config errors.
template <typename F>
auto anchored(const IniDocument& doc, const std::string& section, const std::string& key, F make) {
    try {
        return make();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        doc.fail(section, key, e.what());
    }
}

Dos read_dos(const IniDocument& doc) {
    const double d0 = doc.number_or("parameters", "d0", 1.0);
    if (!(d0 >= 1.0)) doc.fail("parameters", "d0", "must be at least 1");
    const double a = positive(doc, "parameters", "alpha_dos");
    const double g = positive(doc, "parameters", "gamma");
    return Dos(d0, a, g);
}

SpectralDensity read_bath(const IniDocument& doc) {
    const double alpha = doc.number("parameters", "alpha");
    if (!(alpha >= 0.0)) doc.fail("parameters", "alpha", "must be non-negative");
    return SpectralDensity(alpha, positive(doc, "parameters", "s"), positive(doc, "parameters", "wc"));
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& source, const std::string& base_dir) {
    std::ostringstream bytes;
    bytes << in.rdbuf();
    std::istringstream text(bytes.str());
    const IniDocument doc = IniDocument::parse(text, source);

    for (const auto& name : doc.section_names()) {
        if (name != "scenario" && name != "grid" && name != "parameters") {
            throw ConfigError(source, doc.section_line(name), "unknown section [" + name + "]");
        }
    }
    if (!doc.section("scenario")) throw ConfigError(source, 0, "missing section [scenario]");
    if (!doc.section("grid")) throw ConfigError(source, 0, "missing section [grid]");
    reject_unknown(doc, "scenario", {"kind", "units", "output"});
    reject_unknown(doc, "grid", {"t_min", "t_max", "points", "log"});

    Scenario sc;
    sc.source = source;
    std::string hashed = bytes.str();  // referenced data files are appended below
    const std::string kind = doc.string("scenario", "kind");
    const auto parsed_kind = scenario_kind_from_string(kind);
    if (!parsed_kind) {
        doc.fail("scenario", "kind",
                 "unknown kind '" + kind + "' (qfi, povm-fisher, exp-resolution, noisy, qubit-shorttime, tempo)");
    }
    sc.kind = *parsed_kind;
    sc.units = doc.string("scenario", "units");
    sc.name = doc.string_or("scenario", "output", fs::path(source).stem().string());
    if (sc.name.find('/') != std::string::npos) doc.fail("scenario", "output", "must be a file stem, not a path");

    auto& g = sc.grid;
    g.t_min = positive(doc, "grid", "t_min");
    g.t_max = positive(doc, "grid", "t_max");
    if (!(g.t_min < g.t_max)) doc.fail("grid", "t_max", "must exceed t_min");
    g.points = int_in(doc, "grid", "points", 4, 100000);
    g.log_spacing = doc.boolean_or("grid", "log", true);
    sc.grid_line = doc.line_of("grid", "t_min");

    reject_unknown(doc, "parameters", allowed_parameters(sc.kind));
    const std::string P = "parameters";
    if (sc.kind != ScenarioKind::qfi) {
        sc.rounds = doc.integer_or(P, "rounds", 1);
        if (sc.rounds < 1) doc.fail(P, "rounds", "must be at least 1");
    }
    sc.fit_decades = positive_or(doc, P, "fit_decades", 1.0);

    switch (sc.kind) {
        case ScenarioKind::qfi:
        case ScenarioKind::povm_fisher: {
            const std::string path = resolve(base_dir, doc.string(P, "spectrum"));
            sc.spectrum = anchored(doc, P, "spectrum", [&] { return read_spectrum(path); });
            hashed += file_bytes(path);
            if (sc.kind == ScenarioKind::povm_fisher) {
                const std::string povm = doc.string(P, "povm");
                if (povm != "projective") {
                    const std::string ppath = resolve(base_dir, povm);
                    sc.povm = anchored(doc, P, "povm", [&] { return read_povm(ppath); });
                    hashed += file_bytes(ppath);
                    if (sc.povm->level_count() != sc.spectrum->size()) {
                        doc.fail(P, "povm", "POVM has " + std::to_string(sc.povm->level_count()) +
                                                " levels but the spectrum has " +
                                                std::to_string(sc.spectrum->size()));
                    }
                }
                if (doc.has(P, "gamma")) sc.gamma = positive(doc, P, "gamma");
            }
            break;
        }
        case ScenarioKind::exp_resolution:
        case ScenarioKind::noisy: {
            sc.dos = anchored(doc, P, "alpha_dos", [&] { return read_dos(doc); });
            sc.gamma = sc.dos.gamma;
            sc.kappa = positive(doc, P, "kappa");
            if (sc.kind == ScenarioKind::noisy) {
                sc.eta = doc.number(P, "eta");
                if (!(sc.eta > 0.0 && sc.eta < 1.0)) doc.fail(P, "eta", "must lie in (0, 1)");
                const std::string model = doc.string(P, "model");
                if (model == "white") {
                    sc.noise = NoiseModel::white;
                } else if (model == "alt") {
                    sc.noise = NoiseModel::alt;
                } else {
                    doc.fail(P, "model", "expected white or alt, got '" + model + "'");
                }
            }
            break;
        }
        case ScenarioKind::qubit_shorttime: {
            sc.sd = anchored(doc, P, "alpha", [&] { return read_bath(doc); });
            sc.probe_time = positive(doc, P, "t");
            sc.mode = anchored(doc, P, "mode", [&] { return coupling_mode_from_string(doc.string(P, "mode")); });
            break;
        }
        case ScenarioKind::tempo: {
            auto& c = sc.tempo;
            c.sd = anchored(doc, P, "alpha", [&] { return read_bath(doc); });
            sc.sd = c.sd;
            c.omega = doc.number_or(P, "omega", 1.0);
            if (!(c.omega >= 0.0)) doc.fail(P, "omega", "must be non-negative");
            c.dt = positive(doc, P, "dt");
            c.steps = int_in(doc, P, "steps", 1, 100000);
            c.memory_cutoff = int_in(doc, P, "memory_cutoff", 1, 10000);
            c.svd_threshold = doc.number_or(P, "svd_threshold", 0.0);
            if (!(c.svd_threshold >= 0.0 && c.svd_threshold < 1.0)) doc.fail(P, "svd_threshold", "must lie in [0, 1)");
            c.max_bond = int_in(doc, P, "max_bond", 1, 1 << 20, 512);
            if (c.svd_threshold == 0.0 && c.memory_cutoff > 13) {
                doc.fail(P, "memory_cutoff", "exact contraction (svd_threshold = 0) supports at most 13");
            }
            sc.convergence_tolerance = positive_or(doc, P, "convergence_tolerance", 1e-5);
            sc.probe_time = c.dt * c.steps;
            break;
        }
    }
    sc.config_hash = content_hash(hashed);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, 0, "cannot open file");
    const fs::path parent = fs::path(path).parent_path();
    return parse_scenario(in, path, parent.empty() ? "." : parent.string());
}

// Bounds -----------------------------------------------------------------------------

BoundsReport verify_bounds(const BoundsInput& input, double exponent_tolerance) {
    BoundsReport r;
    if (input.gamma && input.expansion && input.classification) {
        r.frc = verify_frc_bound(*input.expansion, *input.classification, *input.gamma);
    }
    r.fit = fit_power_law_lowest(input.temperatures, input.fisher, 1.0);
    if (input.gamma) {
        r.exponent_margin = r.fit.exponent - (*input.gamma - 1.0);
        r.exponent_pass = *r.exponent_margin >= -exponent_tolerance;
    }
    r.tf = verify_tF_limit(input.temperatures, input.fisher);
    r.absolute = absolute_error_scaling(input.temperatures, input.fisher, input.rounds);
    r.pass = r.tf.pass && r.exponent_pass && (!r.frc || r.frc->pass);
    return r;
}

std::string BoundsReport::text() const {
    std::ostringstream o;
    o << std::setprecision(6);
    if (frc) {
        o << "resolution bound on gaps (Delta_1 >= 1 + gamma): " << (frc->pass ? "PASS" : "FAIL") << '\n';
        for (const auto& e : frc->entries) {
            o << "  outcome " << e.outcome << ": Delta_1 = " << e.delta1 << ", margin " << e.margin << '\n';
        }
    } else {
        o << "resolution bound on gaps: not applicable\n";
    }
    o << "Fisher exponent (lowest decade): " << fit.exponent << " +- " << fit.exponent_error << '\n';
    if (exponent_margin) {
        o << "exponent margin over gamma - 1: " << *exponent_margin << " (" << (exponent_pass ? "PASS" : "FAIL")
          << ")\n";
    }
    o << "T*F -> 0: " << (tf.pass ? "PASS" : "FAIL") << " (decreasing " << (tf.decreasing_lowest_decade ? "yes" : "no")
      << ", final/max " << tf.final_over_max << ", tail slope " << tf.tail_slope << ")\n";
    o << "relative error dT^2/T growth over two decades: " << absolute.growth_two_decades
      << (absolute.relative_diverges ? " (>= 10)" : " (< 10 within this window)") << '\n';
    o << "absolute error dT^2 slope: " << absolute.absolute_slope
      << (absolute.absolute_vanishes ? " (vanishing)" : " (not vanishing)") << '\n';
    o << "bounds: " << (pass ? "PASS" : "FAIL") << '\n';
    return o.str();
}

// Running ------------------------------------------------------------------------------

namespace {

using Metadata = std::vector<std::pair<std::string, std::string>>;

Metadata metadata_for(const Scenario& sc) {
    return {{"config_hash", sc.config_hash},
            {"version", kVersion},
            {"kind", to_string(sc.kind)},
            {"units", sc.units},
            {"config", fs::path(sc.source).filename().string()}};
}

struct GapData {
    std::vector<std::vector<double>> gaps;
    std::vector<std::vector<double>> probabilities;
};

void fit_gaps(const Scenario& sc, ScenarioResult& res, const std::vector<double>& temps, const GapData& data,
              Eigen::Index reference, std::ostringstream& summary) {
    GapFitOptions opts;
    opts.window_decades = sc.fit_decades;
    try {
        res.expansion = extract_gap_expansion(temps, data.gaps, data.probabilities, reference, opts);
        res.classification = classify_outcomes(*res.expansion);
    } catch (const std::exception& e) {
        summary << "gap expansion: unavailable (" << e.what() << ")\n";
    }
}

void fit_gaps(const Scenario& sc, ScenarioResult& res, const Spectrum& spectrum, const Povm& povm,
              const std::vector<double>& temps, std::ostringstream& summary) {
    GapFitOptions opts;
    opts.window_decades = sc.fit_decades;
    try {
        res.expansion = extract_gap_expansion(spectrum, povm, temps, opts);
        res.classification = classify_outcomes(*res.expansion);
    } catch (const std::exception& e) {
        summary << "gap expansion: unavailable (" << e.what() << ")\n";
    }
}

void describe_gaps(const ScenarioResult& res, std::ostringstream& o) {
    if (!res.expansion || !res.classification) return;
    auto list = [&](const char* name, const std::vector<Eigen::Index>& set) {
        o << name << ": {";
        for (std::size_t i = 0; i < set.size(); ++i) o << (i ? ", " : "") << set[i];
        o << "}\n";
    };
    o << "gap expansion over T in [" << res.expansion->t_min << ", " << res.expansion->t_max << "], reference outcome "
      << res.expansion->reference << '\n';
    for (std::size_t m = 0; m < res.expansion->outcomes.size(); ++m) {
        const auto& c = res.expansion->outcomes[m];
        o << "  outcome " << m << ": Delta_0 = " << c.coefficient(0) << " +- " << c.standard_error(0)
          << ", Delta_1 = " << c.coefficient(1) << " +- " << c.standard_error(1) << '\n';
    }
    list("ground set", res.classification->ground_set);
    list("sub-exponential set", res.classification->sub_exponential_set);
    list("exponential set", res.classification->exponential_set);
}

void describe_fit(const char* label, const std::vector<double>& t, const std::vector<double>& f, double decades,
                  std::optional<PowerLawFit>* store, std::ostringstream& o) {
    try {
        const auto fit = fit_power_law_lowest(t, f, decades);
        o << label << " exponent over T in [" << fit.t_min << ", " << fit.t_max << "]: " << fit.exponent << " +- "
          << fit.exponent_error << '\n';
        if (store) *store = fit;
    } catch (const std::exception& e) {
        o << label << " exponent: unavailable (" << e.what() << ")\n";
    }
}

std::vector<std::string> scaling_header() { return {"T", "F", "T*F", "deltaT2", "deltaT2_over_T"}; }

CsvRow scaling_row(double t, double f, long long rounds) {
    const double d = cramer_rao_variance_bound(f, rounds);
    return numeric_row({t, f, t * f, d, d / t});
}

void emit(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, const std::string& suffix,
          const std::vector<std::string>& header, const std::vector<CsvRow>& rows) {
    fs::create_directories(opts.out_dir);
    const std::string path = (fs::path(opts.out_dir) / (sc.name + suffix + ".csv")).string();
    write_csv(path, metadata_for(sc), header, rows);
    res.files.push_back(path);
}

void run_qfi(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, std::ostringstream& o) {
    const auto& t = res.temperatures;
    res.fisher.resize(t.size());
    parallel_for(t.size(), opts.jobs, [&](std::size_t i) {
        res.fisher[i] = quantum_fisher_information(*sc.spectrum, Thermal::from_temperature(t[i]));
    });
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) rows.push_back(numeric_row({t[i], res.fisher[i]}));
    emit(sc, opts, res, "", {"T", "F_Q"}, rows);
    o << "levels: " << sc.spectrum->size() << '\n';
    o << "F_Q range: [" << *std::min_element(res.fisher.begin(), res.fisher.end()) << ", "
      << *std::max_element(res.fisher.begin(), res.fisher.end()) << "]\n";
}

void run_povm(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, std::ostringstream& o) {
    const auto& t = res.temperatures;
    const Povm povm = sc.povm ? *sc.povm : Povm::projective(sc.spectrum->size());
    // the gap variance does not depend on the reference; the likeliest outcome at the lowest T keeps gaps finite
    const Eigen::Index ref =
        select_reference_outcome(outcome_probabilities(*sc.spectrum, povm, Thermal::from_temperature(t.front())));
    res.fisher.resize(t.size());
    parallel_for(t.size(), opts.jobs, [&](std::size_t i) {
        const auto point = Thermal::from_temperature(t[i]);
        res.fisher[i] = fisher_gap_form(povm_energetics(*sc.spectrum, povm, point, ref), point);
    });
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) rows.push_back(scaling_row(t[i], res.fisher[i], sc.rounds));
    emit(sc, opts, res, "", scaling_header(), rows);
    o << "levels: " << sc.spectrum->size() << ", outcomes: " << povm.outcome_count()
      << (sc.povm ? "" : " (projective)") << '\n';
    fit_gaps(sc, res, *sc.spectrum, povm, t, o);
    describe_gaps(res, o);
    describe_fit("Fisher", t, res.fisher, sc.fit_decades, &res.fit, o);
}

void run_exp_family(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, std::ostringstream& o) {
    const auto& t = res.temperatures;
    const bool noisy = sc.kind == ScenarioKind::noisy;
    const auto fine = !noisy ? exp_binary_elements()
                             : (sc.noise == NoiseModel::white ? white_noise_elements(sc.eta) : alt_noise_elements(sc.eta));
    const auto observed = noisy ? merge_elements(fine, noise_coarse_graining()) : fine;
    std::vector<double> fine_f(t.size()), leading(t.size());
    GapData data{std::vector<std::vector<double>>(fine.size(), std::vector<double>(t.size())),
                 std::vector<std::vector<double>>(fine.size(), std::vector<double>(t.size()))};
    std::vector<int> missing(t.size(), 0);
    res.fisher.resize(t.size());
    parallel_for(t.size(), opts.jobs, [&](std::size_t i) {
        const auto point = Thermal::from_temperature(t[i]);
        const auto state = exp_family_state(sc.dos, sc.kappa, point);
        res.fisher[i] = exp_family_fisher(state, observed, point);
        fine_f[i] = exp_family_fisher(state, fine, point);
        if (!noisy) {
            leading[i] = exp_povm_fisher_leading(sc.dos, sc.kappa, point).value;
        } else if (sc.noise == NoiseModel::white) {
            leading[i] = white_noise_coarse_fisher_leading(sc.dos, sc.kappa, sc.eta, point).value;
        } else {
            leading[i] = alt_noise_fisher_leading(sc.dos, sc.kappa, sc.eta, point).value;
        }
        const auto d = exp_family_energetics(state, fine, point);
        for (std::size_t m = 0; m < fine.size(); ++m) {
            data.probabilities[m][i] = d.probabilities[static_cast<Eigen::Index>(m)];
            if (d.gaps[m]) {
                data.gaps[m][i] = *d.gaps[m];
            } else {
                missing[i] = 1;
            }
        }
    });
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto row = scaling_row(t[i], res.fisher[i], sc.rounds);
        row.push_back(format_number(leading[i]));
        if (noisy) row.push_back(format_number(fine_f[i]));
        rows.push_back(std::move(row));
    }
    auto header = scaling_header();
    header.push_back("F_leading");
    if (noisy) header.push_back("F_fine");
    emit(sc, opts, res, "", header, rows);

    o << "DOS: d0 = " << sc.dos.d0 << ", alpha = " << sc.dos.alpha << ", gamma = " << sc.dos.gamma
      << "; kappa = " << sc.kappa;
    if (noisy) o << "; eta = " << sc.eta << ", model = " << (sc.noise == NoiseModel::white ? "white" : "alt");
    o << '\n';
    if (std::any_of(missing.begin(), missing.end(), [](int m) { return m != 0; })) {
        o << "gap expansion: unavailable (an outcome probability underflows on the grid)\n";
    } else {
        fit_gaps(sc, res, t, data, 0, o);
        describe_gaps(res, o);
    }
    describe_fit(noisy ? "observed (coarse) Fisher" : "Fisher", t, res.fisher, sc.fit_decades, &res.fit, o);
    if (noisy) describe_fit("fine-grained Fisher", t, fine_f, sc.fit_decades, nullptr, o);
    o << "expected exponents: gamma - 1 = " << sc.dos.gamma - 1.0;
    if (noisy) o << " (fine), 2 gamma = " << 2.0 * sc.dos.gamma << " (coarse)";
    o << '\n';
}

void run_qubit(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, std::ostringstream& o) {
    const auto& t = res.temperatures;
    std::vector<double> p1(t.size()), lead(t.size());
    res.fisher.resize(t.size());
    parallel_for(t.size(), opts.jobs, [&](std::size_t i) {
        const auto point = Thermal::from_temperature(t[i]);
        if (sc.mode == CouplingMode::excitation_preserving) {
            const auto p = qubit_p1_preserving(sc.sd, sc.probe_time, point);
            p1[i] = p.exact;
            lead[i] = p.leading;
        } else {
            const auto p = qubit_p1_spin_boson(sc.sd, sc.probe_time, point);
            p1[i] = p.exact;
            lead[i] = p.leading_T_term + p.constant_term;
        }
        res.fisher[i] = qubit_fisher_shorttime(sc.sd, sc.probe_time, point, sc.mode);
    });
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto row = scaling_row(t[i], res.fisher[i], sc.rounds);
        row.push_back(format_number(p1[i]));
        row.push_back(format_number(lead[i]));
        rows.push_back(std::move(row));
    }
    auto header = scaling_header();
    header.push_back("p1");
    header.push_back("p1_leading");
    emit(sc, opts, res, "", header, rows);
    o << "bath: alpha = " << sc.sd.alpha << ", s = " << sc.sd.s << ", wc = " << sc.sd.wc << "; t = " << sc.probe_time
      << ", mode = " << to_string(sc.mode) << '\n';
    o << "short-time regime: " << (short_time_valid(sc.sd, sc.probe_time) ? "valid" : "NOT valid") << '\n';
    describe_fit("Fisher", t, res.fisher, 1.0, &res.fit, o);
    o << "expected exponent: "
      << (sc.mode == CouplingMode::excitation_preserving ? sc.sd.s - 1.0 : 2.0 * sc.sd.s) << '\n';
}

bool usable(const TempoFisherPoint& p) { return !p.dropped && p.fisher > 0.0 && std::isfinite(p.fisher); }

void run_tempo(const Scenario& sc, const RunOptions& opts, ScenarioResult& res, std::ostringstream& o) {
    const auto& t = res.temperatures;
    TempoFisherOptions fo;
    fo.convergence_tolerance = sc.convergence_tolerance;
    fo.jobs = opts.jobs;
    res.tempo_points = tempo_fisher(sc.tempo, t, fo);
    res.fisher.clear();
    std::vector<double> ut, uf;
    for (const auto& p : res.tempo_points) {
        res.fisher.push_back(p.fisher);
        if (usable(p)) {
            ut.push_back(p.temperature);
            uf.push_back(p.fisher);
        }
    }
    double lo = 0.0, hi = -1.0;
    if (ut.size() >= 2) {
        try {
            res.fit = fit_power_law_lowest(ut, uf, sc.fit_decades);
            lo = res.fit->t_min;
            hi = res.fit->t_max;
        } catch (const std::exception& e) {
            o << "slope fit failed: " << e.what() << '\n';
        }
    }
    std::vector<CsvRow> grid_rows, run_rows;
    const int k_used = sc.tempo.memory_cutoff;
    for (const auto& p : res.tempo_points) {
        const bool in_window = usable(p) && p.temperature >= lo && p.temperature <= hi;
        grid_rows.push_back({format_number(p.temperature), format_number(p.fisher), in_window ? "1" : "0"});
        for (std::size_t j = 0; j < p.run.p0.size(); ++j) {
            const bool conv = p.step_delta_k.empty() || p.step_delta_k[j] < sc.convergence_tolerance;
            run_rows.push_back({format_number(p.temperature), std::to_string(j + 1),
                                format_number(sc.tempo.dt * static_cast<double>(j + 1)), format_number(p.run.p0[j]),
                                format_number(p.run.dp0_dbeta[j]), conv ? std::to_string(k_used) : "0",
                                std::to_string(p.run.bond_dim_max)});
        }
    }
    emit(sc, opts, res, "", {"T", "F", "slope_window_flag"}, grid_rows);
    emit(sc, opts, res, "_runs", {"T", "step", "time", "p0", "dp0_dbeta", "converged_K", "bond_dim_max"}, run_rows);

    const auto& c = sc.tempo;
    o << "bath: alpha = " << c.sd.alpha << ", s = " << c.sd.s << ", wc = " << c.sd.wc << "; omega = " << c.omega
      << ", dt = " << c.dt << ", steps = " << c.steps << " (t = " << c.dt * c.steps << "), K = " << c.memory_cutoff
      << (c.svd_threshold > 0.0 ? ", MPS" : ", exact contraction") << '\n';
    std::size_t dropped = 0, unconverged = 0;
    double worst = 0.0;
    for (const auto& p : res.tempo_points) {
        dropped += p.dropped;
        unconverged += !p.converged;
        worst = std::max(worst, p.delta_k);
    }
    o << "dropped points: " << dropped << ", memory-unconverged points: " << unconverged << " (max dK = " << worst
      << ", tolerance " << sc.convergence_tolerance << ")\n";
    if (res.fit) {
        o << "slope over T in [" << res.fit->t_min << ", " << res.fit->t_max << "]: " << res.fit->exponent << " +- "
          << res.fit->exponent_error << " (" << res.fit->points << " points)\n";
        o << "expected low-T slope 2s = " << 2.0 * c.sd.s << '\n';
    } else {
        o << "slope: unavailable (fewer than two usable points)\n";
    }
}

}  // namespace

ScenarioResult run_scenario(const Scenario& sc, const RunOptions& opts) {
    ScenarioResult res;
    res.temperatures = sc.grid.values();
    std::ostringstream o;
    o << std::setprecision(6);
    o << "scenario: " << sc.name << " (" << to_string(sc.kind) << ")\n";
    o << "units: " << sc.units << '\n';
    o << "config hash: " << sc.config_hash << ", version " << kVersion << '\n';
    o << "grid: " << sc.grid.points << " points, T in [" << sc.grid.t_min << ", " << sc.grid.t_max << "]"
      << (sc.grid.log_spacing ? " (log)" : " (linear)") << '\n';
    switch (sc.kind) {
        case ScenarioKind::qfi: run_qfi(sc, opts, res, o); break;
        case ScenarioKind::povm_fisher: run_povm(sc, opts, res, o); break;
        case ScenarioKind::exp_resolution:
        case ScenarioKind::noisy: run_exp_family(sc, opts, res, o); break;
        case ScenarioKind::qubit_shorttime: run_qubit(sc, opts, res, o); break;
        case ScenarioKind::tempo: run_tempo(sc, opts, res, o); break;
    }
    res.summary = o.str();
    const std::string path = (fs::path(opts.out_dir) / (sc.name + "_summary.txt")).string();
    std::ofstream(path, std::ios::binary | std::ios::trunc) << res.summary;
    res.files.push_back(path);
    return res;
}

BoundsInput bounds_input(const Scenario& sc, const ScenarioResult& res) {
    BoundsInput in;
    in.rounds = sc.rounds;
    in.gamma = sc.gamma;
    in.expansion = res.expansion;
    in.classification = res.classification;
    if (sc.kind == ScenarioKind::tempo) {
        for (const auto& p : res.tempo_points) {
            if (usable(p)) {
                in.temperatures.push_back(p.temperature);
                in.fisher.push_back(p.fisher);
            }
        }
    } else {
        in.temperatures = res.temperatures;
        in.fisher = res.fisher;
    }
    return in;
}

// Reference TEMPO sweep ------------------------------------------------------------------------------------

std::string Figure3Report::text() const {
    std::ostringstream o;
    o << std::setprecision(6);
    o << "variant: " << variant << " (s = " << s << ")\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        o << "  Omega t = " << curves[c].probe_time << ": ";
        if (curves[c].fit) {
            o << "slope " << curves[c].fit->exponent << " over T in [" << curves[c].fit->t_min << ", "
              << curves[c].fit->t_max << "]";
        } else {
            o << "slope unavailable";
        }
        o << (c == target_curve ? "  <- target" : "") << '\n';
    }
    o << "slope target " << slope_target << " +- " << slope_tolerance << ": " << (slope_pass ? "PASS" : "FAIL") << '\n';
    o << "short-time overlay at Omega t = 0.2 (max relative deviation of F over T in [0.05, 0.5]): "
      << overlay_max_deviation << " -> " << (overlay_pass ? "PASS" : "FAIL") << " (10%)\n";
    for (const auto& f : flags) o << "flag: " << f << '\n';
    return o.str();
}

Figure3Report reproduce_figure3(const std::string& variant, const RunOptions& opts) {
    Figure3Report r;
    r.variant = variant;
    if (variant == "subohmic") {
        r.s = 0.5;
    } else if (variant == "ohmic") {
        r.s = 1.0;
    } else {
        throw std::invalid_argument("reproduce_figure3: variant must be ohmic or subohmic");
    }
    r.slope_target = 2.0 * r.s;

    TempoConfig cfg;
    cfg.omega = 1.0;
    cfg.sd = SpectralDensity(0.1, r.s, 10.0);
    cfg.dt = 0.1;
    cfg.memory_cutoff = 10;
    const std::vector<int> probe_steps = {2, 5, 10, 20};
    cfg.steps = probe_steps.back();
    r.target_curve = 2;  // Ωt = 1

    // descending grid, three decades
    auto grid = log_grid(1e-3, 1.0, 13);
    std::reverse(grid.begin(), grid.end());
    r.temperatures = grid;

    TempoFisherOptions fo;
    fo.jobs = opts.jobs;
    r.points = tempo_fisher(cfg, grid, fo);

    for (int k : probe_steps) {
        Figure3Curve curve;
        curve.steps = k;
        curve.probe_time = cfg.dt * k;
        std::vector<double> ut, uf;
        for (const auto& p : r.points) {
            const double p0 = p.run.p0[static_cast<std::size_t>(k - 1)];
            const double var = p0 * (1.0 - p0);
            const double beta = 1.0 / p.temperature;
            const double dT = -beta * beta * p.run.dp0_dbeta[static_cast<std::size_t>(k - 1)];
            const double f = var > kProbabilityFloor ? dT * dT / var : 0.0;
            curve.fisher.push_back(f);
            if (f > 0.0 && std::isfinite(f)) {
                ut.push_back(p.temperature);
                uf.push_back(f);
            } else {
                r.flags.push_back("Omega t = " + format_number(curve.probe_time) + ", T = " +
                                  format_number(p.temperature) + ": zero-variance point dropped");
            }
            if (!p.step_delta_k.empty() && p.step_delta_k[static_cast<std::size_t>(k - 1)] >= fo.convergence_tolerance) {
                r.flags.push_back("Omega t = " + format_number(curve.probe_time) + ", T = " +
                                  format_number(p.temperature) + ": memory not converged, dK = " +
                                  format_number(p.step_delta_k[static_cast<std::size_t>(k - 1)]));
            }
        }
        if (ut.size() >= 2) {
            try {
                curve.fit = fit_power_law_lowest(ut, uf, 1.0);
            } catch (const std::exception& e) {
                r.flags.push_back("Omega t = " + format_number(curve.probe_time) + ": fit failed: " + e.what());
            }
        }
        r.curves.push_back(std::move(curve));
    }
    const auto& target = r.curves[r.target_curve];
    r.slope_pass = target.fit && std::abs(target.fit->exponent - r.slope_target) <= r.slope_tolerance;

    // overlay at Ωt = 0.2
    std::vector<CsvRow> overlay;
    const auto& early = r.curves.front();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto point = Thermal::from_temperature(grid[i]);
        const double p1_tempo = 1.0 - r.points[i].run.p0[static_cast<std::size_t>(early.steps - 1)];
        const double p1_short = qubit_p1_spin_boson(cfg.sd, early.probe_time, point).exact;
        const double f_short = qubit_fisher_shorttime(cfg.sd, early.probe_time, point, CouplingMode::spin_boson);
        overlay.push_back(numeric_row({grid[i], p1_tempo, p1_short, early.fisher[i], f_short}));
        if (grid[i] >= 0.05 * (1 - 1e-12) && grid[i] <= 0.5 * (1 + 1e-12)) {
            r.overlay_max_deviation = std::max(r.overlay_max_deviation, std::abs(early.fisher[i] / f_short - 1.0));
        }
    }
    r.overlay_pass = r.overlay_max_deviation <= 0.10;

    std::ostringstream canon;
    canon << std::setprecision(17) << variant << ' ' << cfg.sd.alpha << ' ' << cfg.sd.s << ' ' << cfg.sd.wc << ' '
          << cfg.dt << ' ' << cfg.memory_cutoff << ' ' << cfg.steps;
    const Metadata meta = {{"config_hash", content_hash(canon.str())},
                           {"version", kVersion},
                           {"kind", "fig3"},
                           {"units", "qubit splitting Omega"},
                           {"variant", variant}};
    std::vector<std::string> header = {"T"};
    for (const auto& c : r.curves) header.push_back("F_t" + format_number(c.probe_time));
    header.push_back("converged");
    header.push_back("slope_window_flag");
    std::vector<CsvRow> rows;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CsvRow row = {format_number(grid[i])};
        for (const auto& c : r.curves) row.push_back(format_number(c.fisher[i]));
        row.push_back(r.points[i].converged ? "1" : "0");
        const bool in_window = target.fit && target.fisher[i] > 0.0 && grid[i] >= target.fit->t_min &&
                               grid[i] <= target.fit->t_max;
        row.push_back(in_window ? "1" : "0");
        rows.push_back(std::move(row));
    }
    fs::create_directories(opts.out_dir);
    const std::string stem = (fs::path(opts.out_dir) / ("fig3_" + variant)).string();
    write_csv(stem + ".csv", meta, header, rows);
    write_csv(stem + "_overlay.csv", meta, {"T", "p1_tempo", "p1_shorttime", "F_tempo", "F_shorttime"}, overlay);
    std::ofstream(stem + "_summary.txt", std::ios::binary | std::ios::trunc) << r.text();
    r.files = {stem + ".csv", stem + "_overlay.csv", stem + "_summary.txt"};
    return r;
}

}  // namespace thermo
