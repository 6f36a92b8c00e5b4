// scenario.hpp: config-driven sweeps over temperature grids, bound checks and the reference
// TEMPO Fisher sweeps, with CSV and text-report emission.

#pragma once

#include "thermo/io.hpp"
#include "thermo/models.hpp"
#include "thermo/scaling.hpp"
#include "thermo/tempo.hpp"

#include <optional>
#include <string>
#include <vector>

namespace thermo {

enum class ScenarioKind { qfi, povm_fisher, exp_resolution, noisy, qubit_shorttime, tempo };

std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> scenario_kind_from_string(const std::string& name);

struct TemperatureGrid {
    double t_min = 0.0;
    double t_max = 0.0;
    int points = 0;
    bool log_spacing = true;

    // ascending
    std::vector<double> values() const;
};

enum class NoiseModel { white, alt };

struct Scenario {
    std::string name;  // output stem
    ScenarioKind kind = ScenarioKind::qfi;
    std::string units;
    TemperatureGrid grid;
    std::string config_hash;  // of the config bytes followed by any referenced data files
    std::string source;       // path of the config file
    int grid_line = 0;        // line of [grid] t_min, for diagnostics raised after parsing

    long long rounds = 1;
    std::optional<double> gamma;  // DOS exponent for the resolution bound, when known

    // qfi, povm-fisher
    std::optional<Spectrum> spectrum;
    std::optional<Povm> povm;  // absent: projective
    // exp-resolution, noisy
    Dos dos;
    double kappa = 1.0;
    double eta = 1.0;
    NoiseModel noise = NoiseModel::white;
    // qubit-shorttime, tempo
    SpectralDensity sd;
    double probe_time = 0.2;
    CouplingMode mode = CouplingMode::spin_boson;
    TempoConfig tempo;
    double convergence_tolerance = 1e-5;
    double fit_decades = 1.0;
};

// Parses and validates; relative file paths resolve against the config's directory.
// Throws ConfigError with the offending line.
Scenario parse_scenario(std::istream& in, const std::string& source, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

struct RunOptions {
    std::string out_dir = ".";
    int jobs = 1;
    bool quiet = true;
};

struct BoundsInput {
    std::vector<double> temperatures;
    std::vector<double> fisher;
    long long rounds = 1;
    std::optional<double> gamma;
    std::optional<GapExpansion> expansion;
    std::optional<OutcomeClassification> classification;
};

struct BoundsReport {
    std::optional<FrcReport> frc;
    PowerLawFit fit;
    // fitted exponent minus the resolution-limited exponent γ − 1; 0 means the bound is saturated
    std::optional<double> exponent_margin;
    bool exponent_pass = true;
    TFLimitReport tf;
    AbsoluteErrorReport absolute;
    bool pass = false;

    std::string text() const;
};

// Aggregates the resolution bound on gaps and exponents, the T·F limit and the error scaling.
// The relative-error divergence is reported but not gated: it follows from T·F → 0.
BoundsReport verify_bounds(const BoundsInput& input, double exponent_tolerance = 0.05);

struct ScenarioResult {
    std::vector<double> temperatures;
    std::vector<double> fisher;  // the observed-outcome Fisher information per grid point
    std::vector<std::string> files;
    std::string summary;
    std::optional<GapExpansion> expansion;
    std::optional<OutcomeClassification> classification;
    std::vector<TempoFisherPoint> tempo_points;
    std::optional<PowerLawFit> fit;
};

// Evaluates the grid and writes <out>/<name>.csv (plus <name>_runs.csv for tempo) and <name>_summary.txt.
ScenarioResult run_scenario(const Scenario& scenario, const RunOptions& opts);

BoundsInput bounds_input(const Scenario& scenario, const ScenarioResult& result);

struct Figure3Curve {
    double probe_time = 0.0;  // Ωt
    int steps = 0;
    std::vector<double> fisher;  // aligned with the report's temperatures
    std::optional<PowerLawFit> fit;
};

struct Figure3Report {
    std::string variant;
    double s = 0.0;
    double slope_target = 0.0;
    double slope_tolerance = 0.15;
    std::vector<double> temperatures;  // descending
    std::vector<TempoFisherPoint> points;
    std::vector<Figure3Curve> curves;
    std::size_t target_curve = 0;
    bool slope_pass = false;
    // TEMPO against the short-time analytic curve at Ωt = 0.2, T/Ω ∈ [0.05, 0.5]
    double overlay_max_deviation = 0.0;
    bool overlay_pass = false;
    std::vector<std::string> flags;
    std::vector<std::string> files;

    std::string text() const;
};

// Reference sweep: α = 0.1, ω_c = 10Ω, δt = 0.1/Ω, K = 10, probe times Ωt ∈ {0.2, 0.5, 1, 2}.
Figure3Report reproduce_figure3(const std::string& variant, const RunOptions& opts);

}  // namespace thermo
