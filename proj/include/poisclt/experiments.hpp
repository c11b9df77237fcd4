#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "poisclt/localization.hpp"
#include "poisclt/malliavin.hpp"
#include "poisclt/oracle.hpp"
#include "poisclt/parallel.hpp"
#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"

namespace poisclt {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct LocalizationSettings {
    std::vector<double> radii;
    std::vector<double> times;
    std::size_t n_trials = 1000;
    std::vector<Placement> placements = PanelOptions{}.placements;
    bool midpoint_time = true;
    double spatial_scale = 1.0;
    std::size_t n_var = 1000;
};

struct ExperimentConfig {
    std::string model = "poisson_count";
    Json params = Json::object();
    SpaceKind space = SpaceKind::FlatTorus;
    int dim = 2;
    double margin = 0.0;  ///< carrier extends this far beyond W (Euclidean / hyperbolic)
    std::vector<double> lambdas = {64, 128, 256, 512, 1024, 2048, 4096};
    std::size_t n = 20000;
    std::size_t bootstrap_reps = 200;
    bool has_budgets = false;
    GammaBudgets budgets;
    LocalizationSettings localization;
    std::size_t mecke_outer = 0;
    std::size_t mecke_inner = 1;
    std::size_t oracle_instances = 100;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    double bias_eps = 1e-3;
    bool bounded_score = false;
    double c = 1.0;

    /// Unknown or ill-typed keys raise ConfigError naming the key.
    static ExperimentConfig from_json(const Json& j);
    /// IoError when the file cannot be read, ConfigError when it does not parse.
    static ExperimentConfig load(const std::string& path);
    Json to_json() const;
    void validate() const;
};

struct ModelSetup {
    DomainPtr domain;
    ScorePtr score;
    bool time_dependent = false;
};

/// Domain and score of the configured model on the window of size lambda.
ModelSetup make_model(const ExperimentConfig& cfg, double lambda);

struct LambdaRow {
    double lambda = 0.0;
    std::size_t n = 0;
    double mean_h = 0.0;
    double mean_h_se = 0.0;
    double var_h = 0.0;
    Interval var_ci;
    double pilot_mean = 0.0;
    double pilot_var = 0.0;
    double d_k = 0.0;
    Interval d_k_ci;
    double d_w = 0.0;
    double noise_floor = 0.0;
    /// sqrt(nu(W)) / Var H: the theorem's rate for X = W, up to the constant.
    double bound_rate = 0.0;
    double wall_seconds = 0.0;
};

struct CltResult {
    std::vector<LambdaRow> rows;
    LinearFit slope_fit;
    Interval slope_bootstrap;
    std::vector<std::string> warnings;
    std::uint64_t seed = 0;
};

CltResult run_clt_study(const ExperimentConfig& cfg);
/// Wall times are left out so that equal inputs give identical output.
Json to_json(const CltResult& r, const ExperimentConfig& cfg);

struct GammaRow {
    double lambda = 0.0;
    GammaEstimates gammas;
    PoincareBounds bounds;
};

std::vector<GammaRow> run_gamma_study(const ExperimentConfig& cfg);
Json to_json(const std::vector<GammaRow>& rows, const ExperimentConfig& cfg);

struct LocalizationResult {
    double lambda = 0.0;
    std::vector<ProfilePoint> psi;
    std::vector<ProfilePoint> phi;
    DecayModel psi_model;
    std::optional<DecayModel> phi_model;
    MomentEstimate M5;
    std::map<double, IntegralResult> I_psi, I_phi, G;
    double var_h = 0.0;
    std::optional<BoundReport> bound;
    std::vector<std::string> diagnostics;  ///< divergence or heavy-tail findings
};

LocalizationResult run_localization_study(const ExperimentConfig& cfg);
Json to_json(const LocalizationResult& r, const ExperimentConfig& cfg);

struct SimulationRow {
    double lambda = 0.0;
    MeanStderr h;
    std::optional<MeckeResult> mecke;
};

/// Draws cfg.n configurations per lambda; the first one of each is written to
/// points_<lambda>.csv in out_dir when write_points is set.
std::vector<SimulationRow> run_simulation(const ExperimentConfig& cfg, bool write_points);
Json to_json(const std::vector<SimulationRow>& rows, const ExperimentConfig& cfg);

/// Primary code paths against the brute-force oracles on random instances.
std::vector<oracle::OracleReport> run_oracle_suite(const ExperimentConfig& cfg);
Json to_json(const oracle::OracleReport& r);

/// Tidy CSV with columns lambda, metric, value, lo, hi, n, seed.
void emit_plot_data(const CltResult& result, const std::string& path);
struct PlotRow {
    double lambda = 0.0;
    std::string metric;
    double value = 0.0, lo = 0.0, hi = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};
std::vector<PlotRow> read_plot_data(const std::string& path);

/// Writes text to a file, creating parent directories; IoError on failure.
void write_text(const std::string& path, const std::string& text);

}  // namespace poisclt
