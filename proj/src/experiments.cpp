#include "poisclt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "poisclt/errors.hpp"
#include "poisclt/growth.hpp"
#include "poisclt/laguerre.hpp"
#include "poisclt/normal.hpp"
#include "poisclt/parallel.hpp"

namespace poisclt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key: " + (where.empty() ? "" : where + ".") + it.key());
}

template <class T>
T get(const Json& j, const char* key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("bad value for key: " + (where.empty() ? "" : where + ".") + key);
    }
}

template <class T>
T require(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError("missing key: " + (where.empty() ? "" : where + ".") + key);
    return get<T>(j, key, where, T{});
}

Placement placement_from_string(const std::string& s) {
    for (auto p : {Placement::Empty, Placement::Clustered, Placement::WindowBoundary, Placement::Straddling})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown placement: " + s);
}

bool ascending(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1])) return false;
    return true;
}

double param(const ExperimentConfig& cfg, const char* key, double fallback) {
    return get<double>(cfg.params, key, "params", fallback);
}

BirthGrowthConfig growth_config(const ExperimentConfig& cfg) {
    return BirthGrowthConfig::make(param(cfg, "rho_min", 0.1), param(cfg, "rate", 1.0), param(cfg, "t0", kInf),
                                   cfg.bias_eps);
}

LaguerreConfig laguerre_config(const ExperimentConfig& cfg) {
    LaguerreConfig lc;
    lc.t = param(cfg, "t", 0.5);
    lc.beta = param(cfg, "beta", 0.0);
    lc.h_max = param(cfg, "h_max", 1.0);
    lc.margin = cfg.margin;
    lc.dim = cfg.dim;
    return lc;
}

std::string fmt_lambda(double l) {
    std::ostringstream os;
    os << l;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    check_keys(j, "", {"model", "params", "space", "lambdas", "n", "bootstrap_reps", "budgets", "localization",
                       "mecke", "oracle", "seed", "out", "bias_eps", "bounded_score", "c"});
    ExperimentConfig c;
    c.model = get<std::string>(j, "model", "", c.model);
    if (j.contains("params")) {
        if (!j["params"].is_object()) throw ConfigError("params must be an object");
        c.params = j["params"];
    }
    if (j.contains("space")) {
        const auto& s = j["space"];
        check_keys(s, "space", {"kind", "dim", "margin"});
        try {
            c.space = space_kind_from_string(get<std::string>(s, "kind", "space", "torus"));
        } catch (const std::exception&) {
            throw ConfigError("bad value for key: space.kind");
        }
        c.dim = get<int>(s, "dim", "space", c.dim);
        c.margin = get<double>(s, "margin", "space", c.margin);
    }
    c.lambdas = get<std::vector<double>>(j, "lambdas", "", c.lambdas);
    c.n = get<std::size_t>(j, "n", "", c.n);
    c.bootstrap_reps = get<std::size_t>(j, "bootstrap_reps", "", c.bootstrap_reps);
    if (j.contains("budgets")) {
        const auto& b = j["budgets"];
        check_keys(b, "budgets", {"n_outer_x", "n_outer_y", "n_inner", "n_var"});
        c.has_budgets = true;
        c.budgets.n_outer_x = require<std::size_t>(b, "n_outer_x", "budgets");
        c.budgets.n_outer_y = require<std::size_t>(b, "n_outer_y", "budgets");
        c.budgets.n_inner = require<std::size_t>(b, "n_inner", "budgets");
        c.budgets.n_var = require<std::size_t>(b, "n_var", "budgets");
    }
    if (j.contains("localization")) {
        const auto& l = j["localization"];
        check_keys(l, "localization",
                   {"radii", "times", "n_trials", "placements", "midpoint_time", "spatial_scale", "n_var"});
        auto& L = c.localization;
        L.radii = get<std::vector<double>>(l, "radii", "localization", {});
        L.times = get<std::vector<double>>(l, "times", "localization", {});
        L.n_trials = get<std::size_t>(l, "n_trials", "localization", L.n_trials);
        if (l.contains("placements")) {
            L.placements.clear();
            for (const auto& s : get<std::vector<std::string>>(l, "placements", "localization", {}))
                L.placements.push_back(placement_from_string(s));
        }
        L.midpoint_time = get<bool>(l, "midpoint_time", "localization", L.midpoint_time);
        L.spatial_scale = get<double>(l, "spatial_scale", "localization", L.spatial_scale);
        L.n_var = get<std::size_t>(l, "n_var", "localization", L.n_var);
    }
    if (j.contains("mecke")) {
        const auto& m = j["mecke"];
        check_keys(m, "mecke", {"n_outer", "n_inner"});
        c.mecke_outer = require<std::size_t>(m, "n_outer", "mecke");
        c.mecke_inner = get<std::size_t>(m, "n_inner", "mecke", c.mecke_inner);
    }
    if (j.contains("oracle")) {
        check_keys(j["oracle"], "oracle", {"instances"});
        c.oracle_instances = get<std::size_t>(j["oracle"], "instances", "oracle", c.oracle_instances);
    }
    c.seed = get<std::uint64_t>(j, "seed", "", c.seed);
    c.out_dir = get<std::string>(j, "out", "", c.out_dir);
    c.bias_eps = get<double>(j, "bias_eps", "", c.bias_eps);
    c.bounded_score = get<bool>(j, "bounded_score", "", c.bounded_score);
    c.c = get<double>(j, "c", "", c.c);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> models = {"poisson_count", "isolated", "ustat", "knn", "birth_growth",
                                                 "laguerre"};
    if (!models.count(model)) throw ConfigError("unknown model: " + model);
    if (lambdas.empty() || !ascending(lambdas) || !(lambdas.front() > 0.0))
        throw ConfigError("lambdas must be positive and strictly ascending");
    if (n < 100) throw ConfigError("n must be at least 100");
    int max_dim = space == SpaceKind::HyperbolicBall ? 3 : 4;
    if (dim < 1 || dim > max_dim) throw ConfigError("space.dim out of range");
    if (!(margin >= 0.0)) throw ConfigError("space.margin must be >= 0");
    if (space == SpaceKind::FlatTorus && margin != 0.0) throw ConfigError("space.margin must be 0 on a torus");
    if (!(bias_eps > 0.0)) throw ConfigError("bias_eps must be > 0");
    if (!(c > 0.0)) throw ConfigError("c must be > 0");
    if (!ascending(localization.radii) || !ascending(localization.times))
        throw ConfigError("localization grids must be strictly ascending");

    auto allow = [&](std::initializer_list<const char*> keys) { check_keys(params, "params", keys); };
    auto positive = [&](const char* key, bool required) {
        if (!params.contains(key)) {
            if (required) throw ConfigError(std::string("missing key: params.") + key);
            return;
        }
        if (!(param(*this, key, 0.0) > 0.0)) throw ConfigError(std::string("params.") + key + " must be > 0");
    };
    if (model == "poisson_count") {
        allow({});
    } else if (model == "isolated") {
        allow({"rho"});
        positive("rho", true);
    } else if (model == "ustat") {
        allow({"order", "delta", "kernel", "weight", "alpha"});
        positive("delta", true);
        int order = get<int>(params, "order", "params", 2);
        if (order < 2 || order > 4) throw ConfigError("params.order must be 2..4");
        auto k = get<std::string>(params, "kernel", "params", "indicator");
        if (k != "indicator" && k != "power_length") throw ConfigError("bad value for key: params.kernel");
    } else if (model == "knn") {
        allow({"k", "alpha"});
        if (get<int>(params, "k", "params", 1) < 1) throw ConfigError("params.k must be >= 1");
    } else if (model == "birth_growth") {
        allow({"rho_min", "rate", "t0", "horizon", "time_rate"});
        positive("rho_min", false);
        positive("rate", false);
        positive("horizon", false);
        positive("time_rate", false);
        if (space == SpaceKind::HyperbolicBall) throw ConfigError("birth_growth runs on Euclidean or torus spaces");
    } else if (model == "laguerre") {
        allow({"t", "beta", "h_max"});
        if (space != SpaceKind::EuclideanBox) throw ConfigError("laguerre needs space.kind = euclidean");
        if (dim > 2) throw ConfigError("laguerre supports dimensions 1 and 2");
        try {
            laguerre_config(*this).validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("laguerre parameters: ") + e.what());
        }
    }
}

Json ExperimentConfig::to_json() const {
    Json j;
    j["model"] = model;
    j["params"] = params;
    j["space"] = {{"kind", to_string(space)}, {"dim", dim}, {"margin", margin}};
    j["lambdas"] = lambdas;
    j["n"] = n;
    j["bootstrap_reps"] = bootstrap_reps;
    if (has_budgets)
        j["budgets"] = {{"n_outer_x", budgets.n_outer_x},
                        {"n_outer_y", budgets.n_outer_y},
                        {"n_inner", budgets.n_inner},
                        {"n_var", budgets.n_var}};
    Json pl = Json::array();
    for (auto p : localization.placements) pl.push_back(to_string(p));
    j["localization"] = {{"radii", localization.radii},
                         {"times", localization.times},
                         {"n_trials", localization.n_trials},
                         {"placements", pl},
                         {"midpoint_time", localization.midpoint_time},
                         {"spatial_scale", localization.spatial_scale},
                         {"n_var", localization.n_var}};
    if (mecke_outer > 0) j["mecke"] = {{"n_outer", mecke_outer}, {"n_inner", mecke_inner}};
    j["oracle"] = {{"instances", oracle_instances}};
    j["seed"] = seed;
    j["out"] = out_dir;
    j["bias_eps"] = bias_eps;
    j["bounded_score"] = bounded_score;
    j["c"] = c;
    return j;
}

// ---------------------------------------------------------------------------
// models

ModelSetup make_model(const ExperimentConfig& cfg, double lambda) {
    ModelSetup m;
    if (cfg.model == "laguerre") {
        auto lc = laguerre_config(cfg);
        m.domain = laguerre_domain(lc, lambda);
        m.score = std::make_shared<LaguerreScore>(lc);
        m.time_dependent = true;
        return m;
    }
    SpaceTimeDomain d;
    int dim = cfg.dim;
    switch (cfg.space) {
    case SpaceKind::FlatTorus:
        d.space = Space::flat_torus(dim, std::pow(lambda, 1.0 / dim));
        d.window = Window::whole();
        break;
    case SpaceKind::EuclideanBox: {
        double side = std::pow(lambda, 1.0 / dim);
        d.space = Space::euclidean_box(dim, side + 2.0 * cfg.margin);
        d.window = Window::centered_cube(dim, side);
        break;
    }
    case SpaceKind::HyperbolicBall:
        d.space = Space::hyperbolic_ball(dim, lambda + cfg.margin);
        d.window = cfg.margin > 0.0 ? Window::ball(lambda) : Window::whole();
        break;
    }
    d.carrier = Window::whole();
    d.marks = MarkLaw::point_mass(1.0);

    const std::string& name = cfg.model;
    if (name == "poisson_count") {
        m.score = std::make_shared<ConstantScore>(1.0);
    } else if (name == "isolated") {
        m.score = std::make_shared<IsolatedScore>(param(cfg, "rho", 0.0));
    } else if (name == "ustat") {
        UStatKernel k;
        k.order = get<int>(cfg.params, "order", "params", 2);
        k.delta = param(cfg, "delta", 1.0);
        k.weight = param(cfg, "weight", 0.5);
        k.alpha = param(cfg, "alpha", 1.0);
        k.kind = get<std::string>(cfg.params, "kernel", "params", "indicator") == "indicator"
                     ? UStatKernel::Kind::Indicator
                     : UStatKernel::Kind::PowerLength;
        m.score = std::make_shared<UStatScore>(k);
    } else if (name == "knn") {
        KnnScoreConfig k;
        k.k = get<int>(cfg.params, "k", "params", 1);
        k.alpha = param(cfg, "alpha", 1.0);
        m.score = std::make_shared<KnnScore>(k);
    } else if (name == "birth_growth") {
        auto g = growth_config(cfg);
        double nu_w = window_volume(d.space, d.window);
        double horizon = cfg.params.contains("horizon")
                             ? param(cfg, "horizon", 1.0)
                             : pick_time_truncation(nu_w, cfg.bias_eps, param(cfg, "time_rate", 1.0));
        if (std::isfinite(g.t0)) horizon = std::min(horizon, g.t0);
        d.time = TimeMeasure::lebesgue(horizon);
        d.marks = g.speed_law();
        m.score = std::make_shared<BirthGrowthScore>(g);
        m.time_dependent = true;
    } else {
        throw ConfigError("unknown model: " + name);
    }
    m.domain = make_domain(std::move(d));
    return m;
}

// ---------------------------------------------------------------------------
// CLT study

namespace {

// sup |F - Phi| for the empirical law putting weight counts[i]/n on sorted[i], standardized by (mu, sigma).
double weighted_kolmogorov(const std::vector<double>& sorted, const std::vector<std::uint32_t>& counts, double n,
                           double mu, double sigma) {
    double cum = 0.0, d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (counts[i] == 0) continue;
        double prev = cum;
        cum += counts[i];
        double f = normal_cdf((sorted[i] - mu) / sigma);
        d = std::max({d, std::abs(cum / n - f), std::abs(prev / n - f)});
    }
    return d;
}

Interval percentile_interval(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    auto at = [&](double q) {
        double pos = q * static_cast<double>(v.size() - 1);
        auto i = static_cast<std::size_t>(pos);
        double f = pos - static_cast<double>(i);
        return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
    };
    return {at(0.025), at(0.975)};
}

std::vector<double> draw_h(const ModelSetup& m, std::size_t count, RandomStream stream) {
    std::vector<double> h(count);
    parallel_for(count, [&](std::size_t i) {
        RandomStream r = stream.substream(static_cast<std::uint32_t>(i));
        h[i] = score_sum(*m.score, sample_poisson(m.domain, r));
    });
    return h;
}

}  // namespace

CltResult run_clt_study(const ExperimentConfig& cfg) {
    cfg.validate();
    CltResult res;
    res.seed = cfg.seed;
    RandomStream root(cfg.seed);
    const std::size_t n = cfg.n;
    const std::size_t n_pilot = std::max<std::size_t>(10, n / 10);
    std::vector<std::vector<double>> pilots, mains;

    for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
        auto t_start = std::chrono::steady_clock::now();
        double lambda = cfg.lambdas[li];
        auto m = make_model(cfg, lambda);
        auto li32 = static_cast<std::uint32_t>(li);
        auto pilot = draw_h(m, n_pilot, root.stream(2 * li32 + 1));
        auto main = draw_h(m, n, root.stream(2 * li32 + 2));
        auto ps = mean_stderr(pilot);
        if (!(ps.variance > 0.0))
            throw NumericalDiagnostic("pilot variance is zero at lambda = " + fmt_lambda(lambda));

        LambdaRow row;
        row.lambda = lambda;
        row.n = n;
        row.pilot_mean = ps.mean;
        row.pilot_var = ps.variance;
        auto ms = mean_stderr(main);
        row.mean_h = ms.mean;
        row.mean_h_se = ms.std_error;
        row.var_h = ms.variance;
        double m4 = 0.0;
        for (double h : main) m4 += std::pow(h - ms.mean, 4);
        m4 /= static_cast<double>(n);
        double nd = static_cast<double>(n);
        double var_se = std::sqrt(std::max(0.0, m4 - ms.variance * ms.variance * (nd - 3.0) / (nd - 1.0)) / nd);
        row.var_ci = {ms.variance - 1.96 * var_se, ms.variance + 1.96 * var_se};

        std::vector<double> z(n);
        double sd = std::sqrt(ps.variance);
        for (std::size_t i = 0; i < n; ++i) z[i] = (main[i] - ps.mean) / sd;
        row.d_k = kolmogorov_to_normal(z);
        row.d_w = wasserstein_to_normal(z);
        row.noise_floor = std::sqrt(std::log(2.0 / 0.05) / (2.0 * nd));
        double nu_w = m.domain->window_volume() * m.domain->time.total_mass();
        row.bound_rate = ms.variance > 0.0 ? std::sqrt(nu_w) / ms.variance : kInf;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        res.rows.push_back(row);
        std::sort(main.begin(), main.end());
        pilots.push_back(std::move(pilot));
        mains.push_back(std::move(main));
    }

    // Bootstrap over both the pilot and the main sample of every lambda.
    const std::size_t L = cfg.lambdas.size();
    const std::size_t B = cfg.bootstrap_reps;
    std::vector<double> logl(L);
    for (std::size_t i = 0; i < L; ++i) logl[i] = std::log(cfg.lambdas[i]);
    std::vector<std::vector<double>> dk_boot(L, std::vector<double>(B));
    std::vector<double> slope_boot(B);
    RandomStream boot = root.stream(1u << 20);
    parallel_for(B, [&](std::size_t b) {
        RandomStream r = boot.substream(static_cast<std::uint32_t>(b));
        std::vector<double> logd(L);
        for (std::size_t i = 0; i < L; ++i) {
            const auto& pv = pilots[i];
            double s = 0.0, s2 = 0.0;
            for (std::size_t k = 0; k < pv.size(); ++k) {
                double v = pv[r.below(pv.size())];
                s += v;
                s2 += v * v;
            }
            double np = static_cast<double>(pv.size());
            double mu = s / np;
            double var = (s2 - np * mu * mu) / (np - 1.0);
            const auto& mv = mains[i];
            std::vector<std::uint32_t> counts(mv.size(), 0);
            for (std::size_t k = 0; k < mv.size(); ++k) ++counts[r.below(mv.size())];
            double dk = var > 0.0 ? weighted_kolmogorov(mv, counts, static_cast<double>(mv.size()), mu, std::sqrt(var))
                                  : 1.0;
            dk_boot[i][b] = dk;
            logd[i] = std::log(std::max(dk, 1e-300));
        }
        slope_boot[b] = L >= 2 ? fit_line(logl, logd).slope : 0.0;
    });
    for (std::size_t i = 0; i < L; ++i) res.rows[i].d_k_ci = B > 1 ? percentile_interval(dk_boot[i]) : Interval{};

    if (L >= 2) {
        std::vector<double> logd(L);
        for (std::size_t i = 0; i < L; ++i) logd[i] = std::log(res.rows[i].d_k);
        res.slope_fit = fit_line(logl, logd);
        if (B > 1) res.slope_bootstrap = percentile_interval(slope_boot);
    }
    const auto& last = res.rows.back();
    if (last.d_k < 2.0 * last.noise_floor) {
        std::ostringstream os;
        os << "d_K at lambda = " << last.lambda << " is " << last.d_k << ", within twice the sampling noise floor "
           << last.noise_floor << " for n = " << n << "; the O(n^-1/2) Monte Carlo error dominates";
        res.warnings.push_back(os.str());
    }
    return res;
}

Json to_json(const CltResult& r, const ExperimentConfig& cfg) {
    Json j;
    j["version"] = kVersion;
    j["kind"] = "clt";
    j["config"] = cfg.to_json();
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"lambda", row.lambda},
                        {"n", row.n},
                        {"mean_h", num(row.mean_h)},
                        {"mean_h_se", num(row.mean_h_se)},
                        {"var_h", num(row.var_h)},
                        {"var_h_ci", {num(row.var_ci.lo), num(row.var_ci.hi)}},
                        {"pilot_mean", num(row.pilot_mean)},
                        {"pilot_var", num(row.pilot_var)},
                        {"d_k", num(row.d_k)},
                        {"d_k_ci", {num(row.d_k_ci.lo), num(row.d_k_ci.hi)}},
                        {"d_w", num(row.d_w)},
                        {"noise_floor", num(row.noise_floor)},
                        {"bound_rate_modulo_constant", num(row.bound_rate)}});
    }
    j["rows"] = rows;
    j["slope"] = {{"value", num(r.slope_fit.slope)},
                  {"regression_ci", {num(r.slope_fit.slope_lo()), num(r.slope_fit.slope_hi())}},
                  {"bootstrap_ci", {num(r.slope_bootstrap.lo), num(r.slope_bootstrap.hi)}}};
    j["warnings"] = r.warnings;
    return j;
}

// ---------------------------------------------------------------------------
// gamma study

std::vector<GammaRow> run_gamma_study(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.has_budgets) throw ConfigError("missing key: budgets");
    std::vector<GammaRow> rows;
    RandomStream root(cfg.seed);
    for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
        double lambda = cfg.lambdas[li];
        auto m = make_model(cfg, lambda);
        std::unique_ptr<Functional> f;
        if (cfg.model == "poisson_count") {
            f = std::make_unique<LinearFunctional>([](const MarkedPoint&) { return 1.0; });
        } else {
            f = std::make_unique<ScoreSumFunctional>(m.score);
        }
        GammaRow row;
        row.lambda = lambda;
        row.gammas = estimate_gammas(*f, m.domain, cfg.budgets, root.stream(static_cast<std::uint32_t>(li) + 1));
        row.bounds = assemble_poincare_bounds(row.gammas);
        rows.push_back(row);
    }
    return rows;
}

Json to_json(const std::vector<GammaRow>& rows, const ExperimentConfig& cfg) {
    Json j;
    j["version"] = kVersion;
    j["kind"] = "gamma";
    j["config"] = cfg.to_json();
    Json arr = Json::array();
    for (const auto& r : rows) {
        Json g = Json::object();
        for (std::size_t i = 0; i < 7; ++i)
            g["gamma" + std::to_string(i)] = {{"value", num(r.gammas.gamma[i].value)},
                                              {"std_error", num(r.gammas.gamma[i].std_error)}};
        arr.push_back({{"lambda", r.lambda},
                       {"gammas", g},
                       {"var_f", {{"value", num(r.gammas.var_f.value)}, {"std_error", num(r.gammas.var_f.std_error)}}},
                       {"mean_f", {{"value", num(r.gammas.mean_f.value)}, {"std_error", num(r.gammas.mean_f.std_error)}}},
                       {"d_k_bound", {{"value", num(r.bounds.d_k.value)}, {"std_error", num(r.bounds.d_k.std_error)}}},
                       {"d_w_bound", {{"value", num(r.bounds.d_w.value)}, {"std_error", num(r.bounds.d_w.std_error)}}}});
    }
    j["rows"] = arr;
    return j;
}

// ---------------------------------------------------------------------------
// localization study

LocalizationResult run_localization_study(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& L = cfg.localization;
    if (L.radii.empty()) throw ConfigError("missing key: localization.radii");
    LocalizationResult res;
    res.lambda = cfg.lambdas.front();
    auto m = make_model(cfg, res.lambda);
    const auto& dom = *m.domain;
    if (dom.is_space_time() && L.times.empty()) throw ConfigError("missing key: localization.times");
    if (cfg.bounded_score && !m.score->bound()) throw ConfigError("bounded_score needs a score with a certified bound");

    PanelOptions panel;
    panel.placements = L.placements;
    panel.midpoint_time = L.midpoint_time;
    panel.spatial_scale = L.spatial_scale;
    RandomStream root(cfg.seed);
    const int d = dom.space.dim();

    res.psi = estimate_psi(*m.score, m.domain, L.radii, L.n_trials, panel, root.stream(1));
    res.psi_model = fit_decay(res.psi, d);
    Profile psi = Profile::from_model(res.psi_model);
    std::optional<Profile> phi;
    if (dom.is_space_time()) {
        res.phi = estimate_phi(*m.score, m.domain, L.times, L.n_trials, panel, root.stream(2));
        res.phi_model = fit_decay(res.phi, 1);
        phi = Profile::from_model(*res.phi_model);
    }
    if (auto b = m.score->bound()) {
        res.M5.value = std::max(1.0, std::pow(*b, 5));
    } else {
        res.M5 = estimate_M5(*m.score, m.domain, L.radii, L.n_trials, panel, root.stream(3),
                             dom.is_space_time() ? std::span<const double>(L.times) : std::span<const double>());
    }
    if (res.M5.heavy_tail) res.diagnostics.push_back("fifth-moment estimate is dominated by a single draw");

    auto ex = Exponents::defaults(cfg.bounded_score);
    for (double th : {ex.theta_k, ex.theta_w}) res.I_psi[th] = integral_I_psi(psi, dom.space, th);
    if (phi)
        for (double th : {ex.theta_prime_k, ex.theta_prime_w}) res.I_phi[th] = integral_I_phi(*phi, dom.time, th);
    for (double q : {ex.q_k, ex.q_w}) {
        try {
            res.G[q] = integral_G_q(psi, dom.space, dom.window, Carrier::Domain, q, dom.carrier);
        } catch (const UnsupportedError& e) {
            res.G[q] = IntegralResult{kInf, false, e.what()};
        }
    }

    std::size_t n_var = cfg.has_budgets ? cfg.budgets.n_var : L.n_var;
    auto hs = draw_h(m, std::max<std::size_t>(n_var, 2), root.stream(4));
    res.var_h = mean_stderr(hs).variance;

    BoundInputs in;
    in.c = cfg.c;
    bool finite = true;
    auto collect = [&](const std::map<double, IntegralResult>& src, std::map<double, double>& dst, const char* what) {
        for (const auto& [k, v] : src) {
            dst[k] = v.value;
            if (!v.finite) {
                finite = false;
                std::ostringstream os;
                os << what << " at " << k << " is infinite: " << v.note;
                res.diagnostics.push_back(os.str());
            }
        }
    };
    collect(res.I_psi, in.I_psi, "I_psi");
    collect(res.I_phi, in.I_phi, "I_phi");
    collect(res.G, in.G, "G_q");
    in.M5 = res.M5.value;
    in.var_h = res.var_h;
    in.nu_w = dom.window_volume();
    if (!(res.var_h > 0.0)) {
        res.diagnostics.push_back("sample variance of H is zero");
    } else if (finite) {
        res.bound = assemble_theorem_bound(in, dom.is_space_time() ? BoundForm::SpaceTime : BoundForm::SpaceOnly,
                                           cfg.bounded_score);
    }
    return res;
}

namespace {

Json profile_json(const std::vector<ProfilePoint>& pts) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back({num(p.r), num(p.estimate), num(p.lo), num(p.hi)});
    return a;
}

Json model_json(const DecayModel& m) {
    return {{"kind", to_string(m.kind)},   {"intercept", num(m.intercept)}, {"slope", num(m.slope)},
            {"a", num(m.a)},               {"level", num(m.level)},         {"cutoff", num(m.cutoff)},
            {"aic", num(m.aic)},           {"extrapolated_beyond", num(m.max_fitted_r)},
            {"description", m.describe()}};
}

Json integrals_json(const std::map<double, IntegralResult>& m) {
    Json j = Json::object();
    for (const auto& [k, v] : m) {
        std::ostringstream key;
        key << std::setprecision(17) << k;
        j[key.str()] = num(v.value);
    }
    return j;
}

}  // namespace

Json to_json(const LocalizationResult& r, const ExperimentConfig& cfg) {
    Json j;
    j["version"] = kVersion;
    j["kind"] = "localization";
    j["config"] = cfg.to_json();
    j["lambda"] = r.lambda;
    j["psi"] = profile_json(r.psi);
    j["psi_model"] = model_json(r.psi_model);
    j["phi"] = profile_json(r.phi);
    if (r.phi_model) j["phi_model"] = model_json(*r.phi_model);
    j["M5"] = num(r.M5.value);
    j["M5_heavy_tail"] = r.M5.heavy_tail;
    j["I_psi"] = integrals_json(r.I_psi);
    j["I_phi"] = integrals_json(r.I_phi);
    j["G"] = integrals_json(r.G);
    j["var_h"] = num(r.var_h);
    if (r.bound) {
        j["CK"] = num(r.bound->C_K);
        j["CW"] = num(r.bound->C_W);
        j["d_k_bound"] = num(r.bound->d_k);
        j["d_w_bound"] = num(r.bound->d_w);
        Json f = Json::object();
        for (const auto& [k, v] : r.bound->factors) f[k] = num(v);
        j["factors"] = f;
    } else {
        j["CK"] = "inf";
        j["CW"] = "inf";
    }
    j["c_flag"] = "modulo universal constant c = " + std::to_string(cfg.c);
    j["panel_note"] = "sup over (z, A) approximated by a heuristic panel, not certified";
    j["diagnostics"] = r.diagnostics;
    return j;
}

// ---------------------------------------------------------------------------
// simulation

std::vector<SimulationRow> run_simulation(const ExperimentConfig& cfg, bool write_points) {
    cfg.validate();
    std::vector<SimulationRow> rows;
    RandomStream root(cfg.seed);
    for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
        double lambda = cfg.lambdas[li];
        auto m = make_model(cfg, lambda);
        auto li32 = static_cast<std::uint32_t>(li);
        SimulationRow row;
        row.lambda = lambda;
        auto hs = draw_h(m, cfg.n, root.stream(3 * li32 + 1));
        row.h = mean_stderr(hs);
        if (cfg.mecke_outer > 0)
            row.mecke = mecke_check(m.domain, *m.score, cfg.mecke_outer, cfg.mecke_inner, root.stream(3 * li32 + 2));
        if (write_points) {
            // Same stream as the first draw above.
            RandomStream r = root.stream(3 * li32 + 1).substream(0);
            auto chi = sample_poisson(m.domain, r);
            auto pos = window_positions(chi);
            auto xi = m.score->evaluate_many(chi, pos);
            std::vector<double> score(chi.size(), std::nan(""));
            for (std::size_t k = 0; k < pos.size(); ++k) score[pos[k]] = xi[k];
            std::ostringstream os;
            os << std::setprecision(17);
            const auto& sp = chi.space();
            int nc = sp.dim();
            os << "id";
            for (int c = 0; c < nc; ++c) os << ",x" << c;
            os << ",time,mark,score\n";
            for (std::size_t i = 0; i < chi.size(); ++i) {
                Point p = sp.is_hyperbolic() ? sp.to_poincare(chi[i].loc) : chi[i].loc;
                os << chi[i].id;
                for (int c = 0; c < nc; ++c) os << ',' << p[c];
                os << ',' << (chi[i].time ? *chi[i].time : 0.0) << ',' << chi[i].mark << ',';
                if (!std::isnan(score[i])) os << score[i];
                os << '\n';
            }
            write_text(cfg.out_dir + "/points_" + fmt_lambda(lambda) + ".csv", os.str());
        }
        rows.push_back(row);
    }
    return rows;
}

Json to_json(const std::vector<SimulationRow>& rows, const ExperimentConfig& cfg) {
    Json j;
    j["version"] = kVersion;
    j["kind"] = "simulate";
    j["config"] = cfg.to_json();
    Json arr = Json::array();
    for (const auto& r : rows) {
        Json row = {{"lambda", r.lambda},
                    {"n", r.h.n},
                    {"mean_h", num(r.h.mean)},
                    {"mean_h_se", num(r.h.std_error)},
                    {"var_h", num(r.h.variance)}};
        if (r.mecke)
            row["mecke"] = {{"lhs", num(r.mecke->lhs)},
                            {"rhs", num(r.mecke->rhs)},
                            {"lhs_stderr", num(r.mecke->lhs_stderr)},
                            {"rhs_stderr", num(r.mecke->rhs_stderr)}};
        arr.push_back(row);
    }
    j["rows"] = arr;
    return j;
}

// ---------------------------------------------------------------------------
// oracle suite

std::vector<oracle::OracleReport> run_oracle_suite(const ExperimentConfig& cfg) {
    std::vector<oracle::OracleReport> out;
    RandomStream root(cfg.seed);
    const std::size_t N = cfg.oracle_instances;

    // U-statistics on a small torus.
    {
        std::size_t mismatch = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            RandomStream r = root.stream(1).substream(static_cast<std::uint32_t>(i));
            SpaceTimeDomain d;
            d.space = Space::flat_torus(2, 4.0);
            d.window = Window::whole();
            d.carrier = Window::whole();
            auto dom = make_domain(d);
            auto chi = sample_poisson(dom, r);
            UStatKernel k;
            k.order = 2 + static_cast<int>(r.below(2));
            k.delta = r.uniform(0.2, 1.0);
            auto primary = score_sum(UStatScore(k), chi);
            oracle::Kernel ok;
            ok.order = k.order;
            ok.delta = k.delta;
            auto locs = chi.locations();
            std::vector<char> inw(locs.size(), 1);
            double ref = oracle::naive_ustat(d.space, ok, locs, inw);
            worst = std::max(worst, std::abs(primary - ref));
            if (primary != ref) ++mismatch;
        }
        out.push_back(oracle::OracleReport::make("ustat vs naive_ustat, " + std::to_string(N) + " instances",
                                                 static_cast<double>(mismatch), 0.0, 0.0));
        out.back().discrepancy = worst;
    }
    // Birth-growth acceptance.
    {
        std::size_t mismatch = 0;
        for (std::size_t i = 0; i < N; ++i) {
            RandomStream r = root.stream(2).substream(static_cast<std::uint32_t>(i));
            int dim = 1 + static_cast<int>(r.below(2));
            auto space = Space::euclidean_box(dim, 10.0);
            auto n = static_cast<std::size_t>(1 + r.below(200));
            std::vector<Seed> seeds(n);
            std::vector<oracle::GrowthSeed> os(n);
            for (std::size_t k = 0; k < n; ++k) {
                Point p;
                p.n = dim;
                for (int c = 0; c < dim; ++c) p[c] = r.uniform(-5.0, 5.0);
                seeds[k] = {p, r.uniform(0.0, 10.0), 0.05 + r.exponential(2.0), static_cast<std::int64_t>(k)};
                os[k] = {p, seeds[k].time, seeds[k].speed};
            }
            double t0 = r.uniform() < 0.5 ? kInf : r.uniform(2.0, 10.0);
            auto a = simulate_acceptance(space, seeds, t0);
            auto b = oracle::naive_birth_growth(space, os, t0);
            if (a.accepted != b) ++mismatch;
        }
        out.push_back(oracle::OracleReport::make("birth-growth sweep vs naive sweep, instances with differing flags",
                                                 static_cast<double>(mismatch), 0.0, 0.0));
    }
    // Laguerre retention in d = 1.
    {
        std::size_t mismatch = 0;
        for (std::size_t i = 0; i < N; ++i) {
            RandomStream r = root.stream(3).substream(static_cast<std::uint32_t>(i));
            auto n = static_cast<std::size_t>(1 + r.below(100));
            LaguerreConfig lc;
            lc.dim = 1;
            lc.t = r.uniform(0.1, 2.0);
            std::vector<WeightedPoint> wp(n);
            std::vector<double> xs(n), hs(n);
            for (std::size_t k = 0; k < n; ++k) {
                xs[k] = r.uniform(-5.0, 5.0);
                hs[k] = r.uniform(0.0, 1.0);
                wp[k] = {Point{xs[k]}, hs[k], static_cast<std::int64_t>(k)};
            }
            auto ref = oracle::boundary_scan_1d(xs, hs, lc.t);
            auto env = retained_flags(wp, lc);
            bool bad = env != ref;
            for (std::size_t k = 0; k < n && !bad; ++k) bad = (is_retained(wp[k], wp, lc) ? 1 : 0) != ref[k];
            if (bad) ++mismatch;
        }
        out.push_back(oracle::OracleReport::make("laguerre d=1 retention vs boundary scan, instances differing",
                                                 static_cast<double>(mismatch), 0.0, 0.0));
    }
    // Closed-form means on the torus of side 10.
    {
        SpaceTimeDomain d;
        d.space = Space::flat_torus(2, 10.0);
        auto dom = make_domain(d);
        IsolatedScore iso(0.3);
        UStatKernel k;
        k.delta = 0.2;
        UStatScore edges(k);
        std::size_t reps = std::max<std::size_t>(N * 10, 100);
        std::vector<double> a(reps), b(reps);
        RandomStream s = root.stream(4);
        parallel_for(reps, [&](std::size_t i) {
            RandomStream r = s.substream(static_cast<std::uint32_t>(i));
            auto chi = sample_poisson(dom, r);
            a[i] = score_sum(iso, chi);
            b[i] = score_sum(edges, chi);
        });
        auto ma = mean_stderr(a), mb = mean_stderr(b);
        out.push_back(oracle::OracleReport::make("isolated mean (rho 0.3, torus side 10)", ma.mean,
                                                 oracle::isolated_mean(2, 0.3, 100.0), 3.0 * ma.std_error));
        out.push_back(oracle::OracleReport::make("edge mean (delta 0.2, torus side 10)", mb.mean,
                                                 oracle::edge_mean(2, 0.2, 100.0), 3.0 * mb.std_error));
    }
    // Normal CDF.
    {
        double worst = 0.0;
        for (int i = -800; i <= 800; ++i) {
            double x = i / 100.0;
            worst = std::max(worst, std::abs(normal_cdf(x) - oracle::normal_cdf_reference(x)));
        }
        out.push_back(oracle::OracleReport::make("normal cdf on [-8, 8] (max abs difference)", worst, 0.0, 1e-14));
    }
    return out;
}

Json to_json(const oracle::OracleReport& r) {
    return {{"instance", r.instance},         {"primary", num(r.primary)},         {"oracle", num(r.reference)},
            {"tolerance", num(r.tolerance)}, {"discrepancy", num(r.discrepancy)}, {"agree", r.agree}};
}

// ---------------------------------------------------------------------------
// persistence

void write_text(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory for " + path + ": " + ec.message());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

void emit_plot_data(const CltResult& result, const std::string& path) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "lambda,metric,value,lo,hi,n,seed\n";
    auto row = [&](double lambda, const char* metric, double v, double lo, double hi, std::size_t n) {
        os << lambda << ',' << metric << ',' << v << ',' << lo << ',' << hi << ',' << n << ',' << result.seed << '\n';
    };
    for (const auto& r : result.rows) {
        row(r.lambda, "mean_h", r.mean_h, r.mean_h - 1.96 * r.mean_h_se, r.mean_h + 1.96 * r.mean_h_se, r.n);
        row(r.lambda, "var_h", r.var_h, r.var_ci.lo, r.var_ci.hi, r.n);
        row(r.lambda, "d_k", r.d_k, r.d_k_ci.lo, r.d_k_ci.hi, r.n);
        row(r.lambda, "d_w", r.d_w, r.d_w, r.d_w, r.n);
        row(r.lambda, "noise_floor", r.noise_floor, r.noise_floor, r.noise_floor, r.n);
        row(r.lambda, "bound_rate", r.bound_rate, r.bound_rate, r.bound_rate, r.n);
    }
    write_text(path, os.str());
}

std::vector<PlotRow> read_plot_data(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != "lambda,metric,value,lo,hi,n,seed")
        throw IoError("unexpected header in " + path);
    std::vector<PlotRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[7];
        for (auto& s : f)
            if (!std::getline(ss, s, ',')) throw IoError("short row in " + path);
        PlotRow r;
        try {
            r.lambda = std::stod(f[0]);
            r.metric = f[1];
            r.value = std::stod(f[2]);
            r.lo = std::stod(f[3]);
            r.hi = std::stod(f[4]);
            r.n = std::stoull(f[5]);
            r.seed = std::stoull(f[6]);
        } catch (const std::exception&) {
            throw IoError("malformed row in " + path);
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace poisclt
