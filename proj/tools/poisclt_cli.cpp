#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "poisclt/errors.hpp"
#include "poisclt/experiments.hpp"
#include "poisclt/parallel.hpp"

using namespace poisclt;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::optional<std::string> out;
};

ExperimentConfig resolve(const Globals& g) {
    ExperimentConfig cfg = g.config.empty() ? ExperimentConfig::from_json(Json::object()) : ExperimentConfig::load(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out) cfg.out_dir = *g.out;
    return cfg;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

int cmd_simulate(const Globals& g, bool points) {
    auto cfg = resolve(g);
    auto rows = run_simulation(cfg, points);
    write_text(cfg.out_dir + "/simulate.json", dump(to_json(rows, cfg)));
    for (const auto& r : rows) {
        std::printf("lambda %-10g mean H %.6g (se %.3g)  var H %.6g", r.lambda, r.h.mean, r.h.std_error, r.h.variance);
        if (r.mecke) std::printf("  mecke lhs %.6g rhs %.6g", r.mecke->lhs, r.mecke->rhs);
        std::printf("\n");
    }
    return kOk;
}

int cmd_clt(const Globals& g) {
    auto cfg = resolve(g);
    auto res = run_clt_study(cfg);
    write_text(cfg.out_dir + "/clt.json", dump(to_json(res, cfg)));
    emit_plot_data(res, cfg.out_dir + "/clt_plot.csv");
    Json timing = Json::array();
    for (const auto& r : res.rows) timing.push_back({{"lambda", r.lambda}, {"wall_seconds", r.wall_seconds}});
    write_text(cfg.out_dir + "/clt_timing.json", dump(timing));
    for (const auto& r : res.rows)
        std::printf("lambda %-8g var H %-12.6g d_K %.5f [%.5f, %.5f]  d_W %.5f  (%.1fs)\n", r.lambda, r.var_h, r.d_k,
                    r.d_k_ci.lo, r.d_k_ci.hi, r.d_w, r.wall_seconds);
    std::printf("slope of log d_K vs log lambda: %.4f, bootstrap CI [%.4f, %.4f]\n", res.slope_fit.slope,
                res.slope_bootstrap.lo, res.slope_bootstrap.hi);
    for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    return kOk;
}

int cmd_gamma(const Globals& g) {
    auto cfg = resolve(g);
    auto rows = run_gamma_study(cfg);
    write_text(cfg.out_dir + "/gamma.json", dump(to_json(rows, cfg)));
    for (const auto& r : rows) {
        std::printf("lambda %g: var %.6g", r.lambda, r.gammas.var_f.value);
        for (std::size_t i = 1; i < 7; ++i)
            std::printf("  g%zu %.4g(%.2g)", i, r.gammas.gamma[i].value, r.gammas.gamma[i].std_error);
        std::printf("\n  d_K bound %.5g  d_W bound %.5g\n", r.bounds.d_k.value, r.bounds.d_w.value);
    }
    return kOk;
}

int cmd_localize(const Globals& g) {
    auto cfg = resolve(g);
    auto res = run_localization_study(cfg);
    write_text(cfg.out_dir + "/localization.json", dump(to_json(res, cfg)));
    std::printf("psi model: %s\n", res.psi_model.describe().c_str());
    if (res.phi_model) std::printf("phi model: %s\n", res.phi_model->describe().c_str());
    std::printf("M5 %.6g\n", res.M5.value);
    if (res.bound)
        std::printf("C_K %.6g  C_W %.6g  d_K bound %.6g  d_W bound %.6g (modulo c)\n", res.bound->C_K, res.bound->C_W,
                    res.bound->d_k, res.bound->d_w);
    for (const auto& d : res.diagnostics) std::fprintf(stderr, "diagnostic: %s\n", d.c_str());
    return res.diagnostics.empty() ? kOk : kNumerical;
}

int cmd_oracle(const Globals& g) {
    auto cfg = resolve(g);
    auto reports = run_oracle_suite(cfg);
    std::string lines;
    bool all = true;
    for (const auto& r : reports) {
        lines += to_json(r).dump() + "\n";
        all = all && r.agree;
        std::printf("%s %s: primary %.17g oracle %.17g\n", r.agree ? "agree   " : "DISAGREE", r.instance.c_str(),
                    r.primary, r.reference);
    }
    write_text(cfg.out_dir + "/oracle.jsonl", lines);
    return all ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo laboratory for normal approximation of Poisson functionals"};
    app.require_subcommand(1);
    app.fallthrough();  // inherited by subcommands: global flags may follow the subcommand
    Globals g;
    std::uint64_t seed = 0;
    std::string out;
    app.add_option("--config", g.config, "JSON experiment configuration")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
    auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");

    bool points = false;
    auto* sim = app.add_subcommand("simulate", "draw configurations and summarize H");
    sim->add_flag("--points", points, "write the first configuration of each lambda as CSV");
    auto* gam = app.add_subcommand("gamma", "estimate the second-order Poincare terms");
    auto* loc = app.add_subcommand("localize", "localization profiles and the assembled bound");
    auto* clt = app.add_subcommand("clt", "Kolmogorov and Wasserstein distances across dilating windows");
    auto* orc = app.add_subcommand("oracle", "compare primary code paths with brute-force oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }
    if (*seed_opt) g.seed = seed;
    if (*out_opt) g.out = out;

    try {
        set_thread_count(g.threads);
        if (sim->parsed()) return cmd_simulate(g, points);
        if (gam->parsed()) return cmd_gamma(g);
        if (loc->parsed()) return cmd_localize(g);
        if (clt->parsed()) return cmd_clt(g);
        if (orc->parsed()) return cmd_oracle(g);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const InputError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const NumericalDiagnostic& e) {
        std::fprintf(stderr, "numerical diagnostic: %s\n", e.what());
        return kNumerical;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    }
    return kOk;
}
