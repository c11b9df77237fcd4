#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "poisclt/errors.hpp"
#include "poisclt/experiments.hpp"

using namespace poisclt;
namespace fs = std::filesystem;

namespace {

std::string config_error(const Json& j) {
    try {
        ExperimentConfig::from_json(j).validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("poisclt_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("configuration errors name the key") {
    CHECK(config_error(Json{{"lambdas", {1, 2}}, {"bogus", 1}}).find("bogus") != std::string::npos);
    CHECK(config_error(Json{{"space", {{"kind", "torus"}, {"dims", 2}}}}).find("space.dims") != std::string::npos);
    CHECK(config_error(Json{{"budgets", {{"n_outer_x", 10}, {"n_outer_y", 10}, {"n_inner", 10}}}}).find(
              "budgets.n_var") != std::string::npos);
    CHECK(config_error(Json{{"n", "many"}}).find("n") != std::string::npos);
    CHECK(config_error(Json{{"lambdas", {4, 2}}}).find("lambdas") != std::string::npos);
    CHECK(config_error(Json{{"n", 10}}).find("n must be") != std::string::npos);
    CHECK(config_error(Json{{"model", "nope"}}).find("nope") != std::string::npos);
    CHECK(config_error(Json{{"model", "ustat"}, {"params", {{"delta", -1}}}}).find("params.delta") != std::string::npos);
    CHECK(config_error(Json::object()).empty());
}

TEST_CASE("config files") {
    auto dir = scratch("cfg");
    fs::create_directories(dir);
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "absent.json").string()), IoError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "bad.json").string()), ConfigError);
    std::ofstream(dir / "ok.json") << R"({"model":"isolated","params":{"rho":0.3},"seed":9})";
    auto c = ExperimentConfig::load((dir / "ok.json").string());
    CHECK(c.model == "isolated");
    CHECK(c.seed == 9);
    auto again = ExperimentConfig::from_json(c.to_json());
    CHECK(again.to_json() == c.to_json());
    fs::remove_all(dir);
}

TEST_CASE("model construction") {
    ExperimentConfig c = ExperimentConfig::from_json(Json{{"model", "isolated"}, {"params", {{"rho", 0.3}}}});
    auto m = make_model(c, 50.0);
    CHECK(m.domain->window_volume() == doctest::Approx(50.0));
    CHECK(m.score->name() == "isolated");
    CHECK_FALSE(m.time_dependent);
    auto g = ExperimentConfig::from_json(Json{{"model", "birth_growth"},
                                              {"space", {{"kind", "euclidean"}, {"dim", 1}, {"margin", 1.0}}}});
    auto mg = make_model(g, 20.0);
    CHECK(mg.time_dependent);
    CHECK(mg.domain->window_volume() == doctest::Approx(20.0));
}

TEST_CASE("CLT study output is deterministic and the plot data round-trips") {
    ExperimentConfig c =
        ExperimentConfig::from_json(Json{{"lambdas", {8, 32}}, {"n", 300}, {"bootstrap_reps", 20}, {"seed", 5}});
    auto a = run_clt_study(c);
    auto b = run_clt_study(c);
    CHECK(to_json(a, c).dump() == to_json(b, c).dump());
    REQUIRE(a.rows.size() == 2);
    for (const auto& r : a.rows) {
        CHECK(r.d_k >= 0.0);
        CHECK(r.d_k <= 1.0);
        CHECK(r.n == 300);
    }
    auto dir = scratch("plot");
    auto path = (dir / "nested" / "clt_plot.csv").string();
    emit_plot_data(a, path);
    auto rows = read_plot_data(path);
    REQUIRE(rows.size() == 12);
    CHECK(rows[2].metric == "d_k");
    CHECK(std::abs(rows[2].value - a.rows[0].d_k) <= 1e-12);
    CHECK(std::abs(rows[2].lo - a.rows[0].d_k_ci.lo) <= 1e-12);
    CHECK(rows[0].seed == 5);

    auto empty_path = (dir / "empty.csv").string();
    emit_plot_data(CltResult{}, empty_path);
    std::ifstream in(empty_path);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(all == "lambda,metric,value,lo,hi,n,seed\n");
    CHECK(read_plot_data(empty_path).empty());
    fs::remove_all(dir);
}

TEST_CASE("unwritable output") {
    CHECK_THROWS_AS(write_text("/proc/poisclt_no_such_dir/x.json", "{}"), IoError);
}

TEST_CASE("gamma study for a count") {
    ExperimentConfig c = ExperimentConfig::from_json(
        Json{{"lambdas", {25}}, {"budgets", {{"n_outer_x", 20}, {"n_outer_y", 10}, {"n_inner", 10}, {"n_var", 200}}}});
    auto rows = run_gamma_study(c);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].gammas.gamma[4].value == doctest::Approx(10.0));
    CHECK(rows[0].gammas.gamma[1].value == 0.0);
    auto missing = ExperimentConfig::from_json(Json{{"lambdas", {25}}});
    CHECK_THROWS_AS(run_gamma_study(missing), ConfigError);
}

TEST_CASE("oracle suite agrees") {
    ExperimentConfig c = ExperimentConfig::from_json(Json{{"oracle", {{"instances", 10}}}});
    auto reports = run_oracle_suite(c);
    CHECK(!reports.empty());
    for (const auto& r : reports) CHECK_MESSAGE(r.agree, r.instance);
}
