#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "rrmdp/dataset.hpp"
#include "rrmdp/envs.hpp"
#include "rrmdp/planner.hpp"

using namespace rrmdp;
namespace fs = std::filesystem;

namespace {

// The CTest harness points this at the built binary. Without it the CLI
// cases are skipped so the unit suite stays runnable by hand.
const char* cli_path() { return std::getenv("ROBUST_RMDP_CLI"); }

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string("\"") + cli_path() + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "rrmdp_cli_tests";
    fs::create_directories(dir);
    return dir;
}

fs::path write_model(const TabularRMDP& m, const std::string& name) {
    const fs::path p = work_dir() / name;
    std::ofstream out(p);
    out << to_json(m).dump(2) << "\n";
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

#define NEED_CLI() \
    if (!cli_path()) { \
        MESSAGE("ROBUST_RMDP_CLI not set; skipping"); \
        return; \
    }

}  // namespace

TEST_CASE("solve emits the planner result") {
    NEED_CLI();
    RiskySafeParams params;
    params.rho = 0.2;
    const fs::path model = write_model(make_risky_safe(params), "rs02.json");
    const fs::path out = work_dir() / "solve_rs02.json";

    CHECK(run_cli("solve --model " + model.string() + " --out " +
                  out.string()) == 0);
    const nlohmann::json j = read_json(out);
    CHECK(j.at("robust").get<bool>());
    CHECK(j.at("rho").get<double>() == 0.2);
    CHECK(j.at("converged").get<bool>());
    CHECK(j.at("policy")[0].get<int>() == 1);
    CHECK(j.at("q").size() == 3);
    // Start value under the radius-0.2 adversary, known in closed form.
    const double v0 = std::max(j.at("q")[0][0].get<double>(),
                               j.at("q")[0][1].get<double>());
    CHECK(v0 == doctest::Approx(2.25).epsilon(1e-7));

    // The --nominal flag plans on the nominal kernel instead.
    const fs::path nom = work_dir() / "solve_rs02_nominal.json";
    CHECK(run_cli("solve --model " + model.string() + " --nominal --out " +
                  nom.string()) == 0);
    const nlohmann::json jn = read_json(nom);
    CHECK_FALSE(jn.at("robust").get<bool>());
    const double v0n = std::max(jn.at("q")[0][0].get<double>(),
                                jn.at("q")[0][1].get<double>());
    CHECK(v0n == doctest::Approx(8.1).epsilon(1e-7));
}

TEST_CASE("solve reports non convergence through exit code 2") {
    NEED_CLI();
    const fs::path model =
        write_model(make_risky_safe(RiskySafeParams{}), "rs03.json");
    const fs::path out = work_dir() / "solve_short.json";
    CHECK(run_cli("solve --model " + model.string() + " --max-iter 2 --out " +
                  out.string()) == 2);
    // The partial result is still written for inspection.
    CHECK_FALSE(read_json(out).at("converged").get<bool>());
}

TEST_CASE("gen-data produces a loadable dataset of the right size") {
    NEED_CLI();
    const fs::path model =
        write_model(make_risky_safe(RiskySafeParams{}), "rs04.json");
    const fs::path data = work_dir() / "rs04.jsonl";
    CHECK(run_cli("gen-data --model " + model.string() +
                  " --n 500 --seed 11 --out " + data.string()) == 0);
    const Dataset d = load_dataset(data.string());
    CHECK(d.transitions.size() == 500);
    CHECK(d.seed == 11);
    CHECK(d.n_states == 3);

    // eps-greedy behavior spreads mass but keeps every action probed.
    const fs::path data2 = work_dir() / "rs04_eps.jsonl";
    CHECK(run_cli("gen-data --model " + model.string() +
                  " --n 500 --seed 11 --behavior eps-greedy --eps 0.5 --out " +
                  data2.string()) == 0);
    const Dataset d2 = load_dataset(data2.string());
    CHECK(d2.transitions.size() == 500);
}

TEST_CASE("train then eval round trips through files") {
    NEED_CLI();
    RiskySafeParams params;
    params.rho = 0.2;
    const TabularRMDP m = make_risky_safe(params);
    const fs::path model = write_model(m, "rs05.json");
    const fs::path data = work_dir() / "rs05.jsonl";
    REQUIRE(run_cli("gen-data --model " + model.string() +
                    " --n 3000 --seed 4 --out " + data.string()) == 0);

    const fs::path cfg = work_dir() / "rs05_cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"gamma": 0.9, "rho": 0.2, "k_iters": 60})" << "\n";
    }
    const fs::path trained = work_dir() / "rs05_trained.json";
    CHECK(run_cli("train --data " + data.string() + " --config " +
                  cfg.string() + " --out " + trained.string()) == 0);
    const nlohmann::json tj = read_json(trained);
    CHECK(tj.at("algo") == "rfqi");
    CHECK(tj.at("iterations").size() == 60);
    CHECK(tj.at("policy").size() == 3);

    const fs::path evald = work_dir() / "rs05_eval.json";
    CHECK(run_cli("eval --model " + model.string() + " --result " +
                  trained.string() + " --out " + evald.string()) == 0);
    const nlohmann::json ej = read_json(evald);
    CHECK(ej.at("robust_converged").get<bool>());
    CHECK(ej.at("robust_j").get<double>() <=
          ej.at("nominal_j").get<double>() + 1e-12);

    // Inline policies work too and rho can be overridden.
    const fs::path evald2 = work_dir() / "rs05_eval2.json";
    CHECK(run_cli("eval --model " + model.string() +
                  " --policy 1,0,0 --rho 0.4 --out " + evald2.string()) == 0);
    CHECK(read_json(evald2).at("rho").get<double>() == 0.4);

    // FQI ignores rho and runs the nominal regression.
    const fs::path fqi = work_dir() / "rs05_fqi.json";
    CHECK(run_cli("train --data " + data.string() + " --config " +
                  cfg.string() + " --algo fqi --out " + fqi.string()) == 0);
    CHECK(read_json(fqi).at("algo") == "fqi");
}

TEST_CASE("repeated pipeline runs are byte identical") {
    NEED_CLI();
    const TabularRMDP m = make_chain(ChainParams{});
    const fs::path model = write_model(m, "chain.json");
    const fs::path cfg = work_dir() / "chain_cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"gamma": 0.9, "rho": 0.2, "k_iters": 25})" << "\n";
    }

    const fs::path d1 = work_dir() / "chain_a.jsonl";
    const fs::path d2 = work_dir() / "chain_b.jsonl";
    const fs::path t1 = work_dir() / "chain_a_train.json";
    const fs::path t2 = work_dir() / "chain_b_train.json";
    for (const auto& [d, t] : {std::pair{d1, t1}, std::pair{d2, t2}}) {
        REQUIRE(run_cli("gen-data --model " + model.string() +
                        " --n 2000 --seed 77 --out " + d.string()) == 0);
        REQUIRE(run_cli("train --data " + d.string() + " --config " +
                        cfg.string() + " --out " + t.string()) == 0);
    }
    CHECK(read_bytes(d1) == read_bytes(d2));
    CHECK(read_bytes(t1) == read_bytes(t2));
}

TEST_CASE("thread count does not change solver output") {
    NEED_CLI();
    const fs::path model =
        write_model(make_gridworld(GridworldParams{}), "grid.json");
    const fs::path s1 = work_dir() / "grid_t1.json";
    const fs::path s2 = work_dir() / "grid_t2.json";
    CHECK(run_cli("solve --model " + model.string() + " --threads 1 --out " +
                  s1.string()) == 0);
    CHECK(run_cli("solve --model " + model.string() + " --threads 3 --out " +
                  s2.string()) == 0);
    CHECK(read_bytes(s1) == read_bytes(s2));
}

TEST_CASE("sweep writes one csv row per knob value") {
    NEED_CLI();
    const fs::path out = work_dir() / "sweep.csv";
    CHECK(run_cli(std::string("sweep --benchmark risky-safe --params ") +
                  "'{\"rho\": 0.3}' --knob p_fail --values 0.1,0.3,0.6 " +
                  "--policy 1,0,0 --out " + out.string()) == 0);
    std::ifstream in(out);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "value,j,inside_ball");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 3);
    // p_fail 0.6 sits 0.5 away from the nominal 0.1, outside radius 0.3.
    CHECK(rows[0].substr(rows[0].rfind(',') + 1) == "1");
    CHECK(rows[2].substr(rows[2].rfind(',') + 1) == "0");
}

TEST_CASE("diagnose summarizes the dataset against the model") {
    NEED_CLI();
    const fs::path model =
        write_model(make_risky_safe(RiskySafeParams{}), "rs06.json");
    const fs::path data = work_dir() / "rs06.jsonl";
    REQUIRE(run_cli("gen-data --model " + model.string() +
                    " --n 400 --seed 2 --out " + data.string()) == 0);
    const fs::path cfg = work_dir() / "rs06_cfg.json";
    {
        std::ofstream out(cfg);
        out << R"({"gamma": 0.9, "rho": 0.3})" << "\n";
    }
    const fs::path out = work_dir() / "rs06_diag.json";
    CHECK(run_cli("diagnose --model " + model.string() + " --data " +
                  data.string() + " --config " + cfg.string() +
                  " --probes 3 --out " + out.string()) == 0);
    const nlohmann::json j = read_json(out);
    CHECK(j.contains("concentratability_ratio"));
    CHECK(j.contains("completeness_error"));
    CHECK(j.contains("dual_gap"));
    CHECK(j.contains("mu_coverage"));
}

TEST_CASE("oracle-check agrees within its tolerance") {
    NEED_CLI();
    CHECK(run_cli("oracle-check --seed 3 --cases 200") == 0);
}

TEST_CASE("bad invocations exit with the input error code") {
    NEED_CLI();
    CHECK(run_cli("solve --model /nonexistent.json --out /tmp/x.json") == 1);
    CHECK(run_cli("train --data /nonexistent.jsonl --config /also/missing "
                  "--out /tmp/x.json") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("solve --help") == 0);

    const fs::path model =
        write_model(make_risky_safe(RiskySafeParams{}), "rs07.json");
    // eval needs exactly one policy source.
    CHECK(run_cli("eval --model " + model.string() + " --out /tmp/x.json") ==
          1);
    const fs::path data = work_dir() / "rs07.jsonl";
    REQUIRE(run_cli("gen-data --model " + model.string() +
                    " --n 50 --seed 1 --out " + data.string()) == 0);
    CHECK(run_cli("train --data " + data.string() +
                  " --config /missing.json --algo sarsa --out /tmp/x.json") ==
          1);
}
