// Command line front end. Subcommands cover the full offline pipeline:
// solve (exact planning), gen-data, train (robust or nominal fitted
// iteration), eval, sweep, diagnose, and a dual-vs-primal self check.
//
// Exit codes: 0 success, 1 bad input, 2 non-convergence, 3 property failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rrmdp/dataset.hpp"
#include "rrmdp/dual.hpp"
#include "rrmdp/envs.hpp"
#include "rrmdp/eval.hpp"
#include "rrmdp/planner.hpp"
#include "rrmdp/rfqi.hpp"
#include "rrmdp/rmdp.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNoConverge = 2;
constexpr int kExitPropertyFailure = 3;

// 17 significant digits: enough for doubles to round-trip exactly.
std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// JSON never carries raw NaN/inf; they become strings.
nlohmann::json jnum(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(jnum(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("malformed json in " + path + ": " +
                                    e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

rrmdp::TabularRMDP load_model(const std::string& path) {
    return rrmdp::rmdp_from_json(load_json_file(path));
}

rrmdp::Policy parse_policy_csv(const std::string& csv, int n_states,
                               int n_actions) {
    rrmdp::Policy pi;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) pi.actions.push_back(std::stoi(tok));
    if (static_cast<int>(pi.actions.size()) != n_states)
        throw std::invalid_argument("policy must list one action per state");
    for (int a : pi.actions)
        if (a < 0 || a >= n_actions)
            throw std::invalid_argument("policy action out of range");
    return pi;
}

rrmdp::Policy policy_from_result(const std::string& path, int n_states,
                                 int n_actions) {
    const nlohmann::json j = load_json_file(path);
    if (!j.contains("policy"))
        throw std::invalid_argument(path + " has no \"policy\" field");
    rrmdp::Policy pi;
    try {
        pi.actions = j.at("policy").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("bad policy in " + path + ": " + e.what());
    }
    if (static_cast<int>(pi.actions.size()) != n_states)
        throw std::invalid_argument("policy length does not match model");
    for (int a : pi.actions)
        if (a < 0 || a >= n_actions)
            throw std::invalid_argument("policy action out of range");
    return pi;
}

// Training configuration file. gamma is required; everything else has
// defaults. "features" configures the value class, "dual_features" the
// witness class (defaulting to "features").
struct TrainConfig {
    double gamma = 0.0;
    rrmdp::RFQIConfig rfqi;
};

TrainConfig parse_train_config(const nlohmann::json& j, int n_states,
                               int n_actions) {
    TrainConfig cfg;
    try {
        cfg.gamma = j.at("gamma").get<double>();
        cfg.rfqi.k_iters = j.value("k_iters", 0);
        cfg.rfqi.rho = j.value("rho", 0.0);
        cfg.rfqi.ridge = j.value("ridge", 1e-8);
        cfg.rfqi.seed = j.value("seed", std::uint64_t{0});
        cfg.rfqi.warm_start_dual = j.value("warm_start_dual", true);
        const nlohmann::json features =
            j.contains("features") ? j.at("features")
                                   : nlohmann::json{{"kind", "one-hot"}};
        cfg.rfqi.q_features =
            rrmdp::feature_map_from_json(features, n_states, n_actions);
        cfg.rfqi.dual_features = rrmdp::feature_map_from_json(
            j.contains("dual_features") ? j.at("dual_features") : features,
            n_states, n_actions);
        if (j.contains("erm")) {
            const auto& e = j.at("erm");
            cfg.rfqi.erm.steps = e.value("steps", cfg.rfqi.erm.steps);
            cfg.rfqi.erm.step_scale =
                e.value("step_scale", cfg.rfqi.erm.step_scale);
            cfg.rfqi.erm.tol = e.value("tol", cfg.rfqi.erm.tol);
            cfg.rfqi.erm.patience = e.value("patience", cfg.rfqi.erm.patience);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed train config: ") +
                                    e.what());
    }
    return cfg;
}

int resolve_threads(int cli_threads) {
    if (cli_threads > 0) return cli_threads;
    if (const char* env = std::getenv("ROBUST_RMDP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

nlohmann::json plan_json(const rrmdp::PlanResult& plan, bool robust,
                         double rho) {
    nlohmann::json out;
    out["q"] = matrix_json(plan.q.values);
    out["policy"] = plan.policy.actions;
    nlohmann::json trace = nlohmann::json::array();
    for (double r : plan.residual_trace) trace.push_back(jnum(r));
    out["residual_trace"] = std::move(trace);
    out["iterations"] = plan.iterations;
    out["converged"] = plan.converged;
    out["robust"] = robust;
    out["rho"] = rho;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline robust planning and training on tabular MDPs with "
                 "total-variation uncertainty sets"};
    app.require_subcommand(1);
    int cli_threads = 0;
    app.add_option("--threads", cli_threads,
                   "Worker threads (default: ROBUST_RMDP_THREADS or 1)");

    // --- solve ---
    auto* solve = app.add_subcommand("solve", "Exact robust planning");
    std::string solve_model, solve_out;
    double solve_tol = 1e-9;
    int solve_max_iter = 0;
    bool solve_nominal = false;
    solve->add_option("--model", solve_model, "Model json")->required();
    solve->add_option("--out", solve_out, "Output plan json")->required();
    solve->add_option("--tol", solve_tol, "Stop when sup-norm change <= tol");
    solve->add_option("--max-iter", solve_max_iter, "0 = derived from tol");
    solve->add_flag("--nominal", solve_nominal, "Ignore rho, plain value iteration");

    // --- gen-data ---
    auto* gen = app.add_subcommand("gen-data", "Sample an offline dataset");
    std::string gen_model, gen_out, gen_behavior = "uniform";
    std::uint64_t gen_n = 0, gen_seed = 0;
    double gen_eps = 0.3;
    gen->add_option("--model", gen_model, "Model json")->required();
    gen->add_option("--n", gen_n, "Number of transitions")->required();
    gen->add_option("--seed", gen_seed, "Sampling seed")->required();
    gen->add_option("--out", gen_out, "Output jsonl")->required();
    gen->add_option("--behavior", gen_behavior,
                    "uniform | eps-greedy (around the nominal-optimal policy)");
    gen->add_option("--eps", gen_eps, "Exploration rate for eps-greedy");

    // --- train ---
    auto* train = app.add_subcommand("train", "Offline fitted iteration");
    std::string train_data, train_config, train_out, train_algo = "rfqi";
    train->add_option("--data", train_data, "Dataset jsonl")->required();
    train->add_option("--config", train_config, "Training config json")->required();
    train->add_option("--out", train_out, "Output result json")->required();
    train->add_option("--algo", train_algo, "rfqi | fqi")
        ->check(CLI::IsMember({"rfqi", "fqi"}));

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "Evaluate a policy on a model");
    std::string eval_model, eval_result, eval_policy, eval_out;
    double eval_rho = -1.0, eval_tol = 1e-9;
    eval->add_option("--model", eval_model, "Model json")->required();
    eval->add_option("--result", eval_result, "Json with a \"policy\" field");
    eval->add_option("--policy", eval_policy, "Inline policy, e.g. 0,1,0");
    eval->add_option("--out", eval_out, "Output report json")->required();
    eval->add_option("--rho", eval_rho, "Override the model's radius");
    eval->add_option("--tol", eval_tol, "Robust evaluation tolerance");

    // --- sweep ---
    auto* sweep = app.add_subcommand("sweep",
                                     "Evaluate a policy across a model knob");
    std::string sweep_family, sweep_params = "{}", sweep_knob, sweep_values;
    std::string sweep_result, sweep_policy, sweep_out;
    sweep->add_option("--benchmark", sweep_family,
                      "chain | gridworld | risky-safe")->required();
    sweep->add_option("--params", sweep_params, "Family params as json");
    sweep->add_option("--knob", sweep_knob, "Parameter to vary")->required();
    sweep->add_option("--values", sweep_values, "Comma separated knob values")
        ->required();
    sweep->add_option("--result", sweep_result, "Json with a \"policy\" field");
    sweep->add_option("--policy", sweep_policy, "Inline policy");
    sweep->add_option("--out", sweep_out, "Output csv")->required();

    // --- diagnose ---
    auto* diag = app.add_subcommand(
        "diagnose", "Assumption diagnostics for a dataset and classes");
    std::string diag_model, diag_data, diag_config, diag_out;
    int diag_probes = 8;
    std::uint64_t diag_seed = 0;
    diag->add_option("--model", diag_model, "Model json")->required();
    diag->add_option("--data", diag_data, "Dataset jsonl (provides mu)")
        ->required();
    diag->add_option("--config", diag_config, "Training config json")->required();
    diag->add_option("--out", diag_out, "Output report json")->required();
    diag->add_option("--probes", diag_probes, "Random probes per estimate");
    diag->add_option("--seed", diag_seed, "Probe seed");

    // --- oracle-check ---
    auto* oracle = app.add_subcommand(
        "oracle-check", "Dual-vs-primal agreement on random inner problems");
    std::uint64_t oracle_seed = 1;
    int oracle_cases = 1000, oracle_support = 12;
    double oracle_tol = 1e-9;
    oracle->add_option("--seed", oracle_seed, "Case seed");
    oracle->add_option("--cases", oracle_cases, "Number of random problems");
    oracle->add_option("--max-support", oracle_support, "Largest support size");
    oracle->add_option("--tol", oracle_tol, "Allowed |dual - primal| gap");

    // Let --threads appear after the subcommand name as well.
    for (CLI::App* sc : {solve, gen, train, eval, sweep, diag, oracle})
        sc->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    const int threads = resolve_threads(cli_threads);
    try {
        if (*solve) {
            const rrmdp::TabularRMDP m = load_model(solve_model);
            rrmdp::PlanResult plan;
            if (solve_nominal) {
                plan = rrmdp::nonrobust_vi(m, solve_tol, solve_max_iter, threads);
            } else {
                const rrmdp::TVBallSpec spec{m.rho, m.fail_state.has_value()};
                plan = m.rho == 0.0
                           ? rrmdp::nonrobust_vi(m, solve_tol, solve_max_iter,
                                                 threads)
                           : rrmdp::rqi(m, spec, solve_tol, solve_max_iter,
                                        threads);
            }
            write_json_file(solve_out,
                            plan_json(plan, !solve_nominal && m.rho > 0.0,
                                      solve_nominal ? 0.0 : m.rho));
            if (!plan.converged) {
                std::cerr << "solve: no convergence after " << plan.iterations
                          << " iterations\n";
                return kExitNoConverge;
            }
        } else if (*gen) {
            const rrmdp::TabularRMDP m = load_model(gen_model);
            Eigen::MatrixXd mu;
            if (gen_behavior == "uniform") {
                mu = Eigen::MatrixXd::Constant(
                    m.n_states, m.n_actions,
                    1.0 / (m.n_states * m.n_actions));
            } else if (gen_behavior == "eps-greedy") {
                const rrmdp::Policy base = rrmdp::nonrobust_vi(m).policy;
                mu = rrmdp::mu_from_policy(m, base, gen_eps);
            } else {
                throw std::invalid_argument("unknown behavior: " + gen_behavior);
            }
            const rrmdp::Dataset data =
                rrmdp::generate_dataset(m, mu, gen_n, gen_seed);
            rrmdp::save_dataset(data, gen_out);
        } else if (*train) {
            const rrmdp::Dataset data = rrmdp::load_dataset(train_data);
            const TrainConfig cfg = parse_train_config(
                load_json_file(train_config), data.n_states, data.n_actions);
            const rrmdp::MdpShape shape{data.n_states, data.n_actions,
                                        cfg.gamma};
            const rrmdp::RFQIResult result =
                train_algo == "rfqi"
                    ? rrmdp::run_rfqi(data, shape, cfg.rfqi)
                    : rrmdp::run_fqi(data, shape, cfg.rfqi);

            nlohmann::json out;
            out["algo"] = train_algo;
            out["gamma"] = cfg.gamma;
            out["rho"] = cfg.rfqi.rho;
            out["seed"] = cfg.rfqi.seed;
            out["q"] = matrix_json(result.q_final.values);
            out["policy"] = result.policy.actions;
            nlohmann::json iters = nlohmann::json::array();
            for (const auto& st : result.iterations) {
                nlohmann::json it;
                it["dual_loss"] = jnum(st.dual_loss);
                it["regression_mse"] = jnum(st.regression_mse);
                it["q_change_sup"] = jnum(st.q_change_sup);
                iters.push_back(std::move(it));
            }
            out["iterations"] = std::move(iters);
            write_json_file(train_out, out);
        } else if (*eval) {
            const rrmdp::TabularRMDP m = load_model(eval_model);
            if (eval_result.empty() == eval_policy.empty())
                throw std::invalid_argument(
                    "need exactly one of --result / --policy");
            const rrmdp::Policy pi =
                eval_result.empty()
                    ? parse_policy_csv(eval_policy, m.n_states, m.n_actions)
                    : policy_from_result(eval_result, m.n_states, m.n_actions);
            const double rho = eval_rho >= 0.0 ? eval_rho : m.rho;
            const rrmdp::TVBallSpec spec{rho, m.fail_state.has_value()};
            const rrmdp::EvalReport report =
                rrmdp::evaluate_policy(pi, m, spec, eval_tol, 0, threads);

            nlohmann::json out;
            out["nominal_j"] = jnum(report.nominal_j);
            out["robust_j"] = jnum(report.robust_j);
            out["robust_converged"] = report.robust_converged;
            out["rho"] = rho;
            write_json_file(eval_out, out);
            if (!report.robust_converged) {
                std::cerr << "eval: robust evaluation did not converge\n";
                return kExitNoConverge;
            }
        } else if (*sweep) {
            rrmdp::BenchmarkSpec spec;
            spec.name = sweep_family;
            try {
                spec.params = nlohmann::json::parse(sweep_params);
            } catch (const nlohmann::json::exception& e) {
                throw std::invalid_argument(std::string("bad --params: ") +
                                            e.what());
            }
            const rrmdp::TabularRMDP base = rrmdp::make_benchmark(spec);
            if (sweep_result.empty() == sweep_policy.empty())
                throw std::invalid_argument(
                    "need exactly one of --result / --policy");
            const rrmdp::Policy pi =
                sweep_result.empty()
                    ? parse_policy_csv(sweep_policy, base.n_states,
                                       base.n_actions)
                    : policy_from_result(sweep_result, base.n_states,
                                         base.n_actions);
            std::vector<double> values;
            std::stringstream ss(sweep_values);
            std::string tok;
            while (std::getline(ss, tok, ',')) values.push_back(std::stod(tok));
            if (values.empty())
                throw std::invalid_argument("--values is empty");

            const auto points =
                rrmdp::perturbation_sweep(pi, spec, sweep_knob, values);
            std::ofstream out(sweep_out);
            if (!out)
                throw std::invalid_argument("cannot open for writing: " +
                                            sweep_out);
            out << "value,j,inside_ball\n";
            for (const auto& p : points)
                out << fmt17(p.knob_value) << "," << fmt17(p.j) << ","
                    << (p.inside_ball ? 1 : 0) << "\n";
            if (!out) throw std::runtime_error("write failed: " + sweep_out);
        } else if (*diag) {
            const rrmdp::TabularRMDP m = load_model(diag_model);
            const rrmdp::Dataset data = rrmdp::load_dataset(diag_data);
            if (data.n_states != m.n_states || data.n_actions != m.n_actions)
                throw std::invalid_argument("dataset does not match model");
            const TrainConfig cfg = parse_train_config(
                load_json_file(diag_config), m.n_states, m.n_actions);
            const double rho = cfg.rfqi.rho > 0.0 ? cfg.rfqi.rho : m.rho;
            const rrmdp::LinearQClass fclass =
                rrmdp::make_q_class(cfg.rfqi.q_features, cfg.gamma);
            const rrmdp::LinearDualClass gclass =
                rrmdp::make_dual_class(cfg.rfqi.dual_features, rho, cfg.gamma);
            const rrmdp::DiagnosticsReport report = rrmdp::run_diagnostics(
                m, data.mu, fclass, gclass, rho, diag_probes, diag_seed);

            nlohmann::json out;
            out["concentratability_ratio"] = jnum(report.concentratability_ratio);
            out["completeness_error"] = jnum(report.completeness_error);
            out["dual_gap"] = jnum(report.dual_gap);
            out["mu_coverage"] = jnum(report.mu_coverage);
            write_json_file(diag_out, out);
        } else if (*oracle) {
            const rrmdp::DualPrimalCheck check =
                rrmdp::dual_primal_check(oracle_seed, oracle_cases,
                                         oracle_support);
            std::cout << "cases=" << check.n_cases
                      << " max_gap=" << fmt17(check.max_gap) << "\n";
            if (!(check.max_gap <= oracle_tol)) {
                std::cerr << "oracle-check: dual/primal gap " << check.max_gap
                          << " exceeds " << oracle_tol << "\n";
                return kExitPropertyFailure;
            }
        }
    } catch (const rrmdp::ErmDivergence& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNoConverge;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
