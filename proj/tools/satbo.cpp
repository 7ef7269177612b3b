// Command-line front end: generate rule instances, run one optimization, or
// run the full variant-comparison matrix.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "satbo/harness.hpp"

namespace fs = std::filesystem;
using namespace satbo;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool looks_like_dimacs(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == 'c') continue;
        return line.compare(pos, 5, "p cnf") == 0;
    }
    return false;
}

struct LoadedInstance {
    std::string name;
    cnf::CnfFormula formula;
    // Populated for rule-DSL instances only.
    bool has_rules = false;
    rules::RuleSet rules;
    rules::Encoded encoded;
};

LoadedInstance load_instance(const std::string& path, const std::string& tamper_field) {
    LoadedInstance inst;
    inst.name = fs::path(path).stem().string();
    const std::string text = slurp(path);
    if (looks_like_dimacs(text)) {
        inst.formula = cnf::parse_dimacs(text);
        return inst;
    }
    inst.rules = rules::parse_rules(text);
    if (tamper_field.empty())
        throw std::runtime_error("rule instances need --tamper-field");
    inst.encoded = rules::encode_rules(inst.rules, tamper_field);
    inst.formula = inst.encoded.formula;
    inst.has_rules = true;
    return inst;
}

// "gen:<vars>:<seed>[:<rules>]" or a path to a rule/DIMACS file.
LoadedInstance resolve_instance_spec(const std::string& spec, const std::string& tamper_field) {
    if (spec.rfind("gen:", 0) != 0) return load_instance(spec, tamper_field);
    std::istringstream in(spec.substr(4));
    std::string vars_s, seed_s, rules_s;
    std::getline(in, vars_s, ':');
    std::getline(in, seed_s, ':');
    std::getline(in, rules_s, ':');
    if (vars_s.empty() || seed_s.empty())
        throw std::runtime_error("generator spec must be gen:<vars>:<seed>[:<rules>]");
    const scenario::GeneratedInstance g =
        scenario::gen_instance(std::stoi(vars_s), std::stoull(seed_s),
                               rules_s.empty() ? 0 : std::stoi(rules_s));
    LoadedInstance inst;
    inst.name = g.name;
    inst.rules = g.rules;
    inst.encoded = g.encoded;
    inst.formula = g.encoded.formula;
    inst.has_rules = true;
    return inst;
}

harness::SolverKind parse_solver(const std::string& name) {
    if (name == "dpll") return harness::SolverKind::AdaptiveDpll;
    if (name == "walksat") return harness::SolverKind::WalkSat;
    if (name == "random") return harness::SolverKind::Random;
    throw std::runtime_error("unknown solver: " + name);
}

void print_summary(const harness::RunReport& r) {
    if (r.unsat) {
        std::cout << "unsatisfiable: the search tree closed without a solution\n";
        return;
    }
    if (!r.found) {
        std::cout << "no solution found within the budget\n";
        return;
    }
    std::cout << "best coverage " << r.best_coverage << " of bound " << r.bound << " (theta "
              << r.theta << ")\n"
              << "rounds " << r.rounds_run << ", evaluations " << r.evals_used
              << ", distinct solutions " << r.distinct_solutions << "\n";
    if (!r.attack_rule.empty()) {
        std::cout << "attack rule:   " << r.attack_rule << "\n"
                  << "inverted rule: " << r.inverted_rule << "\n";
    }
    if (r.novelty.has_value())
        std::cout << "novelty: " << r.novelty->covered << " covered transactions, "
                  << r.novelty->novel << " tampered rows absent from the log\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coverage-guided solution sampling over verification-rule formulas"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "INI/TOML file; subcommand options live under [run]/[ablate]/[gen]");

    // --- gen ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate a satisfiable rule instance");
    int gen_vars = 60;
    std::uint64_t gen_seed = 0;
    int gen_rules = 0;
    std::string gen_out;
    gen->add_option("--vars", gen_vars, "Target number of encoded variables")->required();
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--rules", gen_rules, "Rule count override (0 = derived)");
    gen->add_option("--out", gen_out, "Write the rule text here instead of stdout");

    // --- run ---------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run one optimization on an instance");
    std::string run_instance, run_tamper = "user", run_scenario = "binomial", run_out;
    std::string run_solver = "dpll";
    double run_binomial_p = 0.5;
    std::uint64_t run_scenario_seed = 0;
    harness::RunConfig rc;
    bool no_rb = false, no_rfdv = false, no_rfiv = false, no_bo = false;
    run->add_option("--instance", run_instance,
                    "Rule file, DIMACS file, or gen:<vars>:<seed>[:<rules>]");
    run->add_option("--tamper-field", run_tamper, "Field the attack tampers (rule instances)");
    run->add_option("--scenario", run_scenario,
                    "Coverage source: binomial, power-law, or log:<csv>");
    run->add_option("--binomial-p", run_binomial_p, "Binomial interval probability");
    run->add_option("--scenario-seed", run_scenario_seed, "Coverage model seed");
    run->add_option("--seed", rc.seed, "Run seed");
    run->add_option("--max-iter", rc.max_iter, "Optimization rounds");
    run->add_option("--samples", rc.samples_per_round, "Samples per round");
    run->add_option("--round-seconds", rc.time_per_round, "Wall budget per round (<=0 off)");
    run->add_option("--budget-seconds", rc.total_budget, "Total sampler wall budget (<=0 off)");
    run->add_option("--steps-per-round", rc.steps_per_round,
                    "Deterministic operation budget per round (0 off)");
    run->add_option("--tv", rc.tv, "Decision-trail gate for random backtracking");
    run->add_option("--solver", run_solver, "dpll, walksat, or random");
    run->add_flag("--no-rb", no_rb, "Disable random backtracking");
    run->add_flag("--no-rfdv", no_rfdv, "Disable decision flips");
    run->add_flag("--no-rfiv", no_rfiv, "Disable free-variable randomization");
    run->add_flag("--no-bo", no_bo, "Disable preference steering");
    run->add_option("--out", run_out, "Directory for report.json and rules.txt");

    // --- ablate ------------------------------------------------------------
    auto* ablate = app.add_subcommand("ablate", "Run the variant-comparison matrix");
    std::vector<std::string> ab_instances;
    harness::AblationConfig ac;
    std::string ab_tamper = "user";
    ablate->add_option("--instances", ab_instances,
                       "Instance specs: files or gen:<vars>:<seed>[:<rules>]");
    ablate->add_option("--scenarios", ac.scenarios, "Coverage kinds (binomial, power-law)");
    ablate->add_option("--binomial-p", ac.binomial_p, "Binomial interval probability");
    ablate->add_option("--repeats", ac.repeats, "Repeats per cell");
    ablate->add_option("--tamper-field", ab_tamper, "Field for rule-file instances");
    ablate->add_option("--seed", ac.run.seed, "Base run seed");
    ablate->add_option("--scenario-seed", ac.scenario_seed, "Coverage model seed");
    ablate->add_option("--max-iter", ac.run.max_iter, "Optimization rounds per run");
    ablate->add_option("--samples", ac.run.samples_per_round, "Samples per round");
    ablate->add_option("--round-seconds", ac.run.time_per_round, "Wall budget per round");
    ablate->add_option("--budget-seconds", ac.run.total_budget, "Total wall budget per run");
    ablate->add_option("--steps-per-round", ac.run.steps_per_round,
                       "Deterministic operation budget per round (0 off)");
    ablate->add_option("--tv", ac.run.tv, "Decision-trail gate for random backtracking");
    ablate->add_option("--threads", ac.threads, "Worker threads (0 = hardware)");
    ablate->add_option("--out", ac.out_dir, "Output directory");
    bool no_traces = false;
    ablate->add_flag("--no-run-traces", no_traces, "Skip per-run JSON traces");

    // The config option is parsed by the root app, but `ablate --config x.ini`
    // is the documented spelling: hoist it in front of the subcommand.
    std::vector<std::string> ordered, config_args;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) {
            config_args = {a, argv[++i]};
        } else if (a.rfind("--config=", 0) == 0) {
            config_args = {a};
        } else {
            ordered.push_back(a);
        }
    }
    ordered.insert(ordered.begin(), config_args.begin(), config_args.end());
    std::vector<const char*> cargs{argv[0]};
    for (const std::string& s : ordered) cargs.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            const scenario::GeneratedInstance g =
                scenario::gen_instance(gen_vars, gen_seed, gen_rules);
            if (gen_out.empty()) {
                std::cout << g.dsl;
            } else {
                std::ofstream out(gen_out, std::ios::binary);
                if (!out) throw std::runtime_error("cannot write " + gen_out);
                out << g.dsl;
                std::cout << g.name << " -> " << gen_out << "\n";
            }
            std::cerr << g.name << ": " << g.encoded.formula.num_vars << " variables, "
                      << g.encoded.formula.clauses.size() << " clauses\n";
            return 0;
        }

        if (run->parsed()) {
            if (run_instance.empty()) throw std::runtime_error("run needs --instance");
            const LoadedInstance inst = resolve_instance_spec(run_instance, run_tamper);
            rc.solver = parse_solver(run_solver);
            rc.rb = !no_rb;
            rc.rfdv = !no_rfdv;
            rc.rfiv = !no_rfiv;
            rc.bo = !no_bo;

            scenario::CoverageModel model;
            rules::TransactionLog log;
            harness::Objective obj;
            if (run_scenario.rfind("log:", 0) == 0) {
                if (!inst.has_rules)
                    throw std::runtime_error("log scoring needs a rule instance");
                log = rules::parse_transaction_log_csv(slurp(run_scenario.substr(4)),
                                                       inst.rules.fields);
                obj.log = &log;
                obj.varmap = &inst.encoded.varmap;
            } else {
                if (run_scenario == "binomial")
                    model = scenario::gen_binomial_model(inst.formula.num_vars, run_binomial_p,
                                                         run_scenario_seed);
                else if (run_scenario == "power-law")
                    model = scenario::gen_powerlaw_model(inst.formula.num_vars,
                                                         run_scenario_seed);
                else
                    throw std::runtime_error("unknown scenario: " + run_scenario);
                obj.model = &model;
                if (inst.has_rules) obj.varmap = &inst.encoded.varmap;
            }

            const harness::RunReport report = run_satbo(inst.formula, obj, rc);
            print_summary(report);
            std::cerr << "sampler wall " << report.sampler_wall_seconds << " s\n";

            if (!run_out.empty()) {
                fs::create_directories(run_out);
                nlohmann::json j = harness::report_to_json(report);
                j["instance"] = inst.name;
                j["solver"] = harness::solver_name(rc.solver);
                std::ofstream jf(fs::path(run_out) / "report.json", std::ios::binary);
                jf << j.dump(2) << "\n";
                if (!report.attack_rule.empty()) {
                    std::ofstream rf(fs::path(run_out) / "rules.txt", std::ios::binary);
                    rf << report.attack_rule << "\n" << report.inverted_rule << "\n";
                }
            }
            return report.unsat ? 2 : (report.found ? 0 : 3);
        }

        // ablate
        if (ab_instances.empty()) throw std::runtime_error("ablate needs --instances");
        if (ac.out_dir.empty()) throw std::runtime_error("ablate needs --out");
        ac.write_run_traces = !no_traces;
        std::vector<harness::AblationInstance> instances;
        for (const std::string& spec : ab_instances) {
            LoadedInstance inst = resolve_instance_spec(spec, ab_tamper);
            instances.push_back({inst.name, std::move(inst.formula)});
        }
        const harness::AblationResult result = harness::run_ablation(instances, ac);
        std::cout << "variant";
        for (const auto& s : ac.scenarios) std::cout << "  " << s << "(best/avg)";
        std::cout << "\n";
        for (const auto& var : harness::ablation_variants()) {
            std::cout << var.name;
            for (const auto& s : ac.scenarios) {
                const auto& [tb, ta] = result.aggregate.at(var.name).at(s);
                std::cout << "  " << harness::format_percent(tb) << "/"
                          << harness::format_percent(ta);
            }
            std::cout << "\n";
        }
        std::cout << result.files_written.size() << " files under " << ac.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
