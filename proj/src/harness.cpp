#include "satbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

namespace satbo::harness {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string bits_of(const cnf::Assignment& a) {
    std::string s;
    s.reserve(static_cast<std::size_t>(a.num_vars()));
    for (int v = 1; v <= a.num_vars(); ++v) s.push_back(a[v] == cnf::Value::True ? '1' : '0');
    return s;
}

}  // namespace

std::string solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::AdaptiveDpll: return "dpll";
        case SolverKind::WalkSat: return "walksat";
        case SolverKind::Random: return "random";
    }
    return "?";
}

double Objective::bound() const {
    if (model != nullptr) return scenario::upper_bound(*model);
    return 1.0;
}

double Objective::evaluate(const cnf::Assignment& s) const {
    if (model != nullptr) return scenario::coverage_of(*model, s);
    const rules::AttackRule ar = rules::decode_solution(s, *varmap);
    return rules::coverage_on_log(ar, *log);
}

void ElitePool::insert(cnf::Assignment s, double coverage) {
    entries_.push_back({std::move(s), coverage});
    if (entries_.size() == 1 || coverage > entries_[best_].coverage) best_ = entries_.size() - 1;
}

const PoolEntry& ElitePool::best() const {
    if (entries_.empty()) throw std::logic_error("elite pool is empty");
    return entries_[best_];
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t x = base;
    for (std::uint64_t c : path) {
        SplitMix64 sm(x ^ (c * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
        x = sm.next();
    }
    return x;
}

NoveltyReport novelty_of(const rules::AttackRule& ar, const rules::TransactionLog& log) {
    NoveltyReport r;
    for (const auto& t : log) {
        if (!rules::precondition_holds(ar.preconditions, t)) continue;
        r.covered += 1;
        const rules::Transaction synth = rules::apply_tamper(ar, t);
        const bool historical =
            std::any_of(log.begin(), log.end(), [&](const rules::Transaction& h) { return h == synth; });
        if (!historical) r.novel += 1;
    }
    return r;
}

namespace {

struct RoundOutcome {
    dpll::SampleSet solutions;
    std::uint64_t steps = 0;
    bool exhausted = false;  // tree sampler enumerated everything it could
    double wall = 0.0;
};

void validate(const cnf::CnfFormula& F, const Objective& obj, const RunConfig& cfg) {
    if (F.num_vars < 1) throw std::invalid_argument("formula needs at least one variable");
    if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
    if (cfg.samples_per_round < 1)
        throw std::invalid_argument("samples_per_round must be at least 1");
    if (cfg.tv < 1) throw std::invalid_argument("tv must be at least 1");
    if (cfg.steps_per_round == 0 && cfg.time_per_round <= 0.0 && cfg.total_budget <= 0.0)
        throw std::invalid_argument("run needs an operation or time budget");
    if ((obj.model != nullptr) == (obj.log != nullptr))
        throw std::invalid_argument("objective needs exactly one of model and log");
    if (obj.model != nullptr && obj.model->num_vars() != F.num_vars)
        throw std::invalid_argument("coverage model does not match the formula size");
    if (obj.log != nullptr && obj.varmap == nullptr)
        throw std::invalid_argument("log objective needs the variable map");
    if (obj.varmap != nullptr && obj.varmap->num_vars() != F.num_vars)
        throw std::invalid_argument("variable map does not match the formula size");
}

}  // namespace

RunReport run_satbo(const cnf::CnfFormula& F, const Objective& obj, const RunConfig& cfg) {
    validate(F, obj, cfg);
    const auto n = static_cast<std::size_t>(F.num_vars);
    const int eval_budget = cfg.samples_per_round * cfg.max_iter;

    SplitMix64 seeds(cfg.seed);
    RunReport report;
    report.bound = obj.bound();

    ElitePool pool;
    std::set<std::string> distinct;
    int evals = 0;
    int round_index = 0;
    double wall_used = 0.0;

    const auto wall_ok = [&]() {
        return cfg.total_budget <= 0.0 || wall_used < cfg.total_budget;
    };
    const auto round_time = [&]() {
        if (cfg.total_budget > 0.0) {
            const double remaining = cfg.total_budget - wall_used;
            return cfg.time_per_round > 0.0 ? std::min(cfg.time_per_round, remaining) : remaining;
        }
        return cfg.time_per_round;
    };

    const auto sample_round = [&](const dpll::WeightVector& delta, int take) {
        RoundOutcome out;
        const double t0 = now_seconds();
        if (cfg.solver == SolverKind::AdaptiveDpll) {
            dpll::SamplerConfig sc;
            sc.max_num = take;
            sc.tv = cfg.tv;
            sc.time_budget_seconds = round_time();
            sc.max_steps = cfg.steps_per_round;
            sc.seed = seeds.next();
            sc.rb = cfg.rb;
            sc.rfdv = cfg.rfdv;
            sc.rfiv = cfg.rfiv;
            const dpll::SampleResult res = dpll::sample_solutions(F, delta, sc);
            out.solutions = res.solutions;
            out.steps = res.stats.steps;
            out.exhausted = res.exhausted;
        } else if (cfg.solver == SolverKind::WalkSat) {
            baselines::WalkSatConfig wc;
            wc.max_num = take;
            wc.time_budget_seconds = round_time();
            wc.max_tries = cfg.steps_per_round;
            wc.seed = seeds.next();
            const baselines::WalkSatResult res = baselines::walksat_sample(F, delta, wc);
            out.solutions = res.solutions;
            out.steps = res.flips;
        } else {
            // One-shot pass: the whole run's budget goes to a single call.
            baselines::RandomConfig rc;
            rc.max_num = take;
            rc.max_draws = cfg.steps_per_round * static_cast<std::uint64_t>(cfg.max_iter);
            rc.time_budget_seconds =
                cfg.total_budget > 0.0
                    ? cfg.total_budget
                    : (cfg.time_per_round > 0.0 ? cfg.time_per_round * cfg.max_iter : 0.0);
            rc.seed = seeds.next();
            const baselines::RandomSampleResult res = baselines::random_sample(F, rc);
            out.solutions = res.solutions;
            out.steps = res.draws;
        }
        out.wall = now_seconds() - t0;
        wall_used += out.wall;
        return out;
    };

    // Scores a round, feeds the pool and the meter, and records the trace.
    const auto absorb_round = [&](const RoundOutcome& out, const dpll::WeightVector& delta,
                                  bool init_round, double tr_after) {
        std::vector<double> f;
        f.reserve(out.solutions.size());
        for (const auto& s : out.solutions) {
            const double c = obj.evaluate(s);
            f.push_back(c);
            pool.insert(s, c);
            distinct.insert(bits_of(s));
            evals += 1;
        }
        RoundTrace t;
        t.round = round_index++;
        t.init = init_round;
        t.delta = delta;
        t.num_solutions = static_cast<int>(out.solutions.size());
        t.round_best = f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
        t.best_so_far = pool.empty() ? 0.0 : pool.best().coverage;
        t.tr_length = tr_after;
        t.steps = out.steps;
        t.evals_after = evals;
        t.wall_seconds = out.wall;
        report.rounds.push_back(std::move(t));
        return f;
    };

    const dpll::WeightVector flat(n, 0.5);

    if (cfg.solver == SolverKind::Random) {
        const RoundOutcome out = sample_round(flat, eval_budget);
        absorb_round(out, flat, true, 0.0);
    } else {
        int iter = 0;
        while (iter < cfg.max_iter && evals < eval_budget && wall_ok()) {
            // Flat-weight initialization round.
            const int take = std::min(cfg.samples_per_round, eval_budget - evals);
            const RoundOutcome out = sample_round(flat, take);
            const std::vector<double> f = absorb_round(out, flat, true, 0.0);
            if (out.solutions.empty()) {
                if (out.exhausted) {
                    if (pool.empty()) report.unsat = true;  // the tree closed: no solutions exist
                    break;
                }
                iter += 1;  // starved round; restart with the next per-round seed
                continue;
            }

            bo::BoState ci;
            if (cfg.bo) {
                bo::BoParams bp = cfg.bo_params;
                bp.seed = seeds.next();
                ci = bo::init_ci(out.solutions, f, bp);
                report.rounds.back().tr_length = ci.tr_length;
            }

            while ((!cfg.bo || bo::tr_sufficient(ci)) && iter < cfg.max_iter &&
                   evals < eval_budget && wall_ok()) {
                const dpll::WeightVector delta = cfg.bo ? bo::suggest_prefer(ci) : flat;
                const int inner_take = std::min(cfg.samples_per_round, eval_budget - evals);
                const RoundOutcome inner = sample_round(delta, inner_take);
                const std::vector<double> fi = absorb_round(inner, delta, false, 0.0);
                if (cfg.bo) {
                    bo::update_ci(ci, inner.solutions, fi);
                    report.rounds.back().tr_length = ci.tr_length;
                }
                iter += 1;
            }
            if (cfg.bo) report.bo_trace = bo::state_to_json(ci);
            if (!cfg.bo) break;  // no confidence interval to restart
        }
    }

    report.evals_used = evals;
    report.rounds_run = static_cast<int>(report.rounds.size());
    report.distinct_solutions = static_cast<int>(distinct.size());
    report.sampler_wall_seconds = wall_used;
    if (!pool.empty()) {
        report.found = true;
        report.best_solution = pool.best().solution;
        report.best_coverage = pool.best().coverage;
        report.theta = report.bound > 0.0 ? report.best_coverage / report.bound : 0.0;
        if (obj.varmap != nullptr) {
            const rules::AttackRule ar = rules::decode_solution(report.best_solution, *obj.varmap);
            report.attack_rule = ar.to_string();
            report.inverted_rule = rules::invert_attack_rule(ar).to_string();
            if (obj.log != nullptr) report.novelty = novelty_of(ar, *obj.log);
        }
    }
    return report;
}

nlohmann::json report_to_json(const RunReport& report) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& t : report.rounds) {
        nlohmann::json r = {{"round", t.round},
                            {"init", t.init},
                            {"delta", t.delta},
                            {"num_solutions", t.num_solutions},
                            {"steps", t.steps},
                            {"evals_after", t.evals_after}};
        r["round_best"] = t.num_solutions > 0 ? nlohmann::json(t.round_best) : nlohmann::json();
        r["best_so_far"] = t.evals_after > 0 ? nlohmann::json(t.best_so_far) : nlohmann::json();
        r["tr_length"] = t.tr_length > 0.0 ? nlohmann::json(t.tr_length) : nlohmann::json();
        rounds.push_back(std::move(r));
    }
    nlohmann::json j = {{"unsat", report.unsat},
                        {"found", report.found},
                        {"bound", report.bound},
                        {"evals_used", report.evals_used},
                        {"rounds_run", report.rounds_run},
                        {"distinct_solutions", report.distinct_solutions},
                        {"rounds", std::move(rounds)},
                        {"bo", report.bo_trace}};
    j["best_coverage"] = report.found ? nlohmann::json(report.best_coverage) : nlohmann::json();
    j["theta"] = report.found ? nlohmann::json(report.theta) : nlohmann::json();
    j["best_solution"] = report.found ? nlohmann::json(bits_of(report.best_solution)) : nlohmann::json();
    j["attack_rule"] =
        report.attack_rule.empty() ? nlohmann::json() : nlohmann::json(report.attack_rule);
    j["inverted_rule"] =
        report.inverted_rule.empty() ? nlohmann::json() : nlohmann::json(report.inverted_rule);
    j["novelty"] = report.novelty.has_value()
                       ? nlohmann::json({{"covered", report.novelty->covered},
                                         {"novel", report.novelty->novel}})
                       : nlohmann::json();
    return j;
}

const std::vector<VariantSpec>& ablation_variants() {
    static const std::vector<VariantSpec> table = {
        {"random", SolverKind::Random, false, false, false, false},
        {"satbo0", SolverKind::AdaptiveDpll, false, false, false, true},
        {"satbo1", SolverKind::AdaptiveDpll, false, true, true, true},
        {"satbo2", SolverKind::AdaptiveDpll, true, false, true, true},
        {"satbo3", SolverKind::AdaptiveDpll, true, true, false, true},
        {"satbo4", SolverKind::AdaptiveDpll, true, true, true, false},
        {"walksat-bo", SolverKind::WalkSat, false, false, false, true},
        {"satbo", SolverKind::AdaptiveDpll, true, true, true, true},
    };
    return table;
}

std::string format_percent(double v) {
    const double snapped = std::nearbyint(v * 100.0) / 100.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", snapped);
    return buf;
}

namespace {

scenario::CoverageModel make_model(const std::string& kind, int n, double binomial_p,
                                   std::uint64_t seed) {
    if (kind == "binomial") return scenario::gen_binomial_model(n, binomial_p, seed);
    if (kind == "power-law") return scenario::gen_powerlaw_model(n, seed);
    throw std::invalid_argument("unknown scenario kind: " + kind);
}

struct Job {
    std::size_t variant, scen, inst, repeat;
};

}  // namespace

AblationResult run_ablation(const std::vector<AblationInstance>& instances,
                            const AblationConfig& cfg) {
    if (instances.empty()) throw std::invalid_argument("ablation needs at least one instance");
    if (cfg.scenarios.empty()) throw std::invalid_argument("ablation needs at least one scenario");
    if (cfg.repeats < 1) throw std::invalid_argument("ablation needs at least one repeat");

    const auto& variants = ablation_variants();
    const std::size_t v_n = variants.size(), s_n = cfg.scenarios.size(),
                      i_n = instances.size(), r_n = static_cast<std::size_t>(cfg.repeats);

    // One coverage model per (instance, scenario), shared by every variant
    // and repeat so the comparison is on identical ground.
    std::vector<std::vector<scenario::CoverageModel>> models(i_n);
    for (std::size_t i = 0; i < i_n; ++i)
        for (std::size_t s = 0; s < s_n; ++s)
            models[i].push_back(make_model(cfg.scenarios[s], instances[i].formula.num_vars,
                                           cfg.binomial_p,
                                           derive_seed(cfg.scenario_seed, {i, s})));

    std::vector<Job> jobs;
    jobs.reserve(v_n * s_n * i_n * r_n);
    for (std::size_t v = 0; v < v_n; ++v)
        for (std::size_t s = 0; s < s_n; ++s)
            for (std::size_t i = 0; i < i_n; ++i)
                for (std::size_t r = 0; r < r_n; ++r) jobs.push_back({v, s, i, r});

    std::vector<RunReport> reports(jobs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) return;
            const Job& job = jobs[idx];
            RunConfig rc = cfg.run;
            const VariantSpec& var = variants[job.variant];
            rc.solver = var.solver;
            rc.rb = var.rb;
            rc.rfdv = var.rfdv;
            rc.rfiv = var.rfiv;
            rc.bo = var.bo;
            rc.seed = derive_seed(cfg.run.seed, {job.variant, job.scen, job.inst, job.repeat});
            Objective obj;
            obj.model = &models[job.inst][job.scen];
            reports[idx] = run_satbo(instances[job.inst].formula, obj, rc);
            std::fprintf(stderr, "ablate %s/%s/%s r%zu: best=%.6g wall=%.2fs\n",
                         var.name.c_str(), cfg.scenarios[job.scen].c_str(),
                         instances[job.inst].name.c_str(), job.repeat,
                         reports[idx].best_coverage, reports[idx].sampler_wall_seconds);
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t nthreads =
        std::min<std::size_t>(jobs.size(), cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw);
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < nthreads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    const auto report_at = [&](std::size_t v, std::size_t s, std::size_t i,
                               std::size_t r) -> const RunReport& {
        return reports[((v * s_n + s) * i_n + i) * r_n + r];
    };

    AblationResult result;
    for (std::size_t v = 0; v < v_n; ++v) {
        for (std::size_t s = 0; s < s_n; ++s) {
            double sum_best = 0.0, sum_avg = 0.0, sum_bound = 0.0;
            for (std::size_t i = 0; i < i_n; ++i) {
                double best = 0.0, avg = 0.0;
                for (std::size_t r = 0; r < r_n; ++r) {
                    const double c = report_at(v, s, i, r).best_coverage;
                    best = std::max(best, c);
                    avg += c;
                }
                avg /= static_cast<double>(r_n);
                const double bound = scenario::upper_bound(models[i][s]);
                result.per_instance.push_back({variants[v].name, instances[i].name,
                                               cfg.scenarios[s], 100.0 * best / bound,
                                               100.0 * avg / bound});
                sum_best += best;
                sum_avg += avg;
                sum_bound += bound;
            }
            result.aggregate[variants[v].name][cfg.scenarios[s]] = {
                100.0 * sum_best / sum_bound, 100.0 * sum_avg / sum_bound};
        }
    }

    for (std::size_t s = 0; s < s_n; ++s) {
        auto& counts = result.best_counts[cfg.scenarios[s]];
        for (const auto& var : variants) counts[var.name] = 0;
        for (std::size_t i = 0; i < i_n; ++i) {
            double top = -1.0;
            for (std::size_t v = 0; v < v_n; ++v)
                for (const auto& row : result.per_instance)
                    if (row.variant == variants[v].name && row.scenario == cfg.scenarios[s] &&
                        row.instance == instances[i].name)
                        top = std::max(top, row.f_best);
            for (std::size_t v = 0; v < v_n; ++v)
                for (const auto& row : result.per_instance)
                    if (row.variant == variants[v].name && row.scenario == cfg.scenarios[s] &&
                        row.instance == instances[i].name && row.f_best >= top - 1e-9)
                        counts[variants[v].name] += 1;
        }
    }

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        const auto write_file = [&](const std::string& name, const std::string& body) {
            const std::string path = (fs::path(cfg.out_dir) / name).string();
            std::ofstream out(path, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + path);
            out << body;
            result.files_written.push_back(path);
        };

        std::string agg = "variant,rb,rfdv,rfiv,bo";
        for (const auto& s : cfg.scenarios) agg += "," + s + "_best," + s + "_avg";
        agg += "\n";
        for (const auto& var : variants) {
            agg += var.name;
            agg += var.rb ? ",1" : ",0";
            agg += var.rfdv ? ",1" : ",0";
            agg += var.rfiv ? ",1" : ",0";
            agg += var.bo ? ",1" : ",0";
            for (const auto& s : cfg.scenarios) {
                const auto& [tb, ta] = result.aggregate[var.name][s];
                agg += "," + format_percent(tb) + "," + format_percent(ta);
            }
            agg += "\n";
        }
        write_file("aggregate.csv", agg);

        for (const auto& s : cfg.scenarios) {
            std::string body = "variant,instance,f_best,f_avg\n";
            for (const auto& row : result.per_instance)
                if (row.scenario == s)
                    body += row.variant + "," + row.instance + "," + format_percent(row.f_best) +
                            "," + format_percent(row.f_avg) + "\n";
            write_file("instances_" + s + ".csv", body);
        }

        std::string bests = "scenario,variant,best_count\n";
        for (const auto& s : cfg.scenarios)
            for (const auto& var : variants)
                bests += s + "," + var.name + "," + std::to_string(result.best_counts[s][var.name]) +
                         "\n";
        write_file("best_counts.csv", bests);

        if (cfg.write_run_traces) {
            fs::create_directories(fs::path(cfg.out_dir) / "runs");
            for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
                const Job& job = jobs[idx];
                nlohmann::json j = report_to_json(reports[idx]);
                j["variant"] = variants[job.variant].name;
                j["scenario"] = cfg.scenarios[job.scen];
                j["instance"] = instances[job.inst].name;
                j["repeat"] = job.repeat;
                const std::string name = "runs/" + instances[job.inst].name + "_" +
                                         cfg.scenarios[job.scen] + "_" + variants[job.variant].name +
                                         "_r" + std::to_string(job.repeat) + ".json";
                write_file(name, j.dump(2) + "\n");
            }
        }
    }
    return result;
}

}  // namespace satbo::harness
