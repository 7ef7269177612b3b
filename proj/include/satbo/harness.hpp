#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "satbo/baselines.hpp"
#include "satbo/bo.hpp"
#include "satbo/cnf.hpp"
#include "satbo/dpll.hpp"
#include "satbo/rules.hpp"
#include "satbo/scenario.hpp"

namespace satbo::harness {

enum class SolverKind { AdaptiveDpll, WalkSat, Random };

std::string solver_name(SolverKind k);

struct RunConfig {
    int max_iter = 15;           // budgeted optimization rounds
    int samples_per_round = 30;  // solutions requested per sampler call
    double time_per_round = 10.0;   // seconds per sampler call; <= 0 disables
    double total_budget = 150.0;    // seconds of sampler wall time; <= 0 disables
    // Deterministic operation budget per sampler call (solver steps for the
    // tree sampler, tries for walksat, draws x max_iter for the one-shot
    // random pass); 0 leaves only the time budgets.
    std::uint64_t steps_per_round = 0;
    SolverKind solver = SolverKind::AdaptiveDpll;
    bool rb = true;
    bool rfdv = true;
    bool rfiv = true;
    bool bo = true;
    int tv = 200;
    std::uint64_t seed = 0;
    bo::BoParams bo_params{};  // seed is derived from `seed`, not taken from here
};

// Where coverage comes from: a synthetic per-variable model, or a transaction
// log that scores the attack rule decoded from each solution. Exactly one of
// model/log is set; log scoring needs the varmap.
struct Objective {
    const scenario::CoverageModel* model = nullptr;
    const rules::TransactionLog* log = nullptr;
    const rules::VarMap* varmap = nullptr;

    double bound() const;  // componentwise max sum, or 1.0 for logs
    double evaluate(const cnf::Assignment& s) const;
};

struct PoolEntry {
    cnf::Assignment solution;
    double coverage = 0.0;
};

// Accumulates every evaluated (solution, coverage) pair; best() never
// decreases as entries are inserted.
class ElitePool {
public:
    void insert(cnf::Assignment s, double coverage);
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const PoolEntry& best() const;
    const std::vector<PoolEntry>& entries() const { return entries_; }

private:
    std::vector<PoolEntry> entries_;
    std::size_t best_ = 0;
};

struct RoundTrace {
    int round = 0;        // 0-based, in execution order
    bool init = false;    // outer initialization round (flat weights)
    dpll::WeightVector delta;
    int num_solutions = 0;
    double round_best = 0.0;   // meaningless when num_solutions == 0
    double best_so_far = 0.0;
    double tr_length = 0.0;    // trust-region side after the round; 0 when bo off
    std::uint64_t steps = 0;   // solver operations (steps/flips/draws)
    int evals_after = 0;
    double wall_seconds = 0.0;  // never serialized; stderr reporting only
};

struct NoveltyReport {
    int covered = 0;  // log transactions triggering the attack precondition
    int novel = 0;    // of those, tampering yields a transaction absent from the log
};

struct RunReport {
    bool unsat = false;  // the sampler exhausted the tree without a solution
    bool found = false;
    cnf::Assignment best_solution;
    double best_coverage = 0.0;
    double bound = 0.0;
    double theta = 0.0;  // best_coverage / bound
    int evals_used = 0;
    int rounds_run = 0;
    int distinct_solutions = 0;  // distinct assignments sampled across the run
    double sampler_wall_seconds = 0.0;
    std::vector<RoundTrace> rounds;
    nlohmann::json bo_trace;  // final confidence-interval state; null when bo off
    std::string attack_rule;     // decoded best solution (needs a varmap)
    std::string inverted_rule;   // the derived verification rule
    std::optional<NoveltyReport> novelty;  // log objectives only
};

// One optimization run: flat-weight round, confidence-interval
// initialization, then suggest/sample/update iterations until the round
// budget, the evaluation meter (samples_per_round x max_iter), the wall
// budget, or a trust-region collapse (which restarts the outer loop) ends
// it. Coverage evaluations are metered; the cap is never exceeded.
RunReport run_satbo(const cnf::CnfFormula& F, const Objective& obj, const RunConfig& cfg);

// Report without wall-clock fields; byte-stable across identical seeded runs
// under deterministic budgets.
nlohmann::json report_to_json(const RunReport& report);

NoveltyReport novelty_of(const rules::AttackRule& ar, const rules::TransactionLog& log);

// Hash-chains path components onto a base seed; order-sensitive.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

struct VariantSpec {
    std::string name;
    SolverKind solver = SolverKind::AdaptiveDpll;
    bool rb = true, rfdv = true, rfiv = true, bo = true;
};

// The eight-row comparison matrix: a random-draw baseline, the tree sampler
// with each strategy subset, the local-search swap, and the full stack.
const std::vector<VariantSpec>& ablation_variants();

struct AblationInstance {
    std::string name;
    cnf::CnfFormula formula;
};

struct AblationConfig {
    std::vector<std::string> scenarios = {"binomial", "power-law"};
    double binomial_p = 0.5;
    int repeats = 3;
    RunConfig run;                    // per-variant solver/flags are overridden
    std::uint64_t scenario_seed = 0;  // coverage models; shared across variants/repeats
    int threads = 0;                  // 0 = hardware concurrency
    std::string out_dir;              // empty = no files
    bool write_run_traces = true;
};

struct AblationRow {
    std::string variant, instance, scenario;
    double f_best = 0.0;  // percent of the instance bound, best over repeats
    double f_avg = 0.0;   // percent, mean over repeats
};

struct AblationResult {
    std::vector<AblationRow> per_instance;
    // variant -> scenario -> (theta_best, theta_avg) in percent
    std::map<std::string, std::map<std::string, std::pair<double, double>>> aggregate;
    // scenario -> variant -> #instances where the variant's f_best ties the max
    std::map<std::string, std::map<std::string, int>> best_counts;
    std::vector<std::string> files_written;
};

// Runs the full matrix (variants x scenarios x instances x repeats) on an
// instance-level thread pool and writes the CSV tables and per-run JSON
// traces under out_dir. Identical configs and seeds give identical bytes.
AblationResult run_ablation(const std::vector<AblationInstance>& instances,
                            const AblationConfig& cfg);

// Banker's rounding to two decimals, fixed format (CSV cells).
std::string format_percent(double v);

}  // namespace satbo::harness
