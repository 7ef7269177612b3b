#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "satbo/cnf.hpp"
#include "satbo/rules.hpp"

namespace satbo::scenario {

// Per-variable coverage contribution: components[i] holds (g0, g1) for
// variable i+1, the payoff when that variable is assigned false / true.
// Objective over a complete assignment s: f(s) = sum_i (s_i ? g1_i : g0_i).
struct CoverageModel {
    std::vector<std::pair<double, double>> components;

    int num_vars() const { return static_cast<int>(components.size()); }
};

// Polynomial component from an underlying sequence P of length 2n:
// g0_i = 1 + P[2i-1] + P[2i-1]^2, g1_i = 1 + P[2i] + P[2i]^2 (1-indexed).
// Binomial scenario: each P value falls in [0,10] with probability p and in
// [10,100] otherwise, uniform within the chosen interval.
CoverageModel gen_binomial_model(int n, double p, std::uint64_t seed);

// Power-law scenario: r = round(ln(2n)) indices (at least 1, distinct) get a
// value uniform in [1000,2000]; every other P value is 0, so most components
// collapse to 1 and a handful dominate the objective.
CoverageModel gen_powerlaw_model(int n, std::uint64_t seed);

// f(s); throws if s is incomplete or sized differently from the model.
double coverage_of(const CoverageModel& model, const cnf::Assignment& s);

// C = sum_i max(g0_i, g1_i): coverage of the (not necessarily feasible)
// componentwise argmax, an upper bound on f over all assignments.
double upper_bound(const CoverageModel& model);

// Aggregate quality over instances: theta = sum(best) / sum(bound) for
// (best, bound) pairs. Throws on empty input or any pair violating
// 0 <= best <= bound with bound > 0.
double theta(const std::vector<std::pair<double, double>>& results);

nlohmann::json model_to_json(const CoverageModel& model);
CoverageModel model_from_json(const nlohmann::json& j);

// A rule-shaped benchmark instance: generated DSL, its parse, and the
// encoding against the single tampered categorical field.
struct GeneratedInstance {
    std::string name;  // "v{vars}-c{clauses}" from the encoded formula
    std::string dsl;
    rules::RuleSet rules;
    rules::Encoded encoded;
};

// Builds a satisfiable instance with exactly target_vars encoded variables
// and (when rule_count is 0) roughly twice as many clauses. rule_count
// overrides the derived rule count for small/degenerate shapes.
// Satisfiability is planted by construction and re-checked with one sampler
// pass; throws runtime_error if that check ever fails.
GeneratedInstance gen_instance(int target_vars, std::uint64_t seed, int rule_count = 0);

}  // namespace satbo::scenario
