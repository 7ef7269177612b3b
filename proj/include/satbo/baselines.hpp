#pragma once

#include <cstdint>

#include "satbo/cnf.hpp"
#include "satbo/dpll.hpp"

namespace satbo::baselines {

struct WalkSatConfig {
    int max_num = 30;
    int max_flips = 0;  // flips per try; 0 means 100 * num_vars
    double noise = 0.5;
    double time_budget_seconds = 10.0;  // <= 0 disables the wall clock
    std::uint64_t max_tries = 0;        // 0 = unlimited; deterministic budget
    std::uint64_t seed = 0;
};

struct WalkSatResult {
    dpll::SampleSet solutions;
    std::uint64_t tries = 0;
    std::uint64_t flips = 0;
};

// Local-search sampler: each try restarts from an assignment drawn per-variable
// true with probability delta (the weight coupling), then walks by picking an
// unsatisfied clause and flipping either a random member (with probability
// noise) or the member with the fewest broken clauses. Successful tries each
// contribute one sample; duplicates across tries are kept.
WalkSatResult walksat_sample(const cnf::CnfFormula& formula, const dpll::WeightVector& delta,
                             const WalkSatConfig& cfg);

struct RandomConfig {
    int max_num = 0;                    // 0 = unlimited (budget-bound)
    double time_budget_seconds = 10.0;  // <= 0 disables the wall clock
    std::uint64_t max_draws = 0;        // 0 = unlimited; deterministic budget
    std::uint64_t seed = 0;
};

struct RandomSampleResult {
    dpll::SampleSet solutions;
    std::uint64_t draws = 0;
};

// Uniform rejection sampler: draws complete assignments uniformly and keeps
// the satisfying ones until a budget runs out.
RandomSampleResult random_sample(const cnf::CnfFormula& formula, const RandomConfig& cfg);

}  // namespace satbo::baselines
