#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "satbo/cnf.hpp"
#include "satbo/rng.hpp"

namespace satbo::dpll {

// delta[i] is the assignment weight of variable i+1; all entries in [0,1].
using WeightVector = std::vector<double>;

using SampleSet = std::vector<cnf::Assignment>;

struct SamplerConfig {
    int max_num = 30;  // target sample count per call
    int tv = 200;      // decision-trail length gate for random backtracking
    double time_budget_seconds = 10.0;  // <= 0 disables the wall clock
    std::uint64_t max_steps = 0;        // 0 = unlimited; deterministic budget
    std::uint64_t seed = 0;
    bool rb = true;    // random backtracking
    bool rfdv = true;  // random flips of decision variables
    bool rfiv = true;  // random values for independent (untouched) variables
    // When set, decisions continue until every variable is assigned, so the
    // leaves of an exhausted tree enumerate the solution set exactly.
    bool exhaustive = false;
    std::ostream* trace = nullptr;
};

struct SampleStats {
    std::uint64_t steps = 0;
    std::uint64_t decisions = 0;
    std::uint64_t propagations = 0;
    std::uint64_t conflicts = 0;
    std::uint64_t flips = 0;      // decision literals flipped against preference
    std::uint64_t jumps = 0;      // nonzero backtrack levels taken
    std::uint64_t records = 0;
};

struct SampleResult {
    SampleSet solutions;
    SampleStats stats;
    bool exhausted = false;  // every branch of the search tree was completed
};

// Decision-literal choice: pick uniformly among the unassigned variables with
// the largest |delta - 0.5|, orient by preference (positive iff delta >= 0.5),
// then flip against the preference with probability min(0.5/|delta-0.5|, 50)%
// when rfdv is on. Draws one value from candidate_rng, plus one from flip_rng
// only when rfdv is on.
cnf::Literal get_candidate(const std::vector<int>& unassigned, const WeightVector& delta,
                           bool rfdv, Rng& candidate_rng, Rng& flip_rng,
                           bool* flipped = nullptr);

// Backtrack-level choice: 0 requests a chronological backtrack. A nonzero
// level (drawn uniformly from open_levels) is possible only when rb is on,
// 2*num_samples > max_num, and num_decisions > tv; then it is taken with
// probability ceil-free t < rho for an integer t in [1,100] and
// rho = 10*num_samples/max_num.
int get_level(std::size_t num_samples, std::size_t num_decisions,
              const std::vector<int>& open_levels, const SamplerConfig& cfg, Rng& rng);

// Randomized adaptive DPLL sampler. The class form exposes enough state to
// audit clause bookkeeping after every step; run() drives it to completion.
class Sampler {
  public:
    Sampler(const cnf::CnfFormula& formula, WeightVector delta, SamplerConfig cfg);

    // One iteration: propagate, then record / backtrack / decide. Returns
    // false once the sampler has finished.
    bool step();
    SampleResult run();

    bool finished() const { return finished_; }
    const SampleResult& result() const { return result_; }
    const cnf::Assignment& assignment() const { return assignment_; }
    const std::vector<int>& sat_counts() const { return sat_count_; }
    const std::vector<int>& false_counts() const { return false_count_; }
    bool in_conflict() const { return conflict_; }
    int decision_depth() const { return static_cast<int>(levels_.size()); }
    std::vector<int> open_levels() const;

  private:
    struct Level {
        std::size_t trail_start;
        int var;
        bool first_value;
        bool exhausted;
    };
    struct TrailEntry {
        int var;
        bool value;
    };

    void assign(int var, bool value, bool decision);
    void undo_to(std::size_t mark);
    void pop_level();
    void flip_top();
    bool recover(int p);
    void propagate();
    void record();
    bool goal_reached() const;
    std::vector<int> unassigned_vars() const;
    void finish();

    const cnf::CnfFormula* formula_;
    WeightVector delta_;
    SamplerConfig cfg_;

    cnf::Assignment assignment_;
    std::vector<int> sat_count_;
    std::vector<int> false_count_;
    std::vector<std::vector<int>> pos_occ_;
    std::vector<std::vector<int>> neg_occ_;
    std::vector<TrailEntry> trail_;
    std::vector<Level> levels_;
    std::vector<int> unit_queue_;
    int num_satisfied_ = 0;
    bool conflict_ = false;
    bool finished_ = false;

    Rng candidate_rng_;
    Rng flip_rng_;
    Rng level_rng_;
    Rng rfiv_rng_;

    double deadline_seconds_;
    std::uint64_t start_ns_ = 0;

    SampleResult result_;
};

// Algorithm entry point: sample up to cfg.max_num satisfying assignments of
// formula, biased by delta. An empty result with exhausted=true means UNSAT.
SampleResult sample_solutions(const cnf::CnfFormula& formula, const WeightVector& delta,
                              const SamplerConfig& cfg);

}  // namespace satbo::dpll
