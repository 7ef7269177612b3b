#include "satbo/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "satbo/rng.hpp"

namespace satbo::baselines {

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

class Deadline {
  public:
    explicit Deadline(double seconds)
        : enabled_(seconds > 0.0), start_ns_(now_ns()), budget_(seconds) {}
    bool expired() const {
        return enabled_ && static_cast<double>(now_ns() - start_ns_) * 1e-9 > budget_;
    }

  private:
    bool enabled_;
    std::uint64_t start_ns_;
    double budget_;
};

// Incremental clause bookkeeping for the walk: true-literal counts per clause
// and the list of currently unsatisfied clauses with O(1) membership updates.
class WalkState {
  public:
    WalkState(const cnf::CnfFormula& f) : f_(&f) {
        pos_occ_.assign(static_cast<std::size_t>(f.num_vars) + 1, {});
        neg_occ_.assign(static_cast<std::size_t>(f.num_vars) + 1, {});
        for (std::size_t ci = 0; ci < f.clauses.size(); ++ci)
            for (const cnf::Literal& l : f.clauses[ci])
                (l.positive ? pos_occ_ : neg_occ_)[static_cast<std::size_t>(l.var)]
                    .push_back(static_cast<int>(ci));
        unsat_pos_.assign(f.clauses.size(), -1);
    }

    void reset(const std::vector<bool>& assignment) {
        values_ = assignment;
        true_count_.assign(f_->clauses.size(), 0);
        unsat_.clear();
        std::fill(unsat_pos_.begin(), unsat_pos_.end(), -1);
        for (std::size_t ci = 0; ci < f_->clauses.size(); ++ci) {
            for (const cnf::Literal& l : f_->clauses[ci])
                if (values_[static_cast<std::size_t>(l.var)] == l.positive)
                    ++true_count_[ci];
            if (true_count_[ci] == 0) push_unsat(static_cast<int>(ci));
        }
    }

    bool satisfied() const { return unsat_.empty(); }
    const std::vector<int>& unsat() const { return unsat_; }
    const std::vector<bool>& values() const { return values_; }

    // Clauses that would lose their last true literal if var were flipped.
    int break_count(int var) const {
        const auto& satisfied_in = values_[static_cast<std::size_t>(var)]
                                       ? pos_occ_[static_cast<std::size_t>(var)]
                                       : neg_occ_[static_cast<std::size_t>(var)];
        int breaks = 0;
        for (int ci : satisfied_in)
            breaks += true_count_[static_cast<std::size_t>(ci)] == 1;
        return breaks;
    }

    void flip(int var) {
        const bool old_value = values_[static_cast<std::size_t>(var)];
        values_[static_cast<std::size_t>(var)] = !old_value;
        const auto& lost = old_value ? pos_occ_[static_cast<std::size_t>(var)]
                                     : neg_occ_[static_cast<std::size_t>(var)];
        for (int ci : lost)
            if (--true_count_[static_cast<std::size_t>(ci)] == 0) push_unsat(ci);
        const auto& gained = old_value ? neg_occ_[static_cast<std::size_t>(var)]
                                       : pos_occ_[static_cast<std::size_t>(var)];
        for (int ci : gained)
            if (true_count_[static_cast<std::size_t>(ci)]++ == 0) drop_unsat(ci);
    }

  private:
    void push_unsat(int ci) {
        unsat_pos_[static_cast<std::size_t>(ci)] = static_cast<int>(unsat_.size());
        unsat_.push_back(ci);
    }
    void drop_unsat(int ci) {
        const int at = unsat_pos_[static_cast<std::size_t>(ci)];
        const int last = unsat_.back();
        unsat_[static_cast<std::size_t>(at)] = last;
        unsat_pos_[static_cast<std::size_t>(last)] = at;
        unsat_.pop_back();
        unsat_pos_[static_cast<std::size_t>(ci)] = -1;
    }

    const cnf::CnfFormula* f_;
    std::vector<std::vector<int>> pos_occ_;
    std::vector<std::vector<int>> neg_occ_;
    std::vector<bool> values_;
    std::vector<int> true_count_;
    std::vector<int> unsat_;
    std::vector<int> unsat_pos_;
};

cnf::Assignment to_assignment(const std::vector<bool>& values, int n) {
    cnf::Assignment a(n);
    for (int v = 1; v <= n; ++v) a.set(v, values[static_cast<std::size_t>(v)]);
    return a;
}

}  // namespace

WalkSatResult walksat_sample(const cnf::CnfFormula& formula, const dpll::WeightVector& delta,
                             const WalkSatConfig& cfg) {
    if (cfg.max_num < 1) throw std::invalid_argument("max_num must be at least 1");
    if (!(cfg.noise >= 0.0 && cfg.noise <= 1.0))
        throw std::invalid_argument("noise must lie in [0,1]");
    if (static_cast<int>(delta.size()) != formula.num_vars)
        throw std::invalid_argument("weight vector length does not match the formula");
    for (double d : delta)
        if (!(d >= 0.0 && d <= 1.0))
            throw std::invalid_argument("weights must lie in [0,1]");
    if (cfg.max_tries == 0 && cfg.time_budget_seconds <= 0.0)
        throw std::invalid_argument(
            "walksat needs a try budget or a time budget; it cannot prove exhaustion");

    WalkSatResult result;
    for (const cnf::Clause& c : formula.clauses)
        if (c.empty()) return result;  // vacuously false clause: UNSAT

    const int max_flips =
        cfg.max_flips > 0 ? cfg.max_flips : 100 * std::max(formula.num_vars, 1);
    Rng rng(cfg.seed);
    WalkState state(formula);
    const Deadline deadline(cfg.time_budget_seconds);
    std::vector<bool> init(static_cast<std::size_t>(formula.num_vars) + 1, false);

    while (static_cast<int>(result.solutions.size()) < cfg.max_num) {
        if (cfg.max_tries != 0 && result.tries >= cfg.max_tries) break;
        if (deadline.expired()) break;
        ++result.tries;

        for (int v = 1; v <= formula.num_vars; ++v)
            init[static_cast<std::size_t>(v)] =
                rng.bernoulli(delta[static_cast<std::size_t>(v) - 1]);
        state.reset(init);

        for (int flip = 0; flip < max_flips && !state.satisfied(); ++flip) {
            const auto& unsat = state.unsat();
            const cnf::Clause& clause =
                formula.clauses[static_cast<std::size_t>(unsat[rng.index(unsat.size())])];
            int var;
            if (rng.bernoulli(cfg.noise)) {
                var = clause[rng.index(clause.size())].var;
            } else {
                int best = -1;
                std::vector<int> minima;
                for (const cnf::Literal& l : clause) {
                    const int breaks = state.break_count(l.var);
                    if (best < 0 || breaks < best) {
                        best = breaks;
                        minima.assign(1, l.var);
                    } else if (breaks == best) {
                        minima.push_back(l.var);
                    }
                }
                var = minima[rng.index(minima.size())];
            }
            state.flip(var);
            ++result.flips;
        }
        if (state.satisfied())
            result.solutions.push_back(to_assignment(state.values(), formula.num_vars));
    }
    return result;
}

RandomSampleResult random_sample(const cnf::CnfFormula& formula, const RandomConfig& cfg) {
    if (cfg.max_draws == 0 && cfg.time_budget_seconds <= 0.0)
        throw std::invalid_argument(
            "random sampling needs a draw budget or a time budget");
    RandomSampleResult result;
    Rng rng(cfg.seed);
    const Deadline deadline(cfg.time_budget_seconds);
    cnf::Assignment a(formula.num_vars);

    for (;;) {
        if (cfg.max_num > 0 && static_cast<int>(result.solutions.size()) >= cfg.max_num) break;
        if (cfg.max_draws != 0 && result.draws >= cfg.max_draws) break;
        if (deadline.expired()) break;
        ++result.draws;
        for (int v = 1; v <= formula.num_vars; ++v) a.set(v, rng.bernoulli(0.5));
        if (cnf::evaluate(formula, a) == cnf::Eval::Satisfied) result.solutions.push_back(a);
    }
    return result;
}

}  // namespace satbo::baselines
