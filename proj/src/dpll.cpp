#include "satbo/dpll.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace satbo::dpll {

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

}  // namespace

cnf::Literal get_candidate(const std::vector<int>& unassigned, const WeightVector& delta,
                           bool rfdv, Rng& candidate_rng, Rng& flip_rng, bool* flipped) {
    if (unassigned.empty()) throw std::invalid_argument("no unassigned variables to decide");

    double best = -1.0;
    std::vector<int> clearest;
    for (int v : unassigned) {
        const double pref = std::abs(delta[static_cast<std::size_t>(v) - 1] - 0.5);
        if (pref > best) {
            best = pref;
            clearest.assign(1, v);
        } else if (pref == best) {
            clearest.push_back(v);
        }
    }

    const int var = clearest[candidate_rng.index(clearest.size())];
    bool positive = delta[static_cast<std::size_t>(var) - 1] >= 0.5;

    bool did_flip = false;
    if (rfdv) {
        const double theta =
            best > 0.0 ? 0.5 / best : std::numeric_limits<double>::infinity();
        const double cap = std::min(theta, 50.0);
        const int t = flip_rng.uniform_int(1, 100);
        if (static_cast<double>(t) <= cap) {
            positive = !positive;
            did_flip = true;
        }
    }
    if (flipped) *flipped = did_flip;
    return cnf::Literal{var, positive};
}

int get_level(std::size_t num_samples, std::size_t num_decisions,
              const std::vector<int>& open_levels, const SamplerConfig& cfg, Rng& rng) {
    if (!cfg.rb) return 0;
    if (2 * num_samples <= static_cast<std::size_t>(cfg.max_num)) return 0;
    if (num_decisions <= static_cast<std::size_t>(cfg.tv)) return 0;
    if (open_levels.empty()) return 0;

    const double rho =
        10.0 * static_cast<double>(num_samples) / static_cast<double>(cfg.max_num);
    const int t = rng.uniform_int(1, 100);
    if (static_cast<double>(t) < rho) return open_levels[rng.index(open_levels.size())];
    return 0;
}

Sampler::Sampler(const cnf::CnfFormula& formula, WeightVector delta, SamplerConfig cfg)
    : formula_(&formula),
      delta_(std::move(delta)),
      cfg_(cfg),
      assignment_(formula.num_vars),
      candidate_rng_(0),
      flip_rng_(0),
      level_rng_(0),
      rfiv_rng_(0),
      deadline_seconds_(cfg.time_budget_seconds) {
    if (cfg_.max_num < 1) throw std::invalid_argument("max_num must be at least 1");
    if (cfg_.tv < 1) throw std::invalid_argument("tv must be at least 1");
    if (static_cast<int>(delta_.size()) != formula.num_vars)
        throw std::invalid_argument("weight vector has " + std::to_string(delta_.size()) +
                                    " entries for " + std::to_string(formula.num_vars) +
                                    " variables");
    for (double d : delta_)
        if (!(d >= 0.0 && d <= 1.0))
            throw std::invalid_argument("weights must lie in [0,1]");

    SplitMix64 root(cfg_.seed);
    candidate_rng_ = Rng(root.next());
    flip_rng_ = Rng(root.next());
    level_rng_ = Rng(root.next());
    rfiv_rng_ = Rng(root.next());

    const auto& clauses = formula_->clauses;
    sat_count_.assign(clauses.size(), 0);
    false_count_.assign(clauses.size(), 0);
    pos_occ_.assign(static_cast<std::size_t>(formula.num_vars) + 1, {});
    neg_occ_.assign(static_cast<std::size_t>(formula.num_vars) + 1, {});
    for (std::size_t ci = 0; ci < clauses.size(); ++ci) {
        if (clauses[ci].empty()) conflict_ = true;  // vacuously false clause
        if (clauses[ci].size() == 1) unit_queue_.push_back(static_cast<int>(ci));
        for (const cnf::Literal& l : clauses[ci])
            (l.positive ? pos_occ_ : neg_occ_)[static_cast<std::size_t>(l.var)].push_back(
                static_cast<int>(ci));
    }

    start_ns_ = now_ns();
}

void Sampler::assign(int var, bool value, bool decision) {
    assignment_.set(var, value);
    trail_.push_back({var, value});
    if (decision) ++result_.stats.decisions;

    const auto& satisfied_in = value ? pos_occ_[static_cast<std::size_t>(var)]
                                     : neg_occ_[static_cast<std::size_t>(var)];
    for (int ci : satisfied_in)
        if (sat_count_[static_cast<std::size_t>(ci)]++ == 0) ++num_satisfied_;

    const auto& falsified_in = value ? neg_occ_[static_cast<std::size_t>(var)]
                                     : pos_occ_[static_cast<std::size_t>(var)];
    for (int ci : falsified_in) {
        const auto idx = static_cast<std::size_t>(ci);
        ++false_count_[idx];
        if (sat_count_[idx] > 0) continue;
        const int open =
            static_cast<int>(formula_->clauses[idx].size()) - false_count_[idx];
        if (open == 0)
            conflict_ = true;
        else if (open == 1)
            unit_queue_.push_back(ci);
    }
}

void Sampler::undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
        const TrailEntry e = trail_.back();
        trail_.pop_back();
        assignment_.unset(e.var);
        const auto& satisfied_in = e.value ? pos_occ_[static_cast<std::size_t>(e.var)]
                                           : neg_occ_[static_cast<std::size_t>(e.var)];
        for (int ci : satisfied_in)
            if (--sat_count_[static_cast<std::size_t>(ci)] == 0) --num_satisfied_;
        const auto& falsified_in = e.value ? neg_occ_[static_cast<std::size_t>(e.var)]
                                           : pos_occ_[static_cast<std::size_t>(e.var)];
        for (int ci : falsified_in) --false_count_[static_cast<std::size_t>(ci)];
    }
}

void Sampler::pop_level() {
    undo_to(levels_.back().trail_start);
    levels_.pop_back();
}

void Sampler::flip_top() {
    Level& top = levels_.back();
    undo_to(top.trail_start);
    top.exhausted = true;
    if (cfg_.trace)
        *cfg_.trace << "backtrack level=" << levels_.size() << " x" << top.var << "="
                    << (!top.first_value ? 1 : 0) << "\n";
    assign(top.var, !top.first_value, true);
}

bool Sampler::recover(int p) {
    unit_queue_.clear();
    conflict_ = false;
    if (p > 0) {
        while (static_cast<int>(levels_.size()) > p) pop_level();
    }
    while (!levels_.empty() && levels_.back().exhausted) pop_level();
    if (levels_.empty()) return false;
    flip_top();
    return true;
}

void Sampler::propagate() {
    while (!conflict_ && !unit_queue_.empty()) {
        const auto ci = static_cast<std::size_t>(unit_queue_.back());
        unit_queue_.pop_back();
        if (sat_count_[ci] > 0) continue;
        if (static_cast<int>(formula_->clauses[ci].size()) - false_count_[ci] != 1)
            continue;
        for (const cnf::Literal& l : formula_->clauses[ci]) {
            if (assignment_[l.var] != cnf::Value::Unassigned) continue;
            assign(l.var, l.positive, false);
            ++result_.stats.propagations;
            break;
        }
    }
}

bool Sampler::goal_reached() const {
    if (cfg_.exhaustive) return trail_.size() == static_cast<std::size_t>(formula_->num_vars);
    return num_satisfied_ == static_cast<int>(formula_->clauses.size());
}

std::vector<int> Sampler::unassigned_vars() const {
    std::vector<int> u;
    for (int v = 1; v <= formula_->num_vars; ++v)
        if (assignment_[v] == cnf::Value::Unassigned) u.push_back(v);
    return u;
}

std::vector<int> Sampler::open_levels() const {
    std::vector<int> open;
    for (std::size_t i = 0; i < levels_.size(); ++i)
        if (!levels_[i].exhausted) open.push_back(static_cast<int>(i) + 1);
    return open;
}

void Sampler::record() {
    cnf::Assignment s = assignment_;
    for (int v = 1; v <= formula_->num_vars; ++v) {
        if (s[v] != cnf::Value::Unassigned) continue;
        const bool value = cfg_.rfiv ? rfiv_rng_.uniform_int(0, 1) == 1
                                     : delta_[static_cast<std::size_t>(v) - 1] >= 0.5;
        s.set(v, value);
    }
    result_.solutions.push_back(std::move(s));
    ++result_.stats.records;
    if (cfg_.trace) *cfg_.trace << "record n=" << result_.solutions.size() << "\n";
}

void Sampler::finish() { finished_ = true; }

bool Sampler::step() {
    if (finished_) return false;
    if (cfg_.max_steps != 0 && result_.stats.steps >= cfg_.max_steps) {
        finish();
        return false;
    }
    if (deadline_seconds_ > 0.0 &&
        static_cast<double>(now_ns() - start_ns_) * 1e-9 > deadline_seconds_) {
        finish();
        return false;
    }
    ++result_.stats.steps;

    propagate();

    if (conflict_) {
        ++result_.stats.conflicts;
        if (cfg_.trace) *cfg_.trace << "conflict depth=" << levels_.size() << "\n";
        const int p = get_level(result_.solutions.size(), levels_.size(), open_levels(),
                                cfg_, level_rng_);
        if (p > 0) ++result_.stats.jumps;
        if (!recover(p)) {
            result_.exhausted = true;
            finish();
        }
        return !finished_;
    }

    if (goal_reached()) {
        record();
        if (static_cast<int>(result_.solutions.size()) >= cfg_.max_num) {
            finish();
            return false;
        }
        const int p = get_level(result_.solutions.size(), levels_.size(), open_levels(),
                                cfg_, level_rng_);
        if (p > 0) ++result_.stats.jumps;
        if (!recover(p)) {
            result_.exhausted = true;
            finish();
        }
        return !finished_;
    }

    bool flipped = false;
    const cnf::Literal decision = get_candidate(unassigned_vars(), delta_, cfg_.rfdv,
                                                candidate_rng_, flip_rng_, &flipped);
    if (flipped) ++result_.stats.flips;
    levels_.push_back({trail_.size(), decision.var, decision.positive, false});
    if (cfg_.trace)
        *cfg_.trace << "decide level=" << levels_.size() << " x" << decision.var << "="
                    << (decision.positive ? 1 : 0) << (flipped ? " flipped" : "") << "\n";
    assign(decision.var, decision.positive, true);
    return true;
}

SampleResult Sampler::run() {
    while (step()) {
    }
    return result_;
}

SampleResult sample_solutions(const cnf::CnfFormula& formula, const WeightVector& delta,
                              const SamplerConfig& cfg) {
    Sampler sampler(formula, delta, cfg);
    return sampler.run();
}

}  // namespace satbo::dpll
