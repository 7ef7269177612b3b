#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "satbo/dpll.hpp"
#include "satbo/rules.hpp"
#include "testutil.hpp"

using namespace satbo;
using dpll::SamplerConfig;
using dpll::WeightVector;

namespace {

// Formula (x1|x2)(x3|x4)...(x_{2k-1}|x_{2k}) over n >= 2k variables: each
// pair excludes only the all-false combination, so the solution count over
// the paired variables is exactly 3^k.
cnf::CnfFormula pairs_formula(int n, int k) {
    cnf::CnfFormula f;
    f.num_vars = n;
    for (int i = 0; i < k; ++i)
        cnf::add_clause(f, {cnf::lit(2 * i + 1), cnf::lit(2 * i + 2)});
    return f;
}

WeightVector flat_delta(int n, double value = 0.5) {
    return WeightVector(static_cast<std::size_t>(n), value);
}

SamplerConfig test_config(std::uint64_t seed, int max_num, bool rb, bool rfdv, bool rfiv) {
    SamplerConfig cfg;
    cfg.seed = seed;
    cfg.max_num = max_num;
    cfg.rb = rb;
    cfg.rfdv = rfdv;
    cfg.rfiv = rfiv;
    cfg.time_budget_seconds = 0.0;  // keep unit tests machine-independent
    return cfg;
}

std::set<std::string> distinct_bits(const dpll::SampleSet& samples) {
    std::set<std::string> out;
    for (const auto& s : samples) out.insert(testutil::assignment_bits(s));
    return out;
}

}  // namespace

TEST_CASE("get_candidate picks the clearest preference and calibrates polarity") {
    Rng cand(1), flip(2);

    SUBCASE("strongest weight wins and flips are rare") {
        const WeightVector delta = {0.9, 0.6, 0.5};
        const std::vector<int> u = {1, 2, 3};
        int flips = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            bool flipped = false;
            const cnf::Literal l = dpll::get_candidate(u, delta, true, cand, flip, &flipped);
            CHECK(l.var == 1);
            CHECK(l.positive == !flipped);
            flips += flipped;
        }
        // theta = 0.5/0.4 = 1.25, so an integer t in [1,100] flips only at t=1.
        const double rate = static_cast<double>(flips) / trials;
        CHECK(rate >= 0.004);
        CHECK(rate <= 0.016);
    }

    SUBCASE("weights below one half orient negative") {
        const WeightVector delta = {0.2};
        for (int i = 0; i < 100; ++i) {
            const cnf::Literal l = dpll::get_candidate({1}, delta, false, cand, flip);
            CHECK(l.var == 1);
            CHECK_FALSE(l.positive);
        }
    }

    SUBCASE("indifferent weights behave as a fair coin with uniform variable choice") {
        const WeightVector delta = flat_delta(4);
        const std::vector<int> u = {1, 2, 3, 4};
        int positives = 0;
        std::vector<int> picks(5, 0);
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            const cnf::Literal l = dpll::get_candidate(u, delta, true, cand, flip);
            positives += l.positive;
            ++picks[static_cast<std::size_t>(l.var)];
        }
        const double positive_rate = static_cast<double>(positives) / trials;
        CHECK(positive_rate >= 0.47);
        CHECK(positive_rate <= 0.53);
        for (int v = 1; v <= 4; ++v) {
            const double share = static_cast<double>(picks[static_cast<std::size_t>(v)]) / trials;
            CHECK(share >= 0.21);
            CHECK(share <= 0.29);
        }
    }

    SUBCASE("without the flip strategy the preferred polarity is never flipped") {
        const WeightVector delta = flat_delta(3);
        for (int i = 0; i < 200; ++i) {
            bool flipped = true;
            const cnf::Literal l =
                dpll::get_candidate({1, 2, 3}, delta, false, cand, flip, &flipped);
            CHECK(l.positive);
            CHECK_FALSE(flipped);
        }
    }

    SUBCASE("empty candidate set is an error") {
        const WeightVector delta = flat_delta(1);
        CHECK_THROWS_AS(dpll::get_candidate({}, delta, false, cand, flip),
                        std::invalid_argument);
    }
}

TEST_CASE("get_level gates random backtracking and jumps at the documented rate") {
    SamplerConfig cfg = test_config(0, 30, true, true, true);
    const std::vector<int> open = {1, 4, 7, 9, 12};

    SUBCASE("closed gates always return the chronological level") {
        Rng rng(3);
        for (int i = 0; i < 10000; ++i) {
            CHECK(dpll::get_level(10, 250, open, cfg, rng) == 0);  // 2*10 <= 30
            CHECK(dpll::get_level(16, 150, open, cfg, rng) == 0);  // |D| <= 200
            CHECK(dpll::get_level(16, 250, {}, cfg, rng) == 0);    // no open levels
        }
        SamplerConfig no_rb = cfg;
        no_rb.rb = false;
        for (int i = 0; i < 1000; ++i)
            CHECK(dpll::get_level(29, 300, open, no_rb, rng) == 0);
    }

    SUBCASE("open gate jumps with probability rho/100") {
        Rng rng(4);
        int jumps = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            const int p = dpll::get_level(16, 250, open, cfg, rng);  // rho = 5.33
            if (p != 0) {
                ++jumps;
                CHECK(std::find(open.begin(), open.end(), p) != open.end());
            }
        }
        const double rate = static_cast<double>(jumps) / trials;
        CHECK(rate >= 0.035);
        CHECK(rate <= 0.065);
    }

    SUBCASE("near-full sample sets jump at just under ten percent") {
        Rng rng(5);
        int jumps = 0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i)
            jumps += dpll::get_level(29, 300, open, cfg, rng) != 0;  // rho = 9.67
        const double rate = static_cast<double>(jumps) / trials;
        CHECK(rate >= 0.0767 - 0.02);
        CHECK(rate <= 0.0967 + 0.02);
    }
}

TEST_CASE("every emitted sample satisfies the formula under any strategy mix") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const cnf::CnfFormula f = testutil::random_satisfiable_cnf(15, 40, 3, seed * 101);
        for (int mask = 0; mask < 8; ++mask) {
            const SamplerConfig cfg =
                test_config(seed * 8 + static_cast<std::uint64_t>(mask), 30, mask & 1,
                            mask & 2, mask & 4);
            const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(15), cfg);
            REQUIRE(!res.solutions.empty());
            CHECK(res.solutions.size() <= 30);
            CHECK(res.stats.records == res.solutions.size());
            for (const auto& s : res.solutions) {
                CHECK(s.complete());
                CHECK(testutil::oracle_satisfies(f, testutil::to_bools(s)));
            }
            // Within one call, recorded solutions are always pairwise distinct:
            // any two leaves differ at a decision variable one of them flipped.
            CHECK(distinct_bits(res.solutions).size() == res.solutions.size());
        }
    }
}

TEST_CASE("unsatisfiable formulas exhaust to an empty sample set") {
    cnf::CnfFormula contradiction;
    contradiction.num_vars = 1;
    cnf::add_clause(contradiction, {cnf::lit(1)});
    cnf::add_clause(contradiction, {cnf::lit(-1)});

    const dpll::SampleResult res =
        dpll::sample_solutions(contradiction, flat_delta(1), test_config(7, 30, true, true, true));
    CHECK(res.solutions.empty());
    CHECK(res.exhausted);

    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const cnf::CnfFormula f = testutil::random_unsat_cnf(8, 60, 3, seed * 31);
        const dpll::SampleResult r =
            dpll::sample_solutions(f, flat_delta(8), test_config(seed, 50, false, false, false));
        CHECK(r.solutions.empty());
        CHECK(r.exhausted);
    }
}

TEST_CASE("exhaustive mode enumerates the full solution set") {
    SUBCASE("random satisfiable instances match the truth-table oracle") {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const cnf::CnfFormula f = testutil::random_satisfiable_cnf(12, 30, 3, seed * 997);
            const auto oracle = testutil::brute_force_solutions(f);

            SamplerConfig cfg = test_config(seed, 1 << 20, false, false, false);
            cfg.exhaustive = true;
            const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(12), cfg);
            CHECK(res.exhausted);
            REQUIRE(res.solutions.size() == oracle.size());

            std::set<std::string> got = distinct_bits(res.solutions);
            REQUIRE(got.size() == res.solutions.size());
            std::set<std::string> expected;
            for (const auto& bits : oracle) {
                std::string key;
                for (std::size_t v = 1; v < bits.size(); ++v) key += bits[v] ? '1' : '0';
                expected.insert(key);
            }
            CHECK(got == expected);
        }
    }

    SUBCASE("the paired-clause family has exactly 3^k solutions") {
        const cnf::CnfFormula f = pairs_formula(12, 6);
        SamplerConfig cfg = test_config(11, 1 << 20, false, true, false);
        cfg.exhaustive = true;
        const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(12), cfg);
        CHECK(res.exhausted);
        CHECK(res.solutions.size() == 729);
        CHECK(distinct_bits(res.solutions).size() == 729);
    }

    SUBCASE("an unsatisfiable instance exhausts to nothing") {
        const cnf::CnfFormula f = testutil::random_unsat_cnf(8, 60, 3, 5);
        SamplerConfig cfg = test_config(3, 1 << 20, false, false, false);
        cfg.exhaustive = true;
        const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(8), cfg);
        CHECK(res.solutions.empty());
        CHECK(res.exhausted);
    }

    SUBCASE("max_num still truncates exhaustive enumeration") {
        const cnf::CnfFormula f = pairs_formula(12, 6);
        SamplerConfig cfg = test_config(11, 100, false, false, false);
        cfg.exhaustive = true;
        const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(12), cfg);
        CHECK(res.solutions.size() == 100);
        CHECK_FALSE(res.exhausted);
    }
}

TEST_CASE("default mode samples lie inside the brute-force solution set") {
    const cnf::CnfFormula f = testutil::random_satisfiable_cnf(15, 45, 3, 1234);
    const auto oracle = testutil::brute_force_solutions(f);
    std::set<std::string> full_set;
    for (const auto& bits : oracle) {
        std::string key;
        for (std::size_t v = 1; v < bits.size(); ++v) key += bits[v] ? '1' : '0';
        full_set.insert(key);
    }

    const dpll::SampleResult res =
        dpll::sample_solutions(f, flat_delta(15), test_config(9, 10, false, false, false));
    REQUIRE(!res.solutions.empty());
    for (const auto& s : res.solutions)
        CHECK(full_set.count(testutil::assignment_bits(s)) == 1);
}

TEST_CASE("the bank-transfer fixture always tampers to the uncovered tier") {
    const auto rs = rules::parse_rules(
        "FIELD user CAT {vip1,vip2,vip3}\n"
        "FIELD transfer_amount NUM\n"
        "IF TRUE THEN user != vip1\n"
        "IF user = vip1 THEN transfer_amount <= 10\n"
        "IF user = vip2 THEN transfer_amount <= 5\n"
        "IF user = vip2 THEN transfer_amount <= 10\n"
        "IF transfer_amount > 5 THEN transfer_amount <= 10\n"
        "IF transfer_amount <= 10 THEN transfer_amount > 5\n");
    const rules::Encoded enc = rules::encode_rules(rs, "user");

    const dpll::SampleResult res = dpll::sample_solutions(
        enc.formula, flat_delta(enc.formula.num_vars), test_config(21, 30, true, true, true));
    REQUIRE(!res.solutions.empty());
    for (const auto& s : res.solutions) {
        CHECK(testutil::oracle_satisfies(enc.formula, testutil::to_bools(s)));
        CHECK(s[3] == cnf::Value::True);  // every solution picks the vip3 tier
    }

    SamplerConfig cfg = test_config(22, 1 << 10, false, false, false);
    cfg.exhaustive = true;
    const dpll::SampleResult all = dpll::sample_solutions(
        enc.formula, flat_delta(enc.formula.num_vars), cfg);
    CHECK(all.exhausted);
    CHECK(distinct_bits(all.solutions) == std::set<std::string>{"00110", "00101"});
}

TEST_CASE("clause counters survive every backtrack exactly") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const cnf::CnfFormula f = testutil::random_cnf(9, 25, 3, seed * 773);
        dpll::Sampler sampler(f, flat_delta(9),
                              test_config(seed, 40, seed % 2 == 0, true, true));
        int guard = 0;
        do {
            // Recount every clause's satisfied/falsified literals from scratch
            // and compare with the sampler's incremental bookkeeping.
            const cnf::Assignment& a = sampler.assignment();
            for (std::size_t ci = 0; ci < f.clauses.size(); ++ci) {
                int sat = 0, fals = 0;
                for (const cnf::Literal& l : f.clauses[ci]) {
                    if (a[l.var] == cnf::Value::Unassigned) continue;
                    if ((a[l.var] == cnf::Value::True) == l.positive)
                        ++sat;
                    else
                        ++fals;
                }
                REQUIRE(sampler.sat_counts()[ci] == sat);
                REQUIRE(sampler.false_counts()[ci] == fals);
            }
            if (!sampler.in_conflict())
                REQUIRE(cnf::evaluate(f, a) != cnf::Eval::Falsified);
        } while (sampler.step() && ++guard < 4000);
    }
}

TEST_CASE("identical configuration reproduces the sample set byte for byte") {
    const cnf::CnfFormula f = testutil::planted_cnf(30, 90, 3, 4242);
    const SamplerConfig cfg = test_config(77, 30, true, true, true);

    const dpll::SampleResult a = dpll::sample_solutions(f, flat_delta(30), cfg);
    const dpll::SampleResult b = dpll::sample_solutions(f, flat_delta(30), cfg);
    REQUIRE(a.solutions.size() == b.solutions.size());
    for (std::size_t i = 0; i < a.solutions.size(); ++i)
        CHECK(testutil::assignment_bits(a.solutions[i]) ==
              testutil::assignment_bits(b.solutions[i]));
    CHECK(a.stats.decisions == b.stats.decisions);
    CHECK(a.stats.flips == b.stats.flips);
    CHECK(a.stats.conflicts == b.stats.conflicts);

    SamplerConfig other = cfg;
    other.seed = 78;
    const dpll::SampleResult c = dpll::sample_solutions(f, flat_delta(30), other);
    REQUIRE(!c.solutions.empty());
    CHECK(testutil::assignment_bits(a.solutions[0]) !=
          testutil::assignment_bits(c.solutions[0]));
}

TEST_CASE("weights steer decided variables and complete independent ones") {
    // Ten paired variables plus variable 11, which appears in no clause.
    const cnf::CnfFormula f = pairs_formula(11, 5);

    SUBCASE("a strong weight on a decided variable shifts its sample polarity") {
        auto fraction_true = [&](double w) {
            WeightVector delta = flat_delta(11);
            delta[10] = w;
            int trues = 0, total = 0;
            for (std::uint64_t seed = 1; seed <= 34; ++seed) {
                const dpll::SampleResult res = dpll::sample_solutions(
                    f, delta, test_config(seed, 30, false, true, true));
                for (const auto& s : res.solutions) {
                    trues += s[11] == cnf::Value::True;
                    ++total;
                }
            }
            REQUIRE(total >= 1000);
            return static_cast<double>(trues) / total;
        };
        const double high = fraction_true(0.99);
        const double low = fraction_true(0.01);
        CHECK(high - low >= 0.5);
    }

    SUBCASE("independent variables follow the preference when rfiv is off") {
        WeightVector delta = flat_delta(11, 0.7);
        delta[10] = 0.5;  // least-clear preference: never decided, so never assigned
        const dpll::SampleResult res =
            dpll::sample_solutions(f, delta, test_config(5, 30, false, false, false));
        REQUIRE(res.solutions.size() == 30);
        for (const auto& s : res.solutions) CHECK(s[11] == cnf::Value::True);
    }

    SUBCASE("independent variables are coin flips when rfiv is on") {
        WeightVector delta = flat_delta(11, 0.7);
        delta[10] = 0.5;
        int trues = 0, total = 0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const dpll::SampleResult res =
                dpll::sample_solutions(f, delta, test_config(seed, 30, false, false, true));
            for (const auto& s : res.solutions) {
                trues += s[11] == cnf::Value::True;
                ++total;
            }
        }
        REQUIRE(total == 300);
        const double rate = static_cast<double>(trues) / total;
        CHECK(rate >= 0.3);
        CHECK(rate <= 0.7);
    }
}

TEST_CASE("strategies raise cross-call diversity on a wide instance") {
    const cnf::CnfFormula f = pairs_formula(60, 30);
    auto run_arm = [&](bool on) {
        std::set<std::string> distinct;
        std::size_t total = 0;
        std::vector<std::size_t> per_call_distinct;
        for (std::uint64_t seed = 1; seed <= 15; ++seed) {
            const dpll::SampleResult res =
                dpll::sample_solutions(f, flat_delta(60), test_config(seed, 30, on, on, on));
            per_call_distinct.push_back(distinct_bits(res.solutions).size());
            for (const auto& s : res.solutions) {
                distinct.insert(testutil::assignment_bits(s));
                ++total;
            }
        }
        // Per-call distinctness is structural, independent of the strategies.
        for (std::size_t d : per_call_distinct) CHECK(d == 30);
        REQUIRE(total == 450);
        return distinct.size();
    };
    const std::size_t on_distinct = run_arm(true);
    const std::size_t off_distinct = run_arm(false);
    CHECK(on_distinct >= off_distinct);
    CHECK(on_distinct > 400);   // flips scatter the walks across calls
    CHECK(off_distinct < 450);  // preference-driven calls repeat e.g. the all-true leaf
}

TEST_CASE("random backtracking fires once the gate conditions hold") {
    const cnf::CnfFormula f = pairs_formula(16, 8);
    SamplerConfig cfg = test_config(0, 8, true, true, false);
    cfg.tv = 3;  // tiny trail gate so the jump path is reachable at this size

    std::uint64_t jumps = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        cfg.seed = seed;
        const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(16), cfg);
        jumps += res.stats.jumps;
        for (const auto& s : res.solutions)
            CHECK(testutil::oracle_satisfies(f, testutil::to_bools(s)));
    }
    CHECK(jumps > 0);

    SamplerConfig no_rb = cfg;
    no_rb.rb = false;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        no_rb.seed = seed;
        CHECK(dpll::sample_solutions(f, flat_delta(16), no_rb).stats.jumps == 0);
    }
}

TEST_CASE("budgets cut sampling short without error") {
    const cnf::CnfFormula f = pairs_formula(40, 20);

    SUBCASE("step budgets are deterministic") {
        SamplerConfig cfg = test_config(13, 1 << 30, false, false, false);
        cfg.exhaustive = true;
        cfg.max_steps = 5000;
        const dpll::SampleResult a = dpll::sample_solutions(f, flat_delta(40), cfg);
        const dpll::SampleResult b = dpll::sample_solutions(f, flat_delta(40), cfg);
        CHECK(a.stats.steps == 5000);
        CHECK_FALSE(a.exhausted);
        REQUIRE(!a.solutions.empty());
        REQUIRE(a.solutions.size() == b.solutions.size());
        for (std::size_t i = 0; i < a.solutions.size(); ++i)
            CHECK(testutil::assignment_bits(a.solutions[i]) ==
                  testutil::assignment_bits(b.solutions[i]));
    }

    SUBCASE("the wall clock stops an oversized enumeration") {
        SamplerConfig cfg = test_config(13, 1 << 30, false, false, false);
        cfg.exhaustive = true;
        cfg.time_budget_seconds = 0.05;
        const dpll::SampleResult res = dpll::sample_solutions(f, flat_delta(40), cfg);
        CHECK_FALSE(res.exhausted);  // 3^20 leaves cannot finish in 50 ms
        for (const auto& s : res.solutions)
            CHECK(testutil::oracle_satisfies(f, testutil::to_bools(s)));
    }
}

TEST_CASE("configuration errors are rejected") {
    const cnf::CnfFormula f = pairs_formula(4, 2);
    CHECK_THROWS_AS(dpll::sample_solutions(f, flat_delta(3), test_config(1, 30, true, true, true)),
                    std::invalid_argument);
    CHECK_THROWS_AS(dpll::sample_solutions(f, flat_delta(4), test_config(1, 0, true, true, true)),
                    std::invalid_argument);
    SamplerConfig bad_tv = test_config(1, 30, true, true, true);
    bad_tv.tv = 0;
    CHECK_THROWS_AS(dpll::sample_solutions(f, flat_delta(4), bad_tv), std::invalid_argument);
    WeightVector out_of_range = flat_delta(4);
    out_of_range[2] = 1.5;
    CHECK_THROWS_AS(
        dpll::sample_solutions(f, out_of_range, test_config(1, 30, true, true, true)),
        std::invalid_argument);
}

TEST_CASE("the trace stream narrates decisions and records") {
    const cnf::CnfFormula f = pairs_formula(6, 3);
    std::ostringstream trace;
    SamplerConfig cfg = test_config(2, 5, false, false, false);
    cfg.trace = &trace;
    dpll::sample_solutions(f, flat_delta(6), cfg);
    const std::string text = trace.str();
    CHECK(text.find("decide") != std::string::npos);
    CHECK(text.find("record") != std::string::npos);
    CHECK(text.find("backtrack") != std::string::npos);
}
