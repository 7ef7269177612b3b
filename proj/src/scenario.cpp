#include "satbo/scenario.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "satbo/dpll.hpp"
#include "satbo/rng.hpp"

namespace satbo::scenario {

namespace {

double poly(double p) { return 1.0 + p + p * p; }

// Components from the underlying sequence: entry i pairs P[2i] (the x=0
// branch) with P[2i+1] (the x=1 branch).
CoverageModel from_sequence(const std::vector<double>& P) {
    CoverageModel model;
    model.components.reserve(P.size() / 2);
    for (std::size_t i = 0; i + 1 < P.size(); i += 2)
        model.components.emplace_back(poly(P[i]), poly(P[i + 1]));
    return model;
}

}  // namespace

CoverageModel gen_binomial_model(int n, double p, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("binomial model needs n >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial probability must lie in [0,1]");
    Rng rng(seed);
    std::vector<double> P(static_cast<std::size_t>(2) * n);
    for (double& v : P) {
        // Interval first, then the position inside it: two draws per entry.
        const bool low = rng.uniform01() < p;
        v = low ? rng.uniform(0.0, 10.0) : rng.uniform(10.0, 100.0);
    }
    return from_sequence(P);
}

CoverageModel gen_powerlaw_model(int n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("power-law model needs n >= 2");
    Rng rng(seed);
    const int len = 2 * n;
    int r = static_cast<int>(std::llround(std::log(static_cast<double>(len))));
    if (r < 1) r = 1;

    // Partial Fisher-Yates: the first r slots become the heavy index set.
    std::vector<int> idx(static_cast<std::size_t>(len));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < r; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(i, len - 1));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }

    std::vector<double> P(static_cast<std::size_t>(len), 0.0);
    for (int i = 0; i < r; ++i)
        P[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = rng.uniform(1000.0, 2000.0);
    return from_sequence(P);
}

double coverage_of(const CoverageModel& model, const cnf::Assignment& s) {
    if (s.num_vars() != model.num_vars())
        throw std::invalid_argument("assignment length does not match coverage model");
    if (!s.complete()) throw std::invalid_argument("coverage needs a complete assignment");
    double total = 0.0;
    for (int v = 1; v <= model.num_vars(); ++v) {
        const auto& [g0, g1] = model.components[static_cast<std::size_t>(v - 1)];
        total += s[v] == cnf::Value::True ? g1 : g0;
    }
    return total;
}

double upper_bound(const CoverageModel& model) {
    double total = 0.0;
    for (const auto& [g0, g1] : model.components) total += g0 > g1 ? g0 : g1;
    return total;
}

double theta(const std::vector<std::pair<double, double>>& results) {
    if (results.empty()) throw std::invalid_argument("theta needs at least one instance result");
    double best_sum = 0.0;
    double bound_sum = 0.0;
    for (const auto& [best, bound] : results) {
        if (!(bound > 0.0)) throw std::invalid_argument("instance bound must be positive");
        if (best < -1e-9 || best > bound + 1e-9)
            throw std::invalid_argument("instance best must lie in [0, bound]");
        best_sum += best;
        bound_sum += bound;
    }
    return best_sum / bound_sum;
}

nlohmann::json model_to_json(const CoverageModel& model) {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& [g0, g1] : model.components) comps.push_back({g0, g1});
    return {{"n", model.num_vars()}, {"components", std::move(comps)}};
}

CoverageModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("components") || !j["components"].is_array())
        throw std::invalid_argument("coverage model document needs a components array");
    CoverageModel model;
    for (const auto& entry : j["components"]) {
        if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() || !entry[1].is_number())
            throw std::invalid_argument("coverage component must be a [g0, g1] pair");
        const double g0 = entry[0].get<double>();
        const double g1 = entry[1].get<double>();
        if (g0 < 0.0 || g1 < 0.0) throw std::invalid_argument("coverage components must be nonnegative");
        model.components.emplace_back(g0, g1);
    }
    if (j.contains("n") && j["n"].get<int>() != model.num_vars())
        throw std::invalid_argument("coverage model length disagrees with its n field");
    return model;
}

namespace {

// One generation attempt. Shape: a tampered categorical field of d values
// plus A distinct numeric threshold atoms spread over a few fields; every
// atom appears as some rule body, so the encoding has exactly d + A
// variables. A hidden assignment is fixed up front and every rule is bent to
// satisfy it (flip the body op when all preconditions hold and the body
// fails), so the instance is satisfiable by construction.
GeneratedInstance build_instance(int target_vars, std::uint64_t seed, int rule_count) {
    const int d = target_vars >= 12 ? 5 : (target_vars >= 4 ? 2 : 1);
    const int atoms = target_vars - d;
    const int exactly_one = d * (d - 1) / 2 + 1;
    const int num_rules = rule_count > 0 ? rule_count : 2 * target_vars - exactly_one;
    if (num_rules < atoms)
        throw std::invalid_argument("rule count too small to reach the requested variable count");

    Rng rng(seed);

    rules::RuleSet rs;
    rules::FieldDecl user;
    user.name = "user";
    user.categorical = true;
    for (int i = 0; i < d; ++i) user.domain.push_back("u" + std::to_string(i + 1));
    rs.fields.push_back(user);

    const int num_fields = std::max(1, atoms / 12);
    for (int i = 0; i < num_fields; ++i)
        rs.fields.push_back({"amt" + std::to_string(i + 1), false, {}});

    const auto atom_field = [&](int a) { return rs.fields[static_cast<std::size_t>(1 + a % num_fields)].name; };
    const auto atom_value = [&](int a) { return rules::Decimal::from_int((a / num_fields + 1) * 5); };

    // Hidden model: one tampered value plus a truth value per (field <= v) atom.
    const int hidden_user = static_cast<int>(rng.uniform_int(0, d - 1));
    std::vector<bool> hidden(static_cast<std::size_t>(atoms));
    for (int a = 0; a < atoms; ++a) hidden[static_cast<std::size_t>(a)] = rng.bernoulli(0.5);

    for (int i = 0; i < num_rules; ++i) {
        const int body = i < atoms ? i : static_cast<int>(rng.uniform_int(0, atoms - 1));
        bool body_le = rng.bernoulli(0.5);

        rules::VerificationRule rule;
        rule.id = "R" + std::to_string(i + 1);
        const int pre_user = i % d;
        rule.preconditions.push_back(
            {user.name, rules::Op::Eq, user.domain[static_cast<std::size_t>(pre_user)]});
        bool pres_hold = pre_user == hidden_user;

        if (atoms > 1 && rng.bernoulli(0.6)) {
            int pre_atom = static_cast<int>(rng.uniform_int(0, atoms - 2));
            if (pre_atom >= body) ++pre_atom;  // distinct from the body variable
            const bool pre_le = rng.bernoulli(0.5);
            rule.preconditions.push_back(
                {atom_field(pre_atom), pre_le ? rules::Op::Le : rules::Op::Gt, atom_value(pre_atom)});
            pres_hold = pres_hold && (pre_le == hidden[static_cast<std::size_t>(pre_atom)]);
        }

        if (pres_hold && body_le != hidden[static_cast<std::size_t>(body)]) body_le = !body_le;
        rule.body = {atom_field(body), body_le ? rules::Op::Le : rules::Op::Gt, atom_value(body)};
        rs.rules.push_back(std::move(rule));
    }

    GeneratedInstance out;
    out.dsl = rules::to_dsl(rs);
    out.rules = std::move(rs);
    out.encoded = rules::encode_rules(out.rules, user.name);
    if (out.encoded.formula.num_vars != target_vars)
        throw std::runtime_error("instance generator missed the requested variable count");
    out.name = "v" + std::to_string(out.encoded.formula.num_vars) + "-c" +
               std::to_string(static_cast<int>(out.encoded.formula.clauses.size()));
    return out;
}

}  // namespace

GeneratedInstance gen_instance(int target_vars, std::uint64_t seed, int rule_count) {
    if (target_vars < 2) throw std::invalid_argument("instance needs at least 2 variables");

    SplitMix64 split(seed);
    for (int attempt = 0; attempt < 3; ++attempt) {
        GeneratedInstance out = build_instance(target_vars, split.next(), rule_count);

        // Planted by construction, but prove it: one sampler pass must record
        // a solution.
        dpll::SamplerConfig check;
        check.max_num = 1;
        check.seed = split.next();
        check.time_budget_seconds = 30.0;
        if (!dpll::sample_solutions(out.encoded.formula,
                                    dpll::WeightVector(static_cast<std::size_t>(target_vars), 0.5),
                                    check)
                 .solutions.empty())
            return out;
    }
    throw std::runtime_error("instance generation kept producing unsatisfiable formulas");
}

}  // namespace satbo::scenario
