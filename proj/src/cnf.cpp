#include "satbo/cnf.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace satbo::cnf {

bool add_clause(CnfFormula& formula, const Clause& raw,
                std::vector<std::string>* warnings) {
    Clause normalized;
    normalized.reserve(raw.size());
    for (const Literal& l : raw) {
        if (l.var < 1 || l.var > formula.num_vars)
            throw std::invalid_argument("clause literal references variable " +
                                        std::to_string(l.var) + " outside 1.." +
                                        std::to_string(formula.num_vars));
        bool duplicate = false;
        for (const Literal& seen : normalized) {
            if (seen.var != l.var) continue;
            if (seen.positive == l.positive) {
                duplicate = true;
                break;
            }
            if (warnings)
                warnings->push_back("dropped tautological clause on variable " +
                                    std::to_string(l.var));
            return false;
        }
        if (!duplicate) normalized.push_back(l);
    }
    formula.clauses.push_back(std::move(normalized));
    return true;
}

Eval evaluate(const CnfFormula& formula, const Assignment& assignment) {
    bool undetermined = false;
    for (const Clause& clause : formula.clauses) {
        bool satisfied = false;
        bool open = false;
        for (const Literal& l : clause) {
            if (assignment.is_true(l)) {
                satisfied = true;
                break;
            }
            if (!assignment.is_false(l)) open = true;
        }
        if (satisfied) continue;
        if (!open) return Eval::Falsified;
        undetermined = true;
    }
    return undetermined ? Eval::Undetermined : Eval::Satisfied;
}

PropagationResult unit_propagate(const CnfFormula& formula, const Assignment& start) {
    PropagationResult result;
    Assignment current = start;

    const std::size_t m = formula.clauses.size();
    std::vector<int> sat_count(m, 0);
    std::vector<int> open_count(m, 0);
    // occurrence lists: for each variable, the clauses it appears in
    std::vector<std::vector<std::pair<std::size_t, bool>>> occurs(
        static_cast<std::size_t>(formula.num_vars) + 1);

    std::vector<std::size_t> queue;  // clauses that became unit
    for (std::size_t ci = 0; ci < m; ++ci) {
        const Clause& clause = formula.clauses[ci];
        for (const Literal& l : clause) {
            occurs[static_cast<std::size_t>(l.var)].emplace_back(ci, l.positive);
            if (current.is_true(l)) ++sat_count[ci];
            else if (!current.is_false(l)) ++open_count[ci];
        }
        if (sat_count[ci] > 0) continue;
        if (open_count[ci] == 0) {
            result.conflict = true;
            return result;
        }
        if (open_count[ci] == 1) queue.push_back(ci);
    }

    auto assign = [&](int var, bool value) -> bool {
        current.set(var, value);
        result.implied.emplace_back(var, value);
        for (const auto& [ci, positive] : occurs[static_cast<std::size_t>(var)]) {
            if (positive == value) {
                ++sat_count[ci];
            } else {
                --open_count[ci];
                if (sat_count[ci] > 0) continue;
                if (open_count[ci] == 0) return false;
                if (open_count[ci] == 1) queue.push_back(ci);
            }
        }
        return true;
    };

    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
        const std::size_t ci = queue[qi];
        if (sat_count[ci] > 0 || open_count[ci] != 1) continue;  // stale entry
        for (const Literal& l : formula.clauses[ci]) {
            if (current.is_true(l) || current.is_false(l)) continue;
            if (!assign(l.var, l.positive)) {
                result.conflict = true;
                return result;
            }
            break;
        }
    }
    return result;
}

CnfFormula parse_dimacs(const std::string& text, std::vector<std::string>* warnings) {
    std::istringstream in(text);
    std::string token;
    bool header_seen = false;
    int declared_clauses = 0;
    CnfFormula formula;
    Clause pending;
    int finished_clauses = 0;

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        if (!(ls >> token)) continue;
        if (token[0] == 'c') continue;  // comment line
        if (token == "p") {
            if (header_seen) throw std::invalid_argument("duplicate DIMACS header");
            std::string fmt;
            if (!(ls >> fmt >> formula.num_vars >> declared_clauses) || fmt != "cnf")
                throw std::invalid_argument("malformed DIMACS header: " + line);
            if (formula.num_vars < 0 || declared_clauses < 0)
                throw std::invalid_argument("negative counts in DIMACS header");
            header_seen = true;
            continue;
        }
        if (!header_seen)
            throw std::invalid_argument("clause data before DIMACS header");
        // Literal tokens; the first token was already consumed.
        do {
            std::size_t pos = 0;
            long long v;
            try {
                v = std::stoll(token, &pos);
            } catch (const std::exception&) {
                throw std::invalid_argument("bad DIMACS literal: " + token);
            }
            if (pos != token.size())
                throw std::invalid_argument("bad DIMACS literal: " + token);
            if (v == 0) {
                if (token == "-0")
                    throw std::invalid_argument("literal index 0 is reserved");
                add_clause(formula, pending, warnings);
                ++finished_clauses;  // tautologies still count as read
                pending.clear();
            } else {
                if (v < -formula.num_vars || v > formula.num_vars || v == 0)
                    throw std::invalid_argument("literal " + token + " outside declared range");
                pending.push_back(lit(static_cast<int>(v)));
            }
        } while (ls >> token);
    }
    if (!header_seen) throw std::invalid_argument("missing DIMACS header");
    if (!pending.empty())
        throw std::invalid_argument("unterminated clause at end of input");
    if (warnings && finished_clauses != declared_clauses)
        warnings->push_back("header declares " + std::to_string(declared_clauses) +
                            " clauses but " + std::to_string(finished_clauses) +
                            " were read");
    return formula;
}

std::string write_dimacs(const CnfFormula& formula) {
    std::string out = "p cnf " + std::to_string(formula.num_vars) + " " +
                      std::to_string(formula.clauses.size()) + "\n";
    for (const Clause& clause : formula.clauses) {
        for (const Literal& l : clause) {
            out += std::to_string(l.positive ? l.var : -l.var);
            out += ' ';
        }
        out += "0\n";
    }
    return out;
}

}  // namespace satbo::cnf
