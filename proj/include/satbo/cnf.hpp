#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace satbo::cnf {

// A literal is a 1-indexed variable with a polarity. positive == true means
// the literal is satisfied when the variable is assigned true.
struct Literal {
    int var = 0;
    bool positive = true;

    friend bool operator==(const Literal&, const Literal&) = default;
};

inline Literal lit(int signed_var) {
    return Literal{signed_var < 0 ? -signed_var : signed_var, signed_var > 0};
}

inline Literal negate(Literal l) { return Literal{l.var, !l.positive}; }

using Clause = std::vector<Literal>;

// Immutable after construction. Clauses are normalized on insertion:
// duplicate literals collapse, tautologies are dropped.
struct CnfFormula {
    int num_vars = 0;
    std::vector<Clause> clauses;
};

// Appends a normalized copy of `raw`. Returns false (and records a warning)
// when the clause is a tautology and was dropped.
bool add_clause(CnfFormula& formula, const Clause& raw,
                std::vector<std::string>* warnings = nullptr);

enum class Value : std::uint8_t { False = 0, True = 1, Unassigned = 2 };

struct Assignment {
    std::vector<Value> values;  // values[0] unused; 1-indexed like variables

    explicit Assignment(int num_vars = 0)
        : values(static_cast<std::size_t>(num_vars) + 1, Value::Unassigned) {}

    int num_vars() const { return static_cast<int>(values.size()) - 1; }
    Value operator[](int var) const { return values[static_cast<std::size_t>(var)]; }
    void set(int var, bool b) {
        values[static_cast<std::size_t>(var)] = b ? Value::True : Value::False;
    }
    void unset(int var) { values[static_cast<std::size_t>(var)] = Value::Unassigned; }
    bool is_true(Literal l) const {
        return values[static_cast<std::size_t>(l.var)] ==
               (l.positive ? Value::True : Value::False);
    }
    bool is_false(Literal l) const {
        return values[static_cast<std::size_t>(l.var)] ==
               (l.positive ? Value::False : Value::True);
    }
    bool complete() const {
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] == Value::Unassigned) return false;
        return true;
    }

    friend bool operator==(const Assignment&, const Assignment&) = default;
};

enum class Eval { Satisfied, Falsified, Undetermined };

// Satisfied: every clause has a true literal. Falsified: some clause has all
// literals false. Undetermined otherwise. An empty formula is Satisfied.
Eval evaluate(const CnfFormula& formula, const Assignment& assignment);

struct PropagationResult {
    std::vector<std::pair<int, bool>> implied;  // derivation order
    bool conflict = false;
};

// Runs unit propagation to a fixed point starting from `assignment` without
// mutating it. If the starting assignment already falsifies a clause the
// result is an immediate conflict with no implied literals.
PropagationResult unit_propagate(const CnfFormula& formula, const Assignment& assignment);

// DIMACS CNF. Accepts "c" comment lines and a "p cnf <vars> <clauses>" header
// followed by zero-terminated clauses. Malformed header or out-of-range
// literals throw; a clause-count mismatch only warns.
CnfFormula parse_dimacs(const std::string& text,
                        std::vector<std::string>* warnings = nullptr);

// Emits "p cnf" header plus one zero-terminated clause per line, LF endings.
std::string write_dimacs(const CnfFormula& formula);

}  // namespace satbo::cnf
