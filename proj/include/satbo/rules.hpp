#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "satbo/cnf.hpp"

namespace satbo::rules {

// Exact signed decimal (units * 10^-scale), normalized so that trailing
// fractional zeros never appear: 10.0 and 10 compare and print identically.
struct Decimal {
    std::int64_t units = 0;
    int scale = 0;

    static Decimal parse(const std::string& text);
    static Decimal from_int(std::int64_t v) { return Decimal{v, 0}; }
    std::string to_string() const;
    void normalize();

    friend bool operator==(const Decimal& a, const Decimal& b) { return compare(a, b) == 0; }
    friend bool operator!=(const Decimal& a, const Decimal& b) { return compare(a, b) != 0; }
    friend bool operator<(const Decimal& a, const Decimal& b) { return compare(a, b) < 0; }
    friend bool operator<=(const Decimal& a, const Decimal& b) { return compare(a, b) <= 0; }
    friend bool operator>(const Decimal& a, const Decimal& b) { return compare(a, b) > 0; }
    friend bool operator>=(const Decimal& a, const Decimal& b) { return compare(a, b) >= 0; }

    static int compare(const Decimal& a, const Decimal& b);
};

enum class Op { Eq, Ne, Le, Lt, Ge, Gt };

std::string op_text(Op op);

using FieldValue = std::variant<std::string, Decimal>;

struct FieldDecl {
    std::string name;
    bool categorical = false;
    std::vector<std::string> domain;  // categorical fields only
};

using FieldTable = std::vector<FieldDecl>;

const FieldDecl* find_field(const FieldTable& fields, const std::string& name);

struct Predicate {
    std::string field;
    Op op = Op::Eq;
    FieldValue value;

    bool categorical_value() const { return std::holds_alternative<std::string>(value); }
    std::string to_string() const;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Conjunction of preconditions; empty means the rule always triggers.
struct VerificationRule {
    std::string id;
    std::vector<Predicate> preconditions;
    Predicate body;

    std::string to_string() const;
};

struct RuleSet {
    FieldTable fields;
    std::vector<VerificationRule> rules;
};

struct Transaction {
    std::map<std::string, FieldValue> fields;

    friend bool operator==(const Transaction&, const Transaction&) = default;
};

using TransactionLog = std::vector<Transaction>;

enum class Outcome { Pass, NotPass, NotTrigger };

std::string outcome_text(Outcome o);

// True when the predicate holds on the transaction. Throws when the field is
// missing or its type does not match the predicate's value type.
bool predicate_holds(const Predicate& pred, const Transaction& t);
bool precondition_holds(const std::vector<Predicate>& pre, const Transaction& t);

// Trichotomy: NotTrigger when any precondition fails, else Pass/NotPass by
// the body predicate.
Outcome verify_transaction(const VerificationRule& rule, const Transaction& t);

// Rule DSL. A header block of FIELD declarations followed by one rule per
// line: IF <pred> [AND <pred>]* THEN <pred>, with TRUE as the empty
// precondition. '#' starts a comment.
RuleSet parse_rules(const std::string& text);
std::string to_dsl(const RuleSet& rs);

// var -> canonical predicate (1-indexed via predicates[var-1]). Variables
// 1..d are the tampered field's domain values in declaration order.
struct VarMap {
    std::string tampered_field;
    std::vector<Predicate> predicates;
    std::vector<int> tampered_vars;

    int num_vars() const { return static_cast<int>(predicates.size()); }
};

struct Encoded {
    cnf::CnfFormula formula;
    VarMap varmap;
};

// One clause (!pre1 | ... | !prek | body) per rule plus an exactly-one block
// over the tampered field's domain variables. Numeric > and >= atoms share
// variables with their <= / < complements; categorical != with =. When
// consistent_thresholds is set, implication and exclusion clauses between
// same-field atoms are added as well.
Encoded encode_rules(const RuleSet& rs, const std::string& tampered_field,
                     bool consistent_thresholds = false,
                     std::vector<std::string>* warnings = nullptr);

struct AttackRule {
    std::vector<Predicate> preconditions;
    std::string tamper_field;
    std::string tamper_value;

    std::string to_string() const;

    friend bool operator==(const AttackRule&, const AttackRule&) = default;
};

// Reads a complete assignment back into an attack rule: the single true
// tampered variable gives the tamper predicate, the true non-tampered
// variables (in index order) give the precondition.
AttackRule decode_solution(const cnf::Assignment& s, const VarMap& vm);

// = becomes != with the precondition preserved.
VerificationRule invert_attack_rule(const AttackRule& ar);

// Fraction of log transactions satisfying the attack rule's precondition.
// Throws on an empty log.
double coverage_on_log(const AttackRule& ar, const TransactionLog& log);

// CSV with a header row of declared field names. Values are typed per the
// declarations.
TransactionLog parse_transaction_log_csv(const std::string& text, const FieldTable& fields);

// The synthetic transaction an attack rule derives from a historical one:
// the original with the tampered field replaced.
Transaction apply_tamper(const AttackRule& ar, const Transaction& t);

}  // namespace satbo::rules
