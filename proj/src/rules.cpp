#include "satbo/rules.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace satbo::rules {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

bool is_keyword(const std::string& s) {
    return s == "IF" || s == "THEN" || s == "AND" || s == "TRUE" || s == "FIELD" ||
           s == "tamper" || s == "CAT" || s == "NUM";
}

}  // namespace

// ---------------------------------------------------------------------------
// Decimal
// ---------------------------------------------------------------------------

void Decimal::normalize() {
    while (scale > 0 && units % 10 == 0) {
        units /= 10;
        --scale;
    }
    if (units == 0) scale = 0;
}

Decimal Decimal::parse(const std::string& text) {
    std::string s = trim(text);
    if (s.empty()) fail("empty numeric value");
    std::size_t i = 0;
    bool negative = false;
    if (s[i] == '+' || s[i] == '-') {
        negative = (s[i] == '-');
        ++i;
    }
    std::int64_t units = 0;
    int scale = 0;
    bool seen_digit = false, seen_point = false;
    for (; i < s.size(); ++i) {
        const char ch = s[i];
        if (ch == '.') {
            if (seen_point) fail("bad numeric value: " + text);
            seen_point = true;
            continue;
        }
        if (!std::isdigit(static_cast<unsigned char>(ch))) fail("bad numeric value: " + text);
        if (units > (INT64_MAX - 9) / 10) fail("numeric value out of range: " + text);
        units = units * 10 + (ch - '0');
        if (seen_point) ++scale;
        seen_digit = true;
    }
    if (!seen_digit) fail("bad numeric value: " + text);
    Decimal d{negative ? -units : units, scale};
    d.normalize();
    return d;
}

std::string Decimal::to_string() const {
    std::int64_t u = units;
    std::string sign;
    if (u < 0) {
        sign = "-";
        u = -u;
    }
    std::string digits = std::to_string(u);
    if (scale == 0) return sign + digits;
    if (static_cast<int>(digits.size()) <= scale)
        digits.insert(0, static_cast<std::size_t>(scale) + 1 - digits.size(), '0');
    digits.insert(digits.size() - static_cast<std::size_t>(scale), 1, '.');
    return sign + digits;
}

int Decimal::compare(const Decimal& a, const Decimal& b) {
    __int128 lhs = a.units;
    __int128 rhs = b.units;
    for (int i = a.scale; i < b.scale; ++i) lhs *= 10;
    for (int i = b.scale; i < a.scale; ++i) rhs *= 10;
    if (lhs < rhs) return -1;
    if (lhs > rhs) return 1;
    return 0;
}

// ---------------------------------------------------------------------------
// predicates and rules
// ---------------------------------------------------------------------------

std::string op_text(Op op) {
    switch (op) {
        case Op::Eq: return "=";
        case Op::Ne: return "!=";
        case Op::Le: return "<=";
        case Op::Lt: return "<";
        case Op::Ge: return ">=";
        case Op::Gt: return ">";
    }
    return "?";
}

const FieldDecl* find_field(const FieldTable& fields, const std::string& name) {
    for (const FieldDecl& f : fields)
        if (f.name == name) return &f;
    return nullptr;
}

std::string Predicate::to_string() const {
    const std::string v = categorical_value() ? std::get<std::string>(value)
                                              : std::get<Decimal>(value).to_string();
    return field + " " + op_text(op) + " " + v;
}

std::string VerificationRule::to_string() const {
    std::string out = "IF ";
    if (preconditions.empty()) {
        out += "TRUE";
    } else {
        for (std::size_t i = 0; i < preconditions.size(); ++i) {
            if (i) out += " AND ";
            out += preconditions[i].to_string();
        }
    }
    out += " THEN " + body.to_string();
    return out;
}

std::string AttackRule::to_string() const {
    std::string out = "IF ";
    if (preconditions.empty()) {
        out += "TRUE";
    } else {
        for (std::size_t i = 0; i < preconditions.size(); ++i) {
            if (i) out += " AND ";
            out += preconditions[i].to_string();
        }
    }
    out += " THEN tamper " + tamper_field + " = " + tamper_value;
    return out;
}

std::string outcome_text(Outcome o) {
    switch (o) {
        case Outcome::Pass: return "Pass";
        case Outcome::NotPass: return "NotPass";
        case Outcome::NotTrigger: return "NotTrigger";
    }
    return "?";
}

bool predicate_holds(const Predicate& pred, const Transaction& t) {
    auto it = t.fields.find(pred.field);
    if (it == t.fields.end()) fail("transaction is missing field '" + pred.field + "'");
    if (pred.categorical_value()) {
        if (!std::holds_alternative<std::string>(it->second))
            fail("field '" + pred.field + "' is numeric but compared to a category");
        const std::string& actual = std::get<std::string>(it->second);
        const std::string& expected = std::get<std::string>(pred.value);
        switch (pred.op) {
            case Op::Eq: return actual == expected;
            case Op::Ne: return actual != expected;
            default: fail("categorical field '" + pred.field + "' used with a numeric operator");
        }
    }
    if (!std::holds_alternative<Decimal>(it->second))
        fail("field '" + pred.field + "' is categorical but compared to a number");
    const Decimal& actual = std::get<Decimal>(it->second);
    const Decimal& expected = std::get<Decimal>(pred.value);
    switch (pred.op) {
        case Op::Eq: return actual == expected;
        case Op::Le: return actual <= expected;
        case Op::Lt: return actual < expected;
        case Op::Ge: return actual >= expected;
        case Op::Gt: return actual > expected;
        case Op::Ne: fail("numeric field '" + pred.field + "' used with !=");
    }
    return false;
}

bool precondition_holds(const std::vector<Predicate>& pre, const Transaction& t) {
    for (const Predicate& p : pre)
        if (!predicate_holds(p, t)) return false;
    return true;
}

Outcome verify_transaction(const VerificationRule& rule, const Transaction& t) {
    if (!precondition_holds(rule.preconditions, t)) return Outcome::NotTrigger;
    return predicate_holds(rule.body, t) ? Outcome::Pass : Outcome::NotPass;
}

// ---------------------------------------------------------------------------
// DSL
// ---------------------------------------------------------------------------

namespace {

Op parse_op(const std::string& tok, int line_no) {
    if (tok == "=") return Op::Eq;
    if (tok == "!=") return Op::Ne;
    if (tok == "<=") return Op::Le;
    if (tok == "<") return Op::Lt;
    if (tok == ">=") return Op::Ge;
    if (tok == ">") return Op::Gt;
    fail("line " + std::to_string(line_no) + ": unknown operator '" + tok + "'");
}

Predicate parse_predicate(const FieldTable& fields, const std::string& fname,
                          const std::string& op_tok, const std::string& val_tok, int line_no) {
    const FieldDecl* decl = find_field(fields, fname);
    if (!decl) fail("line " + std::to_string(line_no) + ": undeclared field '" + fname + "'");
    Predicate p;
    p.field = fname;
    p.op = parse_op(op_tok, line_no);
    if (decl->categorical) {
        if (p.op != Op::Eq && p.op != Op::Ne)
            fail("line " + std::to_string(line_no) + ": categorical field '" + fname +
                 "' only supports = and !=");
        if (std::find(decl->domain.begin(), decl->domain.end(), val_tok) == decl->domain.end())
            fail("line " + std::to_string(line_no) + ": value '" + val_tok +
                 "' is not in the domain of field '" + fname + "'");
        p.value = val_tok;
    } else {
        if (p.op == Op::Ne)
            fail("line " + std::to_string(line_no) + ": numeric field '" + fname +
                 "' does not support !=");
        p.value = Decimal::parse(val_tok);
    }
    return p;
}

}  // namespace

RuleSet parse_rules(const std::string& text) {
    RuleSet rs;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    int rule_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string tok;
        while (ls >> tok) toks.push_back(tok);

        if (toks[0] == "FIELD") {
            if (toks.size() < 3) fail("line " + std::to_string(line_no) + ": malformed FIELD");
            const std::string& name = toks[1];
            if (is_keyword(name)) fail("line " + std::to_string(line_no) + ": reserved field name");
            if (find_field(rs.fields, name))
                fail("line " + std::to_string(line_no) + ": duplicate field '" + name + "'");
            FieldDecl decl;
            decl.name = name;
            if (toks[2] == "NUM") {
                if (toks.size() != 3) fail("line " + std::to_string(line_no) + ": malformed FIELD");
                decl.categorical = false;
            } else if (toks[2] == "CAT") {
                decl.categorical = true;
                std::string rest;
                for (std::size_t i = 3; i < toks.size(); ++i) rest += toks[i];
                if (rest.size() < 2 || rest.front() != '{' || rest.back() != '}')
                    fail("line " + std::to_string(line_no) + ": CAT field needs {v1,v2,...}");
                for (const std::string& v : split(rest.substr(1, rest.size() - 2), ',')) {
                    const std::string val = trim(v);
                    if (val.empty()) fail("line " + std::to_string(line_no) + ": empty domain value");
                    if (std::find(decl.domain.begin(), decl.domain.end(), val) != decl.domain.end())
                        fail("line " + std::to_string(line_no) + ": duplicate domain value '" + val + "'");
                    decl.domain.push_back(val);
                }
                if (decl.domain.empty())
                    fail("line " + std::to_string(line_no) + ": empty domain for '" + name + "'");
            } else {
                fail("line " + std::to_string(line_no) + ": field kind must be CAT or NUM");
            }
            rs.fields.push_back(std::move(decl));
            continue;
        }

        if (toks[0] != "IF")
            fail("line " + std::to_string(line_no) + ": expected FIELD or IF, got '" + toks[0] + "'");

        // IF <pred> [AND <pred>]* THEN <pred>, with TRUE as empty precondition
        VerificationRule rule;
        rule.id = "R" + std::to_string(++rule_no);
        std::size_t i = 1;
        if (i < toks.size() && toks[i] == "TRUE") {
            ++i;
        } else {
            for (;;) {
                if (i + 2 >= toks.size())
                    fail("line " + std::to_string(line_no) + ": truncated predicate");
                rule.preconditions.push_back(
                    parse_predicate(rs.fields, toks[i], toks[i + 1], toks[i + 2], line_no));
                i += 3;
                if (i < toks.size() && toks[i] == "AND") {
                    ++i;
                    continue;
                }
                break;
            }
        }
        if (i >= toks.size() || toks[i] != "THEN")
            fail("line " + std::to_string(line_no) + ": expected THEN");
        ++i;
        if (i + 3 != toks.size())
            fail("line " + std::to_string(line_no) + ": rule body must be a single predicate");
        rule.body = parse_predicate(rs.fields, toks[i], toks[i + 1], toks[i + 2], line_no);
        rs.rules.push_back(std::move(rule));
    }
    return rs;
}

std::string to_dsl(const RuleSet& rs) {
    std::string out;
    for (const FieldDecl& f : rs.fields) {
        out += "FIELD " + f.name + " ";
        if (f.categorical) {
            out += "CAT {";
            for (std::size_t i = 0; i < f.domain.size(); ++i) {
                if (i) out += ",";
                out += f.domain[i];
            }
            out += "}";
        } else {
            out += "NUM";
        }
        out += "\n";
    }
    for (const VerificationRule& r : rs.rules) out += r.to_string() + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// SAT encoding
// ---------------------------------------------------------------------------

namespace {

// Canonical atom: categorical fields use (field, =, value); numeric > and >=
// map onto the complements of <= and < so that e.g. amount > 10 becomes the
// negation of the amount <= 10 variable.
struct CanonicalAtom {
    Predicate atom;
    bool positive = true;  // literal polarity of the original predicate
};

CanonicalAtom canonicalize(const Predicate& p) {
    CanonicalAtom c;
    c.atom = p;
    if (p.categorical_value()) {
        if (p.op == Op::Ne) {
            c.atom.op = Op::Eq;
            c.positive = false;
        }
        return c;
    }
    switch (p.op) {
        case Op::Gt:
            c.atom.op = Op::Le;
            c.positive = false;
            break;
        case Op::Ge:
            c.atom.op = Op::Lt;
            c.positive = false;
            break;
        default:
            break;
    }
    return c;
}

// Set containment and disjointness between same-field canonical atoms,
// decided by interval reasoning. Used only for consistent-threshold clauses.
bool atom_implies(const Predicate& a, const Predicate& b) {
    if (a.field != b.field) return false;
    if (a.categorical_value() != b.categorical_value()) return false;
    if (a.categorical_value())
        return std::get<std::string>(a.value) == std::get<std::string>(b.value);
    const Decimal& x = std::get<Decimal>(a.value);
    const Decimal& y = std::get<Decimal>(b.value);
    if (a.op == Op::Le && b.op == Op::Le) return x <= y;
    if (a.op == Op::Le && b.op == Op::Lt) return x < y;
    if (a.op == Op::Lt && b.op == Op::Lt) return x <= y;
    if (a.op == Op::Lt && b.op == Op::Le) return x <= y;
    if (a.op == Op::Eq && b.op == Op::Le) return x <= y;
    if (a.op == Op::Eq && b.op == Op::Lt) return x < y;
    if (a.op == Op::Eq && b.op == Op::Eq) return x == y;
    return false;
}

bool atoms_disjoint(const Predicate& a, const Predicate& b) {
    if (a.field != b.field) return false;
    if (a.categorical_value() != b.categorical_value()) return false;
    if (a.categorical_value())
        return std::get<std::string>(a.value) != std::get<std::string>(b.value);
    const Decimal& x = std::get<Decimal>(a.value);
    const Decimal& y = std::get<Decimal>(b.value);
    if (a.op == Op::Eq && b.op == Op::Eq) return x != y;
    if (a.op == Op::Eq && b.op == Op::Le) return x > y;
    if (a.op == Op::Eq && b.op == Op::Lt) return x >= y;
    if (a.op == Op::Le && b.op == Op::Eq) return y > x;
    if (a.op == Op::Lt && b.op == Op::Eq) return y >= x;
    return false;  // two lower sets always intersect
}

}  // namespace

Encoded encode_rules(const RuleSet& rs, const std::string& tampered_field,
                     bool consistent_thresholds, std::vector<std::string>* warnings) {
    const FieldDecl* tampered = find_field(rs.fields, tampered_field);
    if (!tampered) fail("tampered field '" + tampered_field + "' is not declared");
    if (!tampered->categorical || tampered->domain.empty())
        fail("tampered field '" + tampered_field + "' has no enumerated domain");

    Encoded enc;
    VarMap& vm = enc.varmap;
    vm.tampered_field = tampered_field;

    // Variables 1..d: the tampered field's domain values in declaration order.
    for (const std::string& value : tampered->domain) {
        Predicate p;
        p.field = tampered_field;
        p.op = Op::Eq;
        p.value = value;
        vm.predicates.push_back(std::move(p));
        vm.tampered_vars.push_back(static_cast<int>(vm.predicates.size()));
    }

    auto var_of = [&](const Predicate& canonical) -> int {
        for (std::size_t i = 0; i < vm.predicates.size(); ++i)
            if (vm.predicates[i] == canonical) return static_cast<int>(i) + 1;
        vm.predicates.push_back(canonical);
        return static_cast<int>(vm.predicates.size());
    };

    auto literal_of = [&](const Predicate& p) -> cnf::Literal {
        CanonicalAtom c = canonicalize(p);
        if (c.atom.field == tampered_field) {
            const auto& dom = tampered->domain;
            const std::string& v = std::get<std::string>(c.atom.value);
            if (std::find(dom.begin(), dom.end(), v) == dom.end())
                fail("value '" + v + "' is not in the tampered field's domain");
        }
        return cnf::Literal{var_of(c.atom), c.positive};
    };

    // First pass assigns variables in order of first appearance.
    std::vector<cnf::Clause> rule_clauses;
    for (const VerificationRule& rule : rs.rules) {
        cnf::Clause clause;
        for (const Predicate& pre : rule.preconditions)
            clause.push_back(cnf::negate(literal_of(pre)));
        clause.push_back(literal_of(rule.body));
        rule_clauses.push_back(std::move(clause));
    }

    enc.formula.num_vars = static_cast<int>(vm.predicates.size());
    for (const cnf::Clause& clause : rule_clauses)
        cnf::add_clause(enc.formula, clause, warnings);

    // Exactly-one over the tampered domain: pairwise exclusion plus cover.
    const auto& tv = vm.tampered_vars;
    for (std::size_t i = 0; i < tv.size(); ++i)
        for (std::size_t j = i + 1; j < tv.size(); ++j)
            cnf::add_clause(enc.formula,
                            {cnf::Literal{tv[i], false}, cnf::Literal{tv[j], false}}, warnings);
    cnf::Clause cover;
    for (int v : tv) cover.push_back(cnf::Literal{v, true});
    cnf::add_clause(enc.formula, cover, warnings);

    if (consistent_thresholds) {
        const int n = enc.formula.num_vars;
        for (int a = 1; a <= n; ++a) {
            const Predicate& pa = vm.predicates[static_cast<std::size_t>(a) - 1];
            if (pa.field == tampered_field) continue;
            for (int b = 1; b <= n; ++b) {
                if (a == b) continue;
                const Predicate& pb = vm.predicates[static_cast<std::size_t>(b) - 1];
                if (pb.field == tampered_field) continue;
                if (atom_implies(pa, pb) && !(pa == pb))
                    cnf::add_clause(enc.formula,
                                    {cnf::Literal{a, false}, cnf::Literal{b, true}}, warnings);
                if (b > a && atoms_disjoint(pa, pb))
                    cnf::add_clause(enc.formula,
                                    {cnf::Literal{a, false}, cnf::Literal{b, false}}, warnings);
            }
        }
    }
    return enc;
}

AttackRule decode_solution(const cnf::Assignment& s, const VarMap& vm) {
    if (s.num_vars() != vm.num_vars())
        fail("assignment has " + std::to_string(s.num_vars()) + " variables, expected " +
             std::to_string(vm.num_vars()));
    if (!s.complete()) fail("cannot decode a partial assignment");

    AttackRule ar;
    ar.tamper_field = vm.tampered_field;
    int tampered_true = 0;
    for (int v : vm.tampered_vars) {
        if (s[v] == cnf::Value::True) {
            ++tampered_true;
            ar.tamper_value = std::get<std::string>(vm.predicates[static_cast<std::size_t>(v) - 1].value);
        }
    }
    if (tampered_true != 1)
        fail("solution sets " + std::to_string(tampered_true) +
             " tampered variables true; the encoding requires exactly one");

    for (int v = 1; v <= vm.num_vars(); ++v) {
        if (std::find(vm.tampered_vars.begin(), vm.tampered_vars.end(), v) !=
            vm.tampered_vars.end())
            continue;
        if (s[v] == cnf::Value::True)
            ar.preconditions.push_back(vm.predicates[static_cast<std::size_t>(v) - 1]);
    }
    return ar;
}

VerificationRule invert_attack_rule(const AttackRule& ar) {
    VerificationRule rule;
    rule.id = "inverted";
    rule.preconditions = ar.preconditions;
    rule.body.field = ar.tamper_field;
    rule.body.op = Op::Ne;
    rule.body.value = ar.tamper_value;
    return rule;
}

double coverage_on_log(const AttackRule& ar, const TransactionLog& log) {
    if (log.empty()) fail("coverage is undefined on an empty transaction log");
    std::size_t triggered = 0;
    for (const Transaction& t : log)
        if (precondition_holds(ar.preconditions, t)) ++triggered;
    return static_cast<double>(triggered) / static_cast<double>(log.size());
}

TransactionLog parse_transaction_log_csv(const std::string& text, const FieldTable& fields) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail("empty transaction log");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<const FieldDecl*> columns;
    for (const std::string& raw : split(line, ',')) {
        const std::string name = trim(raw);
        const FieldDecl* decl = find_field(fields, name);
        if (!decl) fail("log column '" + name + "' is not a declared field");
        columns.push_back(decl);
    }

    TransactionLog log;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != columns.size())
            fail("log line " + std::to_string(line_no) + " has " +
                 std::to_string(cells.size()) + " cells, expected " +
                 std::to_string(columns.size()));
        Transaction t;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string cell = trim(cells[i]);
            if (columns[i]->categorical)
                t.fields[columns[i]->name] = cell;
            else
                t.fields[columns[i]->name] = Decimal::parse(cell);
        }
        log.push_back(std::move(t));
    }
    return log;
}

Transaction apply_tamper(const AttackRule& ar, const Transaction& t) {
    Transaction out = t;
    out.fields[ar.tamper_field] = ar.tamper_value;
    return out;
}

}  // namespace satbo::rules
