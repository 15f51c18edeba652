// Rule-language AST and the Łukasiewicz relaxation: ground logical clauses
// become hinge-loss potential templates, ground arithmetic rules become
// potentials or hard linear constraints.
#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sle/common.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// AST types
// ---------------------------------------------------------------------------

enum class PredicateKind { Observed, Target, Neural };

struct Predicate {
    std::string name;
    std::size_t arity = 0;
    PredicateKind kind = PredicateKind::Observed;
};

// A term is either a logic variable (capitalized identifier) or a constant.
struct Term {
    bool is_variable = false;
    std::string text;

    friend bool operator==(const Term&, const Term&) = default;
};

struct Atom {
    std::size_t predicate = 0;  // index into the program's predicate table
    std::vector<Term> terms;

    friend bool operator==(const Atom&, const Atom&) = default;
};

struct Literal {
    Atom atom;
    bool negated = false;

    friend bool operator==(const Literal&, const Literal&) = default;
};

// body literals are a conjunction, head literals a disjunction:
//   b1 & ... & bk -> h1 | ... | hm
struct LogicalRule {
    std::optional<double> weight;  // absent => hard constraint
    bool squared = false;          // alpha = 2 when set
    std::vector<Literal> body;
    std::vector<Literal> head;

    friend bool operator==(const LogicalRule&, const LogicalRule&) = default;
};

// One additive term of a linear expression: coefficient * atom, where the
// atom slot may be a summation atom (`+X` in one argument position).
struct ExprTerm {
    double coefficient = 1.0;
    std::optional<Atom> atom;             // absent => pure constant term
    std::optional<std::string> summation; // summation variable if any

    friend bool operator==(const ExprTerm&, const ExprTerm&) = default;
};

struct LinearExpression {
    std::vector<ExprTerm> terms;

    friend bool operator==(const LinearExpression&, const LinearExpression&) = default;
};

enum class Relation { Eq, Leq, Geq };

struct FilterClause {
    std::string summation_variable;
    Atom guard;  // over an observed {0,1} predicate

    friend bool operator==(const FilterClause&, const FilterClause&) = default;
};

struct ArithmeticRule {
    std::optional<double> weight;
    bool squared = false;
    LinearExpression lhs;
    Relation relation = Relation::Eq;
    LinearExpression rhs;
    std::vector<FilterClause> filters;

    friend bool operator==(const ArithmeticRule&, const ArithmeticRule&) = default;
};

using Rule = std::variant<LogicalRule, ArithmeticRule>;

// ---------------------------------------------------------------------------
// Ground-level forms. At this layer the variables of a LinearForm are indices
// into a per-rule list of ground atoms; the grounder later maps those onto
// registry variables and folds observed values into the constant.
// ---------------------------------------------------------------------------

struct LinearForm {
    std::vector<std::pair<std::size_t, double>> coefficients;  // variable index -> coefficient
    double constant = 0.0;

    void add(std::size_t index, double coefficient) {
        for (auto& [idx, coef] : coefficients) {
            if (idx == index) {
                coef += coefficient;
                return;
            }
        }
        coefficients.emplace_back(index, coefficient);
    }

    double evaluate(const std::vector<double>& values) const {
        double total = constant;
        for (const auto& [idx, coef] : coefficients) total += coef * values.at(idx);
        return total;
    }
};

// max(form, 0)^alpha
struct HingeTemplate {
    LinearForm form;
    int alpha = 1;  // 1 or 2
};

// standard form: Eq means form == 0, Leq means form <= 0.
enum class ConstraintRelation { Eq, Leq };

struct LinearConstraint {
    LinearForm form;
    ConstraintRelation relation = ConstraintRelation::Leq;
};

struct RelaxedRule {
    std::vector<HingeTemplate> potentials;   // weighted rules
    std::vector<LinearConstraint> constraints;  // hard rules
};

// ---------------------------------------------------------------------------
// Łukasiewicz operators
// ---------------------------------------------------------------------------

inline void check_truth_range(double v, const char* who) {
    if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) {
        throw std::domain_error(std::string(who) + ": truth value out of [0,1]: " + dtos(v));
    }
}

inline double lukasiewicz_and(double a, double b) {
    check_truth_range(a, "lukasiewicz_and");
    check_truth_range(b, "lukasiewicz_and");
    return std::clamp(a + b - 1.0, 0.0, 1.0);
}

inline double lukasiewicz_or(double a, double b) {
    check_truth_range(a, "lukasiewicz_or");
    check_truth_range(b, "lukasiewicz_or");
    return std::clamp(a + b, 0.0, 1.0);
}

inline double lukasiewicz_not(double a) {
    check_truth_range(a, "lukasiewicz_not");
    return std::clamp(1.0 - a, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Clause distance-to-satisfaction.
//
// For body literal values b1..bk (negation already applied) and head literal
// values h1..hm the distance is max(0, sum(b) - (k-1) - sum(h)); zero exactly
// when the Łukasiewicz truth of (!b1 | ... | !bk | h1 | ... | hm) is 1.
// ---------------------------------------------------------------------------

inline double clause_distance(const std::vector<double>& body, const std::vector<double>& head) {
    if (body.empty() && head.empty()) throw std::invalid_argument("clause_distance: empty clause");
    for (double v : body) check_truth_range(v, "clause_distance");
    for (double v : head) check_truth_range(v, "clause_distance");
    double form = -(static_cast<double>(body.size()) - 1.0);
    for (double v : body) form += v;
    for (double v : head) form -= v;
    return std::max(form, 0.0);
}

// ---------------------------------------------------------------------------
// Relaxation of ground rules.
//
// A ground logical clause is described by signed references into a list of
// ground atoms; the LinearForm produced references the same indices. A
// negated literal over atom value v contributes (1 - v), folded as
// (coefficient -/+1, constant bookkeeping).
// ---------------------------------------------------------------------------

struct GroundLiteral {
    std::size_t atom = 0;  // index into the caller's ground-atom list
    bool negated = false;
};

struct GroundClause {
    std::vector<GroundLiteral> body;
    std::vector<GroundLiteral> head;
};

// LinearForm of the distance-to-satisfaction: sum(body) - (k-1) - sum(head).
inline LinearForm clause_linear_form(const GroundClause& clause) {
    if (clause.body.empty() && clause.head.empty()) {
        throw std::invalid_argument("clause_linear_form: empty clause");
    }
    LinearForm form;
    form.constant = -(static_cast<double>(clause.body.size()) - 1.0);
    for (const GroundLiteral& lit : clause.body) {
        // body literal value: v or (1 - v)
        if (lit.negated) {
            form.add(lit.atom, -1.0);
            form.constant += 1.0;
        } else {
            form.add(lit.atom, 1.0);
        }
    }
    for (const GroundLiteral& lit : clause.head) {
        // head literal subtracts its value: -v or -(1 - v)
        if (lit.negated) {
            form.add(lit.atom, 1.0);
            form.constant -= 1.0;
        } else {
            form.add(lit.atom, -1.0);
        }
    }
    return form;
}

// Weighted rule -> hinge potential (alpha from the squared flag); unweighted
// rule -> hard constraint "distance <= 0".
inline RelaxedRule relax_logical(const GroundClause& clause, bool weighted, bool squared) {
    RelaxedRule out;
    LinearForm form = clause_linear_form(clause);
    if (weighted) {
        out.potentials.push_back(HingeTemplate{std::move(form), squared ? 2 : 1});
    } else {
        out.constraints.push_back(LinearConstraint{std::move(form), ConstraintRelation::Leq});
    }
    return out;
}

// Ground arithmetic rule: both sides already expanded into atom-index terms.
// Standard form is lhs - rhs (<=|=) 0; >= flips the sign. Weighted rules
// become hinges on the violation; weighted equalities become two one-sided
// hinges to stay convex.
struct GroundArithmetic {
    LinearForm lhs;
    LinearForm rhs;
    Relation relation = Relation::Eq;
};

inline LinearForm difference_form(const LinearForm& lhs, const LinearForm& rhs, double sign) {
    LinearForm form;
    form.constant = sign * (lhs.constant - rhs.constant);
    for (const auto& [idx, coef] : lhs.coefficients) form.add(idx, sign * coef);
    for (const auto& [idx, coef] : rhs.coefficients) form.add(idx, -sign * coef);
    return form;
}

inline RelaxedRule relax_arithmetic(const GroundArithmetic& rule, bool weighted, bool squared) {
    RelaxedRule out;
    const double sign = rule.relation == Relation::Geq ? -1.0 : 1.0;  // violation = sign*(lhs-rhs)
    LinearForm violation = difference_form(rule.lhs, rule.rhs, sign);
    const int alpha = squared ? 2 : 1;
    if (!weighted) {
        out.constraints.push_back(LinearConstraint{
            std::move(violation),
            rule.relation == Relation::Eq ? ConstraintRelation::Eq : ConstraintRelation::Leq});
    } else if (rule.relation == Relation::Eq) {
        LinearForm reverse = difference_form(rule.lhs, rule.rhs, -1.0);
        out.potentials.push_back(HingeTemplate{std::move(violation), alpha});
        out.potentials.push_back(HingeTemplate{std::move(reverse), alpha});
    } else {
        out.potentials.push_back(HingeTemplate{std::move(violation), alpha});
    }
    return out;
}

}  // namespace sle
