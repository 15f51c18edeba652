// Parser for the rule language (.psl model files) and the tab-separated data
// files, producing the Program AST and the relational Database.
//
// Grammar (line oriented; `#` starts a comment):
//   declaration:  Name/arity : observed | target
//                 Name/arity : neural(layers=[..], activations=[..],
//                                     features="file.tsv", seed=N)
//   weighted rule:  WEIGHT ':' CLAUSE ['^2']
//   hard rule:      CLAUSE '.'
//   clause:         logical  b1 & ... & bk -> h1 | ... | hm   (literals, '!')
//                   arithmetic  linexpr (= | <= | >=) linexpr {V: Guard(...)}*
//   summation atom: '+Var' in an argument slot; variables are capitalized
//   identifiers, constants are quoted ('0' or "0") or lowercase identifiers
//   or numbers.
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sle/common.hpp"
#include "sle/logic.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

enum class ActivationKind { Relu, Elu, Softmax };

struct NeuralBinding {
    std::size_t predicate = 0;
    std::vector<std::size_t> layers;             // hidden... output widths
    std::vector<ActivationKind> activations;     // one per layer, last softmax
    std::string features_file;                   // TSV, relative to the data dir
    std::uint64_t seed = 42;
};

struct Program {
    std::vector<Predicate> predicates;
    std::vector<Rule> rules;
    std::vector<NeuralBinding> bindings;  // one per Neural predicate

    std::optional<std::size_t> find_predicate(std::string_view name) const {
        for (std::size_t i = 0; i < predicates.size(); ++i) {
            if (predicates[i].name == name) return i;
        }
        return std::nullopt;
    }

    const NeuralBinding& binding_for(std::size_t predicate) const {
        for (const NeuralBinding& b : bindings) {
            if (b.predicate == predicate) return b;
        }
        throw DataError("no neural binding for predicate " + predicates[predicate].name);
    }

    std::size_t weighted_rule_count() const {
        std::size_t n = 0;
        for (const Rule& rule : rules) {
            const bool weighted = std::holds_alternative<LogicalRule>(rule)
                                      ? std::get<LogicalRule>(rule).weight.has_value()
                                      : std::get<ArithmeticRule>(rule).weight.has_value();
            if (weighted) ++n;
        }
        return n;
    }
};

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

namespace detail {

enum class TokenKind { Identifier, Number, QuotedConstant, Symbol, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    int line = 0, column = 0;
};

inline bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Tokenizer {
public:
    explicit Tokenizer(std::string_view text, int line) : text_(text), line_(line) {}

    Token next() {
        skip_space();
        Token tok;
        tok.line = line_;
        tok.column = static_cast<int>(pos_) + 1;
        if (pos_ >= text_.size() || text_[pos_] == '#') {
            tok.kind = TokenKind::End;
            return tok;
        }
        const char c = text_[pos_];
        if (ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
            tok.kind = TokenKind::Identifier;
            tok.text = std::string(text_.substr(start, pos_ - start));
            return tok;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
                    text_[pos_] == 'e' || text_[pos_] == 'E' ||
                    ((text_[pos_] == '+' || text_[pos_] == '-') && pos_ > start &&
                     (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
                ++pos_;
            }
            // A trailing '.' is the hard-rule terminator, not part of the number,
            // unless followed by a digit (e.g. "1.5").
            std::string_view raw = text_.substr(start, pos_ - start);
            if (raw.size() > 1 && raw.back() == '.') {
                --pos_;
                raw.remove_suffix(1);
            }
            tok.kind = TokenKind::Number;
            tok.text = std::string(raw);
            return tok;
        }
        if (c == '\'' || c == '"') {
            const char quote = c;
            ++pos_;
            std::size_t start = pos_;
            while (pos_ < text_.size() && text_[pos_] != quote) ++pos_;
            if (pos_ >= text_.size()) {
                throw DataError("line " + std::to_string(line_) + ": unterminated quoted constant");
            }
            tok.kind = TokenKind::QuotedConstant;
            tok.text = std::string(text_.substr(start, pos_ - start));
            ++pos_;
            return tok;
        }
        // multi-character symbols
        static const char* two_char[] = {"->", "<=", ">=", "^2"};
        for (const char* sym : two_char) {
            if (text_.substr(pos_, 2) == sym) {
                tok.kind = TokenKind::Symbol;
                tok.text = sym;
                pos_ += 2;
                return tok;
            }
        }
        tok.kind = TokenKind::Symbol;
        tok.text = std::string(1, c);
        ++pos_;
        return tok;
    }

private:
    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 0;
};

// Cursor over the token list of one line.
class LineParser {
public:
    LineParser(std::string_view text, int line, Program& program) : line_(line), program_(program) {
        Tokenizer tz(text, line);
        for (Token tok = tz.next();; tok = tz.next()) {
            tokens_.push_back(tok);
            if (tok.kind == TokenKind::End) break;
        }
    }

    [[noreturn]] void fail(const std::string& message) const {
        const Token& tok = peek();
        throw DataError("line " + std::to_string(line_) + ", column " + std::to_string(tok.column) +
                        ": " + message);
    }

    const Token& peek(std::size_t ahead = 0) const {
        const std::size_t i = std::min(pos_ + ahead, tokens_.size() - 1);
        return tokens_[i];
    }

    Token take() {
        Token tok = peek();
        if (pos_ + 1 < tokens_.size()) ++pos_;
        return tok;
    }

    bool at_end() const { return peek().kind == TokenKind::End; }

    bool accept_symbol(std::string_view sym) {
        if (peek().kind == TokenKind::Symbol && peek().text == sym) {
            take();
            return true;
        }
        return false;
    }

    void expect_symbol(std::string_view sym) {
        if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "'");
    }

    // ---- declarations -----------------------------------------------------

    bool looks_like_declaration() const {
        return peek().kind == TokenKind::Identifier && peek(1).kind == TokenKind::Symbol &&
               peek(1).text == "/";
    }

    void parse_declaration() {
        Predicate pred;
        pred.name = take().text;
        expect_symbol("/");
        if (peek().kind != TokenKind::Number) fail("expected predicate arity");
        long long arity = 0;
        if (!parse_long(take().text, arity) || arity < 1) fail("arity must be a positive integer");
        pred.arity = static_cast<std::size_t>(arity);
        expect_symbol(":");
        if (peek().kind != TokenKind::Identifier) fail("expected predicate kind");
        const std::string kind = take().text;
        if (program_.find_predicate(pred.name)) fail("duplicate predicate declaration " + pred.name);
        if (kind == "observed") {
            pred.kind = PredicateKind::Observed;
        } else if (kind == "target") {
            pred.kind = PredicateKind::Target;
        } else if (kind == "neural") {
            pred.kind = PredicateKind::Neural;
            program_.predicates.push_back(pred);
            parse_binding(program_.predicates.size() - 1);
            if (!at_end()) fail("trailing tokens after declaration");
            return;
        } else {
            fail("unknown predicate kind '" + kind + "'");
        }
        program_.predicates.push_back(pred);
        if (!at_end()) fail("trailing tokens after declaration");
    }

    void parse_binding(std::size_t predicate) {
        NeuralBinding binding;
        binding.predicate = predicate;
        expect_symbol("(");
        bool first = true;
        while (!accept_symbol(")")) {
            if (!first) expect_symbol(",");
            first = false;
            if (peek().kind != TokenKind::Identifier) fail("expected binding key");
            const std::string key = take().text;
            expect_symbol("=");
            if (key == "layers") {
                expect_symbol("[");
                while (!accept_symbol("]")) {
                    if (!binding.layers.empty()) expect_symbol(",");
                    long long width = 0;
                    if (peek().kind != TokenKind::Number || !parse_long(take().text, width) || width < 1) {
                        fail("expected layer width");
                    }
                    binding.layers.push_back(static_cast<std::size_t>(width));
                }
            } else if (key == "activations") {
                expect_symbol("[");
                while (!accept_symbol("]")) {
                    if (!binding.activations.empty()) expect_symbol(",");
                    if (peek().kind != TokenKind::Identifier) fail("expected activation name");
                    const std::string name = take().text;
                    if (name == "relu") binding.activations.push_back(ActivationKind::Relu);
                    else if (name == "elu") binding.activations.push_back(ActivationKind::Elu);
                    else if (name == "softmax") binding.activations.push_back(ActivationKind::Softmax);
                    else fail("unknown activation '" + name + "'");
                }
            } else if (key == "features") {
                if (peek().kind != TokenKind::QuotedConstant) fail("features expects a quoted file name");
                binding.features_file = take().text;
            } else if (key == "seed") {
                long long seed = 0;
                if (peek().kind != TokenKind::Number || !parse_long(take().text, seed)) fail("expected seed");
                binding.seed = static_cast<std::uint64_t>(seed);
            } else {
                fail("unknown binding key '" + key + "'");
            }
        }
        if (binding.layers.empty()) fail("neural binding requires layers=[...]");
        if (binding.activations.size() != binding.layers.size()) {
            fail("activations must list one entry per layer");
        }
        if (binding.activations.back() != ActivationKind::Softmax) {
            fail("final activation must be softmax");
        }
        if (binding.features_file.empty()) fail("neural binding requires features=\"...\"");
        program_.bindings.push_back(std::move(binding));
    }

    // ---- rules --------------------------------------------------------------

    void parse_rule() {
        std::optional<double> weight;
        if (peek().kind == TokenKind::Number && peek(1).kind == TokenKind::Symbol && peek(1).text == ":") {
            double w = 0;
            if (!parse_double(take().text, w)) fail("bad rule weight");
            if (w < 0) fail("rule weight must be nonnegative");
            weight = w;
            take();  // ':'
        }

        // Decide logical vs arithmetic: scan for a relation symbol.
        bool arithmetic = false;
        for (std::size_t i = 0;; ++i) {
            const Token& tok = peek(i);
            if (tok.kind == TokenKind::End) break;
            if (tok.kind == TokenKind::Symbol &&
                (tok.text == "=" || tok.text == "<=" || tok.text == ">=")) {
                arithmetic = true;
                break;
            }
            if (tok.kind == TokenKind::Symbol && tok.text == "->") break;
        }

        if (arithmetic) {
            parse_arithmetic(weight);
        } else {
            parse_logical(weight);
        }
    }

    void parse_logical(std::optional<double> weight) {
        LogicalRule rule;
        rule.weight = weight;
        rule.body.push_back(parse_literal());
        while (accept_symbol("&")) rule.body.push_back(parse_literal());
        if (accept_symbol("->")) {
            rule.head.push_back(parse_literal());
            while (accept_symbol("|")) rule.head.push_back(parse_literal());
        }
        finish_rule(rule.weight, rule.squared);
        if (rule.body.empty() && rule.head.empty()) fail("empty clause");
        program_.rules.push_back(std::move(rule));
    }

    void parse_arithmetic(std::optional<double> weight) {
        ArithmeticRule rule;
        rule.weight = weight;
        rule.lhs = parse_linear_expression();
        if (accept_symbol("=")) rule.relation = Relation::Eq;
        else if (accept_symbol("<=")) rule.relation = Relation::Leq;
        else if (accept_symbol(">=")) rule.relation = Relation::Geq;
        else fail("expected relation (=, <=, >=)");
        rule.rhs = parse_linear_expression();
        while (peek().kind == TokenKind::Symbol && peek().text == "{") {
            take();
            FilterClause filter;
            if (peek().kind != TokenKind::Identifier) fail("expected filter variable");
            filter.summation_variable = take().text;
            expect_symbol(":");
            filter.guard = parse_atom(nullptr);
            expect_symbol("}");
            rule.filters.push_back(std::move(filter));
        }
        finish_rule(rule.weight, rule.squared);
        validate_arithmetic(rule);
        program_.rules.push_back(std::move(rule));
    }

    // shared tail: optional ^2 on weighted rules, '.' terminator on hard rules.
    void finish_rule(const std::optional<double>& weight, bool& squared) {
        squared = false;
        if (weight.has_value()) {
            if (accept_symbol("^2")) squared = true;
            if (!at_end()) fail("trailing tokens after weighted rule");
        } else {
            expect_symbol(".");
            if (!at_end()) fail("trailing tokens after hard rule");
        }
    }

    Literal parse_literal() {
        Literal lit;
        if (accept_symbol("!")) lit.negated = true;
        lit.atom = parse_atom(nullptr);
        return lit;
    }

    LinearExpression parse_linear_expression() {
        LinearExpression expr;
        double sign = 1.0;
        if (accept_symbol("-")) sign = -1.0;
        expr.terms.push_back(parse_expr_term(sign));
        for (;;) {
            if (accept_symbol("+")) sign = 1.0;
            else if (accept_symbol("-")) sign = -1.0;
            else break;
            expr.terms.push_back(parse_expr_term(sign));
        }
        return expr;
    }

    ExprTerm parse_expr_term(double sign) {
        ExprTerm term;
        term.coefficient = sign;
        if (peek().kind == TokenKind::Number) {
            double value = 0;
            if (!parse_double(take().text, value)) fail("bad numeric literal");
            if (accept_symbol("*")) {
                term.coefficient = sign * value;
            } else {
                term.coefficient = sign * value;
                term.atom.reset();
                return term;  // pure constant
            }
        }
        std::optional<std::string> summation;
        term.atom = parse_atom(&summation);
        term.summation = summation;
        return term;
    }

    // `summation_out` enables `+Var` argument slots when non-null.
    Atom parse_atom(std::optional<std::string>* summation_out) {
        if (peek().kind != TokenKind::Identifier) fail("expected predicate name");
        const Token name = take();
        auto pred = program_.find_predicate(name.text);
        if (!pred) {
            throw DataError("line " + std::to_string(line_) + ": undeclared predicate '" + name.text + "'");
        }
        Atom atom;
        atom.predicate = *pred;
        expect_symbol("(");
        bool first = true;
        while (!accept_symbol(")")) {
            if (!first) expect_symbol(",");
            first = false;
            if (accept_symbol("+")) {
                if (summation_out == nullptr) fail("summation atom not allowed here");
                if (peek().kind != TokenKind::Identifier || !is_variable_name(peek().text)) {
                    fail("expected summation variable");
                }
                const std::string var = take().text;
                if (summation_out->has_value()) fail("at most one summation variable per atom");
                *summation_out = var;
                atom.terms.push_back(Term{true, var});
                continue;
            }
            const Token arg = take();
            if (arg.kind == TokenKind::Identifier && is_variable_name(arg.text)) {
                atom.terms.push_back(Term{true, arg.text});
            } else if (arg.kind == TokenKind::Identifier || arg.kind == TokenKind::Number ||
                       arg.kind == TokenKind::QuotedConstant) {
                atom.terms.push_back(Term{false, arg.text});
            } else {
                fail("expected term");
            }
        }
        if (atom.terms.size() != program_.predicates[*pred].arity) {
            throw DataError("line " + std::to_string(line_) + ": arity mismatch for " + name.text +
                            " (expected " + std::to_string(program_.predicates[*pred].arity) + ", got " +
                            std::to_string(atom.terms.size()) + ")");
        }
        return atom;
    }

    void validate_arithmetic(const ArithmeticRule& rule) {
        std::set<std::string> summations;
        auto scan = [&](const LinearExpression& expr) {
            for (const ExprTerm& term : expr.terms) {
                if (term.summation) {
                    if (!summations.insert(*term.summation).second) {
                        fail("summation variable '" + *term.summation + "' used in more than one atom");
                    }
                }
            }
        };
        scan(rule.lhs);
        scan(rule.rhs);
        for (const FilterClause& filter : rule.filters) {
            if (!summations.count(filter.summation_variable)) {
                fail("filter variable '" + filter.summation_variable + "' is not a summation variable");
            }
            if (program_.predicates[filter.guard.predicate].kind != PredicateKind::Observed) {
                fail("filter guard must be over an observed predicate");
            }
        }
    }

    static bool is_variable_name(const std::string& text) {
        return !text.empty() && std::isupper(static_cast<unsigned char>(text[0]));
    }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int line_ = 0;
    Program& program_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// parse_program / pretty_print
// ---------------------------------------------------------------------------

inline Program parse_program(const std::string& text) {
    Program program;
    int line_no = 0;
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        detail::LineParser parser(body, line_no, program);
        if (parser.looks_like_declaration()) {
            parser.parse_declaration();
        } else {
            parser.parse_rule();
        }
    }
    return program;
}

namespace detail {

inline std::string term_to_text(const Term& term) {
    if (term.is_variable) return term.text;
    return "'" + term.text + "'";
}

inline std::string atom_to_text(const Program& program, const Atom& atom,
                                const std::optional<std::string>& summation = std::nullopt) {
    std::string out = program.predicates[atom.predicate].name + "(";
    for (std::size_t i = 0; i < atom.terms.size(); ++i) {
        if (i) out += ", ";
        const Term& term = atom.terms[i];
        if (summation && term.is_variable && term.text == *summation) out += "+";
        out += term_to_text(term);
    }
    out += ")";
    return out;
}

inline std::string expression_to_text(const Program& program, const LinearExpression& expr) {
    std::string out;
    for (std::size_t i = 0; i < expr.terms.size(); ++i) {
        const ExprTerm& term = expr.terms[i];
        double coef = term.coefficient;
        if (i == 0) {
            if (coef < 0) out += "-";
        } else {
            out += coef < 0 ? " - " : " + ";
        }
        const double mag = std::abs(coef);
        if (!term.atom) {
            out += dtos(mag);
            continue;
        }
        if (mag != 1.0) out += dtos(mag) + " * ";
        out += atom_to_text(program, *term.atom, term.summation);
    }
    return out;
}

}  // namespace detail

inline std::string pretty_print(const Program& program) {
    std::string out;
    for (const Predicate& pred : program.predicates) {
        out += pred.name + "/" + std::to_string(pred.arity) + ": ";
        switch (pred.kind) {
            case PredicateKind::Observed: out += "observed"; break;
            case PredicateKind::Target: out += "target"; break;
            case PredicateKind::Neural: {
                const NeuralBinding& b = program.binding_for(program.find_predicate(pred.name).value());
                out += "neural(layers=[";
                for (std::size_t i = 0; i < b.layers.size(); ++i) {
                    if (i) out += ", ";
                    out += std::to_string(b.layers[i]);
                }
                out += "], activations=[";
                for (std::size_t i = 0; i < b.activations.size(); ++i) {
                    if (i) out += ", ";
                    switch (b.activations[i]) {
                        case ActivationKind::Relu: out += "relu"; break;
                        case ActivationKind::Elu: out += "elu"; break;
                        case ActivationKind::Softmax: out += "softmax"; break;
                    }
                }
                out += "], features=\"" + b.features_file + "\", seed=" + std::to_string(b.seed) + ")";
                break;
            }
        }
        out += "\n";
    }
    for (const Rule& rule : program.rules) {
        std::string text;
        bool weighted = false;
        bool squared = false;
        if (const LogicalRule* logical = std::get_if<LogicalRule>(&rule)) {
            weighted = logical->weight.has_value();
            squared = logical->squared;
            if (weighted) text += dtos(*logical->weight) + ": ";
            for (std::size_t i = 0; i < logical->body.size(); ++i) {
                if (i) text += " & ";
                if (logical->body[i].negated) text += "!";
                text += detail::atom_to_text(program, logical->body[i].atom);
            }
            if (!logical->head.empty()) {
                text += " -> ";
                for (std::size_t i = 0; i < logical->head.size(); ++i) {
                    if (i) text += " | ";
                    if (logical->head[i].negated) text += "!";
                    text += detail::atom_to_text(program, logical->head[i].atom);
                }
            }
        } else {
            const ArithmeticRule& arith = std::get<ArithmeticRule>(rule);
            weighted = arith.weight.has_value();
            squared = arith.squared;
            if (weighted) text += dtos(*arith.weight) + ": ";
            text += detail::expression_to_text(program, arith.lhs);
            switch (arith.relation) {
                case Relation::Eq: text += " = "; break;
                case Relation::Leq: text += " <= "; break;
                case Relation::Geq: text += " >= "; break;
            }
            text += detail::expression_to_text(program, arith.rhs);
            for (const FilterClause& filter : arith.filters) {
                text += " {" + filter.summation_variable + ": " +
                        detail::atom_to_text(program, filter.guard) + "}";
            }
        }
        if (weighted && squared) text += " ^2";
        if (!weighted) text += " .";
        out += text + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Database
// ---------------------------------------------------------------------------

enum class Partition { Observed, Target, Truth };

struct DataRow {
    std::vector<std::string> args;
    double value = 1.0;
};

struct PredicateTable {
    std::vector<DataRow> observations;
    std::vector<DataRow> targets;
    std::vector<DataRow> truths;
};

struct Database {
    std::vector<PredicateTable> tables;  // indexed by predicate id

    explicit Database(std::size_t predicate_count = 0) : tables(predicate_count) {}

    bool empty() const {
        for (const PredicateTable& table : tables) {
            if (!table.observations.empty() || !table.targets.empty() || !table.truths.empty()) {
                return false;
            }
        }
        return true;
    }
};

// Parse one data file; rows are appended to the database. Missing value
// column defaults to 1.0. Values must lie in [0,1]; duplicate (atom,
// partition) rows are an error.
inline std::vector<DataRow> parse_data_file(const std::string& text, const Predicate& predicate,
                                            Partition partition) {
    std::vector<DataRow> rows;
    std::set<std::vector<std::string>> seen;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::vector<std::string> fields = split_on(body, '\t');
        DataRow row;
        if (fields.size() == predicate.arity) {
            row.args = std::move(fields);
            row.value = 1.0;
            if (partition == Partition::Target) {
                // targets carry no value column by definition; 1.0 is a placeholder
            }
        } else if (fields.size() == predicate.arity + 1) {
            row.value = 0.0;
            if (!parse_double(trim(fields.back()), row.value)) {
                throw DataError(predicate.name + " line " + std::to_string(line_no) + ": bad value '" +
                                fields.back() + "'");
            }
            if (row.value < 0.0 || row.value > 1.0) {
                throw DataError(predicate.name + " line " + std::to_string(line_no) +
                                ": value outside [0,1]: " + fields.back());
            }
            fields.pop_back();
            row.args = std::move(fields);
        } else {
            throw DataError(predicate.name + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(predicate.arity) + " columns (arity) plus optional value, got " +
                            std::to_string(fields.size()));
        }
        for (std::string& arg : row.args) arg = std::string(trim(arg));
        if (!seen.insert(row.args).second) {
            throw DataError(predicate.name + " line " + std::to_string(line_no) + ": duplicate row");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace sle
