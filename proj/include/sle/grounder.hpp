// Grounding: instantiate rules against the database to produce the
// GroundModel (variable registry, hinge potentials grouped into per-rule
// partitions, and hard linear constraints).
//
// Enumeration is a join over the atoms whose ground instances must exist in
// the database (target and neural atoms, plus positive observed body
// literals, which prune the grounding when their value is 0). Variable
// bindings are additionally restricted to the intersection of the constant
// domains of every argument position the variable occupies — this is what
// scopes rules carrying an observed guard atom (e.g. FirstPuzzle) to the
// constants that predicate actually mentions. Observed atoms not driving the
// join are resolved closed-world (missing rows read as 0) and folded into the
// linear-form constant.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "sle/common.hpp"
#include "sle/logic.hpp"
#include "sle/neural.hpp"
#include "sle/parser.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// Variable registry
// ---------------------------------------------------------------------------

enum class VarKind { Observed, Target, Neural };

struct VarRef {
    VarKind kind = VarKind::Observed;
    double value = 0.0;     // observed only
    std::size_t index = 0;  // target: index into y; neural: slot into g
};

struct TargetAtomInfo {
    std::size_t predicate = 0;
    std::vector<std::string> args;
};

struct ProviderHandle {
    std::size_t predicate = 0;
    std::shared_ptr<NeuralProvider> provider;
    std::vector<std::vector<std::string>> entity_keys;  // entity index -> key args
    std::unordered_map<std::string, std::size_t> entity_index;
    std::vector<std::string> classes;  // class constant per output slot
    std::unordered_map<std::string, std::size_t> class_index;
    std::size_t base_slot = 0;
};

namespace detail {
inline std::string join_args(const std::vector<std::string>& args) {
    std::string key;
    for (const std::string& a : args) {
        key += a;
        key += '\t';
    }
    return key;
}
}  // namespace detail

struct VariableRegistry {
    std::vector<TargetAtomInfo> targets;  // y index -> atom
    std::unordered_map<std::string, VarRef> atom_map;  // "<pred>\n<args>" -> ref
    std::vector<ProviderHandle> providers;
    std::size_t n_g = 0;

    static std::string key_of(std::size_t predicate, const std::vector<std::string>& args) {
        return std::to_string(predicate) + "\n" + detail::join_args(args);
    }

    std::optional<VarRef> lookup(std::size_t predicate, const std::vector<std::string>& args) const {
        auto it = atom_map.find(key_of(predicate, args));
        if (it == atom_map.end()) return std::nullopt;
        return it->second;
    }
};

// ---------------------------------------------------------------------------
// Ground model
// ---------------------------------------------------------------------------

// Linear form over registered variables: target coordinates y and neural
// output slots g; observed values are already folded into the constant.
struct GroundForm {
    std::vector<std::pair<std::uint32_t, double>> y;
    std::vector<std::pair<std::uint32_t, double>> g;
    double constant = 0.0;

    void add_y(std::uint32_t index, double coef) {
        for (auto& [i, c] : y) {
            if (i == index) { c += coef; return; }
        }
        y.emplace_back(index, coef);
    }

    void add_g(std::uint32_t index, double coef) {
        for (auto& [i, c] : g) {
            if (i == index) { c += coef; return; }
        }
        g.emplace_back(index, coef);
    }

    double evaluate(const std::vector<double>& yv, const std::vector<double>& gv) const {
        double total = constant;
        for (const auto& [i, c] : y) total += c * yv[i];
        for (const auto& [i, c] : g) total += c * gv[i];
        return total;
    }

    // Upper bound of the form over the [0,1] box (used for pruning).
    double max_over_box() const {
        double total = constant;
        for (const auto& [i, c] : y) total += std::max(c, 0.0);
        for (const auto& [i, c] : g) total += std::max(c, 0.0);
        return total;
    }
};

struct GroundPotential {
    GroundForm form;
    int alpha = 1;
    std::uint32_t partition = 0;
    std::uint32_t rule_index = 0;
};

struct GroundConstraint {
    GroundForm form;
    ConstraintRelation relation = ConstraintRelation::Leq;
    std::uint32_t rule_index = 0;
    std::string name;
};

struct GroundModel {
    std::vector<GroundPotential> potentials;
    std::vector<std::vector<std::size_t>> partitions;  // per weighted rule
    std::vector<double> weights;                       // w_psl, one per partition
    std::vector<std::string> partition_names;          // "w1".."wr"
    std::vector<GroundConstraint> constraints;
    VariableRegistry registry;
    std::size_t n_y = 0;
    std::size_t n_g = 0;
};

// ---------------------------------------------------------------------------
// Database index (grounder-internal)
// ---------------------------------------------------------------------------

namespace detail {

struct TableIndex {
    // Universe rows: targets for Target/Neural predicates, observations for
    // Observed predicates (sorted for determinism).
    std::vector<DataRow> rows;
    std::vector<std::unordered_map<std::string, std::vector<std::uint32_t>>> by_position;
    std::vector<std::vector<std::string>> domains;  // sorted distinct constants per position
    std::unordered_map<std::string, double> value_by_key;  // observed values

    void build(const Predicate& predicate, const PredicateTable& table) {
        rows = predicate.kind == PredicateKind::Observed ? table.observations : table.targets;
        std::sort(rows.begin(), rows.end(),
                  [](const DataRow& a, const DataRow& b) { return a.args < b.args; });
        by_position.assign(predicate.arity, {});
        domains.assign(predicate.arity, {});
        for (std::uint32_t r = 0; r < rows.size(); ++r) {
            for (std::size_t p = 0; p < predicate.arity; ++p) {
                by_position[p][rows[r].args[p]].push_back(r);
            }
            if (predicate.kind == PredicateKind::Observed) {
                value_by_key[join_args(rows[r].args)] = rows[r].value;
            }
        }
        for (std::size_t p = 0; p < predicate.arity; ++p) {
            std::set<std::string> uniq;
            for (const DataRow& row : rows) uniq.insert(row.args[p]);
            domains[p].assign(uniq.begin(), uniq.end());
        }
    }

    double observed_value(const std::vector<std::string>& args) const {
        auto it = value_by_key.find(join_args(args));
        return it == value_by_key.end() ? 0.0 : it->second;  // closed world
    }

    bool contains(const std::vector<std::string>& args) const {
        // universe membership (targets/neural); observed uses value_by_key
        for (const DataRow& row : rows) {
            if (row.args == args) return true;
        }
        return false;
    }
};

// One atom occurrence inside a rule being grounded.
struct AtomSlot {
    Atom atom;
    bool negated = false;    // logical literals only
    bool in_body = false;    // logical literals only
    bool logical = false;
    double coefficient = 0.0;           // arithmetic terms only
    bool lhs = false;                   // arithmetic side
    std::optional<std::string> summation;
    bool driver = false;  // join is driven by existing rows of this atom
};

}  // namespace detail

// ---------------------------------------------------------------------------
// ground()
// ---------------------------------------------------------------------------

class Grounder {
public:
    Grounder(const Program& program, const Database& database,
             std::vector<ProviderHandle> providers)
        : program_(program), database_(database) {
        model_.registry.providers = std::move(providers);
    }

    GroundModel run() {
        if (database_.empty()) {
            // Empty database: empty model (energy identically zero), even if
            // rules reference predicates. Partitions still line up with the
            // weighted rules so |w| == |T| holds.
            init_partitions();
            return std::move(model_);
        }
        build_indexes();
        register_targets();
        register_neural();
        init_partitions();
        for (std::size_t r = 0; r < program_.rules.size(); ++r) ground_rule(r);
        model_.n_y = model_.registry.targets.size();
        model_.n_g = model_.registry.n_g;
        return std::move(model_);
    }

private:
    void init_partitions() {
        std::size_t w = 0;
        for (std::size_t r = 0; r < program_.rules.size(); ++r) {
            const bool weighted = rule_weight(r).has_value();
            if (!weighted) continue;
            rule_partition_[r] = w;
            model_.partitions.emplace_back();
            model_.weights.push_back(*rule_weight(r));
            model_.partition_names.push_back("w" + std::to_string(w + 1));
            ++w;
        }
    }

    std::optional<double> rule_weight(std::size_t r) const {
        const Rule& rule = program_.rules[r];
        if (const LogicalRule* logical = std::get_if<LogicalRule>(&rule)) return logical->weight;
        return std::get<ArithmeticRule>(rule).weight;
    }

    void build_indexes() {
        indexes_.resize(program_.predicates.size());
        for (std::size_t p = 0; p < program_.predicates.size(); ++p) {
            indexes_[p].build(program_.predicates[p], database_.tables[p]);
        }
    }

    void register_targets() {
        for (std::size_t p = 0; p < program_.predicates.size(); ++p) {
            if (program_.predicates[p].kind != PredicateKind::Target) continue;
            for (const DataRow& row : indexes_[p].rows) {
                VarRef ref;
                ref.kind = VarKind::Target;
                ref.index = model_.registry.targets.size();
                model_.registry.targets.push_back(TargetAtomInfo{p, row.args});
                model_.registry.atom_map.emplace(VariableRegistry::key_of(p, row.args), ref);
            }
        }
    }

    void register_neural() {
        std::size_t base = 0;
        for (ProviderHandle& handle : model_.registry.providers) {
            const std::size_t p = handle.predicate;
            const Predicate& pred = program_.predicates[p];
            // Entities are the distinct first (arity-1) argument tuples of the
            // predicate's target rows; classes the distinct final arguments.
            std::set<std::vector<std::string>> entity_set;
            std::set<std::string> class_set;
            for (const DataRow& row : indexes_[p].rows) {
                entity_set.insert(std::vector<std::string>(row.args.begin(), row.args.end() - 1));
                class_set.insert(row.args.back());
            }
            handle.classes.assign(class_set.begin(), class_set.end());
            std::sort(handle.classes.begin(), handle.classes.end(), numeric_less);
            for (std::size_t c = 0; c < handle.classes.size(); ++c) handle.class_index[handle.classes[c]] = c;
            if (handle.classes.size() != handle.provider->output_width()) {
                throw DataError(pred.name + ": provider output width " +
                                std::to_string(handle.provider->output_width()) + " != class count " +
                                std::to_string(handle.classes.size()));
            }
            // Entity order may be prefilled (feature-file order); otherwise it
            // is derived from the rows. Every row's entity must be known.
            if (handle.entity_keys.empty()) {
                handle.entity_keys.assign(entity_set.begin(), entity_set.end());
            }
            if (handle.entity_keys.size() != handle.provider->entity_count()) {
                throw DataError(pred.name + ": provider entity count mismatch");
            }
            handle.entity_index.clear();
            for (std::size_t e = 0; e < handle.entity_keys.size(); ++e) {
                handle.entity_index[detail::join_args(handle.entity_keys[e])] = e;
            }
            handle.base_slot = base;
            const std::size_t width = handle.provider->output_width();
            for (const DataRow& row : indexes_[p].rows) {
                std::vector<std::string> key(row.args.begin(), row.args.end() - 1);
                const auto found = handle.entity_index.find(detail::join_args(key));
                if (found == handle.entity_index.end()) {
                    throw DataError(pred.name + ": no features for entity " + detail::join_args(key));
                }
                const std::size_t entity = found->second;
                const std::size_t cls = handle.class_index.at(row.args.back());
                VarRef ref;
                ref.kind = VarKind::Neural;
                ref.index = base + entity * width + cls;
                model_.registry.atom_map.emplace(VariableRegistry::key_of(p, row.args), ref);
            }
            base += handle.entity_keys.size() * width;
        }
        model_.registry.n_g = base;
    }

    // ---- per-rule grounding -------------------------------------------------

    void ground_rule(std::size_t rule_index) {
        const Rule& rule = program_.rules[rule_index];
        std::vector<detail::AtomSlot> slots;
        std::vector<const FilterClause*> filters;
        if (const LogicalRule* logical = std::get_if<LogicalRule>(&rule)) {
            check_head_variables(*logical, rule_index);
            for (const Literal& lit : logical->body) {
                detail::AtomSlot slot;
                slot.atom = lit.atom;
                slot.negated = lit.negated;
                slot.in_body = true;
                slot.logical = true;
                slots.push_back(std::move(slot));
            }
            for (const Literal& lit : logical->head) {
                detail::AtomSlot slot;
                slot.atom = lit.atom;
                slot.negated = lit.negated;
                slot.logical = true;
                slots.push_back(std::move(slot));
            }
        } else {
            const ArithmeticRule& arith = std::get<ArithmeticRule>(rule);
            auto add_side = [&](const LinearExpression& expr, bool lhs) {
                for (const ExprTerm& term : expr.terms) {
                    if (!term.atom) continue;  // constants handled at materialization
                    detail::AtomSlot slot;
                    slot.atom = *term.atom;
                    slot.coefficient = term.coefficient;
                    slot.lhs = lhs;
                    slot.summation = term.summation;
                    slots.push_back(std::move(slot));
                }
            };
            add_side(arith.lhs, true);
            add_side(arith.rhs, false);
            for (const FilterClause& filter : arith.filters) filters.push_back(&filter);
        }

        // Mark join drivers: every target/neural atom must exist in the
        // database universe; positive observed body literals must be nonzero.
        for (detail::AtomSlot& slot : slots) {
            const PredicateKind kind = program_.predicates[slot.atom.predicate].kind;
            if (kind != PredicateKind::Observed) slot.driver = true;
            else if (slot.logical && slot.in_body && !slot.negated) slot.driver = true;
        }

        // Referenced predicates must have data (unless nothing references them).
        for (const detail::AtomSlot& slot : slots) {
            if (indexes_[slot.atom.predicate].rows.empty()) {
                throw DataError("predicate with no data: " +
                                program_.predicates[slot.atom.predicate].name);
            }
        }

        // Variable domains: intersection over every argument position the
        // variable occupies (summation variables excluded from the join).
        std::set<std::string> summation_vars;
        for (const detail::AtomSlot& slot : slots) {
            if (slot.summation) summation_vars.insert(*slot.summation);
        }
        std::map<std::string, std::vector<std::string>> domains;
        auto intersect_domain = [&](const std::string& var, const std::vector<std::string>& dom) {
            auto it = domains.find(var);
            if (it == domains.end()) {
                domains[var] = dom;
                return;
            }
            std::vector<std::string> merged;
            std::set_intersection(it->second.begin(), it->second.end(), dom.begin(), dom.end(),
                                  std::back_inserter(merged));
            it->second = std::move(merged);
        };
        auto scan_atom = [&](const Atom& atom) {
            for (std::size_t i = 0; i < atom.terms.size(); ++i) {
                const Term& term = atom.terms[i];
                if (!term.is_variable || summation_vars.count(term.text)) continue;
                intersect_domain(term.text, indexes_[atom.predicate].domains[i]);
            }
        };
        for (const detail::AtomSlot& slot : slots) scan_atom(slot.atom);
        for (const FilterClause* filter : filters) scan_atom(filter->guard);

        // Recursive join over driver atoms, then leftover free variables.
        std::map<std::string, std::string> binding;
        std::vector<const detail::AtomSlot*> drivers;
        for (const detail::AtomSlot& slot : slots) {
            if (slot.driver) drivers.push_back(&slot);
        }
        join(rule_index, slots, filters, domains, drivers, binding);
    }

    void check_head_variables(const LogicalRule& rule, std::size_t rule_index) const {
        std::set<std::string> body_vars;
        for (const Literal& lit : rule.body) {
            for (const Term& term : lit.atom.terms) {
                if (term.is_variable) body_vars.insert(term.text);
            }
        }
        for (const Literal& lit : rule.head) {
            for (const Term& term : lit.atom.terms) {
                if (term.is_variable && !body_vars.count(term.text)) {
                    throw DataError("rule " + std::to_string(rule_index + 1) + ": unbound logic variable '" +
                                    term.text + "' appears only in the head");
                }
            }
        }
    }

    // Count of candidate rows for a driver under the current binding; uses the
    // most selective single-position index.
    std::vector<std::uint32_t> candidates(const detail::AtomSlot& slot,
                                          const std::map<std::string, std::string>& binding) const {
        const detail::TableIndex& index = indexes_[slot.atom.predicate];
        const std::vector<std::uint32_t>* best = nullptr;
        static const std::vector<std::uint32_t> kEmpty;
        for (std::size_t i = 0; i < slot.atom.terms.size(); ++i) {
            const Term& term = slot.atom.terms[i];
            std::string bound;
            if (term.is_variable) {
                if (slot.summation && term.text == *slot.summation) continue;
                auto it = binding.find(term.text);
                if (it == binding.end()) continue;
                bound = it->second;
            } else {
                bound = term.text;
            }
            auto rows_it = index.by_position[i].find(bound);
            if (rows_it == index.by_position[i].end()) return kEmpty;
            if (best == nullptr || rows_it->second.size() < best->size()) best = &rows_it->second;
        }
        if (best != nullptr) return *best;
        std::vector<std::uint32_t> all(index.rows.size());
        for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }

    bool row_matches(const detail::AtomSlot& slot, const DataRow& row,
                     const std::map<std::string, std::vector<std::string>>& domains,
                     std::vector<std::string>& newly_bound,
                     std::map<std::string, std::string>& scratch) const {
        for (std::size_t i = 0; i < slot.atom.terms.size(); ++i) {
            const Term& term = slot.atom.terms[i];
            if (!term.is_variable) {
                if (row.args[i] != term.text) return false;
                continue;
            }
            if (slot.summation && term.text == *slot.summation) continue;  // expanded later
            auto bound = scratch.find(term.text);
            if (bound != scratch.end()) {
                if (bound->second != row.args[i]) return false;
                continue;
            }
            // respect the variable's intersected domain
            auto dom = domains.find(term.text);
            if (dom != domains.end() &&
                !std::binary_search(dom->second.begin(), dom->second.end(), row.args[i])) {
                return false;
            }
            scratch.emplace(term.text, row.args[i]);
            newly_bound.push_back(term.text);
        }
        return true;
    }

    void join(std::size_t rule_index, const std::vector<detail::AtomSlot>& slots,
              const std::vector<const FilterClause*>& filters,
              const std::map<std::string, std::vector<std::string>>& domains,
              std::vector<const detail::AtomSlot*> pending,
              std::map<std::string, std::string>& binding) {
        if (pending.empty()) {
            enumerate_free_variables(rule_index, slots, filters, domains, binding);
            return;
        }
        // pick the most selective pending driver (stable tie-break: list order)
        std::size_t best = 0;
        std::size_t best_count = SIZE_MAX;
        std::vector<std::vector<std::uint32_t>> cand(pending.size());
        for (std::size_t i = 0; i < pending.size(); ++i) {
            cand[i] = candidates(*pending[i], binding);
            if (cand[i].size() < best_count) {
                best_count = cand[i].size();
                best = i;
            }
        }
        const detail::AtomSlot& slot = *pending[best];
        std::vector<const detail::AtomSlot*> rest;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (i != best) rest.push_back(pending[i]);
        }
        const detail::TableIndex& index = indexes_[slot.atom.predicate];
        const bool positive_observed =
            slot.logical && slot.in_body && !slot.negated &&
            program_.predicates[slot.atom.predicate].kind == PredicateKind::Observed;
        // Deduplicate repeated bindings arising from summation slots: group
        // candidate rows by the non-summation binding they induce.
        std::set<std::vector<std::string>> seen_bindings;
        for (std::uint32_t r : cand[best]) {
            const DataRow& row = index.rows[r];
            if (positive_observed && row.value <= 0.0) continue;  // zero body literal prunes
            std::vector<std::string> newly;
            if (!row_matches(slot, row, domains, newly, binding)) {
                for (const std::string& var : newly) binding.erase(var);
                continue;
            }
            if (slot.summation) {
                std::vector<std::string> snapshot;
                for (std::size_t i = 0; i < slot.atom.terms.size(); ++i) {
                    const Term& term = slot.atom.terms[i];
                    if (term.is_variable && slot.summation && term.text == *slot.summation) continue;
                    snapshot.push_back(row.args[i]);
                }
                if (!seen_bindings.insert(snapshot).second) {
                    for (const std::string& var : newly) binding.erase(var);
                    continue;
                }
            }
            join(rule_index, slots, filters, domains, rest, binding);
            for (const std::string& var : newly) binding.erase(var);
        }
    }

    // Variables appearing only in non-driver atoms (closed-world observed
    // atoms of arithmetic rules, negated observed literals, observed heads)
    // are enumerated over their intersected domains.
    void enumerate_free_variables(std::size_t rule_index, const std::vector<detail::AtomSlot>& slots,
                                  const std::vector<const FilterClause*>& filters,
                                  const std::map<std::string, std::vector<std::string>>& domains,
                                  std::map<std::string, std::string>& binding) {
        std::vector<std::string> free_vars;
        for (const auto& [var, dom] : domains) {
            if (!binding.count(var)) free_vars.push_back(var);
        }
        enumerate_free_rec(rule_index, slots, filters, domains, binding, free_vars, 0);
    }

    void enumerate_free_rec(std::size_t rule_index, const std::vector<detail::AtomSlot>& slots,
                            const std::vector<const FilterClause*>& filters,
                            const std::map<std::string, std::vector<std::string>>& domains,
                            std::map<std::string, std::string>& binding,
                            const std::vector<std::string>& free_vars, std::size_t at) {
        if (at == free_vars.size()) {
            materialize(rule_index, slots, filters, binding);
            return;
        }
        for (const std::string& value : domains.at(free_vars[at])) {
            binding[free_vars[at]] = value;
            enumerate_free_rec(rule_index, slots, filters, domains, binding, free_vars, at + 1);
        }
        binding.erase(free_vars[at]);
    }

    std::vector<std::string> bind_args(const Atom& atom,
                                       const std::map<std::string, std::string>& binding) const {
        std::vector<std::string> args;
        args.reserve(atom.terms.size());
        for (const Term& term : atom.terms) {
            if (term.is_variable) {
                args.push_back(binding.at(term.text));
            } else {
                args.push_back(term.text);
            }
        }
        return args;
    }

    // ---- materialization ----------------------------------------------------

    void materialize(std::size_t rule_index, const std::vector<detail::AtomSlot>& slots,
                     const std::vector<const FilterClause*>& filters,
                     const std::map<std::string, std::string>& binding) {
        const Rule& rule = program_.rules[rule_index];
        if (std::holds_alternative<LogicalRule>(rule)) {
            materialize_logical(rule_index, std::get<LogicalRule>(rule), binding);
        } else {
            materialize_arithmetic(rule_index, std::get<ArithmeticRule>(rule), slots, filters, binding);
        }
    }

    struct FoldedAtoms {
        std::vector<VarRef> refs;       // per atom index
        bool missing_open = false;      // a target/neural atom is absent
    };

    // Resolve a ground atom to a registry reference; observed atoms resolve
    // closed-world to their value.
    std::optional<VarRef> resolve(std::size_t predicate, const std::vector<std::string>& args) const {
        const Predicate& pred = program_.predicates[predicate];
        if (pred.kind == PredicateKind::Observed) {
            VarRef ref;
            ref.kind = VarKind::Observed;
            ref.value = indexes_[predicate].observed_value(args);
            return ref;
        }
        return model_.registry.lookup(predicate, args);
    }

    void fold_into(GroundForm& out, const VarRef& ref, double coef) const {
        switch (ref.kind) {
            case VarKind::Observed: out.constant += coef * ref.value; break;
            case VarKind::Target: out.add_y(static_cast<std::uint32_t>(ref.index), coef); break;
            case VarKind::Neural: out.add_g(static_cast<std::uint32_t>(ref.index), coef); break;
        }
    }

    void materialize_logical(std::size_t rule_index, const LogicalRule& rule,
                             const std::map<std::string, std::string>& binding) {
        GroundClause clause;
        std::vector<VarRef> refs;
        auto add_literal = [&](const Literal& lit, bool body) -> bool {
            std::vector<std::string> args = bind_args(lit.atom, binding);
            std::optional<VarRef> ref = resolve(lit.atom.predicate, args);
            if (!ref) return false;  // open atom missing: skip grounding
            GroundLiteral ground{refs.size(), lit.negated};
            refs.push_back(*ref);
            (body ? clause.body : clause.head).push_back(ground);
            return true;
        };
        for (const Literal& lit : rule.body) {
            if (!add_literal(lit, true)) return;
        }
        for (const Literal& lit : rule.head) {
            if (!add_literal(lit, false)) return;
        }
        RelaxedRule relaxed = relax_logical(clause, rule.weight.has_value(), rule.squared);
        emit(rule_index, relaxed, refs, binding);
    }

    void materialize_arithmetic(std::size_t rule_index, const ArithmeticRule& rule,
                                const std::vector<detail::AtomSlot>& slots,
                                const std::vector<const FilterClause*>& filters,
                                const std::map<std::string, std::string>& binding) {
        GroundArithmetic ground;
        std::vector<VarRef> refs;
        bool any_open = false;

        auto expand_term = [&](const ExprTerm& term, LinearForm& side) -> bool {
            if (!term.atom) {
                side.constant += term.coefficient;
                return true;
            }
            if (!term.summation) {
                std::vector<std::string> args = bind_args(*term.atom, binding);
                std::optional<VarRef> ref = resolve(term.atom->predicate, args);
                if (!ref) return false;  // open atom missing: skip grounding
                side.add(refs.size(), term.coefficient);
                refs.push_back(*ref);
                if (ref->kind != VarKind::Observed) any_open = true;
                return true;
            }
            // summation atom: expand over existing atoms of the predicate
            // matching the bound argument positions, filtered by guards
            std::vector<std::pair<std::string, VarRef>> expansion =
                expand_summation(*term.atom, *term.summation, filters, binding);
            if (expansion.empty()) return false;  // empty sum: skip grounding
            for (auto& [constant, ref] : expansion) {
                side.add(refs.size(), term.coefficient);
                refs.push_back(ref);
                if (ref.kind != VarKind::Observed) any_open = true;
            }
            return true;
        };

        for (const ExprTerm& term : rule.lhs.terms) {
            if (!expand_term(term, ground.lhs)) return;
        }
        for (const ExprTerm& term : rule.rhs.terms) {
            if (!expand_term(term, ground.rhs)) return;
        }
        // Groundings with no open atom still matter: a constant potential
        // contributes to its partition's Phi, and a constant constraint that
        // is violated marks the domain infeasible.
        (void)any_open;
        ground.relation = rule.relation;
        RelaxedRule relaxed = relax_arithmetic(ground, rule.weight.has_value(), rule.squared);
        (void)slots;
        emit(rule_index, relaxed, refs, binding);
    }

    // Expansion of `+X` inside an atom: all constants X such that the ground
    // atom exists in the database universe and every filter guard for X holds.
    std::vector<std::pair<std::string, VarRef>> expand_summation(
        const Atom& atom, const std::string& var,
        const std::vector<const FilterClause*>& filters,
        const std::map<std::string, std::string>& binding) {
        std::size_t sum_pos = SIZE_MAX;
        std::vector<std::string> args(atom.terms.size());
        for (std::size_t i = 0; i < atom.terms.size(); ++i) {
            const Term& term = atom.terms[i];
            if (term.is_variable && term.text == var) {
                sum_pos = i;
            } else {
                args[i] = term.is_variable ? binding.at(term.text) : term.text;
            }
        }
        const detail::TableIndex& index = indexes_[atom.predicate];
        std::vector<std::pair<std::string, VarRef>> out;
        for (const DataRow& row : index.rows) {
            bool match = true;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (i == sum_pos) continue;
                if (row.args[i] != args[i]) { match = false; break; }
            }
            if (!match) continue;
            const std::string& value = row.args[sum_pos];
            bool keep = true;
            for (const FilterClause* filter : filters) {
                if (filter->summation_variable != var) continue;
                std::vector<std::string> guard_args(filter->guard.terms.size());
                for (std::size_t i = 0; i < filter->guard.terms.size(); ++i) {
                    const Term& term = filter->guard.terms[i];
                    if (term.is_variable) {
                        guard_args[i] = term.text == var ? value : binding.at(term.text);
                    } else {
                        guard_args[i] = term.text;
                    }
                }
                if (indexes_[filter->guard.predicate].observed_value(guard_args) < 0.5) {
                    keep = false;
                    break;
                }
            }
            if (!keep) continue;
            std::optional<VarRef> ref = resolve(atom.predicate, row.args);
            if (!ref) continue;
            out.emplace_back(value, *ref);
        }
        return out;
    }

    void emit(std::size_t rule_index, const RelaxedRule& relaxed, const std::vector<VarRef>& refs,
              const std::map<std::string, std::string>& binding) {
        for (const HingeTemplate& hinge : relaxed.potentials) {
            GroundPotential pot;
            pot.alpha = hinge.alpha;
            pot.rule_index = static_cast<std::uint32_t>(rule_index);
            pot.partition = static_cast<std::uint32_t>(rule_partition_.at(rule_index));
            pot.form.constant = hinge.form.constant;
            for (const auto& [atom, coef] : hinge.form.coefficients) fold_into(pot.form, refs[atom], coef);
            if (pot.form.max_over_box() <= 1e-12) continue;  // never positive: prune
            model_.partitions[pot.partition].push_back(model_.potentials.size());
            model_.potentials.push_back(std::move(pot));
        }
        for (const LinearConstraint& constraint : relaxed.constraints) {
            GroundConstraint ground;
            ground.relation = constraint.relation;
            ground.rule_index = static_cast<std::uint32_t>(rule_index);
            ground.form.constant = constraint.form.constant;
            for (const auto& [atom, coef] : constraint.form.coefficients) {
                fold_into(ground.form, refs[atom], coef);
            }
            if (ground.relation == ConstraintRelation::Leq && ground.form.max_over_box() <= 1e-12) {
                continue;  // inequality that can never be violated
            }
            ground.name = constraint_name(rule_index, binding);
            model_.constraints.push_back(std::move(ground));
        }
    }

    std::string constraint_name(std::size_t rule_index,
                                const std::map<std::string, std::string>& binding) const {
        std::string name = "rule" + std::to_string(rule_index + 1) + "(";
        bool first = true;
        for (const auto& [var, value] : binding) {
            if (!first) name += ",";
            first = false;
            name += var + "=" + value;
        }
        return name + ")";
    }

    const Program& program_;
    const Database& database_;
    std::vector<detail::TableIndex> indexes_;
    std::map<std::size_t, std::size_t> rule_partition_;
    GroundModel model_;
};

inline GroundModel ground(const Program& program, const Database& database,
                          std::vector<ProviderHandle> providers = {}) {
    return Grounder(program, database, std::move(providers)).run();
}

// ---------------------------------------------------------------------------
// clamp_targets: fix a subset of targets to given values; the result is a
// reduced model over the free (latent) coordinates, with an index map back to
// the original target space. Constraints that become variable-free under the
// clamp are checked immediately.
// ---------------------------------------------------------------------------

struct ClampResult {
    GroundModel model;                       // reduced: n_y = free count
    std::vector<std::size_t> free_to_orig;   // reduced index -> original index
    std::vector<std::optional<double>> clamp;  // original index -> value if clamped
    std::vector<std::string> violated;       // constraints violated by the clamp alone
};

inline ClampResult clamp_targets(const GroundModel& model,
                                 const std::vector<std::pair<std::size_t, double>>& assignments) {
    ClampResult out;
    out.clamp.assign(model.n_y, std::nullopt);
    for (const auto& [index, value] : assignments) {
        if (index >= model.n_y) throw DataError("clamp_targets: index out of range");
        if (value < -1e-9 || value > 1.0 + 1e-9) {
            throw DataError("clamp_targets: assignment outside [0,1]: " + dtos(value));
        }
        out.clamp[index] = std::clamp(value, 0.0, 1.0);
    }
    std::vector<std::size_t> orig_to_free(model.n_y, SIZE_MAX);
    for (std::size_t i = 0; i < model.n_y; ++i) {
        if (!out.clamp[i]) {
            orig_to_free[i] = out.free_to_orig.size();
            out.free_to_orig.push_back(i);
        }
    }

    GroundModel& reduced = out.model;
    reduced.partitions.assign(model.partitions.size(), {});
    reduced.weights = model.weights;
    reduced.partition_names = model.partition_names;
    reduced.n_y = out.free_to_orig.size();
    reduced.n_g = model.n_g;
    reduced.registry.n_g = model.n_g;
    reduced.registry.providers = model.registry.providers;

    auto reduce_form = [&](const GroundForm& form) {
        GroundForm res;
        res.constant = form.constant;
        res.g = form.g;
        for (const auto& [index, coef] : form.y) {
            if (out.clamp[index]) {
                res.constant += coef * *out.clamp[index];
            } else {
                res.add_y(static_cast<std::uint32_t>(orig_to_free[index]), coef);
            }
        }
        return res;
    };

    for (const GroundPotential& pot : model.potentials) {
        GroundPotential reduced_pot;
        reduced_pot.alpha = pot.alpha;
        reduced_pot.partition = pot.partition;
        reduced_pot.rule_index = pot.rule_index;
        reduced_pot.form = reduce_form(pot.form);
        reduced.partitions[reduced_pot.partition].push_back(reduced.potentials.size());
        reduced.potentials.push_back(std::move(reduced_pot));
    }
    for (const GroundConstraint& constraint : model.constraints) {
        GroundConstraint reduced_con;
        reduced_con.relation = constraint.relation;
        reduced_con.rule_index = constraint.rule_index;
        reduced_con.name = constraint.name;
        reduced_con.form = reduce_form(constraint.form);
        if (reduced_con.form.y.empty() && reduced_con.form.g.empty()) {
            const double value = reduced_con.form.constant;
            const bool violated = reduced_con.relation == ConstraintRelation::Eq
                                      ? std::abs(value) > 1e-6
                                      : value > 1e-6;
            if (violated) out.violated.push_back(constraint.name);
            continue;  // satisfied constant constraint carries no information
        }
        reduced.constraints.push_back(std::move(reduced_con));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Debug dump: one line per potential `w_id alpha {idx:coef...} const` and one
// per constraint; stable and diffable.
// ---------------------------------------------------------------------------

inline std::string dump_ground_model(const GroundModel& model) {
    std::string out;
    auto form_text = [](const GroundForm& form) {
        std::string s = "{";
        bool first = true;
        for (const auto& [i, c] : form.y) {
            if (!first) s += " ";
            first = false;
            s += "y" + std::to_string(i) + ":" + dtos(c);
        }
        for (const auto& [i, c] : form.g) {
            if (!first) s += " ";
            first = false;
            s += "g" + std::to_string(i) + ":" + dtos(c);
        }
        s += "} " + dtos(form.constant);
        return s;
    };
    for (const GroundPotential& pot : model.potentials) {
        out += model.partition_names[pot.partition] + " " + std::to_string(pot.alpha) + " " +
               form_text(pot.form) + "\n";
    }
    for (const GroundConstraint& constraint : model.constraints) {
        out += std::string("hard ") +
               (constraint.relation == ConstraintRelation::Eq ? "=" : "<=") + " " +
               form_text(constraint.form) + " # " + constraint.name + "\n";
    }
    return out;
}

}  // namespace sle
