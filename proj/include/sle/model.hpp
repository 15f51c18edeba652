// Energy evaluation over a ground model: hinge potential values, the
// per-partition feature vector Phi, the total energy w . Phi, and analytic
// (sub)gradients with respect to the free variables y, the neural outputs g,
// and the rule weights w.
#pragma once

#include <cmath>
#include <vector>

#include "sle/grounder.hpp"

namespace sle {

// Free-variable state: y are the target truth values, g the concatenated
// neural provider outputs. Both live in [0,1].
struct State {
    std::vector<double> y;
    std::vector<double> g;
};

inline State make_state(const GroundModel& model, double fill = 0.5) {
    State state;
    state.y.assign(model.n_y, fill);
    state.g.assign(model.n_g, 0.0);
    return state;
}

// phi = max(l, 0)^alpha for the potential's linear form l.
inline double potential_value(const GroundPotential& potential, const State& state) {
    const double l = potential.form.evaluate(state.y, state.g);
    const double hinge = std::max(l, 0.0);
    return potential.alpha == 2 ? hinge * hinge : hinge;
}

// Phi_i = sum of potential values in partition i.
inline std::vector<double> feature_vector(const GroundModel& model, const State& state) {
    std::vector<double> phi(model.partitions.size(), 0.0);
    for (const GroundPotential& potential : model.potentials) {
        phi[potential.partition] += potential_value(potential, state);
    }
    return phi;
}

struct EnergyBreakdown {
    double total = 0.0;
    std::vector<double> phi;  // per partition
};

inline EnergyBreakdown energy_breakdown(const GroundModel& model, const State& state) {
    EnergyBreakdown out;
    out.phi = feature_vector(model, state);
    for (std::size_t i = 0; i < out.phi.size(); ++i) out.total += model.weights[i] * out.phi[i];
    return out;
}

inline double energy(const GroundModel& model, const State& state) {
    return energy_breakdown(model, state).total;
}

// dE/dw_i = Phi_i (the energy is linear in the weights).
inline std::vector<double> grad_wpsl(const GroundModel& model, const State& state) {
    return feature_vector(model, state);
}

// Per-potential hinge derivative factor: d phi / d l. Zero when the hinge is
// inactive; for alpha=1 the subgradient 0 is used at the kink l == 0.
inline double hinge_slope(const GroundPotential& potential, const State& state) {
    const double l = potential.form.evaluate(state.y, state.g);
    if (l <= 0.0) return 0.0;
    return potential.alpha == 2 ? 2.0 * l : 1.0;
}

// Subgradient of the energy with respect to y.
inline std::vector<double> grad_y(const GroundModel& model, const State& state) {
    std::vector<double> grad(model.n_y, 0.0);
    for (const GroundPotential& potential : model.potentials) {
        const double slope = model.weights[potential.partition] * hinge_slope(potential, state);
        if (slope == 0.0) continue;
        for (const auto& [index, coef] : potential.form.y) grad[index] += slope * coef;
    }
    return grad;
}

// Subgradient of the energy with respect to the neural output slots g.
inline std::vector<double> grad_g(const GroundModel& model, const State& state) {
    std::vector<double> grad(model.n_g, 0.0);
    for (const GroundPotential& potential : model.potentials) {
        const double slope = model.weights[potential.partition] * hinge_slope(potential, state);
        if (slope == 0.0) continue;
        for (const auto& [index, coef] : potential.form.g) grad[index] += slope * coef;
    }
    return grad;
}

// Constraint violation magnitude: equality |v|, inequality max(v, 0).
inline double constraint_violation(const GroundConstraint& constraint, const State& state) {
    const double value = constraint.form.evaluate(state.y, state.g);
    return constraint.relation == ConstraintRelation::Eq ? std::abs(value) : std::max(value, 0.0);
}

inline double max_constraint_violation(const GroundModel& model, const State& state) {
    double worst = 0.0;
    for (const GroundConstraint& constraint : model.constraints) {
        worst = std::max(worst, constraint_violation(constraint, state));
    }
    return worst;
}

}  // namespace sle
