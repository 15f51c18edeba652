// MAP inference via consensus ADMM. Each hinge potential and each hard
// constraint becomes a factor holding a local copy of the variables it
// touches; factors take closed-form proximal steps, a consensus average with
// box clamping ties the copies together, and scaled dual variables enforce
// agreement. Neural outputs g are fixed during inference and folded into the
// factor constants up front.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sle/model.hpp"

namespace sle {

struct AdmmSettings {
    double rho = 1.0;
    std::size_t max_iterations = 25000;
    double primal_tol = 1e-5;
    double dual_tol = 1e-5;
    bool box = true;          // clamp consensus to [0,1]
    double epsilon = 0.0;     // strong-convexity term epsilon*||y||^2
    // Stall detection: no meaningful primal-residual improvement for this
    // many rounds while above tolerance ends the solve early.
    std::size_t stall_window = 500;
};

struct Residuals {
    double primal = 0.0;
    double dual = 0.0;
};

struct IterationTrace {
    std::size_t iteration = 0;
    double primal = 0.0;
    double dual = 0.0;
    double energy = 0.0;
};

struct MapResult {
    std::vector<double> y;
    double energy = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    Residuals residuals;
};

// ---------------------------------------------------------------------------
// Workspace
// ---------------------------------------------------------------------------

class AdmmWorkspace {
public:
    AdmmWorkspace(const GroundModel& model, const std::vector<double>& g, AdmmSettings settings)
        : model_(model), settings_(settings) {
        // Fold g into constants; factors keep only free-y structure.
        std::vector<std::string> violated_constants;
        for (std::size_t p = 0; p < model.potentials.size(); ++p) {
            const GroundPotential& pot = model.potentials[p];
            if (pot.form.y.empty()) continue;  // constant energy: no factor
            Factor factor;
            factor.is_constraint = false;
            factor.alpha = pot.alpha;
            factor.weight_index = pot.partition;
            load_form(factor, pot.form, g);
            factors_.push_back(std::move(factor));
        }
        for (const GroundConstraint& con : model.constraints) {
            if (con.form.y.empty()) {
                // Variable-free once g is folded: decide feasibility directly.
                double value = con.form.constant;
                for (const auto& [i, c] : con.form.g) value += c * g[i];
                const bool bad = con.relation == ConstraintRelation::Eq ? std::abs(value) > 1e-6
                                                                        : value > 1e-6;
                if (bad) violated_constants.push_back(con.name);
                continue;
            }
            Factor factor;
            factor.is_constraint = true;
            factor.relation = con.relation;
            factor.name = con.name;
            load_form(factor, con.form, g);
            factors_.push_back(std::move(factor));
        }
        if (!violated_constants.empty()) {
            throw InfeasibleError("constraints violated by fixed values", violated_constants);
        }

        copies_.assign(model.n_y, 0.0);
        for (const Factor& factor : factors_) {
            for (std::uint32_t v : factor.vars) copies_[v] += 1.0;
        }
        z_.assign(model.n_y, 0.5);
        total_copies_ = 0.0;
        for (double c : copies_) total_copies_ += c;
        for (Factor& factor : factors_) {
            factor.x.resize(factor.vars.size());
            factor.u.assign(factor.vars.size(), 0.0);
            for (std::size_t i = 0; i < factor.vars.size(); ++i) factor.x[i] = z_[factor.vars[i]];
        }
    }

    void warm_start(const std::vector<double>& y0) {
        if (y0.size() != z_.size()) return;
        z_ = y0;
        if (settings_.box) {
            for (double& v : z_) v = std::clamp(v, 0.0, 1.0);
        }
        for (Factor& factor : factors_) {
            std::fill(factor.u.begin(), factor.u.end(), 0.0);
            for (std::size_t i = 0; i < factor.vars.size(); ++i) factor.x[i] = z_[factor.vars[i]];
        }
    }

    // One ADMM round: proximal solves, consensus average, dual update.
    Residuals step() {
        const double rho = settings_.rho;
        // local proximal solves at v = z - u
        for (Factor& factor : factors_) {
            prox(factor, rho);
        }
        // consensus: z_j = rho * sum_k (x_kj + u_kj) / (2*eps + rho*copies_j)
        std::vector<double> z_prev = z_;
        std::vector<double> accum(z_.size(), 0.0);
        for (const Factor& factor : factors_) {
            for (std::size_t i = 0; i < factor.vars.size(); ++i) {
                accum[factor.vars[i]] += factor.x[i] + factor.u[i];
            }
        }
        for (std::size_t j = 0; j < z_.size(); ++j) {
            if (copies_[j] > 0.0) {
                z_[j] = rho * accum[j] / (2.0 * settings_.epsilon + rho * copies_[j]);
            } else if (settings_.epsilon > 0.0) {
                z_[j] = 0.0;  // regularized optimum for an untouched variable
            }
            if (settings_.box) z_[j] = std::clamp(z_[j], 0.0, 1.0);
        }
        // dual update and primal residual
        double primal_sq = 0.0;
        for (Factor& factor : factors_) {
            for (std::size_t i = 0; i < factor.vars.size(); ++i) {
                const double diff = factor.x[i] - z_[factor.vars[i]];
                factor.u[i] += diff;
                primal_sq += diff * diff;
            }
        }
        double dual_sq = 0.0;
        for (std::size_t j = 0; j < z_.size(); ++j) {
            const double dz = z_[j] - z_prev[j];
            dual_sq += copies_[j] * dz * dz;
        }
        dual_sq *= rho * rho;
        Residuals res;
        const double norm = total_copies_ > 0.0 ? std::sqrt(total_copies_) : 1.0;
        res.primal = std::sqrt(primal_sq) / norm;
        res.dual = std::sqrt(dual_sq) / norm;
        return res;
    }

    const std::vector<double>& consensus() const { return z_; }
    std::size_t factor_count() const { return factors_.size(); }

    // Violation of the original constraints at the current consensus point
    // (g already folded into the factor constants).
    double max_violation(std::vector<std::string>* names = nullptr, double report_above = 1e-3) const {
        double worst = 0.0;
        for (const Factor& factor : factors_) {
            if (!factor.is_constraint) continue;
            double value = factor.constant;
            for (std::size_t i = 0; i < factor.vars.size(); ++i) {
                value += factor.coef[i] * z_[factor.vars[i]];
            }
            const double violation =
                factor.relation == ConstraintRelation::Eq ? std::abs(value) : std::max(value, 0.0);
            worst = std::max(worst, violation);
            if (names != nullptr && violation > report_above) names->push_back(factor.name);
        }
        return worst;
    }

private:
    struct Factor {
        std::vector<std::uint32_t> vars;
        std::vector<double> coef;
        double constant = 0.0;
        double norm2 = 0.0;  // ||a||^2
        bool is_constraint = false;
        int alpha = 1;
        std::size_t weight_index = 0;
        ConstraintRelation relation = ConstraintRelation::Leq;
        std::string name;
        std::vector<double> x;  // local copy
        std::vector<double> u;  // scaled dual
    };

    void load_form(Factor& factor, const GroundForm& form, const std::vector<double>& g) {
        factor.constant = form.constant;
        for (const auto& [i, c] : form.g) factor.constant += c * g[i];
        for (const auto& [i, c] : form.y) {
            factor.vars.push_back(i);
            factor.coef.push_back(c);
            factor.norm2 += c * c;
        }
    }

    // argmin_x f(x) + rho/2 ||x - v||^2 with v = z - u, in closed form.
    void prox(Factor& factor, double rho) {
        const std::size_t n = factor.vars.size();
        std::vector<double>& x = factor.x;
        for (std::size_t i = 0; i < n; ++i) x[i] = z_[factor.vars[i]] - factor.u[i];
        double t = factor.constant;
        for (std::size_t i = 0; i < n; ++i) t += factor.coef[i] * x[i];

        if (factor.is_constraint) {
            const bool project = factor.relation == ConstraintRelation::Eq || t > 0.0;
            if (project) {
                const double shift = t / factor.norm2;
                for (std::size_t i = 0; i < n; ++i) x[i] -= shift * factor.coef[i];
            }
            return;
        }

        const double weight = model_.weights[factor.weight_index];
        if (t <= 0.0 || weight <= 0.0) return;  // hinge inactive at v: x = v
        if (factor.alpha == 2) {
            // minimize W(a.x+c)^2 + rho/2||x-v||^2: one Newton step is exact
            const double shift = 2.0 * weight * t / (rho + 2.0 * weight * factor.norm2);
            for (std::size_t i = 0; i < n; ++i) x[i] -= shift * factor.coef[i];
            return;
        }
        // alpha == 1: try the fully-active region first (gradient W*a)
        const double scale = weight / rho;
        const double t_active = t - scale * factor.norm2;
        if (t_active >= 0.0) {
            for (std::size_t i = 0; i < n; ++i) x[i] -= scale * factor.coef[i];
            return;
        }
        // kink is optimal: project v onto the hyperplane a.x + c = 0
        const double shift = t / factor.norm2;
        for (std::size_t i = 0; i < n; ++i) x[i] -= shift * factor.coef[i];
    }

    const GroundModel& model_;
    AdmmSettings settings_;
    std::vector<Factor> factors_;
    std::vector<double> copies_;
    double total_copies_ = 0.0;
    std::vector<double> z_;
};

// ---------------------------------------------------------------------------
// map_inference
// ---------------------------------------------------------------------------

inline MapResult map_inference(const GroundModel& model, const std::vector<double>& g,
                               const AdmmSettings& settings,
                               const std::vector<double>* warm_start = nullptr,
                               std::vector<IterationTrace>* trace = nullptr) {
    AdmmWorkspace workspace(model, g, settings);
    if (warm_start != nullptr) workspace.warm_start(*warm_start);

    MapResult result;
    double best_primal = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;
    bool stalled = false;
    Residuals res;
    for (std::size_t iter = 0; iter < settings.max_iterations; ++iter) {
        res = workspace.step();
        result.iterations = iter + 1;
        if (trace != nullptr) {
            State probe{workspace.consensus(), g};
            trace->push_back({iter + 1, res.primal, res.dual, energy(model, probe)});
        }
        if (res.primal <= settings.primal_tol && res.dual <= settings.dual_tol) {
            result.converged = true;
            break;
        }
        if (res.primal < best_primal * 0.999) {
            best_primal = res.primal;
            stall = 0;
        } else if (++stall >= settings.stall_window) {
            stalled = true;
            break;
        }
    }
    result.residuals = res;
    result.y = workspace.consensus();
    if (!result.converged) {
        std::vector<std::string> violated;
        const double violation = workspace.max_violation(&violated);
        if (violation > 1e-3) {
            throw InfeasibleError(
                std::string(stalled ? "primal residual stalled" : "iteration budget exhausted") +
                    " with constraint violation " + dtos(violation),
                violated);
        }
    }
    State final_state{result.y, g};
    result.energy = energy(model, final_state);
    return result;
}

// ---------------------------------------------------------------------------
// latent_inference
// ---------------------------------------------------------------------------

struct LatentResult {
    std::vector<double> z;       // reduced (latent) coordinates
    std::vector<double> full_y;  // original coordinates with clamps applied
    double energy = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

inline LatentResult latent_inference(const GroundModel& model,
                                     const std::vector<std::pair<std::size_t, double>>& clamped,
                                     const std::vector<double>& g, const AdmmSettings& settings,
                                     const std::vector<double>* warm_start = nullptr) {
    ClampResult reduced = clamp_targets(model, clamped);
    if (!reduced.violated.empty()) {
        throw InfeasibleError("clamped values violate constraints", reduced.violated);
    }
    LatentResult out;
    if (reduced.model.n_y == 0) {
        State fixed{{}, g};
        out.energy = energy(reduced.model, fixed);
        out.converged = true;
    } else {
        MapResult solved = map_inference(reduced.model, g, settings, warm_start);
        out.z = solved.y;
        out.energy = solved.energy;
        out.iterations = solved.iterations;
        out.converged = solved.converged;
    }
    out.full_y.assign(model.n_y, 0.0);
    for (std::size_t i = 0; i < model.n_y; ++i) {
        if (reduced.clamp[i]) out.full_y[i] = *reduced.clamp[i];
    }
    for (std::size_t i = 0; i < reduced.free_to_orig.size(); ++i) {
        out.full_y[reduced.free_to_orig[i]] = out.z[i];
    }
    return out;
}

}  // namespace sle
