// Joint parameter learning with the energy loss: per-example latent
// inference, exact weight gradients (the feature vector), simplex-projected
// gradient descent with harmonic step decay and negative-log regularization,
// and upstream-gradient dispatch into the neural providers.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "sle/inference.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// Training examples: connected components of the target-variable/factor
// graph. Factors sharing a target variable land in the same example; shared
// neural slots do not merge components on their own, so examples that read
// the same neural outputs stay separate and each contributes its own
// upstream gradient. Each example is a self-contained sub-model with maps
// back to the global variable spaces; labeled targets carry their truth
// values, the rest are latent.
// ---------------------------------------------------------------------------

struct TrainingExample {
    GroundModel model;                               // local indices
    std::vector<std::size_t> y_map;                  // local y -> global y
    std::vector<std::size_t> g_map;                  // local g -> global g
    std::vector<std::pair<std::size_t, double>> clamps;  // local y -> truth
    std::vector<std::size_t> latent;                 // local y without truth
    std::string name;
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }
    std::size_t find(std::size_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]];
            a = parent_[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

// truth[i] is the labeled value of global target i, or nullopt if latent;
// targets past the end of the vector are unlabeled too.
inline std::vector<TrainingExample> split_examples(const GroundModel& model,
                                                   const std::vector<std::optional<double>>& truth) {
    // Components are built over target variables only.
    detail::UnionFind yf(model.n_y);
    auto unite_targets = [&](const GroundForm& form) {
        for (std::size_t i = 1; i < form.y.size(); ++i) yf.unite(form.y[0].first, form.y[i].first);
    };
    for (const GroundPotential& pot : model.potentials) unite_targets(pot.form);
    for (const GroundConstraint& con : model.constraints) unite_targets(con.form);

    // Neural slots read by a target-bearing factor belong to that factor's
    // component (first such factor wins). Factors with no target variable
    // either follow one of their owned slots or cluster among themselves
    // through shared slots; an extra node collects variable-free factors.
    detail::UnionFind gf(model.n_g + 1);
    const std::size_t gf_constant = model.n_g;
    std::vector<long long> g_owner(model.n_g, -1);
    auto attach_or_cluster = [&](const GroundForm& form) {
        if (!form.y.empty()) {
            const std::size_t root = yf.find(form.y[0].first);
            for (const auto& [i, c] : form.g) {
                if (g_owner[i] < 0) g_owner[i] = static_cast<long long>(root);
            }
        } else {
            for (std::size_t i = 1; i < form.g.size(); ++i) gf.unite(form.g[0].first, form.g[i].first);
        }
    };
    for (const GroundPotential& pot : model.potentials) attach_or_cluster(pot.form);
    for (const GroundConstraint& con : model.constraints) attach_or_cluster(con.form);

    // Key space: target component roots in [0, n_y), neural/constant cluster
    // roots shifted above them.
    auto key_of = [&](const GroundForm& form) -> std::size_t {
        if (!form.y.empty()) return yf.find(form.y[0].first);
        for (const auto& [i, c] : form.g) {
            if (g_owner[i] >= 0) return static_cast<std::size_t>(g_owner[i]);
        }
        if (!form.g.empty()) return model.n_y + gf.find(form.g[0].first);
        return model.n_y + gf.find(gf_constant);
    };

    // Example slots in first-seen order over factors (stable).
    std::vector<long long> key_slot(model.n_y + model.n_g + 1, -1);
    std::size_t example_count = 0;
    auto slot_of = [&](std::size_t key) {
        if (key_slot[key] < 0) key_slot[key] = static_cast<long long>(example_count++);
        return static_cast<std::size_t>(key_slot[key]);
    };
    const std::size_t n_pots = model.potentials.size();
    std::vector<std::size_t> pot_slot(n_pots);
    std::vector<std::size_t> con_slot(model.constraints.size());
    for (std::size_t p = 0; p < n_pots; ++p) {
        pot_slot[p] = slot_of(key_of(model.potentials[p].form));
    }
    for (std::size_t c = 0; c < model.constraints.size(); ++c) {
        con_slot[c] = slot_of(key_of(model.constraints[c].form));
    }

    std::vector<TrainingExample> examples(example_count);
    std::vector<std::vector<std::size_t>> factors_of(example_count);
    for (std::size_t p = 0; p < n_pots; ++p) factors_of[pot_slot[p]].push_back(p);
    for (std::size_t c = 0; c < model.constraints.size(); ++c) {
        factors_of[con_slot[c]].push_back(n_pots + c);
    }
    auto form_of = [&](std::size_t f) -> const GroundForm& {
        return f < n_pots ? model.potentials[f].form : model.constraints[f - n_pots].form;
    };

    // Each target variable lives in exactly one example; a neural slot may
    // appear in several (components can read the same neural outputs), so
    // each example collects its own ascending slot list.
    std::vector<long long> y_local(model.n_y, -1);
    for (std::size_t i = 0; i < model.n_y; ++i) {
        const long long slot = key_slot[yf.find(i)];
        if (slot < 0) continue;  // untouched target: no factor references it
        TrainingExample& ex = examples[static_cast<std::size_t>(slot)];
        y_local[i] = static_cast<long long>(ex.y_map.size());
        ex.y_map.push_back(i);
    }
    for (std::size_t e = 0; e < examples.size(); ++e) {
        TrainingExample& ex = examples[e];
        for (std::size_t f : factors_of[e]) {
            for (const auto& [i, c] : form_of(f).g) ex.g_map.push_back(i);
        }
        std::sort(ex.g_map.begin(), ex.g_map.end());
        ex.g_map.erase(std::unique(ex.g_map.begin(), ex.g_map.end()), ex.g_map.end());
    }

    for (std::size_t e = 0; e < examples.size(); ++e) {
        TrainingExample& ex = examples[e];
        ex.name = "example" + std::to_string(e + 1);
        ex.model.n_y = ex.y_map.size();
        ex.model.n_g = ex.g_map.size();
        ex.model.weights = model.weights;
        ex.model.partition_names = model.partition_names;
        ex.model.partitions.assign(model.partitions.size(), {});
        ex.model.registry.providers = model.registry.providers;
        for (std::size_t i = 0; i < ex.y_map.size(); ++i) {
            const std::size_t global = ex.y_map[i];
            // a truth vector shorter than the target space means "unlabeled"
            if (global < truth.size() && truth[global]) {
                ex.clamps.emplace_back(i, *truth[global]);
            } else {
                ex.latent.push_back(i);
            }
        }
    }

    std::vector<long long> g_local(model.n_g, -1);
    auto localize = [&](const GroundForm& form) {
        GroundForm local;
        local.constant = form.constant;
        for (const auto& [i, c] : form.y) {
            local.add_y(static_cast<std::uint32_t>(y_local[i]), c);
        }
        for (const auto& [i, c] : form.g) {
            local.add_g(static_cast<std::uint32_t>(g_local[i]), c);
        }
        return local;
    };
    for (std::size_t e = 0; e < examples.size(); ++e) {
        TrainingExample& ex = examples[e];
        for (std::size_t i = 0; i < ex.g_map.size(); ++i) {
            g_local[ex.g_map[i]] = static_cast<long long>(i);
        }
        for (std::size_t f : factors_of[e]) {
            if (f < n_pots) {
                GroundPotential pot = model.potentials[f];
                pot.form = localize(pot.form);
                ex.model.partitions[pot.partition].push_back(ex.model.potentials.size());
                ex.model.potentials.push_back(std::move(pot));
            } else {
                GroundConstraint con = model.constraints[f - n_pots];
                con.form = localize(con.form);
                ex.model.constraints.push_back(std::move(con));
            }
        }
        for (std::size_t g : ex.g_map) g_local[g] = -1;
    }
    return examples;
}

// ---------------------------------------------------------------------------
// Energy loss
// ---------------------------------------------------------------------------

struct LossResult {
    double loss = 0.0;
    State state;  // clamped truth plus solved latent values, local indices
};

// Loss of one example at the current parameters: clamp labeled targets to
// truth, solve the latent variables, and evaluate the energy there. With no
// latent variables no inference is needed (constraint learning).
inline LossResult energy_loss(const TrainingExample& example, const std::vector<double>& g_local,
                              const AdmmSettings& settings,
                              const std::vector<double>* warm_start = nullptr,
                              std::vector<double>* warm_out = nullptr) {
    LossResult out;
    out.state.g = g_local;
    if (example.latent.empty()) {
        out.state.y.assign(example.model.n_y, 0.0);
        for (const auto& [index, value] : example.clamps) out.state.y[index] = value;
        out.loss = energy(example.model, out.state);
        return out;
    }
    LatentResult solved = latent_inference(example.model, example.clamps, g_local, settings, warm_start);
    if (warm_out != nullptr) *warm_out = solved.z;
    out.state.y = solved.full_y;
    out.loss = solved.energy;
    return out;
}

// dL/dw = Phi at the solved state (Danskin: the argmin does not move to first
// order, so only the explicit w-dependence remains).
inline std::vector<double> loss_grad_wpsl(const TrainingExample& example, const LossResult& solved) {
    return feature_vector(example.model, solved.state);
}

// Upstream gradients per local neural slot at the solved state.
inline std::vector<double> loss_grad_neural(const TrainingExample& example, const LossResult& solved) {
    return grad_g(example.model, solved.state);
}

// ---------------------------------------------------------------------------
// Simplex projection and regularizer
// ---------------------------------------------------------------------------

// Euclidean projection onto the unit simplex (sorted-threshold construction).
inline std::vector<double> project_simplex(const std::vector<double>& v) {
    const std::size_t r = v.size();
    if (r == 0) return {};
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cumulative = 0.0;
    double tau = 0.0;
    std::size_t active = 0;
    for (std::size_t j = 0; j < r; ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            tau = candidate;
            active = j + 1;
        }
    }
    (void)active;
    std::vector<double> w(r);
    for (std::size_t i = 0; i < r; ++i) w[i] = std::max(v[i] - tau, 0.0);
    return w;
}

// Keep every weight at least `floor` while preserving the simplex sum.
inline void apply_weight_floor(std::vector<double>& w, double floor) {
    const std::size_t r = w.size();
    if (r == 0 || floor <= 0.0) return;
    double sum = 0.0;
    for (double& wi : w) {
        wi = std::max(wi, floor);
        sum += wi;
    }
    const double span = sum - static_cast<double>(r) * floor;
    const double target = 1.0 - static_cast<double>(r) * floor;
    if (span <= 0.0) {
        std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(r));
        return;
    }
    for (double& wi : w) wi = floor + (wi - floor) * target / span;
}

// loss - regweight * sum_i log_b(w_i); gradient -regweight / (w_i ln b).
inline double regularized_loss(double loss, const std::vector<double>& w, double reg_weight,
                               double log_base) {
    if (reg_weight == 0.0) return loss;
    const double ln_base = std::log(log_base);
    double penalty = 0.0;
    for (double wi : w) {
        if (wi <= 0.0) throw std::domain_error("regularized_loss: nonpositive weight");
        penalty += std::log(wi) / ln_base;
    }
    return loss - reg_weight * penalty;
}

inline std::vector<double> regularizer_gradient(const std::vector<double>& w, double reg_weight,
                                                double log_base) {
    std::vector<double> grad(w.size(), 0.0);
    if (reg_weight == 0.0) return grad;
    const double ln_base = std::log(log_base);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] <= 0.0) throw std::domain_error("regularizer_gradient: nonpositive weight");
        grad[i] = -reg_weight / (w[i] * ln_base);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// learn(): projected gradient descent over (w_psl, w_nn)
// ---------------------------------------------------------------------------

struct LearnSettings {
    double gamma0 = 1.0;       // initial symbolic step; decays as gamma0/(k+1)
    double neural_lr = 1e-3;
    std::size_t epochs = 100;
    double log_base = 2.718281828459045;  // e
    double reg_weight = 0.01;
    double weight_floor = 1e-6;
    // Latent inference inside learning runs with a modest iteration budget and
    // a small strong-convexity term so the inner argmin is unique.
    AdmmSettings admm{.max_iterations = 500, .epsilon = 1e-3};
    std::uint64_t seed = 0;
    double stop_improvement = 1e-6;  // over stop_patience epochs
    std::size_t stop_patience = 3;
};

struct EpochStats {
    std::size_t epoch = 0;
    std::size_t example_count = 0;
    double total_loss = 0.0;
    double wall_ms = 0.0;
};

struct LearnResult {
    std::vector<double> weights;
    std::vector<EpochStats> trace;
};

// Assemble the global neural output vector at the current parameters,
// running a forward pass per entity.
inline void assemble_g(const VariableRegistry& registry, std::vector<double>& g) {
    g.assign(registry.n_g, 0.0);
    for (const ProviderHandle& handle : registry.providers) {
        const std::size_t width = handle.provider->output_width();
        for (std::size_t e = 0; e < handle.entity_keys.size(); ++e) {
            handle.provider->forward(e);
            const auto out = handle.provider->outputs(e);
            for (std::size_t c = 0; c < width; ++c) g[handle.base_slot + e * width + c] = out[c];
        }
    }
}

// Recompute only the slots a single example reads: forward each touched
// entity once and copy its class block. Keeps the per-step cost proportional
// to the example, not the dataset.
inline void refresh_slots(const VariableRegistry& registry, const std::vector<std::size_t>& slots,
                          std::vector<double>& g) {
    for (const ProviderHandle& handle : registry.providers) {
        const std::size_t width = handle.provider->output_width();
        const std::size_t end = handle.base_slot + handle.entity_keys.size() * width;
        std::size_t last_entity = std::numeric_limits<std::size_t>::max();
        for (std::size_t slot : slots) {
            if (slot < handle.base_slot || slot >= end) continue;
            const std::size_t entity = (slot - handle.base_slot) / width;
            if (entity == last_entity) continue;  // slots arrive grouped by entity
            last_entity = entity;
            handle.provider->forward(entity);
            const auto out = handle.provider->outputs(entity);
            for (std::size_t c = 0; c < width; ++c) g[handle.base_slot + entity * width + c] = out[c];
        }
    }
}

// Dispatch per-slot upstream gradients to the owning providers' backward.
inline void dispatch_neural_gradients(const VariableRegistry& registry,
                                      const std::vector<double>& upstream_global) {
    for (const ProviderHandle& handle : registry.providers) {
        const std::size_t width = handle.provider->output_width();
        std::vector<double> upstream(width);
        for (std::size_t e = 0; e < handle.entity_keys.size(); ++e) {
            bool any = false;
            for (std::size_t c = 0; c < width; ++c) {
                upstream[c] = upstream_global[handle.base_slot + e * width + c];
                any = any || upstream[c] != 0.0;
            }
            if (any) handle.provider->backward(e, upstream);
        }
    }
}

inline LearnResult learn(const GroundModel& model, const std::vector<std::optional<double>>& truth,
                         const LearnSettings& settings) {
    const std::size_t r = model.partitions.size();
    LearnResult result;
    result.weights.assign(r, r > 0 ? 1.0 / static_cast<double>(r) : 0.0);
    std::vector<TrainingExample> examples = split_examples(model, truth);
    if (examples.empty() || r == 0) {
        // Nothing to fit: loss is identically the (constant) energy.
        return result;
    }
    const double per_example = 1.0 / static_cast<double>(examples.size());

    std::vector<double> g_global(model.registry.n_g, 0.0);

    std::vector<std::vector<double>> warm(examples.size());
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(settings.seed);

    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        shuffle_vec(order, rng);
        const double gamma = settings.gamma0 / static_cast<double>(epoch + 1);
        double epoch_loss = 0.0;

        for (std::size_t pick : order) {
            TrainingExample& example = examples[pick];
            example.model.weights = result.weights;

            // forward: refresh this example's neural outputs, then slice
            refresh_slots(model.registry, example.g_map, g_global);
            std::vector<double> g_local(example.g_map.size());
            for (std::size_t i = 0; i < example.g_map.size(); ++i) {
                g_local[i] = g_global[example.g_map[i]];
            }
            LossResult solved;
            try {
                solved = energy_loss(example, g_local, settings.admm,
                                     warm[pick].empty() ? nullptr : &warm[pick], &warm[pick]);
            } catch (const InfeasibleError& err) {
                throw DataError("infeasible clamp in " + example.name + ": " + err.what());
            }
            epoch_loss += solved.loss;

            // neural step
            if (!example.g_map.empty() && !model.registry.providers.empty()) {
                const std::vector<double> upstream_local = loss_grad_neural(example, solved);
                bool any = false;
                for (double u : upstream_local) any = any || u != 0.0;
                if (any) {
                    std::vector<double> upstream_global(model.registry.n_g, 0.0);
                    for (std::size_t i = 0; i < example.g_map.size(); ++i) {
                        upstream_global[example.g_map[i]] = upstream_local[i];
                    }
                    dispatch_neural_gradients(model.registry, upstream_global);
                    for (const ProviderHandle& handle : model.registry.providers) {
                        handle.provider->step(settings.neural_lr);
                    }
                }
            }

            // symbolic step: descend and project back onto the simplex
            std::vector<double> grad = loss_grad_wpsl(example, solved);
            const std::vector<double> reg =
                regularizer_gradient(result.weights, settings.reg_weight, settings.log_base);
            for (std::size_t i = 0; i < r; ++i) {
                grad[i] = result.weights[i] - gamma * (grad[i] + reg[i] * per_example);
            }
            result.weights = project_simplex(grad);
            if (settings.reg_weight > 0.0) apply_weight_floor(result.weights, settings.weight_floor);
        }

        const auto end = std::chrono::steady_clock::now();
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.example_count = examples.size();
        stats.total_loss =
            regularized_loss(epoch_loss, result.weights, settings.reg_weight, settings.log_base);
        stats.wall_ms = std::chrono::duration<double, std::milli>(end - start).count();
        result.trace.push_back(stats);

        const std::size_t k = result.trace.size();
        if (k > settings.stop_patience) {
            const double before = result.trace[k - 1 - settings.stop_patience].total_loss;
            if (before - stats.total_loss < settings.stop_improvement) break;
        }
    }
    return result;
}

}  // namespace sle
