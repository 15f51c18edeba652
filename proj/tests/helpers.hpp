// Shared builders for the test suite: hand-assembled ground models, tiny
// in-memory neural providers, scratch directories, and file utilities.
#pragma once

#include <sle/grounder.hpp>
#include <sle/neural.hpp>

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace th {

// GroundForm from {y_index, coef} / {g_index, coef} pairs plus a constant.
inline sle::GroundForm gform(std::vector<std::pair<std::uint32_t, double>> y,
                             std::vector<std::pair<std::uint32_t, double>> g = {},
                             double constant = 0.0) {
    sle::GroundForm form;
    for (const auto& [i, c] : y) form.add_y(i, c);
    for (const auto& [i, c] : g) form.add_g(i, c);
    form.constant = constant;
    return form;
}

// Hand-assembled ground model. Call weights() first, then add factors.
struct ModelBuilder {
    sle::GroundModel model;

    ModelBuilder& weights(std::vector<double> w) {
        model.weights = std::move(w);
        model.partitions.assign(model.weights.size(), {});
        model.partition_names.clear();
        for (std::size_t i = 0; i < model.weights.size(); ++i) {
            model.partition_names.push_back("w" + std::to_string(i + 1));
        }
        return *this;
    }

    ModelBuilder& potential(std::size_t partition, sle::GroundForm form, int alpha) {
        sle::GroundPotential pot;
        pot.form = std::move(form);
        pot.alpha = alpha;
        pot.partition = static_cast<std::uint32_t>(partition);
        model.partitions.at(partition).push_back(model.potentials.size());
        model.potentials.push_back(std::move(pot));
        return *this;
    }

    ModelBuilder& constraint(sle::GroundForm form, sle::ConstraintRelation relation,
                             std::string name = "hard") {
        sle::GroundConstraint con;
        con.form = std::move(form);
        con.relation = relation;
        con.name = std::move(name);
        model.constraints.push_back(std::move(con));
        return *this;
    }

    sle::GroundModel done(std::size_t n_y, std::size_t n_g = 0) {
        model.n_y = n_y;
        model.n_g = n_g;
        model.registry.n_g = n_g;
        return std::move(model);
    }
};

// The 1-D toy energy (y - 0.3)_+^2 + (0.7 - y)_+^2 with unit weights:
// value 0.08 at y = 0.5, which is also the argmin.
inline sle::GroundModel toy_two_hinge() {
    return ModelBuilder{}
        .weights({1.0, 1.0})
        .potential(0, gform({{0, 1.0}}, {}, -0.3), 2)
        .potential(1, gform({{0, -1.0}}, {}, 0.7), 2)
        .done(1);
}

// Random ground model over the [0,1] box. Constraints (when requested) are
// built around an interior point so the feasible set is nonempty.
struct RandomModelOptions {
    std::size_t n_y = 3;
    std::size_t n_g = 0;
    std::size_t min_potentials = 1;
    std::size_t max_potentials = 6;
    std::size_t equalities = 0;
    std::size_t inequalities = 0;
    bool squared_only = false;
};

inline sle::GroundModel random_model(sle::Rng& rng, const RandomModelOptions& opt) {
    const std::size_t r = 1 + sle::uniform_index(rng, 3);
    std::vector<double> w(r);
    for (double& wi : w) wi = sle::uniform_real(rng, 0.2, 2.0);
    ModelBuilder builder;
    builder.weights(w);

    const std::size_t n_potentials =
        opt.min_potentials + sle::uniform_index(rng, opt.max_potentials - opt.min_potentials + 1);
    for (std::size_t p = 0; p < n_potentials; ++p) {
        sle::GroundForm form;
        const std::size_t touched = 1 + sle::uniform_index(rng, opt.n_y);
        for (std::size_t t = 0; t < touched; ++t) {
            const auto idx = static_cast<std::uint32_t>(sle::uniform_index(rng, opt.n_y));
            double coef = sle::uniform_real(rng, -2.0, 2.0);
            if (std::abs(coef) < 0.1) coef = coef < 0 ? -0.1 : 0.1;
            form.add_y(idx, coef);
        }
        if (opt.n_g > 0 && sle::coin_flip(rng)) {
            form.add_g(static_cast<std::uint32_t>(sle::uniform_index(rng, opt.n_g)),
                       sle::uniform_real(rng, -1.5, 1.5));
        }
        form.constant = sle::uniform_real(rng, -1.0, 1.0);
        const int alpha = opt.squared_only || sle::coin_flip(rng) ? 2 : 1;
        builder.potential(sle::uniform_index(rng, r), std::move(form), alpha);
    }

    // interior anchor keeps the constraint set feasible by construction
    std::vector<double> anchor(opt.n_y);
    for (double& a : anchor) a = sle::uniform_real(rng, 0.25, 0.75);
    auto constraint_form = [&](double slack) {
        sle::GroundForm form;
        double at_anchor = 0.0;
        const std::size_t touched = 1 + sle::uniform_index(rng, opt.n_y);
        for (std::size_t t = 0; t < touched; ++t) {
            const std::size_t idx = sle::uniform_index(rng, opt.n_y);
            double coef = sle::uniform_real(rng, -1.5, 1.5);
            if (std::abs(coef) < 0.2) coef = coef < 0 ? -0.2 : 0.2;
            form.add_y(static_cast<std::uint32_t>(idx), coef);
            at_anchor += coef * anchor[idx];
        }
        form.constant = -at_anchor - slack;
        return form;
    };
    for (std::size_t c = 0; c < opt.equalities; ++c) {
        builder.constraint(constraint_form(0.0), sle::ConstraintRelation::Eq,
                           "eq" + std::to_string(c + 1));
    }
    for (std::size_t c = 0; c < opt.inequalities; ++c) {
        builder.constraint(constraint_form(sle::uniform_real(rng, 0.05, 0.3)),
                           sle::ConstraintRelation::Leq, "leq" + std::to_string(c + 1));
    }
    return builder.done(opt.n_y, opt.n_g);
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

inline std::shared_ptr<sle::MlpProvider> make_provider(std::vector<std::size_t> layers,
                                                       std::vector<sle::ActivationKind> activations,
                                                       std::size_t input_width,
                                                       std::vector<double> features,
                                                       std::size_t entities, std::uint64_t seed) {
    sle::ProviderSpec spec;
    spec.layers = std::move(layers);
    spec.activations = std::move(activations);
    spec.input_width = input_width;
    spec.seed = seed;
    return std::make_shared<sle::MlpProvider>(std::move(spec), std::move(features), entities);
}

// Accumulated parameter gradient read-out: step(1) moves parameters by
// exactly -gradient, so p_before - p_after is the gradient; parameters are
// restored afterwards (the forward caches stay invalidated).
inline std::vector<double> take_param_gradient(sle::NeuralProvider& provider) {
    const std::vector<double> before = provider.parameters();
    provider.step(1.0);
    const std::vector<double> after = provider.parameters();
    std::vector<double> grad(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) grad[i] = before[i] - after[i];
    provider.set_parameters(before);
    return grad;
}

// ---------------------------------------------------------------------------
// Filesystem scratch
// ---------------------------------------------------------------------------

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("sle_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Parse a TSV file into rows of fields (blank lines skipped).
inline std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream stream(read_file(path));
    std::string line;
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace th
