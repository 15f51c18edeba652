// Training: example splitting, the energy loss and its gradients, simplex
// projection, regularization, and the joint learning loop.
#include <catch2/catch_amalgamated.hpp>

#include <sle/learning.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "helpers.hpp"

using namespace sle;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<std::optional<double>> no_truth(std::size_t n) {
    return std::vector<std::optional<double>>(n, std::nullopt);
}

}  // namespace

TEST_CASE("split_examples groups factors by shared target variables") {
    // y0-y1 linked by a potential and a constraint; y2-y3 by another
    // potential; y4 untouched.
    th::ModelBuilder builder;
    builder.weights({1.0, 1.0});
    builder.potential(0, th::gform({{0, 1.0}, {1, 1.0}}, {}, -1.0), 1);
    builder.potential(1, th::gform({{2, -1.0}, {3, 1.0}}, {}, 0.25), 2);
    builder.constraint(th::gform({{1, 1.0}}, {}, -0.5), ConstraintRelation::Leq, "cap1");
    GroundModel model = builder.done(5);

    std::vector<std::optional<double>> truth(5);
    truth[0] = 0.8;
    truth[2] = 0.3;
    truth[3] = 0.6;
    truth[4] = 0.9;  // never referenced: ends up in no example

    const auto examples = split_examples(model, truth);
    REQUIRE(examples.size() == 2);

    const TrainingExample& a = examples[0];
    CHECK(a.name == "example1");
    CHECK(a.y_map == std::vector<std::size_t>{0, 1});
    CHECK(a.g_map.empty());
    REQUIRE(a.clamps.size() == 1);
    CHECK(a.clamps[0].first == 0);
    CHECK(a.clamps[0].second == 0.8);
    CHECK(a.latent == std::vector<std::size_t>{1});
    CHECK(a.model.n_y == 2);
    CHECK(a.model.weights == model.weights);
    CHECK(a.model.partition_names == std::vector<std::string>{"w1", "w2"});
    REQUIRE(a.model.potentials.size() == 1);
    REQUIRE(a.model.constraints.size() == 1);
    CHECK(a.model.partitions[0] == std::vector<std::size_t>{0});
    CHECK(a.model.partitions[1].empty());
    const GroundForm& af = a.model.potentials[0].form;
    CHECK(af.y == std::vector<std::pair<std::uint32_t, double>>{{0, 1.0}, {1, 1.0}});
    CHECK(af.constant == -1.0);
    CHECK(a.model.constraints[0].name == "cap1");
    CHECK(a.model.constraints[0].form.y ==
          std::vector<std::pair<std::uint32_t, double>>{{1, 1.0}});

    const TrainingExample& b = examples[1];
    CHECK(b.name == "example2");
    CHECK(b.y_map == std::vector<std::size_t>{2, 3});
    REQUIRE(b.clamps.size() == 2);
    CHECK(b.clamps[0].second == 0.3);
    CHECK(b.clamps[1].second == 0.6);
    CHECK(b.latent.empty());
    REQUIRE(b.model.potentials.size() == 1);
    CHECK(b.model.constraints.empty());
    CHECK(b.model.partitions[1] == std::vector<std::size_t>{0});
    const GroundForm& bf = b.model.potentials[0].form;
    CHECK(bf.y == std::vector<std::pair<std::uint32_t, double>>{{0, -1.0}, {1, 1.0}});
    CHECK(bf.constant == 0.25);
    CHECK(b.model.potentials[0].alpha == 2);

    // an empty (or short) truth vector means every target is unlabeled
    const auto unlabeled = split_examples(model, {});
    REQUIRE(unlabeled.size() == 2);
    CHECK(unlabeled[0].clamps.empty());
    CHECK(unlabeled[0].latent == std::vector<std::size_t>{0, 1});
    CHECK(unlabeled[1].clamps.empty());
}

TEST_CASE("shared neural slots do not merge target components") {
    // Two target-disjoint potentials both read neural slot 1: the split must
    // keep them as separate examples, each carrying the shared slot.
    th::ModelBuilder builder;
    builder.weights({1.0});
    builder.potential(0, th::gform({{0, 1.0}}, {{1, -1.0}}, 0.0), 2);
    builder.potential(0, th::gform({{1, 1.0}}, {{1, 1.0}, {2, -1.0}}, 0.1), 2);
    GroundModel model = builder.done(2, 3);

    const auto examples = split_examples(model, no_truth(2));
    REQUIRE(examples.size() == 2);
    CHECK(examples[0].y_map == std::vector<std::size_t>{0});
    CHECK(examples[1].y_map == std::vector<std::size_t>{1});
    CHECK(examples[0].g_map == std::vector<std::size_t>{1});
    CHECK(examples[1].g_map == std::vector<std::size_t>{1, 2});
    CHECK(examples[0].model.n_g == 1);
    CHECK(examples[1].model.n_g == 2);
    // localized slot indices follow each example's own g_map
    CHECK(examples[0].model.potentials[0].form.g ==
          std::vector<std::pair<std::uint32_t, double>>{{0, -1.0}});
    CHECK(examples[1].model.potentials[0].form.g ==
          std::vector<std::pair<std::uint32_t, double>>{{0, 1.0}, {1, -1.0}});
}

TEST_CASE("target-free factors follow owned slots or cluster among themselves") {
    th::ModelBuilder builder;
    builder.weights({1.0});
    // owns slot 0 for the y0 component
    builder.potential(0, th::gform({{0, 1.0}}, {{0, 1.0}}, -0.5), 1);
    // target-free on an owned slot: joins the y0 example
    builder.potential(0, th::gform({}, {{0, 1.0}}, -0.1), 1);
    // target-free on unowned slots: cluster through the shared slot 2
    builder.potential(0, th::gform({}, {{1, 1.0}, {2, -1.0}}, 0.0), 1);
    builder.potential(0, th::gform({}, {{2, 1.0}}, -0.3), 2);
    // variable-free: lands in the constant example
    builder.constraint(th::gform({}, {}, -0.2), ConstraintRelation::Leq, "never");
    GroundModel model = builder.done(1, 3);

    std::vector<std::optional<double>> truth(1);
    truth[0] = 0.4;
    const auto examples = split_examples(model, truth);
    REQUIRE(examples.size() == 3);

    CHECK(examples[0].y_map == std::vector<std::size_t>{0});
    CHECK(examples[0].g_map == std::vector<std::size_t>{0});
    CHECK(examples[0].model.potentials.size() == 2);
    REQUIRE(examples[0].clamps.size() == 1);
    CHECK(examples[0].clamps[0].second == 0.4);

    CHECK(examples[1].y_map.empty());
    CHECK(examples[1].g_map == std::vector<std::size_t>{1, 2});
    CHECK(examples[1].model.potentials.size() == 2);
    CHECK(examples[1].model.n_y == 0);
    CHECK(examples[1].latent.empty());

    CHECK(examples[2].y_map.empty());
    CHECK(examples[2].g_map.empty());
    CHECK(examples[2].model.potentials.empty());
    REQUIRE(examples[2].model.constraints.size() == 1);
    CHECK(examples[2].model.constraints[0].name == "never");

    std::size_t total_potentials = 0;
    for (const auto& ex : examples) total_potentials += ex.model.potentials.size();
    CHECK(total_potentials == model.potentials.size());
}

TEST_CASE("localized examples reproduce the global energy and features") {
    th::ModelBuilder builder;
    builder.weights({0.7, 0.3});
    builder.potential(0, th::gform({{0, 1.0}, {1, 1.0}}, {}, -1.0), 1);
    builder.potential(1, th::gform({{2, 1.0}}, {{0, -1.0}}, 0.2), 2);
    builder.potential(0, th::gform({{3, -1.0}}, {{1, 1.0}, {2, 1.0}}, -0.3), 1);
    builder.potential(1, th::gform({}, {{2, 1.0}, {3, 1.0}}, -0.5), 1);
    builder.potential(0, th::gform({}, {}, 0.4), 1);
    builder.constraint(th::gform({{0, 1.0}, {4, -1.0}}, {}, 0.0), ConstraintRelation::Eq, "tie");
    builder.constraint(th::gform({}, {{3, 1.0}}, -0.9), ConstraintRelation::Leq, "cap");
    GroundModel model = builder.done(5, 4);

    const auto examples = split_examples(model, no_truth(5));
    REQUIRE(examples.size() >= 3);

    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        State global;
        global.y.resize(model.n_y);
        global.g.resize(model.n_g);
        for (double& v : global.y) v = uniform_real(rng, 0.0, 1.0);
        for (double& v : global.g) v = uniform_real(rng, 0.0, 1.0);

        double total = 0.0;
        std::vector<double> features(model.partitions.size(), 0.0);
        for (const TrainingExample& ex : examples) {
            State local;
            local.y.resize(ex.y_map.size());
            local.g.resize(ex.g_map.size());
            for (std::size_t i = 0; i < ex.y_map.size(); ++i) local.y[i] = global.y[ex.y_map[i]];
            for (std::size_t i = 0; i < ex.g_map.size(); ++i) local.g[i] = global.g[ex.g_map[i]];
            total += energy(ex.model, local);
            const std::vector<double> phi = feature_vector(ex.model, local);
            for (std::size_t p = 0; p < phi.size(); ++p) features[p] += phi[p];
        }
        REQUIRE(total == Approx(energy(model, global)).margin(1e-12));
        const std::vector<double> global_phi = feature_vector(model, global);
        for (std::size_t p = 0; p < global_phi.size(); ++p) {
            REQUIRE(features[p] == Approx(global_phi[p]).margin(1e-12));
        }
    }
}

TEST_CASE("energy_loss without latent variables is a direct evaluation") {
    GroundModel model = th::toy_two_hinge();
    std::vector<std::optional<double>> truth(1);
    truth[0] = 0.5;
    auto examples = split_examples(model, truth);
    REQUIRE(examples.size() == 1);
    REQUIRE(examples[0].latent.empty());

    AdmmSettings settings;
    const LossResult mid = energy_loss(examples[0], {}, settings);
    CHECK(mid.loss == Approx(0.08).margin(1e-12));
    CHECK(mid.state.y == std::vector<double>{0.5});

    truth[0] = 0.7;
    examples = split_examples(model, truth);
    const LossResult edge = energy_loss(examples[0], {}, settings);
    CHECK(edge.loss == Approx(0.16).margin(1e-12));

    // a label that satisfies every hinge costs nothing
    th::ModelBuilder flat;
    flat.weights({1.0});
    flat.potential(0, th::gform({{0, -1.0}}, {}, 0.3), 1);  // (0.3 - y)_+
    GroundModel flat_model = flat.done(1);
    truth[0] = 0.5;
    const auto flat_examples = split_examples(flat_model, truth);
    CHECK(energy_loss(flat_examples[0], {}, settings).loss == Approx(0.0).margin(1e-12));
}

TEST_CASE("energy_loss solves the latent variables") {
    GroundModel model = th::toy_two_hinge();
    const auto examples = split_examples(model, no_truth(1));
    REQUIRE(examples[0].latent == std::vector<std::size_t>{0});

    AdmmSettings settings;
    std::vector<double> warm;
    const LossResult solved = energy_loss(examples[0], {}, settings, nullptr, &warm);
    CHECK(solved.loss == Approx(0.08).margin(1e-4));
    CHECK(solved.state.y[0] == Approx(0.5).margin(1e-3));
    REQUIRE(warm.size() == 1);

    const LossResult rewarmed = energy_loss(examples[0], {}, settings, &warm);
    CHECK(rewarmed.loss == Approx(solved.loss).margin(1e-6));

    // one-sided hinge: the latent solve drives the loss to the flat region
    th::ModelBuilder flat;
    flat.weights({1.0});
    flat.potential(0, th::gform({{0, 1.0}}, {}, -0.4), 2);  // (y - 0.4)_+^2
    GroundModel flat_model = flat.done(1);
    const auto flat_examples = split_examples(flat_model, no_truth(1));
    const LossResult relaxed = energy_loss(flat_examples[0], {}, settings);
    CHECK(relaxed.loss == Approx(0.0).margin(1e-6));
    CHECK(relaxed.state.y[0] <= 0.4 + 1e-3);
}

TEST_CASE("loss gradients: feature vector for weights, upstream for slots") {
    th::ModelBuilder builder;
    builder.weights({0.5});
    builder.potential(0, th::gform({{0, 1.0}}, {{0, -1.0}}, 0.0), 1);  // (y - g)_+
    GroundModel model = builder.done(1, 1);
    std::vector<std::optional<double>> truth(1);
    truth[0] = 0.9;
    auto examples = split_examples(model, truth);

    AdmmSettings settings;
    const LossResult solved = energy_loss(examples[0], {0.2}, settings);
    CHECK(solved.loss == Approx(0.5 * 0.7).margin(1e-12));

    const std::vector<double> wgrad = loss_grad_wpsl(examples[0], solved);
    REQUIRE(wgrad.size() == 1);
    CHECK(wgrad[0] == Approx(0.7).margin(1e-12));  // the feature, not w * feature

    const std::vector<double> upstream = loss_grad_neural(examples[0], solved);
    REQUIRE(upstream.size() == 1);
    CHECK(upstream[0] == Approx(-0.5).margin(1e-12));  // w * slope * coef

    // dL/dw ignores the current weights entirely
    examples[0].model.weights = {3.0};
    CHECK(loss_grad_wpsl(examples[0], solved)[0] == Approx(0.7).margin(1e-12));
}

TEST_CASE("project_simplex lands on the simplex and fixes known points") {
    const std::vector<double> uniform = project_simplex({0.5, 0.5, 0.5});
    for (double w : uniform) CHECK(w == Approx(1.0 / 3.0).margin(1e-12));

    const std::vector<double> corner = project_simplex({2.0, 0.0, 0.0});
    CHECK(corner[0] == Approx(1.0).margin(1e-12));
    CHECK(corner[1] == Approx(0.0).margin(1e-12));
    CHECK(corner[2] == Approx(0.0).margin(1e-12));

    const std::vector<double> fixed = project_simplex({0.2, 0.3, 0.5});
    CHECK(fixed[0] == Approx(0.2).margin(1e-12));
    CHECK(fixed[1] == Approx(0.3).margin(1e-12));
    CHECK(fixed[2] == Approx(0.5).margin(1e-12));

    CHECK(project_simplex({}).empty());
    CHECK(project_simplex({-3.0}) == std::vector<double>{1.0});

    Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(5);
        for (double& x : v) x = uniform_real(rng, -2.0, 2.0);
        const std::vector<double> w = project_simplex(v);
        double sum = 0.0;
        for (double x : w) {
            REQUIRE(x >= 0.0);
            sum += x;
        }
        REQUIRE(sum == Approx(1.0).margin(1e-9));
        // projecting twice changes nothing
        const std::vector<double> again = project_simplex(w);
        for (std::size_t i = 0; i < w.size(); ++i) {
            REQUIRE(again[i] == Approx(w[i]).margin(1e-12));
        }
    }
}

TEST_CASE("apply_weight_floor lifts small weights and keeps the sum") {
    std::vector<double> w{0.7, 0.3, 0.0};
    apply_weight_floor(w, 0.1);
    CHECK(w[0] == Approx(0.625).margin(1e-12));
    CHECK(w[1] == Approx(0.275).margin(1e-12));
    CHECK(w[2] == Approx(0.1).margin(1e-12));
    CHECK(w[0] + w[1] + w[2] == Approx(1.0).margin(1e-12));

    std::vector<double> corner{1.0, 0.0};
    apply_weight_floor(corner, 1e-6);
    CHECK(corner[1] == Approx(1e-6).margin(1e-18));
    CHECK(corner[0] + corner[1] == Approx(1.0).margin(1e-12));

    // floor too large to honor: fall back to uniform
    std::vector<double> tight{0.0, 0.0};
    apply_weight_floor(tight, 0.6);
    CHECK(tight == std::vector<double>{0.5, 0.5});

    std::vector<double> untouched{0.4, 0.6};
    apply_weight_floor(untouched, 0.0);
    CHECK(untouched == std::vector<double>{0.4, 0.6});
}

TEST_CASE("regularized loss subtracts the log barrier") {
    CHECK(regularized_loss(2.5, {0.0, -1.0}, 0.0, 2.718281828459045) == 2.5);

    const double e = 2.718281828459045;
    CHECK(regularized_loss(1.0, {0.5, 0.5}, 1.0, e) ==
          Approx(1.0 + 2.0 * std::log(2.0)).margin(1e-12));
    CHECK(regularized_loss(0.0, {0.5}, 1.0, 2.0) == Approx(1.0).margin(1e-12));

    CHECK_THROWS_AS(regularized_loss(0.0, {0.5, 0.0}, 0.01, e), std::domain_error);
    CHECK_THROWS_AS(regularized_loss(0.0, {-0.1}, 0.01, e), std::domain_error);

    const std::vector<double> grad = regularizer_gradient({0.5, 0.25}, 0.01, e);
    CHECK(grad[0] == Approx(-0.02).margin(1e-12));
    CHECK(grad[1] == Approx(-0.04).margin(1e-12));
    CHECK(regularizer_gradient({0.5}, 0.0, e) == std::vector<double>{0.0});
    CHECK_THROWS_AS(regularizer_gradient({0.0}, 0.01, e), std::domain_error);
}

TEST_CASE("learn settings defaults") {
    const LearnSettings s;
    CHECK(s.gamma0 == 1.0);
    CHECK(s.neural_lr == 1e-3);
    CHECK(s.epochs == 100);
    CHECK(s.log_base == Approx(std::exp(1.0)).margin(1e-12));
    CHECK(s.reg_weight == 0.01);
    CHECK(s.weight_floor == 1e-6);
    CHECK(s.admm.max_iterations == 500);
    CHECK(s.admm.epsilon == 1e-3);
    CHECK(s.admm.rho == 1.0);
    CHECK(s.seed == 0);
    CHECK(s.stop_improvement == 1e-6);
    CHECK(s.stop_patience == 3);
}

TEST_CASE("learn early-outs: no rules, no factors, no epochs") {
    LearnSettings settings;

    // weighted rules absent: nothing to fit
    th::ModelBuilder hard_only;
    hard_only.weights({});
    hard_only.constraint(th::gform({{0, 1.0}}, {}, -0.5), ConstraintRelation::Eq, "pin");
    GroundModel hard_model = hard_only.done(1);
    std::vector<std::optional<double>> truth(1);
    truth[0] = 0.5;
    const LearnResult no_rules = learn(hard_model, truth, settings);
    CHECK(no_rules.weights.empty());
    CHECK(no_rules.trace.empty());

    // factors absent: uniform weights, no epochs run
    th::ModelBuilder empty;
    empty.weights({1.0, 1.0});
    GroundModel empty_model = empty.done(0);
    const LearnResult no_examples = learn(empty_model, {}, settings);
    CHECK(no_examples.weights == std::vector<double>{0.5, 0.5});
    CHECK(no_examples.trace.empty());

    // zero epochs: initial uniform weights pass through untouched
    settings.epochs = 0;
    const LearnResult no_epochs = learn(th::toy_two_hinge(), truth, settings);
    CHECK(no_epochs.weights == std::vector<double>{0.5, 0.5});
    CHECK(no_epochs.trace.empty());
}

TEST_CASE("learning shifts weight onto the rule the labels satisfy") {
    // y0 labeled 1.0: the pull-up rule (1 - y)_+ is satisfied, the pull-down
    // rule (y - 0)_+ pays 1. Projected descent should hand all mass to w1.
    th::ModelBuilder builder;
    builder.weights({1.0, 1.0});
    builder.potential(0, th::gform({{0, -1.0}}, {}, 1.0), 1);
    builder.potential(1, th::gform({{0, 1.0}}, {}, 0.0), 1);
    GroundModel model = builder.done(1);
    std::vector<std::optional<double>> truth(1);
    truth[0] = 1.0;

    LearnSettings settings;
    settings.reg_weight = 0.0;  // exact arithmetic: no barrier, no floor

    const LearnResult result = learn(model, truth, settings);
    REQUIRE(result.weights.size() == 2);
    CHECK(result.weights[0] == Approx(1.0).margin(1e-12));
    CHECK(result.weights[1] == Approx(0.0).margin(1e-12));

    // epoch 1 runs at the uniform weights (loss 0.5), epoch 2 at the corner
    // (loss 0), and patience 3 stops the loop after epoch 5
    REQUIRE(result.trace.size() == 5);
    CHECK(result.trace[0].total_loss == Approx(0.5).margin(1e-12));
    CHECK(result.trace[1].total_loss == Approx(0.0).margin(1e-12));
    CHECK(result.trace.back().total_loss == Approx(0.0).margin(1e-12));
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        CHECK(result.trace[i].epoch == i + 1);
        CHECK(result.trace[i].example_count == 1);
        CHECK(result.trace[i].wall_ms >= 0.0);
    }

    // with the barrier on, the losing weight still respects the floor
    settings.reg_weight = 0.01;
    const LearnResult floored = learn(model, truth, settings);
    CHECK(floored.weights[0] > 0.9);
    CHECK(floored.weights[1] >= settings.weight_floor);
    CHECK(floored.weights[0] + floored.weights[1] == Approx(1.0).margin(1e-9));
}

TEST_CASE("learn is deterministic for a fixed seed") {
    // two latent examples so both the shuffle and the ADMM solves matter
    th::ModelBuilder builder;
    builder.weights({1.0, 1.0});
    builder.potential(0, th::gform({{0, 1.0}}, {}, -0.3), 2);
    builder.potential(1, th::gform({{0, -1.0}}, {}, 0.7), 2);
    builder.potential(0, th::gform({{1, 1.0}}, {}, -0.2), 2);
    builder.potential(1, th::gform({{1, -1.0}}, {}, 0.8), 2);
    GroundModel model = builder.done(2);

    LearnSettings settings;
    settings.epochs = 5;
    settings.seed = 7;

    const LearnResult first = learn(model, no_truth(2), settings);
    const LearnResult second = learn(model, no_truth(2), settings);
    REQUIRE(first.weights.size() == second.weights.size());
    for (std::size_t i = 0; i < first.weights.size(); ++i) {
        CHECK(first.weights[i] == second.weights[i]);  // bitwise
    }
    REQUIRE(first.trace.size() == second.trace.size());
    for (std::size_t i = 0; i < first.trace.size(); ++i) {
        CHECK(first.trace[i].total_loss == second.trace[i].total_loss);
        CHECK(first.trace[i].epoch == second.trace[i].epoch);
        CHECK(first.trace[i].example_count == second.trace[i].example_count);
    }
}

TEST_CASE("infeasible clamps surface as a DataError naming the example") {
    // y0 clamped to 1 contradicts the hard pin y0 = 0; y1 stays latent so the
    // loss actually runs inference and trips over the reduced constraint.
    th::ModelBuilder builder;
    builder.weights({1.0});
    builder.potential(0, th::gform({{0, 1.0}, {1, 1.0}}, {}, -1.0), 1);
    builder.constraint(th::gform({{0, 1.0}}, {}, 0.0), ConstraintRelation::Eq, "pin0");
    GroundModel model = builder.done(2);
    std::vector<std::optional<double>> truth(2);
    truth[0] = 1.0;

    LearnSettings settings;
    CHECK_THROWS_AS(learn(model, truth, settings), DataError);
    CHECK_THROWS_WITH(learn(model, truth, settings),
                      ContainsSubstring("infeasible clamp in example1") &&
                          ContainsSubstring("clamped values violate constraints"));
}

TEST_CASE("learn trains neural parameters through active hinges") {
    // (y - g)_+^2 with y labeled 1.0: the upstream gradient pushes the
    // provider's class-0 probability toward 1.
    auto provider = th::make_provider({2}, {ActivationKind::Softmax}, 1, {1.0}, 1, 5);
    th::ModelBuilder builder;
    builder.weights({1.0});
    builder.potential(0, th::gform({{0, 1.0}}, {{0, -1.0}}, 0.0), 2);
    GroundModel model = builder.done(1, 2);
    ProviderHandle handle;
    handle.provider = provider;
    handle.entity_keys = {{"e0"}};
    handle.base_slot = 0;
    model.registry.providers.push_back(handle);

    provider->forward(0);
    const double before = provider->outputs(0)[0];
    CHECK(before < 0.9);  // fresh init sits well away from the label

    std::vector<std::optional<double>> truth(1);
    truth[0] = 1.0;
    LearnSettings settings;
    settings.epochs = 60;
    settings.neural_lr = 0.5;
    settings.gamma0 = 0.0;  // hold the single symbolic weight fixed
    settings.reg_weight = 0.0;

    const LearnResult result = learn(model, truth, settings);
    CHECK(result.weights == std::vector<double>{1.0});
    REQUIRE(result.trace.size() >= 2);
    CHECK(result.trace.back().total_loss < result.trace.front().total_loss);
    CHECK(provider->step_count() >= 10);

    provider->forward(0);
    const double after = provider->outputs(0)[0];
    CHECK(after > before);
    CHECK(after > 0.9);
}
