// sle: soft logic engine command line.
//   sle infer    --model M --data D --out O [solver flags]
//   sle learn    --model M --data D --out O [training flags]
//   sle generate TASK --out O [--n N | --images N] [--overlap SPEC] [--seed S]
//   sle eval     --data D --out O
// Exit codes: 0 success, 1 usage, 2 infeasible/solve failure, 3 data error.
#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sle/runner.hpp"

namespace {

struct CliState {
    std::string model, data, out;
    std::uint64_t seed = 42;

    // solver
    double rho = 1.0;
    std::size_t infer_max_iters = 25000;
    std::size_t learn_max_iters = 500;
    double primal_tol = 1e-5;
    double dual_tol = 1e-5;
    bool dump_ground = false;
    std::string weights_file, nprv_dir;

    // training
    std::size_t epochs = 100;
    double gamma0 = 1.0;
    double neural_lr = 1e-3;
    double reg_weight = 0.01;

    // generation
    std::string task, overlap;
    std::size_t n = 0, images = 0;
    double noise = 0.1;
    std::string mnist_dir;
};

void add_model_data_out(CLI::App* cmd, CliState& state) {
    cmd->add_option("--model", state.model, "model file (.psl)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--data", state.data, "data directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--out", state.out, "output directory")->required();
}

int dispatch(const CLI::App& app, CliState& state) {
    if (app.got_subcommand("infer")) {
        sle::InferOptions options;
        options.model = state.model;
        options.data = state.data;
        options.out = state.out;
        options.admm.rho = state.rho;
        options.admm.max_iterations = state.infer_max_iters;
        options.admm.primal_tol = state.primal_tol;
        options.admm.dual_tol = state.dual_tol;
        options.dump_ground = state.dump_ground;
        if (!state.weights_file.empty()) options.weights_file = state.weights_file;
        if (!state.nprv_dir.empty()) options.nprv_dir = state.nprv_dir;
        sle::run_infer(options);
        return 0;
    }
    if (app.got_subcommand("learn")) {
        sle::LearnOptions options;
        options.model = state.model;
        options.data = state.data;
        options.out = state.out;
        options.settings.gamma0 = state.gamma0;
        options.settings.neural_lr = state.neural_lr;
        options.settings.epochs = state.epochs;
        options.settings.reg_weight = state.reg_weight;
        options.settings.seed = state.seed;
        options.settings.admm.rho = state.rho;
        options.settings.admm.max_iterations = state.learn_max_iters;
        options.settings.admm.primal_tol = state.primal_tol;
        options.settings.admm.dual_tol = state.dual_tol;
        sle::run_learn(options);
        return 0;
    }
    if (app.got_subcommand("generate")) {
        sle::GenerateOptions options;
        options.task = state.task;
        options.out = state.out;
        options.seed = state.seed;
        options.n = state.n;
        options.images = state.images;
        options.overlap = state.overlap;
        options.noise = state.noise;
        if (!state.mnist_dir.empty()) options.idx_dir = state.mnist_dir;
        sle::run_generate(options);
        return 0;
    }
    if (app.got_subcommand("eval")) {
        sle::EvalOptions options;
        options.data = state.data;
        options.out = state.out;
        sle::run_eval(options);
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sle: weighted soft logic over relational data with neural predicates"};
    app.require_subcommand(1);
    CliState state;

    CLI::App* infer = app.add_subcommand("infer", "ground a model and solve for the target atoms");
    add_model_data_out(infer, state);
    infer->add_option("--seed", state.seed, "run seed");
    infer->add_option("--rho", state.rho, "ADMM step parameter");
    infer->add_option("--max-admm-iters", state.infer_max_iters, "ADMM iteration budget");
    infer->add_option("--primal-tol", state.primal_tol, "primal residual tolerance");
    infer->add_option("--dual-tol", state.dual_tol, "dual residual tolerance");
    infer->add_flag("--dump-ground", state.dump_ground, "write ground_model.txt");
    infer->add_option("--weights", state.weights_file, "learned rule weights (weights.tsv)")
        ->check(CLI::ExistingFile);
    infer->add_option("--nprv", state.nprv_dir, "directory with learned <Predicate>.nprv files")
        ->check(CLI::ExistingDirectory);

    CLI::App* learn = app.add_subcommand("learn", "fit rule weights and neural parameters");
    add_model_data_out(learn, state);
    learn->add_option("--seed", state.seed, "run seed (shuffling)");
    learn->add_option("--epochs", state.epochs, "epoch budget");
    learn->add_option("--gamma0", state.gamma0, "initial symbolic step size");
    learn->add_option("--neural-lr", state.neural_lr, "neural learning rate");
    learn->add_option("--reg-weight", state.reg_weight, "negative-log regularizer weight");
    learn->add_option("--rho", state.rho, "ADMM step parameter");
    learn->add_option("--max-admm-iters", state.learn_max_iters, "latent-inference iteration budget");
    learn->add_option("--primal-tol", state.primal_tol, "primal residual tolerance");
    learn->add_option("--dual-tol", state.dual_tol, "dual residual tolerance");

    CLI::App* generate = app.add_subcommand("generate", "emit a synthetic or IDX-backed dataset");
    generate->add_option("task", state.task, "addition1 | addition2 | sudoku")->required();
    generate->add_option("--out", state.out, "output directory")->required();
    generate->add_option("--seed", state.seed, "generation seed");
    generate->add_option("--n", state.n, "addition: unique images to sample");
    generate->add_option("--images", state.images, "sudoku: total cell images (16 per puzzle)");
    generate->add_option("--overlap", state.overlap, "addition: 0, n/2, n, 2n, or a count");
    generate->add_option("--noise", state.noise, "synthetic glyph pixel noise");
    generate->add_option("--mnist-dir", state.mnist_dir, "directory with IDX train archives")
        ->check(CLI::ExistingDirectory);

    CLI::App* eval = app.add_subcommand("eval", "score a predictions directory against labels");
    eval->add_option("--data", state.data, "data directory (labels + manifest)")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--out", state.out, "predictions directory; metrics.csv is written here")
        ->required()
        ->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage problems exit 1; --help exits 0
    }

    try {
        return dispatch(app, state);
    } catch (const sle::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        for (const std::string& name : e.violated) std::cerr << "  violated: " << name << '\n';
        return 2;
    } catch (const sle::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const sle::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
