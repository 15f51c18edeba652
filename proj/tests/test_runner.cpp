// Run orchestration: loading models and data directories, the infer/learn
// artifact contracts, dataset option parsing, evaluation scoring, and the
// CLI's exit-code mapping.
#include <catch2/catch_amalgamated.hpp>

#include <sle/runner.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "helpers.hpp"

using namespace sle;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace fs = std::filesystem;

namespace {

const char* const kToyModel =
    "A/1 : target\n"
    "\n"
    "1.0 : A(I) <= 0.3 ^2\n"
    "1.0 : A(I) >= 0.7 ^2\n";

// Runs the CLI binary, returns its exit code, captures stderr.
int run_cli(const std::string& args, const fs::path& err_file) {
    const std::string command =
        std::string(SLE_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
    const int status = std::system(command.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> read_kv(const fs::path& path) {
    std::map<std::string, std::string> out;
    for (const auto& row : th::read_tsv(path)) {
        REQUIRE(row.size() == 2);
        out[row[0]] = row[1];
    }
    return out;
}

}  // namespace

TEST_CASE("infer writes predictions and a summary for a toy model") {
    th::TempDir dir("infer_toy");
    th::write_file(dir / "model.psl", kToyModel);
    th::write_file(dir / "A_targets.tsv", "x1\n");

    InferOptions options;
    options.model = dir / "model.psl";
    options.data = dir.path;
    options.out = dir / "out";
    const InferSummary summary = run_infer(options);
    CHECK(summary.energy == Approx(0.08).margin(1e-4));
    CHECK(summary.converged);
    CHECK(summary.iterations > 0);

    const auto rows = th::read_tsv(dir / "out" / "A_inferred.tsv");
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 2);
    CHECK(rows[0][0] == "x1");
    CHECK(std::stod(rows[0][1]) == Approx(0.5).margin(1e-3));

    const auto report = read_kv(dir / "out" / "infer_summary.txt");
    CHECK(std::stod(report.at("energy")) == Approx(0.08).margin(1e-4));
    CHECK(report.at("converged") == "1");
    CHECK(std::stoul(report.at("iterations")) == summary.iterations);
    CHECK(std::stod(report.at("ground_ms")) >= 0.0);
    CHECK(std::stod(report.at("solve_ms")) >= 0.0);
    CHECK(std::stod(report.at("total_ms")) >= 0.0);
    CHECK(!fs::exists(dir / "out" / "ground_model.txt"));
}

TEST_CASE("infer honors dump-ground and learned weights") {
    th::TempDir dir("infer_flags");
    th::write_file(dir / "model.psl", kToyModel);
    th::write_file(dir / "A_targets.tsv", "x1\n");

    InferOptions options;
    options.model = dir / "model.psl";
    options.data = dir.path;
    options.out = dir / "out";
    options.dump_ground = true;
    th::write_file(dir / "weights.tsv", "w1\t2\nw2\t2\n");
    options.weights_file = dir / "weights.tsv";

    const InferSummary summary = run_infer(options);
    CHECK(summary.energy == Approx(0.16).margin(1e-4));  // both hinges doubled

    const std::string dump = th::read_file(dir / "out" / "ground_model.txt");
    CHECK_THAT(dump, ContainsSubstring("w1 2 {"));
    CHECK_THAT(dump, ContainsSubstring("w2 2 {"));

    th::write_file(dir / "partial.tsv", "w1\t2\n");
    options.weights_file = dir / "partial.tsv";
    CHECK_THROWS_WITH(run_infer(options), ContainsSubstring("missing weight for w2"));

    th::write_file(dir / "garbled.tsv", "w1\n");
    options.weights_file = dir / "garbled.tsv";
    CHECK_THROWS_WITH(run_infer(options), ContainsSubstring("expected 'rule_id weight' lines"));
}

TEST_CASE("run_learn writes weights, a trace, and validates truth rows") {
    th::TempDir dir("learn_toy");
    th::write_file(dir / "model.psl", kToyModel);
    th::write_file(dir / "A_targets.tsv", "x1\n");
    th::write_file(dir / "A_truth.tsv", "x1\t1\n");

    LearnOptions options;
    options.model = dir / "model.psl";
    options.data = dir.path;
    options.out = dir / "out";
    options.settings.epochs = 0;
    const LearnResult zero = run_learn(options);
    CHECK(zero.weights == std::vector<double>{0.5, 0.5});
    CHECK(th::read_file(dir / "out" / "weights.tsv") == "w1\t0.5\nw2\t0.5\n");
    CHECK(th::read_file(dir / "out" / "loss_trace.csv") == "epoch,example_count,total_loss,wall_ms\n");

    options.settings.epochs = 8;
    options.settings.reg_weight = 0.0;
    const LearnResult trained = run_learn(options);
    REQUIRE(!trained.trace.empty());
    // the label 1.0 satisfies the >= 0.7 rule and pays for the <= 0.3 rule
    CHECK(trained.weights[1] > trained.weights[0]);
    const auto trace_rows = th::read_tsv(dir / "out" / "loss_trace.csv");
    REQUIRE(trace_rows.size() == trained.trace.size() + 1);
    CHECK(trace_rows[0] == std::vector<std::string>{"epoch,example_count,total_loss,wall_ms"});

    th::write_file(dir / "A_truth.tsv", "zz\t1\n");
    CHECK_THROWS_WITH(run_learn(options),
                      ContainsSubstring("truth row zz does not name a target atom"));
}

TEST_CASE("load_provider validates the feature table") {
    th::TempDir dir("features");
    const std::string model_text =
        "N/2 : neural(layers=[4,3], activations=[relu,softmax], features=\"feat.tsv\", seed=1)\n"
        "A/1 : target\n"
        "\n"
        "1.0 : N(E, C) <= A(E) ^2\n";

    th::write_file(dir / "model.psl", model_text);
    CHECK_THROWS_WITH(load_run(dir / "model.psl", dir.path), ContainsSubstring("cannot open"));

    th::write_file(dir / "feat.tsv", "");
    CHECK_THROWS_WITH(load_run(dir / "model.psl", dir.path),
                      ContainsSubstring("empty feature table"));

    th::write_file(dir / "feat.tsv", "e1\n");
    CHECK_THROWS_WITH(load_run(dir / "model.psl", dir.path),
                      ContainsSubstring("no feature columns"));

    th::write_file(dir / "feat.tsv", "e1\t0.5\t0.25\ne2\t0.5\n");
    CHECK_THROWS_WITH(load_run(dir / "model.psl", dir.path),
                      ContainsSubstring("ragged feature row"));

    th::write_file(dir / "feat.tsv", "e1\t0.5\t0.25\ne1\t0.5\t0.75\n");
    CHECK_THROWS_WITH(load_run(dir / "model.psl", dir.path),
                      ContainsSubstring("duplicate entity"));

    th::write_file(dir / "feat.tsv", "e1\t0.5\t0.25\ne2\t0.5\t0.75\n");
    th::write_file(dir / "feat.tsv.bad", "marker");  // unrelated file is ignored
    const LoadedRun run = load_run(dir / "model.psl", dir.path);
    REQUIRE(run.providers.size() == 1);
    CHECK(run.providers[0].provider->input_width() == 2);
    CHECK(run.providers[0].provider->entity_count() == 2);
    CHECK(run.providers[0].provider->output_width() == 3);
    REQUIRE(run.providers[0].entity_keys.size() == 2);
    CHECK(run.providers[0].entity_keys[0] == std::vector<std::string>{"e1"});
}

TEST_CASE("parse_overlap accepts the documented forms") {
    CHECK(parse_overlap("", 10) == 0);
    CHECK(parse_overlap("0", 10) == 0);
    CHECK(parse_overlap("n/2", 10) == 5);
    CHECK(parse_overlap("n", 10) == 10);
    CHECK(parse_overlap("2n", 10) == 20);
    CHECK(parse_overlap("7", 10) == 7);
    CHECK_THROWS_AS(parse_overlap("half", 10), UsageError);
    CHECK_THROWS_WITH(parse_overlap("-3", 10), ContainsSubstring("bad --overlap"));
}

TEST_CASE("run_generate validates its options") {
    th::TempDir dir("genopts");
    GenerateOptions options;
    options.out = dir / "out";

    options.task = "freeform";
    CHECK_THROWS_AS(run_generate(options), UsageError);

    options.task = "addition1";
    options.n = 0;
    CHECK_THROWS_WITH(run_generate(options), ContainsSubstring("requires --n"));

    options.task = "sudoku";
    options.images = 17;
    CHECK_THROWS_WITH(run_generate(options), ContainsSubstring("divisible by 16"));
}

TEST_CASE("the addition pipeline round-trips: generate, learn, infer, eval") {
    th::TempDir dir("pipeline");
    AdditionConfig config;
    config.k = 1;
    config.n = 20;
    config.seed = 33;
    const fs::path data = dir / "data";
    gen_addition(config, data);

    const fs::path model = fs::path(SLE_MODELS_DIR) / "mnist-add1-constraint.psl";
    LearnOptions learn_options;
    learn_options.model = model;
    learn_options.data = data;
    learn_options.out = dir / "learn_a";
    learn_options.settings.epochs = 2;

    const LearnResult result = run_learn(learn_options);
    REQUIRE(result.trace.size() == 2);
    REQUIRE(result.weights.size() == 5);

    const auto weights = read_kv(dir / "learn_a" / "weights.tsv");
    REQUIRE(weights.size() == 5);
    double sum = 0.0;
    for (const auto& [name, value] : weights) sum += std::stod(value);
    CHECK(sum == Approx(1.0).margin(1e-9));
    CHECK(weights.count("w1") == 1);
    CHECK(weights.count("w5") == 1);

    const std::string nprv = th::read_file(dir / "learn_a" / "Neural.nprv");
    REQUIRE(nprv.size() > 8);
    CHECK(nprv.substr(0, 4) == "NPRV");

    // learning is deterministic: identical artifacts modulo wall time
    learn_options.out = dir / "learn_b";
    run_learn(learn_options);
    CHECK(th::read_file(dir / "learn_a" / "weights.tsv") ==
          th::read_file(dir / "learn_b" / "weights.tsv"));
    CHECK(th::read_file(dir / "learn_a" / "Neural.nprv") ==
          th::read_file(dir / "learn_b" / "Neural.nprv"));
    const auto trace_a = th::read_tsv(dir / "learn_a" / "loss_trace.csv");
    const auto trace_b = th::read_tsv(dir / "learn_b" / "loss_trace.csv");
    REQUIRE(trace_a.size() == trace_b.size());
    for (std::size_t i = 0; i < trace_a.size(); ++i) {
        const std::string a = trace_a[i][0], b = trace_b[i][0];
        CHECK(a.substr(0, a.rfind(',')) == b.substr(0, b.rfind(',')));
    }

    InferOptions infer_options;
    infer_options.model = model;
    infer_options.data = data;
    infer_options.out = dir / "predictions";
    infer_options.weights_file = dir / "learn_a" / "weights.tsv";
    infer_options.nprv_dir = dir / "learn_a";
    const InferSummary summary = run_infer(infer_options);
    CHECK(summary.converged);

    CHECK(th::read_tsv(dir / "predictions" / "Sum_inferred.tsv").size() == 10 * 19);
    CHECK(th::read_tsv(dir / "predictions" / "Neural_inferred.tsv").size() == 20 * 10);

    EvalOptions eval_options;
    eval_options.data = data;
    eval_options.out = dir / "predictions";
    const EvalMetrics metrics = run_eval(eval_options);
    CHECK(metrics.get("addition_count") == 10.0);
    CHECK(metrics.get("digit_count") == 20.0);
    CHECK(metrics.get("addition_accuracy") >= 0.0);
    CHECK(metrics.get("addition_accuracy") <= 1.0);
    CHECK(metrics.get("digit_accuracy") >= 0.0);
    CHECK(metrics.get("digit_accuracy") <= 1.0);

    const std::string csv = th::read_file(dir / "predictions" / "metrics.csv");
    CHECK_THAT(csv, ContainsSubstring("metric,value\n"));
    CHECK_THAT(csv, ContainsSubstring("addition_accuracy,"));
    CHECK_THAT(csv, ContainsSubstring("digit_accuracy,"));
}

TEST_CASE("eval scores addition predictions with lowest-class tie-breaks") {
    th::TempDir dir("eval_add");
    const fs::path data = dir / "data";
    const fs::path out = dir / "out";
    fs::create_directories(data);
    fs::create_directories(out);
    th::write_file(data / "manifest.json", "{\n  \"task\": \"addition1\"\n}\n");
    th::write_file(data / "instances.tsv", "a\tb\t7\n");

    auto write_sums = [&](double hot_at_7, double rest) {
        std::string text;
        for (int z = 0; z <= 18; ++z) {
            text += "a\tb\t" + std::to_string(z) + "\t" + (z == 7 ? dtos(hot_at_7) : dtos(rest)) + "\n";
        }
        th::write_file(out / "Sum_inferred.tsv", text);
    };

    write_sums(0.9, 0.05);
    EvalOptions options;
    options.data = data;
    options.out = out;
    EvalMetrics metrics = run_eval(options);
    CHECK(metrics.get("addition_accuracy") == 1.0);
    CHECK(metrics.get("addition_count") == 1.0);

    // all-tied predictions resolve to class 0, which is wrong for a sum of 7
    write_sums(0.5, 0.5);
    metrics = run_eval(options);
    CHECK(metrics.get("addition_accuracy") == 0.0);

    // ... and right when the true sum is the lowest class
    th::write_file(data / "instances.tsv", "a\tb\t0\n");
    metrics = run_eval(options);
    CHECK(metrics.get("addition_accuracy") == 1.0);

    // digit metrics appear once labels and neural outputs exist
    th::write_file(data / "image_labels.tsv", "a\t3\nb\t4\n");
    std::string neural;
    for (const auto& [id, label] : std::vector<std::pair<std::string, int>>{{"a", 3}, {"b", 4}}) {
        for (int d = 0; d <= 9; ++d) {
            neural += id + "\t" + std::to_string(d) + "\t" + (d == label ? "0.9" : "0.01") + "\n";
        }
    }
    th::write_file(out / "Neural_inferred.tsv", neural);
    metrics = run_eval(options);
    CHECK(metrics.get("digit_accuracy") == 1.0);
    CHECK(metrics.get("digit_count") == 2.0);

    // a missing sum candidate is a data error, not a silent skip
    th::write_file(out / "Sum_inferred.tsv", "a\tb\t0\t1.0\n");
    CHECK_THROWS_WITH(run_eval(options), ContainsSubstring("missing Sum prediction"));
}

TEST_CASE("eval classifies sudoku puzzles from decoded grids") {
    const SudokuGrid valid{1, 2, 4, 3, 4, 3, 1, 2, 2, 4, 3, 1, 3, 1, 2, 4};

    th::TempDir dir("eval_sudoku");
    const fs::path data = dir / "data";
    const fs::path out = dir / "out";
    fs::create_directories(data);
    fs::create_directories(out);
    th::write_file(data / "manifest.json", "{\n  \"task\": \"sudoku\"\n}\n");
    th::write_file(data / "puzzle_labels.tsv", "v0\t1\nc0\t0\n");

    auto one_hot_rows = [](const std::string& id, const SudokuGrid& grid) {
        std::string text;
        for (int x = 0; x < 4; ++x) {
            for (int y = 0; y < 4; ++y) {
                for (int cls = 1; cls <= 4; ++cls) {
                    const bool hot = grid[static_cast<std::size_t>(x * 4 + y)] == cls;
                    text += id + "\t" + std::to_string(x) + "\t" + std::to_string(y) + "\t" +
                            std::to_string(cls) + "\t" + (hot ? "0.97" : "0.01") + "\n";
                }
            }
        }
        return text;
    };

    SudokuGrid broken = valid;
    broken[0] = broken[1] = 1;  // duplicate in row 0 and block 0
    th::write_file(out / "Neural_inferred.tsv", one_hot_rows("v0", valid) + one_hot_rows("c0", broken));

    EvalOptions options;
    options.data = data;
    options.out = out;
    CHECK(run_eval(options).get("sudoku_accuracy") == 1.0);

    // decoding the corrupt puzzle as a valid grid halves the accuracy
    th::write_file(out / "Neural_inferred.tsv", one_hot_rows("v0", valid) + one_hot_rows("c0", valid));
    CHECK(run_eval(options).get("sudoku_accuracy") == 0.5);
    CHECK(run_eval(options).get("puzzle_count") == 2.0);
}

TEST_CASE("the CLI maps outcomes to exit codes") {
    th::TempDir dir("cli");
    const fs::path err = dir / "stderr.txt";

    CHECK(run_cli("--help", err) == 0);
    CHECK(run_cli("", err) == 1);          // a subcommand is required
    CHECK(run_cli("infer", err) == 1);     // --model/--data/--out are required
    CHECK(run_cli("generate addition1 --out " + (dir / "nowhere").string(), err) == 1);

    // a solvable toy exits 0 and leaves predictions behind
    th::write_file(dir / "model.psl", kToyModel);
    th::write_file(dir / "A_targets.tsv", "x1\n");
    const std::string base = " --model " + (dir / "model.psl").string() + " --data " +
                             dir.path.string() + " --out " + (dir / "out").string();
    CHECK(run_cli("infer" + base, err) == 0);
    CHECK(fs::exists(dir / "out" / "A_inferred.tsv"));

    // contradictory hard rules exit 2 and name the violated constraints
    th::write_file(dir / "model.psl",
                   "A/1 : target\n"
                   "\n"
                   "A(I) = 0 .\n"
                   "A(I) = 1 .\n");
    CHECK(run_cli("infer" + base, err) == 2);
    const std::string infeasible_log = th::read_file(err);
    CHECK_THAT(infeasible_log, ContainsSubstring("infeasible:"));
    CHECK_THAT(infeasible_log, ContainsSubstring("  violated: rule"));

    // malformed data exits 3
    th::write_file(dir / "model.psl", kToyModel);
    th::write_file(dir / "A_targets.tsv", "x1\t2.0\n");
    CHECK(run_cli("infer" + base, err) == 3);
    CHECK_THAT(th::read_file(err), ContainsSubstring("data error:"));

    // generation: documented sizes land in the manifest
    const fs::path add_dir = dir / "add";
    CHECK(run_cli("generate addition1 --n 600 --seed 4 --out " + add_dir.string(), err) == 0);
    const std::string add_manifest = th::read_file(add_dir / "manifest.json");
    CHECK_THAT(add_manifest, ContainsSubstring("\"instances\": 300"));

    const fs::path overlap_dir = dir / "overlap";
    CHECK(run_cli("generate addition1 --n 10 --overlap 2n --out " + overlap_dir.string(), err) == 0);
    const std::string overlap_manifest = th::read_file(overlap_dir / "manifest.json");
    CHECK_THAT(overlap_manifest, ContainsSubstring("\"m\": 20"));
    CHECK_THAT(overlap_manifest, ContainsSubstring("\"overlap\": \"2n\""));

    const fs::path sudoku_dir = dir / "sudoku";
    CHECK(run_cli("generate sudoku --images 160 --out " + sudoku_dir.string(), err) == 0);
    const std::string sudoku_manifest = th::read_file(sudoku_dir / "manifest.json");
    CHECK_THAT(sudoku_manifest, ContainsSubstring("\"puzzles_valid\": 10"));
    CHECK_THAT(sudoku_manifest, ContainsSubstring("\"puzzles_corrupt\": 10"));

    CHECK(run_cli("generate sudoku --images 17 --out " + (dir / "bad").string(), err) == 1);
    CHECK_THAT(th::read_file(err), ContainsSubstring("usage error:"));
}
