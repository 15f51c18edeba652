// Run orchestration shared by the CLI and the integration tests: load a model
// file plus a data directory, build neural providers from feature tables,
// and drive inference, learning, dataset generation, and evaluation with
// reproducible on-disk artifacts.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sle/datasets.hpp"
#include "sle/grounder.hpp"
#include "sle/learning.hpp"
#include "sle/neural.hpp"
#include "sle/parser.hpp"

namespace sle {

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
        .count();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model + data loading
// ---------------------------------------------------------------------------

struct LoadedRun {
    Program program;
    Database database;
    std::vector<ProviderHandle> providers;
};

// Feature table: first (arity-1) columns name the entity, the rest are the
// input vector. Row order defines the provider's entity indexing.
inline ProviderHandle load_provider(const Program& program, const NeuralBinding& binding,
                                    const std::filesystem::path& data_dir) {
    const Predicate& predicate = program.predicates[binding.predicate];
    const std::size_t key_cols = predicate.arity - 1;
    const std::filesystem::path path = data_dir / binding.features_file;
    ProviderHandle handle;
    handle.predicate = binding.predicate;

    std::vector<double> flat;
    std::size_t width = 0;
    std::istringstream stream(detail::read_text_file(path));
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const std::vector<std::string> fields = split_on(body, '\t');
        if (fields.size() <= key_cols) {
            throw DataError(path.string() + " line " + std::to_string(line_no) + ": no feature columns");
        }
        if (width == 0) {
            width = fields.size() - key_cols;
        } else if (fields.size() - key_cols != width) {
            throw DataError(path.string() + " line " + std::to_string(line_no) + ": ragged feature row");
        }
        std::vector<std::string> key(fields.begin(), fields.begin() + static_cast<long>(key_cols));
        if (!handle.entity_index.emplace(detail::join_args(key), handle.entity_keys.size()).second) {
            throw DataError(path.string() + " line " + std::to_string(line_no) + ": duplicate entity");
        }
        handle.entity_keys.push_back(std::move(key));
        for (std::size_t i = key_cols; i < fields.size(); ++i) {
            double value = 0.0;
            if (!parse_double(trim(fields[i]), value)) {
                throw DataError(path.string() + " line " + std::to_string(line_no) + ": bad feature '" +
                                fields[i] + "'");
            }
            flat.push_back(value);
        }
    }
    if (handle.entity_keys.empty()) throw DataError(path.string() + ": empty feature table");

    ProviderSpec spec;
    spec.layers = binding.layers;
    spec.activations = binding.activations;
    spec.input_width = width;
    spec.seed = binding.seed;
    handle.provider = std::make_shared<MlpProvider>(std::move(spec), std::move(flat),
                                                    handle.entity_keys.size());
    return handle;
}

// Loads `<Predicate>_obs.tsv`, `<Predicate>_targets.tsv`, `<Predicate>_truth.tsv`
// for every declared predicate (all optional) plus the feature tables named by
// the model's neural bindings.
inline LoadedRun load_run(const std::filesystem::path& model_path,
                          const std::filesystem::path& data_dir) {
    LoadedRun run;
    run.program = parse_program(detail::read_text_file(model_path));
    run.database = Database(run.program.predicates.size());
    for (std::size_t p = 0; p < run.program.predicates.size(); ++p) {
        const Predicate& predicate = run.program.predicates[p];
        const std::pair<const char*, Partition> parts[] = {
            {"_obs.tsv", Partition::Observed},
            {"_targets.tsv", Partition::Target},
            {"_truth.tsv", Partition::Truth},
        };
        for (const auto& [suffix, partition] : parts) {
            const std::filesystem::path path = data_dir / (predicate.name + suffix);
            if (!std::filesystem::exists(path)) continue;
            std::vector<DataRow> rows =
                parse_data_file(detail::read_text_file(path), predicate, partition);
            PredicateTable& table = run.database.tables[p];
            std::vector<DataRow>& dest = partition == Partition::Observed ? table.observations
                                         : partition == Partition::Target ? table.targets
                                                                          : table.truths;
            dest = std::move(rows);
        }
    }
    for (const NeuralBinding& binding : run.program.bindings) {
        run.providers.push_back(load_provider(run.program, binding, data_dir));
    }
    return run;
}

// Optional learned-parameter inputs: `weights.tsv` re-weights the ground
// model's partitions, `<Predicate>.nprv` restores provider parameters.
inline void apply_learned_weights(GroundModel& model, const std::filesystem::path& weights_file) {
    std::map<std::string, double> by_name;
    std::istringstream stream(detail::read_text_file(weights_file));
    std::string line;
    while (std::getline(stream, line)) {
        std::string_view body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::vector<std::string> fields = split_on(body, '\t');
        if (fields.size() == 1) fields = split_on(body, ' ');
        double value = 0.0;
        if (fields.size() != 2 || !parse_double(trim(fields[1]), value)) {
            throw DataError(weights_file.string() + ": expected 'rule_id weight' lines");
        }
        by_name[std::string(trim(fields[0]))] = value;
    }
    for (std::size_t i = 0; i < model.partition_names.size(); ++i) {
        const auto found = by_name.find(model.partition_names[i]);
        if (found == by_name.end()) {
            throw DataError(weights_file.string() + ": missing weight for " + model.partition_names[i]);
        }
        model.weights[i] = found->second;
    }
}

inline void load_provider_params(const Program& program, const VariableRegistry& registry,
                                 const std::filesystem::path& nprv_dir) {
    for (const ProviderHandle& handle : registry.providers) {
        const std::filesystem::path path =
            nprv_dir / (program.predicates[handle.predicate].name + ".nprv");
        read_nprv(path.string(), *handle.provider);
    }
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    std::filesystem::path out;
    AdmmSettings admm{};
    bool dump_ground = false;
    std::optional<std::filesystem::path> weights_file;  // learned rule weights
    std::optional<std::filesystem::path> nprv_dir;      // learned provider params
};

struct InferSummary {
    double energy = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double ground_ms = 0.0;
    double solve_ms = 0.0;
};

inline InferSummary run_infer(const InferOptions& options) {
    LoadedRun run = load_run(options.model, options.data);
    std::filesystem::create_directories(options.out);

    const auto t_ground = std::chrono::steady_clock::now();
    GroundModel model = ground(run.program, run.database, run.providers);
    if (options.weights_file) apply_learned_weights(model, *options.weights_file);
    if (options.nprv_dir) load_provider_params(run.program, model.registry, *options.nprv_dir);
    std::vector<double> g;
    assemble_g(model.registry, g);
    InferSummary summary;
    summary.ground_ms = detail::elapsed_ms(t_ground);

    if (options.dump_ground) {
        std::ofstream dump(options.out / "ground_model.txt", std::ios::binary | std::ios::trunc);
        dump << dump_ground_model(model);
    }

    const auto t_solve = std::chrono::steady_clock::now();
    MapResult result = map_inference(model, g, options.admm);
    summary.solve_ms = detail::elapsed_ms(t_solve);
    summary.energy = result.energy;
    summary.iterations = result.iterations;
    summary.converged = result.converged;

    // one predictions file per target predicate, rows in registry order
    std::map<std::size_t, std::ofstream> files;
    auto file_for = [&](std::size_t predicate) -> std::ofstream& {
        auto found = files.find(predicate);
        if (found == files.end()) {
            const std::filesystem::path path =
                options.out / (run.program.predicates[predicate].name + "_inferred.tsv");
            found = files.emplace(predicate, std::ofstream(path, std::ios::binary | std::ios::trunc)).first;
            if (!found->second) throw DataError("cannot write " + path.string());
        }
        return found->second;
    };
    for (std::size_t i = 0; i < model.registry.targets.size(); ++i) {
        const TargetAtomInfo& target = model.registry.targets[i];
        std::ofstream& out = file_for(target.predicate);
        for (const std::string& arg : target.args) out << arg << '\t';
        out << dtos(result.y[i]) << '\n';
    }
    // neural predicate outputs at the current parameters, for downstream eval
    for (const ProviderHandle& handle : model.registry.providers) {
        std::ofstream& out = file_for(handle.predicate);
        const std::size_t width = handle.provider->output_width();
        for (std::size_t e = 0; e < handle.entity_keys.size(); ++e) {
            for (std::size_t c = 0; c < width; ++c) {
                for (const std::string& arg : handle.entity_keys[e]) out << arg << '\t';
                out << handle.classes[c] << '\t' << dtos(g[handle.base_slot + e * width + c]) << '\n';
            }
        }
    }
    files.clear();

    std::ofstream report(options.out / "infer_summary.txt", std::ios::binary | std::ios::trunc);
    report << "energy\t" << dtos(summary.energy) << '\n'
           << "iterations\t" << summary.iterations << '\n'
           << "converged\t" << (summary.converged ? 1 : 0) << '\n'
           << "ground_ms\t" << dtos(summary.ground_ms) << '\n'
           << "solve_ms\t" << dtos(summary.solve_ms) << '\n'
           << "total_ms\t" << dtos(summary.ground_ms + summary.solve_ms) << '\n';
    log_info("infer: energy " + dtos(summary.energy) + ", " + std::to_string(summary.iterations) +
             " iterations, ground " + dtos(summary.ground_ms) + " ms, solve " +
             dtos(summary.solve_ms) + " ms");
    return summary;
}

// ---------------------------------------------------------------------------
// learn
// ---------------------------------------------------------------------------

struct LearnOptions {
    std::filesystem::path model;
    std::filesystem::path data;
    std::filesystem::path out;
    LearnSettings settings{};
};

inline LearnResult run_learn(const LearnOptions& options) {
    LoadedRun run = load_run(options.model, options.data);
    std::filesystem::create_directories(options.out);
    GroundModel model = ground(run.program, run.database, run.providers);

    // labeled truth per registered target atom
    std::vector<std::optional<double>> truth(model.registry.targets.size());
    for (std::size_t p = 0; p < run.program.predicates.size(); ++p) {
        for (const DataRow& row : run.database.tables[p].truths) {
            const std::optional<VarRef> ref = model.registry.lookup(p, row.args);
            if (!ref || ref->kind != VarKind::Target) {
                std::string shown;
                for (const std::string& a : row.args) {
                    if (!shown.empty()) shown += ' ';
                    shown += a;
                }
                throw DataError(run.program.predicates[p].name + ": truth row " + shown +
                                " does not name a target atom");
            }
            truth[ref->index] = row.value;
        }
    }

    LearnResult result = learn(model, truth, options.settings);

    {
        std::ofstream weights(options.out / "weights.tsv", std::ios::binary | std::ios::trunc);
        for (std::size_t i = 0; i < result.weights.size(); ++i) {
            weights << model.partition_names[i] << '\t' << dtos(result.weights[i]) << '\n';
        }
    }
    for (const ProviderHandle& handle : model.registry.providers) {
        const std::string name = run.program.predicates[handle.predicate].name + ".nprv";
        write_nprv((options.out / name).string(), *handle.provider);
    }
    {
        std::ofstream trace(options.out / "loss_trace.csv", std::ios::binary | std::ios::trunc);
        trace << "epoch,example_count,total_loss,wall_ms\n";
        for (const EpochStats& epoch : result.trace) {
            trace << epoch.epoch << ',' << epoch.example_count << ',' << dtos(epoch.total_loss)
                  << ',' << dtos(epoch.wall_ms) << '\n';
        }
    }
    if (!result.trace.empty()) {
        log_info("learn: " + std::to_string(result.trace.size()) + " epochs, final loss " +
                 dtos(result.trace.back().total_loss));
    }
    return result;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOptions {
    std::string task;  // addition1 | addition2 | sudoku
    std::filesystem::path out;
    std::uint64_t seed = 42;
    std::size_t n = 0;        // addition: unique images
    std::size_t images = 0;   // sudoku: total cell images (16 per puzzle)
    std::string overlap;      // addition: "0" | "n/2" | "n" | "2n" | integer
    double noise = 0.1;
    std::optional<std::filesystem::path> idx_dir;  // real images instead of glyphs
};

inline std::size_t parse_overlap(const std::string& text, std::size_t n) {
    if (text.empty() || text == "0") return 0;
    if (text == "n/2") return n / 2;
    if (text == "n") return n;
    if (text == "2n") return 2 * n;
    long long value = 0;
    if (!parse_long(text, value) || value < 0) {
        throw UsageError("bad --overlap '" + text + "' (use 0, n/2, n, 2n, or a count)");
    }
    return static_cast<std::size_t>(value);
}

inline ImagePool load_idx_pool(const std::filesystem::path& dir, std::size_t count,
                               std::uint64_t seed) {
    const ImageTensor images =
        read_idx_images(read_file_bytes((dir / "train-images-idx3-ubyte").string()));
    const std::vector<int> labels =
        read_idx_labels(read_file_bytes((dir / "train-labels-idx1-ubyte").string()));
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    return ImagePool::from_idx(images, labels, count, rng);
}

inline void run_generate(const GenerateOptions& options) {
    if (options.task == "addition1" || options.task == "addition2") {
        AdditionConfig config;
        config.k = options.task == "addition1" ? 1 : 2;
        config.n = options.n;
        config.m = parse_overlap(options.overlap, options.n);
        config.seed = options.seed;
        config.noise = options.noise;
        config.overlap_note = options.overlap.empty() ? "0" : options.overlap;
        if (config.n == 0) throw UsageError("generate " + options.task + " requires --n");
        std::optional<ImagePool> pool;
        if (options.idx_dir) pool = load_idx_pool(*options.idx_dir, config.n, options.seed);
        const AdditionSummary summary =
            gen_addition(config, options.out, pool ? &*pool : nullptr);
        log_info("generate: " + std::to_string(summary.instances) + " additions over " +
                 std::to_string(summary.unique_images) + " images");
        return;
    }
    if (options.task == "sudoku") {
        if (options.images == 0 || options.images % 16 != 0) {
            throw UsageError("generate sudoku requires --images divisible by 16");
        }
        SudokuConfig config;
        config.puzzles = options.images / 16;
        config.seed = options.seed;
        config.noise = options.noise;
        std::optional<ImagePool> pool;
        if (options.idx_dir) {
            // 16 cells per valid puzzle; corruption replacements draw from the same pool
            pool = load_idx_pool(*options.idx_dir, options.images * 2, options.seed);
        }
        const SudokuSummary summary = gen_sudoku(config, options.out, pool ? &*pool : nullptr);
        log_info("generate: " + std::to_string(summary.valid) + " valid + " +
                 std::to_string(summary.corrupt) + " corrupt puzzles");
        return;
    }
    throw UsageError("unknown generate task '" + options.task + "'");
}

// ---------------------------------------------------------------------------
// eval: score a predictions directory (from `infer`) against the data
// directory's withheld labels. The task comes from the dataset manifest.
// ---------------------------------------------------------------------------

struct EvalOptions {
    std::filesystem::path data;
    std::filesystem::path out;  // predictions directory; metrics.csv lands here
};

struct EvalMetrics {
    std::vector<std::pair<std::string, double>> values;
    double get(const std::string& name) const {
        for (const auto& [key, value] : values) {
            if (key == name) return value;
        }
        throw DataError("metric not computed: " + name);
    }
};

namespace detail {

inline std::string manifest_field(const std::filesystem::path& dir, const std::string& key) {
    const std::string text = read_text_file(dir / "manifest.json");
    const std::string needle = "\"" + key + "\":";
    const std::size_t at = text.find(needle);
    if (at == std::string::npos) throw DataError("manifest.json: missing " + key);
    std::size_t from = at + needle.size();
    while (from < text.size() && (text[from] == ' ' || text[from] == '"')) ++from;
    std::size_t to = from;
    while (to < text.size() && text[to] != '"' && text[to] != ',' && text[to] != '\n') ++to;
    return text.substr(from, to - from);
}

// predictions keyed by joined args
inline std::map<std::string, double> read_predictions(const std::filesystem::path& file) {
    std::map<std::string, double> out;
    std::istringstream stream(read_text_file(file));
    std::string line;
    while (std::getline(stream, line)) {
        std::string_view body = trim(line);
        if (body.empty()) continue;
        std::vector<std::string> fields = split_on(body, '\t');
        if (fields.size() < 2) throw DataError(file.string() + ": malformed row");
        double value = 0.0;
        if (!parse_double(trim(fields.back()), value)) {
            throw DataError(file.string() + ": bad value " + fields.back());
        }
        fields.pop_back();
        out[detail::join_args(fields)] = value;
    }
    return out;
}

}  // namespace detail

inline EvalMetrics run_eval(const EvalOptions& options) {
    const std::string task = detail::manifest_field(options.data, "task");
    EvalMetrics metrics;

    if (task == "addition1" || task == "addition2") {
        const int k = task == "addition1" ? 1 : 2;
        const int max_sum = k == 1 ? 18 : 198;
        const std::map<std::string, double> sums =
            detail::read_predictions(options.out / "Sum_inferred.tsv");

        std::size_t correct = 0, total = 0;
        std::istringstream instances(detail::read_text_file(options.data / "instances.tsv"));
        std::string line;
        while (std::getline(instances, line)) {
            std::string_view body = trim(line);
            if (body.empty()) continue;
            std::vector<std::string> fields = split_on(body, '\t');
            if (fields.size() != static_cast<std::size_t>(2 * k + 1)) {
                throw DataError("instances.tsv: malformed row");
            }
            long long truth = 0;
            if (!parse_long(trim(fields.back()), truth)) throw DataError("instances.tsv: bad sum");
            fields.pop_back();
            // argmax over the sum classes; ties break to the lowest class
            long long best_class = 0;
            double best_value = -1.0;
            for (int z = 0; z <= max_sum; ++z) {
                std::vector<std::string> key = fields;
                key.push_back(std::to_string(z));
                const auto found = sums.find(detail::join_args(key));
                if (found == sums.end()) {
                    throw DataError("missing Sum prediction for instance " + detail::join_args(key));
                }
                if (found->second > best_value) {
                    best_value = found->second;
                    best_class = z;
                }
            }
            correct += best_class == truth ? 1 : 0;
            ++total;
        }
        if (total == 0) throw DataError("instances.tsv: no instances");
        metrics.values.emplace_back("addition_count", static_cast<double>(total));
        metrics.values.emplace_back("addition_accuracy",
                                    static_cast<double>(correct) / static_cast<double>(total));

        // digit accuracy from the neural outputs when labels are available
        const std::filesystem::path labels_path = options.data / "image_labels.tsv";
        const std::filesystem::path neural_path = options.out / "Neural_inferred.tsv";
        if (std::filesystem::exists(labels_path) && std::filesystem::exists(neural_path)) {
            const std::map<std::string, double> digits = detail::read_predictions(neural_path);
            std::size_t digit_correct = 0, digit_total = 0;
            std::istringstream labels(detail::read_text_file(labels_path));
            while (std::getline(labels, line)) {
                std::string_view body = trim(line);
                if (body.empty()) continue;
                const std::vector<std::string> fields = split_on(body, '\t');
                if (fields.size() != 2) throw DataError("image_labels.tsv: malformed row");
                long long label = 0;
                if (!parse_long(trim(fields[1]), label)) throw DataError("image_labels.tsv: bad label");
                long long best_class = 0;
                double best_value = -1.0;
                for (int d = 0; d <= 9; ++d) {
                    const auto found = digits.find(detail::join_args({fields[0], std::to_string(d)}));
                    if (found == digits.end()) {
                        throw DataError("missing Neural prediction for image " + fields[0]);
                    }
                    if (found->second > best_value) {
                        best_value = found->second;
                        best_class = d;
                    }
                }
                digit_correct += best_class == label ? 1 : 0;
                ++digit_total;
            }
            metrics.values.emplace_back("digit_count", static_cast<double>(digit_total));
            metrics.values.emplace_back(
                "digit_accuracy", static_cast<double>(digit_correct) / static_cast<double>(digit_total));
        }
    } else if (task == "sudoku") {
        // decode each puzzle's grid by per-cell argmax over the neural
        // outputs; a puzzle is classified valid iff the decoded grid passes
        // check_puzzle
        const std::map<std::string, double> cells =
            detail::read_predictions(options.out / "Neural_inferred.tsv");
        std::size_t correct = 0, total = 0;
        std::istringstream labels(detail::read_text_file(options.data / "puzzle_labels.tsv"));
        std::string line;
        while (std::getline(labels, line)) {
            std::string_view body = trim(line);
            if (body.empty()) continue;
            const std::vector<std::string> fields = split_on(body, '\t');
            if (fields.size() != 2) throw DataError("puzzle_labels.tsv: malformed row");
            long long label = 0;
            if (!parse_long(trim(fields[1]), label)) throw DataError("puzzle_labels.tsv: bad label");
            SudokuGrid grid{};
            for (int x = 0; x < 4; ++x) {
                for (int y = 0; y < 4; ++y) {
                    long long best_class = 1;
                    double best_value = -1.0;
                    for (int cls = 1; cls <= 4; ++cls) {
                        const std::string key = detail::join_args(
                            {fields[0], std::to_string(x), std::to_string(y), std::to_string(cls)});
                        const auto found = cells.find(key);
                        if (found == cells.end()) {
                            throw DataError("missing Neural prediction for cell " + key);
                        }
                        if (found->second > best_value) {
                            best_value = found->second;
                            best_class = cls;
                        }
                    }
                    grid[static_cast<std::size_t>(x * 4 + y)] = static_cast<int>(best_class);
                }
            }
            const bool predicted_valid = puzzle_valid(grid);
            correct += (predicted_valid == (label == 1)) ? 1 : 0;
            ++total;
        }
        if (total == 0) throw DataError("puzzle_labels.tsv: no puzzles");
        metrics.values.emplace_back("puzzle_count", static_cast<double>(total));
        metrics.values.emplace_back("sudoku_accuracy",
                                    static_cast<double>(correct) / static_cast<double>(total));
    } else {
        throw DataError("manifest task '" + task + "' not evaluable");
    }

    std::ofstream csv(options.out / "metrics.csv", std::ios::binary | std::ios::trunc);
    csv << "metric,value\n";
    for (const auto& [key, value] : metrics.values) {
        csv << key << ',' << dtos(value) << '\n';
        log_info("eval: " + key + " = " + dtos(value));
    }
    return metrics;
}

}  // namespace sle
