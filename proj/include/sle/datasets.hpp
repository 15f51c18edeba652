// Dataset generators: k-digit image addition (with overlap) and 4x4 visual
// sudoku (with corruption twins), emitting the TSV data layout the runner
// loads plus a small JSON manifest. Images come either from a deterministic
// synthetic 8x8 glyph font (fast CI) or from user-supplied IDX files
// (downsampled to the same 8x8 feature grid).
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sle/common.hpp"
#include "sle/idx.hpp"

namespace sle {

// ---------------------------------------------------------------------------
// Synthetic 8x8 digit glyphs. One fixed bitmap per digit; additive uniform
// pixel noise keeps entities distinct while classes stay trivially separable.
// ---------------------------------------------------------------------------

inline const std::array<std::array<std::uint8_t, 8>, 10>& digit_glyphs() {
    static const std::array<std::array<std::uint8_t, 8>, 10> glyphs = {{
        {0x3C, 0x66, 0x6E, 0x76, 0x66, 0x66, 0x3C, 0x00},  // 0
        {0x18, 0x38, 0x18, 0x18, 0x18, 0x18, 0x7E, 0x00},  // 1
        {0x3C, 0x66, 0x06, 0x0C, 0x18, 0x30, 0x7E, 0x00},  // 2
        {0x3C, 0x66, 0x06, 0x1C, 0x06, 0x66, 0x3C, 0x00},  // 3
        {0x0C, 0x1C, 0x3C, 0x6C, 0x7E, 0x0C, 0x0C, 0x00},  // 4
        {0x7E, 0x60, 0x7C, 0x06, 0x06, 0x66, 0x3C, 0x00},  // 5
        {0x1C, 0x30, 0x60, 0x7C, 0x66, 0x66, 0x3C, 0x00},  // 6
        {0x7E, 0x06, 0x0C, 0x18, 0x30, 0x30, 0x30, 0x00},  // 7
        {0x3C, 0x66, 0x66, 0x3C, 0x66, 0x66, 0x3C, 0x00},  // 8
        {0x3C, 0x66, 0x66, 0x3E, 0x06, 0x0C, 0x38, 0x00},  // 9
    }};
    return glyphs;
}

inline std::vector<double> glyph_features(int digit, Rng& rng, double noise) {
    const auto& rows = digit_glyphs()[static_cast<std::size_t>(digit)];
    std::vector<double> pixels(64);
    for (std::size_t r = 0; r < 8; ++r) {
        for (std::size_t c = 0; c < 8; ++c) {
            double v = (rows[r] >> (7 - c)) & 1 ? 1.0 : 0.0;
            if (noise > 0.0) v += uniform_real(rng, -noise, noise);
            pixels[r * 8 + c] = std::clamp(v, 0.0, 1.0);
        }
    }
    return pixels;
}

// Box-average resample of an arbitrary grayscale image to the 8x8 feature
// grid used by the shipped models.
inline std::vector<double> resample_to_8x8(const ImageTensor& images, std::size_t index) {
    std::vector<double> out(64, 0.0);
    const std::size_t rows = images.rows, cols = images.cols;
    const double* src = images.image(index);
    for (std::size_t r = 0; r < 8; ++r) {
        const std::size_t r0 = r * rows / 8, r1 = std::max(r0 + 1, (r + 1) * rows / 8);
        for (std::size_t c = 0; c < 8; ++c) {
            const std::size_t c0 = c * cols / 8, c1 = std::max(c0 + 1, (c + 1) * cols / 8);
            double total = 0.0;
            for (std::size_t i = r0; i < r1; ++i) {
                for (std::size_t j = c0; j < c1; ++j) total += src[i * cols + j];
            }
            out[r * 8 + c] = total / static_cast<double>((r1 - r0) * (c1 - c0));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image sources: synthetic glyphs or a loaded IDX tensor.
// ---------------------------------------------------------------------------

struct ImagePool {
    // parallel arrays: one feature vector + hidden label per image
    std::vector<std::vector<double>> features;
    std::vector<int> labels;

    static ImagePool synthetic(std::size_t count, int class_count, Rng& rng, double noise) {
        ImagePool pool;
        pool.features.reserve(count);
        pool.labels.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const int label = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(class_count)));
            pool.labels.push_back(label);
            pool.features.push_back(glyph_features(label, rng, noise));
        }
        return pool;
    }

    static ImagePool from_idx(const ImageTensor& images, const std::vector<int>& labels,
                              std::size_t count, Rng& rng) {
        if (labels.size() != images.count) throw DataError("IDX image/label count mismatch");
        if (count > images.count) throw DataError("not enough IDX images/labels for requested size");
        std::vector<std::size_t> order(images.count);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_vec(order, rng);
        ImagePool pool;
        for (std::size_t i = 0; i < count; ++i) {
            pool.features.push_back(resample_to_8x8(images, order[i]));
            pool.labels.push_back(labels[order[i]]);
        }
        return pool;
    }
};

// ---------------------------------------------------------------------------
// TSV + manifest writers (deterministic row order, shortest-round-trip
// doubles => byte-identical files under a fixed seed).
// ---------------------------------------------------------------------------

namespace detail {

class TsvFile {
public:
    TsvFile(const std::filesystem::path& dir, const std::string& name) : path_(dir / name) {
        stream_.open(path_, std::ios::binary | std::ios::trunc);
        if (!stream_) throw DataError("cannot open for writing: " + path_.string());
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) stream_ << '\t';
            stream_ << fields[i];
        }
        stream_ << '\n';
        ++rows_;
    }
    std::size_t rows() const { return rows_; }
    std::string name() const { return path_.filename().string(); }

private:
    std::filesystem::path path_;
    std::ofstream stream_;
    std::size_t rows_ = 0;
};

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace detail

// Flat manifest: string or integer values plus the generated file row counts.
struct Manifest {
    std::vector<std::pair<std::string, std::string>> entries;  // pre-rendered JSON values
    void add(const std::string& key, const std::string& value) {
        entries.emplace_back(key, "\"" + detail::json_escape(value) + "\"");
    }
    void add(const std::string& key, long long value) {
        entries.emplace_back(key, std::to_string(value));
    }
    void write(const std::filesystem::path& dir) const {
        std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write manifest");
        out << "{\n";
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out << "  \"" << detail::json_escape(entries[i].first) << "\": " << entries[i].second;
            out << (i + 1 < entries.size() ? ",\n" : "\n");
        }
        out << "}\n";
    }
};

// ---------------------------------------------------------------------------
// Helper predicate tables (brute-force enumerations).
// ---------------------------------------------------------------------------

// Writes the arithmetic helper observations for k-digit addition:
//   DigitSum(X, Y, Z)          full 0/1 table, X,Y single digits, Z in [0,18]
//   PossibleDigits(X, Z)       digit X can appear in a pair summing to Z
// and for k=2 additionally:
//   PossibleTensDigits(X, Z)   tens-place digit X consistent with total Z
//   PossibleOnesDigits(X, Z)   ones-place digit X consistent with total Z
//   PossibleTensSums(X, Z)     tens-place pair sum X consistent with total Z
//   PossibleOnesSums(X, Z)     ones-place pair sum X consistent with total Z
//   PlaceNumberSum(Z10, Z1, Z) value-1 rows only: 10*Z10 + Z1 == Z
//   NumberSum(X10, X1, Y10, Y1, Z) value-1 rows only
inline std::vector<std::pair<std::string, std::size_t>> gen_possible_tables(
    int k, const std::filesystem::path& dir) {
    if (k != 1 && k != 2) throw DataError("gen_possible_tables: k must be 1 or 2");
    std::vector<std::pair<std::string, std::size_t>> written;
    auto str = [](long long v) { return std::to_string(v); };

    {
        detail::TsvFile f(dir, "DigitSum_obs.tsv");
        for (int x = 0; x <= 9; ++x) {
            for (int y = 0; y <= 9; ++y) {
                for (int z = 0; z <= 18; ++z) {
                    f.row({str(x), str(y), str(z), x + y == z ? "1" : "0"});
                }
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "PossibleDigits_obs.tsv");
        for (int x = 0; x <= 9; ++x) {
            for (int z = 0; z <= 18; ++z) {
                const bool ok = z - x >= 0 && z - x <= 9;  // some digit y pairs with x
                f.row({str(x), str(z), ok ? "1" : "0"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    if (k == 1) return written;

    {
        detail::TsvFile f(dir, "PossibleTensDigits_obs.tsv");
        for (int x = 0; x <= 9; ++x) {
            for (int z = 0; z <= 198; ++z) {
                // one number is 10x+ones; the other number is in [0,99]
                const bool ok = z - 10 * x >= 0 && z - 10 * x <= 108;
                f.row({str(x), str(z), ok ? "1" : "0"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "PossibleOnesDigits_obs.tsv");
        for (int x = 0; x <= 9; ++x) {
            for (int z = 0; z <= 198; ++z) {
                // one number is 10*tens+x; the other number is in [0,99]
                const bool ok = z - x >= 0 && z - x <= 189;
                f.row({str(x), str(z), ok ? "1" : "0"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "PossibleTensSums_obs.tsv");
        for (int x = 0; x <= 18; ++x) {
            for (int z = 0; z <= 198; ++z) {
                // z = 10*x + ones-pair-sum, ones pair sum in [0,18]
                const bool ok = z - 10 * x >= 0 && z - 10 * x <= 18;
                f.row({str(x), str(z), ok ? "1" : "0"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "PossibleOnesSums_obs.tsv");
        for (int x = 0; x <= 18; ++x) {
            for (int z = 0; z <= 198; ++z) {
                // z = 10*tens-pair-sum + x, tens pair sum in [0,18]
                const int d = z - x;
                const bool ok = d >= 0 && d <= 180 && d % 10 == 0;
                f.row({str(x), str(z), ok ? "1" : "0"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "PlaceNumberSum_obs.tsv");
        for (int z10 = 0; z10 <= 18; ++z10) {
            for (int z1 = 0; z1 <= 18; ++z1) {
                f.row({str(z10), str(z1), str(10 * z10 + z1), "1"});
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    {
        detail::TsvFile f(dir, "NumberSum_obs.tsv");
        for (int x10 = 0; x10 <= 9; ++x10) {
            for (int x1 = 0; x1 <= 9; ++x1) {
                for (int y10 = 0; y10 <= 9; ++y10) {
                    for (int y1 = 0; y1 <= 9; ++y1) {
                        const int z = 10 * x10 + x1 + 10 * y10 + y1;
                        f.row({str(x10), str(x1), str(y10), str(y1), str(z), "1"});
                    }
                }
            }
        }
        written.emplace_back(f.name(), f.rows());
    }
    return written;
}

// ---------------------------------------------------------------------------
// k-digit addition
// ---------------------------------------------------------------------------

struct AdditionConfig {
    int k = 1;               // digits per number
    std::size_t n = 0;       // unique images sampled without replacement
    std::size_t m = 0;       // overlap duplicates sampled with replacement
    std::uint64_t seed = 42;
    double noise = 0.1;      // synthetic glyph noise
    std::string overlap_note;  // e.g. "n/2"; recorded in the manifest
};

struct AdditionSummary {
    std::size_t instances = 0;
    std::size_t unique_images = 0;
};

inline AdditionSummary gen_addition(const AdditionConfig& config, const std::filesystem::path& dir,
                                    const ImagePool* external = nullptr) {
    const std::size_t per_instance = 2 * static_cast<std::size_t>(config.k);
    if (config.k != 1 && config.k != 2) throw DataError("gen_addition: k must be 1 or 2");
    if ((config.n + config.m) % per_instance != 0) {
        throw DataError("gen_addition: n+m must be divisible by " + std::to_string(per_instance));
    }
    std::filesystem::create_directories(dir);
    Rng rng(config.seed);

    ImagePool pool = external != nullptr ? *external
                                         : ImagePool::synthetic(config.n, 10, rng, config.noise);
    if (pool.features.size() < config.n) throw DataError("gen_addition: image pool too small");

    // n unique slots plus m duplicates with replacement, shuffled, partitioned
    // into consecutive 2k-tuples.
    std::vector<std::size_t> slots(config.n);
    for (std::size_t i = 0; i < config.n; ++i) slots[i] = i;
    for (std::size_t i = 0; i < config.m; ++i) {
        slots.push_back(uniform_index(rng, static_cast<std::uint64_t>(config.n)));
    }
    shuffle_vec(slots, rng);

    auto image_id = [](std::size_t i) { return "i" + std::to_string(i); };
    auto str = [](long long v) { return std::to_string(v); };

    // features + hidden labels for the n unique images
    {
        detail::TsvFile features(dir, "Neural_features.tsv");
        detail::TsvFile labels(dir, "image_labels.tsv");
        for (std::size_t i = 0; i < config.n; ++i) {
            std::vector<std::string> row{image_id(i)};
            for (double v : pool.features[i]) row.push_back(dtos(v));
            features.row(row);
            labels.row({image_id(i), str(pool.labels[i])});
        }
    }
    // neural targets: every referenced image x 10 digit classes (the latent
    // variant's Digit predicate shares the same atom universe)
    {
        detail::TsvFile targets(dir, "Neural_targets.tsv");
        std::optional<detail::TsvFile> digits;
        if (config.k == 1) digits.emplace(dir, "Digit_targets.tsv");
        for (std::size_t i = 0; i < config.n; ++i) {
            for (int d = 0; d <= 9; ++d) {
                targets.row({image_id(i), str(d)});
                if (digits) digits->row({image_id(i), str(d)});
            }
        }
    }

    const int max_sum = config.k == 1 ? 18 : 198;
    AdditionSummary summary;
    summary.unique_images = config.n;
    {
        detail::TsvFile targets(dir, "Sum_targets.tsv");
        detail::TsvFile truths(dir, "Sum_truth.tsv");
        detail::TsvFile instances(dir, "instances.tsv");
        // overlap can repeat a whole tuple; target atoms are emitted once
        std::set<std::vector<std::string>> seen_tuples;
        std::set<std::pair<std::string, std::string>> seen_pairs;
        std::optional<detail::TsvFile> place_targets;
        if (config.k == 2) place_targets.emplace(dir, "ImageDigitSum_targets.tsv");
        for (std::size_t at = 0; at + per_instance <= slots.size(); at += per_instance) {
            std::vector<std::string> ids;
            int total = 0;
            for (std::size_t j = 0; j < per_instance; ++j) ids.push_back(image_id(slots[at + j]));
            if (config.k == 1) {
                total = pool.labels[slots[at]] + pool.labels[slots[at + 1]];
            } else {
                const int first = 10 * pool.labels[slots[at]] + pool.labels[slots[at + 1]];
                const int second = 10 * pool.labels[slots[at + 2]] + pool.labels[slots[at + 3]];
                total = first + second;
            }
            std::vector<std::string> inst = ids;
            inst.push_back(str(total));
            instances.row(inst);
            ++summary.instances;
            if (!seen_tuples.insert(ids).second) continue;
            for (int z = 0; z <= max_sum; ++z) {
                std::vector<std::string> row = ids;
                row.push_back(str(z));
                targets.row(row);
                row.push_back(z == total ? "1" : "0");
                truths.row(row);
            }
            if (config.k == 2) {
                // latent place-sum atoms for the tens pair (Img1, Img3) and
                // the ones pair (Img2, Img4)
                const std::pair<std::string, std::string> pairs[] = {{ids[0], ids[2]},
                                                                     {ids[1], ids[3]}};
                for (const auto& [a, b] : pairs) {
                    if (!seen_pairs.insert({a, b}).second) continue;
                    for (int z = 0; z <= 18; ++z) place_targets->row({a, b, str(z)});
                }
            }
        }
    }
    gen_possible_tables(config.k, dir);

    Manifest manifest;
    manifest.add("task", config.k == 1 ? "addition1" : "addition2");
    manifest.add("n", static_cast<long long>(config.n));
    manifest.add("m", static_cast<long long>(config.m));
    if (!config.overlap_note.empty()) manifest.add("overlap", config.overlap_note);
    manifest.add("seed", static_cast<long long>(config.seed));
    manifest.add("instances", static_cast<long long>(summary.instances));
    manifest.add("source", external != nullptr ? "idx" : "synthetic");
    manifest.write(dir);
    return summary;
}

// ---------------------------------------------------------------------------
// 4x4 visual sudoku
// ---------------------------------------------------------------------------

using SudokuGrid = std::array<int, 16>;  // classes 1..4, row-major (x*4+y)

// Violations are (unit, class) pairs: units rows0-3, cols0-3, blocks0-3.
inline std::vector<std::string> check_puzzle(const SudokuGrid& grid) {
    std::vector<std::string> violations;
    auto check_unit = [&](const std::string& unit, const std::array<int, 4>& cells) {
        std::array<int, 5> counts{};
        for (int cell : cells) {
            if (cell >= 1 && cell <= 4) ++counts[static_cast<std::size_t>(cell)];
        }
        for (int cls = 1; cls <= 4; ++cls) {
            if (counts[static_cast<std::size_t>(cls)] > 1) {
                violations.push_back(unit + ":class" + std::to_string(cls));
            }
        }
    };
    for (int x = 0; x < 4; ++x) {
        check_unit("row" + std::to_string(x),
                   {grid[x * 4 + 0], grid[x * 4 + 1], grid[x * 4 + 2], grid[x * 4 + 3]});
    }
    for (int y = 0; y < 4; ++y) {
        check_unit("col" + std::to_string(y),
                   {grid[0 * 4 + y], grid[1 * 4 + y], grid[2 * 4 + y], grid[3 * 4 + y]});
    }
    for (int bx = 0; bx < 2; ++bx) {
        for (int by = 0; by < 2; ++by) {
            const int x0 = bx * 2, y0 = by * 2;
            check_unit("block" + std::to_string(by * 2 + bx),
                       {grid[x0 * 4 + y0], grid[x0 * 4 + y0 + 1], grid[(x0 + 1) * 4 + y0],
                        grid[(x0 + 1) * 4 + y0 + 1]});
        }
    }
    return violations;
}

inline bool puzzle_valid(const SudokuGrid& grid) { return check_puzzle(grid).empty(); }

namespace detail {

// Randomized backtracking fill of a valid 4x4 sudoku grid.
inline bool fill_grid(SudokuGrid& grid, std::size_t at, Rng& rng) {
    if (at == 16) return true;
    std::vector<int> classes{1, 2, 3, 4};
    shuffle_vec(classes, rng);
    for (int cls : classes) {
        grid[at] = cls;
        SudokuGrid probe = grid;
        for (std::size_t i = at + 1; i < 16; ++i) probe[i] = 0;
        if (check_puzzle(probe).empty() && fill_grid(grid, at + 1, rng)) return true;
    }
    grid[at] = 0;
    return false;
}

}  // namespace detail

inline SudokuGrid random_valid_grid(Rng& rng) {
    SudokuGrid grid{};
    if (!detail::fill_grid(grid, 0, rng)) throw DataError("sudoku fill failed");  // cannot happen
    return grid;
}

struct SudokuConfig {
    std::size_t puzzles = 10;  // valid puzzles; each gets one corrupted twin
    std::uint64_t seed = 42;
    double noise = 0.1;
};

struct SudokuSummary {
    std::size_t valid = 0;
    std::size_t corrupt = 0;
};

inline SudokuSummary gen_sudoku(const SudokuConfig& config, const std::filesystem::path& dir,
                                const ImagePool* external = nullptr) {
    std::filesystem::create_directories(dir);
    Rng rng(config.seed);

    // Per-class image queues when an external pool supplies the pixels;
    // classes 1..4 come from labels 0..3.
    std::array<std::vector<std::size_t>, 4> class_pool;
    std::array<std::size_t, 4> cursor{};
    if (external != nullptr) {
        for (std::size_t i = 0; i < external->labels.size(); ++i) {
            const int label = external->labels[i];
            if (label >= 0 && label <= 3) class_pool[static_cast<std::size_t>(label)].push_back(i);
        }
        for (auto& list : class_pool) shuffle_vec(list, rng);
    }
    auto draw_image = [&](int cls, bool fresh) -> std::vector<double> {
        if (external == nullptr) return glyph_features(cls - 1, rng, config.noise);
        auto& list = class_pool[static_cast<std::size_t>(cls - 1)];
        if (list.empty()) throw DataError("insufficient images for class " + std::to_string(cls));
        if (fresh) {
            auto& at = cursor[static_cast<std::size_t>(cls - 1)];
            if (at >= list.size()) throw DataError("insufficient images for class " + std::to_string(cls));
            return external->features[list[at++]];
        }
        return external->features[list[uniform_index(rng, list.size())]];
    };

    struct Puzzle {
        std::string id;
        SudokuGrid grid{};
        std::array<std::vector<double>, 16> pixels;
        bool valid = false;
    };
    std::vector<Puzzle> puzzles;

    for (std::size_t p = 0; p < config.puzzles; ++p) {
        Puzzle valid_puzzle;
        valid_puzzle.id = "v" + std::to_string(p);
        valid_puzzle.grid = random_valid_grid(rng);
        valid_puzzle.valid = true;
        if (p == 0) {
            // Relabel classes so the anchor puzzle's first row reads 1 2 3 4,
            // matching the first-puzzle label rules (validity is invariant
            // under class permutation).
            std::array<int, 5> perm{};
            for (int y = 0; y < 4; ++y) perm[static_cast<std::size_t>(valid_puzzle.grid[y])] = y + 1;
            for (int& cell : valid_puzzle.grid) cell = perm[static_cast<std::size_t>(cell)];
        }
        for (std::size_t cell = 0; cell < 16; ++cell) {
            valid_puzzle.pixels[cell] = draw_image(valid_puzzle.grid[cell], true);
        }
        puzzles.push_back(valid_puzzle);

        // corrupted twin: replacement or substitution steps until a coin says
        // stop; retry from the valid puzzle if the result is still valid
        Puzzle twin;
        for (int attempt = 0; attempt < 100; ++attempt) {
            twin = valid_puzzle;
            twin.id = "c" + std::to_string(p);
            twin.valid = false;
            do {
                if (coin_flip(rng)) {
                    // replacement: random cell <- random image of another class
                    const std::size_t cell = uniform_index(rng, 16);
                    const int shift = 1 + static_cast<int>(uniform_index(rng, 3));
                    const int cls = (twin.grid[cell] - 1 + shift) % 4 + 1;
                    twin.grid[cell] = cls;
                    twin.pixels[cell] = draw_image(cls, false);
                } else {
                    // substitution: swap two distinct cells
                    const std::size_t a = uniform_index(rng, 16);
                    std::size_t b = uniform_index(rng, 15);
                    if (b >= a) ++b;
                    std::swap(twin.grid[a], twin.grid[b]);
                    std::swap(twin.pixels[a], twin.pixels[b]);
                }
            } while (coin_flip(rng));
            if (!puzzle_valid(twin.grid)) break;
        }
        if (puzzle_valid(twin.grid)) throw DataError("failed to corrupt puzzle " + valid_puzzle.id);
        puzzles.push_back(twin);
    }

    auto str = [](long long v) { return std::to_string(v); };
    {
        detail::TsvFile features(dir, "Neural_features.tsv");
        detail::TsvFile neural_targets(dir, "Neural_targets.tsv");
        detail::TsvFile digit_targets(dir, "Digit_targets.tsv");
        detail::TsvFile puzzle_labels(dir, "puzzle_labels.tsv");
        detail::TsvFile cell_labels(dir, "cell_labels.tsv");
        for (const Puzzle& puzzle : puzzles) {
            puzzle_labels.row({puzzle.id, puzzle.valid ? "1" : "0"});
            for (int x = 0; x < 4; ++x) {
                for (int y = 0; y < 4; ++y) {
                    const std::size_t cell = static_cast<std::size_t>(x * 4 + y);
                    std::vector<std::string> row{puzzle.id, str(x), str(y)};
                    for (double v : puzzle.pixels[cell]) row.push_back(dtos(v));
                    features.row(row);
                    cell_labels.row({puzzle.id, str(x), str(y), str(puzzle.grid[cell])});
                    for (int cls = 1; cls <= 4; ++cls) {
                        neural_targets.row({puzzle.id, str(x), str(y), str(cls)});
                        digit_targets.row({puzzle.id, str(x), str(y), str(cls)});
                    }
                }
            }
        }
    }
    {
        // the first valid puzzle anchors the arbitrary class labelling
        detail::TsvFile first(dir, "FirstPuzzle_obs.tsv");
        first.row({puzzles.front().id, "1"});
    }

    SudokuSummary summary;
    for (const Puzzle& puzzle : puzzles) {
        (puzzle.valid ? summary.valid : summary.corrupt) += 1;
    }
    Manifest manifest;
    manifest.add("task", "sudoku");
    manifest.add("puzzles_valid", static_cast<long long>(summary.valid));
    manifest.add("puzzles_corrupt", static_cast<long long>(summary.corrupt));
    manifest.add("seed", static_cast<long long>(config.seed));
    manifest.add("source", external != nullptr ? "idx" : "synthetic");
    manifest.write(dir);
    return summary;
}

}  // namespace sle
