// Shared utilities: error taxonomy, logging (SLE_LOG), deterministic RNG helpers,
// and small string/number formatting routines used across the engine.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sle {

// ---------------------------------------------------------------------------
// Error taxonomy. The CLI maps these onto process exit codes:
//   DataError -> 3, InfeasibleError -> 2, UsageError -> 1.
// ---------------------------------------------------------------------------

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct InfeasibleError : std::runtime_error {
    std::vector<std::string> violated;  // names of violated constraints
    InfeasibleError(const std::string& what, std::vector<std::string> names)
        : std::runtime_error(what), violated(std::move(names)) {}
};

// ---------------------------------------------------------------------------
// Logging. Level comes from the SLE_LOG environment variable:
// one of {error, warn, info, debug}; default warn.
// ---------------------------------------------------------------------------

enum class LogLevel : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel& log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SLE_LOG");
        if (env == nullptr) return LogLevel::Warn;
        std::string v(env);
        if (v == "error") return LogLevel::Error;
        if (v == "warn") return LogLevel::Warn;
        if (v == "info") return LogLevel::Info;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Warn;
    }();
    return level;
}

inline void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[sle:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

inline void log_error(const std::string& m) { log_msg(LogLevel::Error, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::Warn, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log_msg(LogLevel::Debug, m); }

// ---------------------------------------------------------------------------
// Deterministic randomness. All draws go through these helpers so results do
// not depend on standard-library distribution internals.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

// Uniform double in [lo, hi) built directly from raw engine output.
inline double uniform_real(Rng& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    return lo + unit * (hi - lo);
}

// Uniform integer in [0, n) by rejection sampling (unbiased, portable).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    return draw % n;
}

inline bool coin_flip(Rng& rng) { return (rng() & 1u) != 0; }

// Portable Fisher-Yates shuffle (std::shuffle is implementation-defined).
template <typename T>
void shuffle_vec(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

// ---------------------------------------------------------------------------
// Formatting / parsing helpers.
// ---------------------------------------------------------------------------

// Shortest round-trip decimal representation of a double.
inline std::string dtos(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline bool parse_long(std::string_view text, long long& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

inline std::vector<std::string> split_on(std::string_view line, char sep) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            fields.emplace_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Numeric-aware constant ordering: integers sort by value, everything else
// lexicographically after the numbers. Used for stable class-slot layout.
inline bool numeric_less(const std::string& a, const std::string& b) {
    long long ia = 0, ib = 0;
    const bool na = parse_long(a, ia);
    const bool nb = parse_long(b, ib);
    if (na && nb) return ia != ib ? ia < ib : a < b;
    if (na != nb) return na;  // numbers first
    return a < b;
}

}  // namespace sle
