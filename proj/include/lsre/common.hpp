#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lsre {

inline constexpr const char* kVersion = "0.1.0";

// Search domain shared by all problem instances.
inline constexpr double kDomainLo = -5.0;
inline constexpr double kDomainHi = 5.0;

using Vec = std::vector<double>;

struct invalid_design_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct degenerate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct parse_error : std::runtime_error {
    parse_error(const std::string& what, std::size_t position)
        : std::runtime_error(what + " at position " + std::to_string(position)), pos(position) {}
    std::size_t pos;
};

// 64-bit FNV-1a, used for content hashes and string-tagged seed derivation.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// SplitMix64 finalizer; the basis of all seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

template <typename... Rest>
std::uint64_t seed_combine(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return seed_combine(seed_combine(a, b), static_cast<std::uint64_t>(rest)...);
}

inline std::uint64_t seed_tag(std::uint64_t seed, std::string_view tag) {
    return seed_combine(seed, fnv1a64(tag));
}

// Deterministic RNG. std::mt19937_64 has a standardized sequence, and the
// distribution mappings below are our own, so streams replay bit-identically
// across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    std::size_t index(std::size_t n) {
        const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    // inclusive on both ends
    int uniform_int(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo) + 1)); }

    // Box-Muller; draws two uniforms per call, no cached state.
    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    std::string save_state() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (!is) throw parse_error("bad rng state", 0);
    }

private:
    std::mt19937_64 eng_;
};

// A black-box objective over [-5, 5]^dim. Implementations must be immutable
// and safe to evaluate from many threads at once.
class Problem {
public:
    virtual ~Problem() = default;
    virtual int dim() const = 0;
    virtual double evaluate(std::span<const double> x) const = 0;
    // Optimum objective value when exposed and attainable within the domain.
    virtual std::optional<double> known_optimum() const { return std::nullopt; }
    virtual std::string id() const = 0;
};

// Adapter for tests and probes built from plain callables.
class FunctionProblem : public Problem {
public:
    template <typename Fn>
    FunctionProblem(std::string id, int dim, Fn fn, std::optional<double> optimum = std::nullopt)
        : id_(std::move(id)), dim_(dim), fn_(std::move(fn)), optimum_(optimum) {}

    int dim() const override { return dim_; }
    double evaluate(std::span<const double> x) const override { return fn_(x); }
    std::optional<double> known_optimum() const override { return optimum_; }
    std::string id() const override { return id_; }

private:
    std::string id_;
    int dim_;
    std::function<double(std::span<const double>)> fn_;
    std::optional<double> optimum_;
};

}  // namespace lsre
