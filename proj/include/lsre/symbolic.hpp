#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsre/common.hpp"

namespace lsre::sym {

inline constexpr int kMaxDepth = 15;
inline constexpr double kProtectEps = 1e-9;
inline constexpr double kSaturation = 1e150;

enum class Op : std::uint8_t {
    kX,     // full decision vector
    kXa,    // forward slice x[0 : d-1]
    kXb,    // backward slice x[1 : d]
    kConst,
    kSum,   // arity fixed per node: 1 aggregates, 2 adds element-wise
    kMean,  // arity fixed per node: 1 averages, 2 is the element-wise mean
    kAdd,
    kSub,
    kMul,
    kDiv,
    kNeg,
    kPow,
    kSin,
    kCos,
    kAbs,
    kTanh,
    kExp,
    kLog,
    kSqrt,
};

// Constant operand: mantissa * 10^exponent, mantissa in 1..9 plus 10 => pi
// and 11 => e, exponent in -1..3. Always positive; negation goes through neg.
struct ConstantSpec {
    int mantissa = 1;
    int exponent = 0;
    double value() const;
    static ConstantSpec random(Rng& rng);
};

struct Gene {
    Op op = Op::kX;
    std::int8_t arity = 0;
    std::int8_t mantissa = 0;
    std::int8_t exponent = 0;

    bool operator==(const Gene&) const = default;
};

// Immutable expression tree stored in prefix order. Every structural edit
// returns a new tree.
class ExprTree {
public:
    ExprTree() : genes_{Gene{}} {}
    explicit ExprTree(std::vector<Gene> genes);

    static ExprTree variable(Op operand);
    static ExprTree constant(ConstantSpec c);

    std::size_t size() const { return genes_.size(); }
    int depth() const;
    bool has_variable() const;
    const std::vector<Gene>& genes() const { return genes_; }

    // Total protected evaluation; finite for every finite x with d >= 2.
    double eval(std::span<const double> x) const;

    std::string serialize() const;
    static ExprTree parse(std::string_view text);
    // Human-readable infix with explicit slice notation.
    std::string infix() const;

    std::uint64_t hash() const;

    // Subtree [i, subtree_end(i)) in prefix order.
    std::size_t subtree_end(std::size_t i) const;
    ExprTree subtree(std::size_t i) const;
    ExprTree with_replaced_subtree(std::size_t i, const ExprTree& replacement) const;

    // Structural validity: arities consistent, depth bound, has a variable.
    void validate() const;

    bool operator==(const ExprTree&) const = default;

private:
    std::vector<Gene> genes_;
};

int arity_of(Op op, bool aggregate_binary);
std::string_view op_name(Op op);

// Grow-style construction with depth guaranteed inside [lo, hi]; constant-only
// results are resampled a bounded number of times, then fall back to X.
ExprTree random_tree(int depth_lo, int depth_hi, Rng& rng);

// A symbolic tree instantiated at a fixed dimension.
class TreeProblem : public Problem {
public:
    TreeProblem(ExprTree tree, int dim)
        : tree_(std::move(tree)), dim_(dim) {
        if (dim < 2) throw std::invalid_argument("tree problem dim must be >= 2");
    }

    int dim() const override { return dim_; }
    double evaluate(std::span<const double> x) const override { return tree_.eval(x); }
    std::string id() const override { return "tree_d" + std::to_string(dim_); }
    const ExprTree& tree() const { return tree_; }

private:
    ExprTree tree_;
    int dim_;
};

}  // namespace lsre::sym
