#include "lsre/symbolic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace lsre::sym {
namespace {

// Evaluation carrier: a scalar or a vector of length d or d-1.
struct Value {
    bool is_vec = false;
    double s = 0.0;
    Vec v;
};

double sanitize(double x) {
    if (std::isnan(x)) return 0.0;
    if (x > kSaturation) return kSaturation;
    if (x < -kSaturation) return -kSaturation;
    return x;
}

double protected_div(double a, double b) {
    if (std::abs(b) < kProtectEps) return 1.0;
    return sanitize(a / b);
}

double protected_pow(double a, double b) {
    if (std::abs(a) < kProtectEps && b == -1.0) return 1.0;
    return sanitize(std::pow(a, b));
}

double protected_log(double a) {
    if (std::abs(a) < kProtectEps) return 0.0;
    return sanitize(std::log10(std::abs(a)));
}

double unary_apply(Op op, double a) {
    switch (op) {
        case Op::kNeg: return -a;
        case Op::kSin: return std::sin(a);
        case Op::kCos: return std::cos(a);
        case Op::kAbs: return std::abs(a);
        case Op::kTanh: return std::tanh(a);
        case Op::kExp: return sanitize(std::exp(a));
        case Op::kLog: return protected_log(a);
        case Op::kSqrt: return sanitize(std::sqrt(std::abs(a)));
        default: throw std::logic_error("not a unary op");
    }
}

double binary_apply(Op op, double a, double b) {
    switch (op) {
        case Op::kAdd: return sanitize(a + b);
        case Op::kSub: return sanitize(a - b);
        case Op::kMul: return sanitize(a * b);
        case Op::kDiv: return protected_div(a, b);
        case Op::kPow: return protected_pow(a, b);
        case Op::kSum: return sanitize(a + b);
        case Op::kMean: return sanitize(0.5 * (a + b));
        default: throw std::logic_error("not a binary op");
    }
}

Value binary_combine(Op op, const Value& a, const Value& b) {
    Value out;
    if (!a.is_vec && !b.is_vec) {
        out.s = binary_apply(op, a.s, b.s);
        return out;
    }
    out.is_vec = true;
    if (a.is_vec && b.is_vec) {
        const std::size_t n = std::min(a.v.size(), b.v.size());
        out.v.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.v[i] = binary_apply(op, a.v[i], b.v[i]);
    } else if (a.is_vec) {
        out.v.resize(a.v.size());
        for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = binary_apply(op, a.v[i], b.s);
    } else {
        out.v.resize(b.v.size());
        for (std::size_t i = 0; i < b.v.size(); ++i) out.v[i] = binary_apply(op, a.s, b.v[i]);
    }
    return out;
}

const std::array<Op, 8> kUnaryOnly = {Op::kNeg, Op::kSin, Op::kCos, Op::kAbs,
                                      Op::kTanh, Op::kExp, Op::kLog, Op::kSqrt};
const std::array<Op, 5> kBinaryOnly = {Op::kAdd, Op::kSub, Op::kMul, Op::kDiv, Op::kPow};
const std::array<Op, 3> kVariables = {Op::kX, Op::kXa, Op::kXb};

}  // namespace

double ConstantSpec::value() const {
    double m;
    if (mantissa == 10) {
        m = std::numbers::pi;
    } else if (mantissa == 11) {
        m = std::numbers::e;
    } else {
        m = static_cast<double>(mantissa);
    }
    return m * std::pow(10.0, exponent);
}

ConstantSpec ConstantSpec::random(Rng& rng) {
    return {rng.uniform_int(1, 11), rng.uniform_int(-1, 3)};
}

int arity_of(Op op, bool aggregate_binary) {
    switch (op) {
        case Op::kX:
        case Op::kXa:
        case Op::kXb:
        case Op::kConst:
            return 0;
        case Op::kSum:
        case Op::kMean:
            return aggregate_binary ? 2 : 1;
        case Op::kAdd:
        case Op::kSub:
        case Op::kMul:
        case Op::kDiv:
        case Op::kPow:
            return 2;
        default:
            return 1;
    }
}

std::string_view op_name(Op op) {
    switch (op) {
        case Op::kX: return "X";
        case Op::kXa: return "Xa";
        case Op::kXb: return "Xb";
        case Op::kConst: return "C";
        case Op::kSum: return "sum";
        case Op::kMean: return "mean";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kDiv: return "div";
        case Op::kNeg: return "neg";
        case Op::kPow: return "pow";
        case Op::kSin: return "sin";
        case Op::kCos: return "cos";
        case Op::kAbs: return "abs";
        case Op::kTanh: return "tanh";
        case Op::kExp: return "exp";
        case Op::kLog: return "log";
        case Op::kSqrt: return "sqrt";
    }
    return "?";
}

ExprTree::ExprTree(std::vector<Gene> genes) : genes_(std::move(genes)) {
    if (genes_.empty()) throw std::invalid_argument("empty gene list");
}

ExprTree ExprTree::variable(Op operand) {
    if (operand != Op::kX && operand != Op::kXa && operand != Op::kXb) {
        throw std::invalid_argument("not a variable operand");
    }
    return ExprTree(std::vector<Gene>{Gene{operand, 0, 0, 0}});
}

ExprTree ExprTree::constant(ConstantSpec c) {
    return ExprTree(std::vector<Gene>{
        Gene{Op::kConst, 0, static_cast<std::int8_t>(c.mantissa), static_cast<std::int8_t>(c.exponent)}});
}

int ExprTree::depth() const {
    std::size_t pos = 0;
    const auto walk = [&](auto&& self) -> int {
        const Gene& g = genes_.at(pos++);
        int d = 1;
        for (int k = 0; k < g.arity; ++k) d = std::max(d, 1 + self(self));
        return d;
    };
    return walk(walk);
}

bool ExprTree::has_variable() const {
    return std::any_of(genes_.begin(), genes_.end(), [](const Gene& g) {
        return g.op == Op::kX || g.op == Op::kXa || g.op == Op::kXb;
    });
}

double ExprTree::eval(std::span<const double> x) const {
    if (x.size() < 2) throw std::invalid_argument("eval requires dim >= 2");
    std::size_t pos = 0;
    const auto walk = [&](auto&& self) -> Value {
        const Gene& g = genes_.at(pos++);
        switch (g.op) {
            case Op::kX: {
                Value v;
                v.is_vec = true;
                v.v.assign(x.begin(), x.end());
                return v;
            }
            case Op::kXa: {
                Value v;
                v.is_vec = true;
                v.v.assign(x.begin(), x.end() - 1);
                return v;
            }
            case Op::kXb: {
                Value v;
                v.is_vec = true;
                v.v.assign(x.begin() + 1, x.end());
                return v;
            }
            case Op::kConst: {
                Value v;
                v.s = ConstantSpec{g.mantissa, g.exponent}.value();
                return v;
            }
            default:
                break;
        }
        if (g.arity == 1) {
            Value a = self(self);
            if (g.op == Op::kSum || g.op == Op::kMean) {
                // Aggregation mode; identity on scalars.
                if (!a.is_vec) return a;
                double acc = 0.0;
                for (double t : a.v) acc += t;
                if (g.op == Op::kMean && !a.v.empty()) acc /= static_cast<double>(a.v.size());
                Value out;
                out.s = sanitize(acc);
                return out;
            }
            if (a.is_vec) {
                for (double& t : a.v) t = sanitize(unary_apply(g.op, t));
                return a;
            }
            a.s = sanitize(unary_apply(g.op, a.s));
            return a;
        }
        const Value a = self(self);
        const Value b = self(self);
        return binary_combine(g.op, a, b);
    };
    Value root = walk(walk);
    if (!root.is_vec) return root.s;
    // Scalar objective: a vector-valued root is aggregated by sum.
    double acc = 0.0;
    for (double t : root.v) acc += t;
    return sanitize(acc);
}

std::size_t ExprTree::subtree_end(std::size_t i) const {
    if (i >= genes_.size()) throw std::out_of_range("subtree index");
    std::size_t pos = i;
    std::size_t open = 1;
    while (open > 0) {
        open += static_cast<std::size_t>(genes_.at(pos).arity);
        --open;
        ++pos;
    }
    return pos;
}

ExprTree ExprTree::subtree(std::size_t i) const {
    const std::size_t end = subtree_end(i);
    return ExprTree(std::vector<Gene>(genes_.begin() + static_cast<std::ptrdiff_t>(i),
                                      genes_.begin() + static_cast<std::ptrdiff_t>(end)));
}

ExprTree ExprTree::with_replaced_subtree(std::size_t i, const ExprTree& replacement) const {
    const std::size_t end = subtree_end(i);
    std::vector<Gene> out;
    out.reserve(genes_.size() - (end - i) + replacement.genes_.size());
    out.insert(out.end(), genes_.begin(), genes_.begin() + static_cast<std::ptrdiff_t>(i));
    out.insert(out.end(), replacement.genes_.begin(), replacement.genes_.end());
    out.insert(out.end(), genes_.begin() + static_cast<std::ptrdiff_t>(end), genes_.end());
    return ExprTree(std::move(out));
}

void ExprTree::validate() const {
    std::size_t needed = 1;
    for (const Gene& g : genes_) {
        if (needed == 0) throw std::invalid_argument("dangling genes after complete tree");
        needed += static_cast<std::size_t>(g.arity);
        --needed;
        switch (g.op) {
            case Op::kX:
            case Op::kXa:
            case Op::kXb:
                if (g.arity != 0) throw std::invalid_argument("operand with non-zero arity");
                break;
            case Op::kConst:
                if (g.arity != 0) throw std::invalid_argument("constant with non-zero arity");
                if (g.mantissa < 1 || g.mantissa > 11 || g.exponent < -1 || g.exponent > 3) {
                    throw std::invalid_argument("constant out of spec range");
                }
                break;
            case Op::kSum:
            case Op::kMean:
                if (g.arity != 1 && g.arity != 2) throw std::invalid_argument("sum/mean arity must be 1 or 2");
                break;
            case Op::kAdd:
            case Op::kSub:
            case Op::kMul:
            case Op::kDiv:
            case Op::kPow:
                if (g.arity != 2) throw std::invalid_argument("binary operator arity != 2");
                break;
            default:
                if (g.arity != 1) throw std::invalid_argument("unary operator arity != 1");
                break;
        }
    }
    if (needed != 0) throw std::invalid_argument("incomplete tree");
    if (depth() > kMaxDepth) throw std::invalid_argument("tree depth exceeds limit");
    if (!has_variable()) throw std::invalid_argument("constant-only tree");
}

std::string ExprTree::serialize() const {
    std::string out;
    std::size_t pos = 0;
    const auto walk = [&](auto&& self) -> void {
        const Gene& g = genes_.at(pos++);
        if (g.op == Op::kConst) {
            out += "C(";
            out += std::to_string(static_cast<int>(g.mantissa));
            out += ",";
            out += std::to_string(static_cast<int>(g.exponent));
            out += ")";
            return;
        }
        out += op_name(g.op);
        if (g.arity == 0) return;
        out += "(";
        for (int k = 0; k < g.arity; ++k) {
            if (k > 0) out += ", ";
            self(self);
        }
        out += ")";
    };
    walk(walk);
    return out;
}

namespace {

struct Parser {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!eat(c)) throw parse_error(std::string("expected '") + c + "'", pos);
    }

    int parse_int() {
        skip_ws();
        int value = 0;
        const char* begin = text.data() + pos;
        const char* end = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc{}) throw parse_error("expected integer", pos);
        pos += static_cast<std::size_t>(ptr - begin);
        return value;
    }

    std::string parse_name() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() && (std::isalpha(static_cast<unsigned char>(text[pos])) != 0)) ++pos;
        if (pos == start) throw parse_error("expected symbol name", pos);
        return std::string(text.substr(start, pos - start));
    }

    void parse_node(std::vector<Gene>& out) {
        const std::size_t at = pos;
        const std::string name = parse_name();
        if (name == "X") {
            out.push_back(Gene{Op::kX, 0, 0, 0});
            return;
        }
        if (name == "Xa") {
            out.push_back(Gene{Op::kXa, 0, 0, 0});
            return;
        }
        if (name == "Xb") {
            out.push_back(Gene{Op::kXb, 0, 0, 0});
            return;
        }
        if (name == "C") {
            expect('(');
            const int m = parse_int();
            expect(',');
            const int e = parse_int();
            expect(')');
            if (m < 1 || m > 11 || e < -1 || e > 3) throw parse_error("constant out of range", at);
            out.push_back(Gene{Op::kConst, 0, static_cast<std::int8_t>(m), static_cast<std::int8_t>(e)});
            return;
        }
        static const std::array<std::pair<std::string_view, Op>, 15> ops = {{
            {"sum", Op::kSum}, {"mean", Op::kMean}, {"add", Op::kAdd}, {"sub", Op::kSub},
            {"mul", Op::kMul}, {"div", Op::kDiv}, {"neg", Op::kNeg}, {"pow", Op::kPow},
            {"sin", Op::kSin}, {"cos", Op::kCos}, {"abs", Op::kAbs}, {"tanh", Op::kTanh},
            {"exp", Op::kExp}, {"log", Op::kLog}, {"sqrt", Op::kSqrt},
        }};
        const auto it = std::find_if(ops.begin(), ops.end(), [&](const auto& p) { return p.first == name; });
        if (it == ops.end()) throw parse_error("unknown symbol '" + name + "'", at);
        const Op op = it->second;
        const std::size_t slot = out.size();
        out.push_back(Gene{op, 0, 0, 0});
        expect('(');
        int arity = 0;
        do {
            parse_node(out);
            ++arity;
        } while (eat(','));
        expect(')');
        const bool is_agg = op == Op::kSum || op == Op::kMean;
        const int lo = 1;
        const int hi = is_agg ? 2 : arity_of(op, false);
        if (arity < lo || arity > std::max(hi, 1) ||
            (!is_agg && arity != arity_of(op, false))) {
            throw parse_error("wrong arity for '" + name + "'", at);
        }
        out[slot].arity = static_cast<std::int8_t>(arity);
    }
};

}  // namespace

ExprTree ExprTree::parse(std::string_view text) {
    Parser p{text};
    std::vector<Gene> genes;
    p.parse_node(genes);
    p.skip_ws();
    if (p.pos != text.size()) throw parse_error("trailing characters", p.pos);
    return ExprTree(std::move(genes));
}

std::string ExprTree::infix() const {
    std::size_t pos = 0;
    const auto walk = [&](auto&& self) -> std::string {
        const Gene& g = genes_.at(pos++);
        switch (g.op) {
            case Op::kX: return "x";
            case Op::kXa: return "x[0:n-1]";
            case Op::kXb: return "x[1:n]";
            case Op::kConst: {
                const ConstantSpec c{g.mantissa, g.exponent};
                std::string base = g.mantissa == 10 ? "pi" : (g.mantissa == 11 ? "e" : std::to_string(g.mantissa));
                if (c.exponent == 0) return base;
                return "(" + base + "e" + std::to_string(c.exponent) + ")";
            }
            default:
                break;
        }
        if (g.arity == 1) {
            const std::string a = self(self);
            if (g.op == Op::kNeg) return "(-" + a + ")";
            return std::string(op_name(g.op)) + "(" + a + ")";
        }
        const std::string a = self(self);
        const std::string b = self(self);
        switch (g.op) {
            case Op::kAdd: return "(" + a + " + " + b + ")";
            case Op::kSub: return "(" + a + " - " + b + ")";
            case Op::kMul: return "(" + a + " * " + b + ")";
            case Op::kDiv: return "(" + a + " / " + b + ")";
            case Op::kPow: return "(" + a + " ^ " + b + ")";
            default:
                return std::string(op_name(g.op)) + "(" + a + ", " + b + ")";
        }
    };
    return walk(walk);
}

std::uint64_t ExprTree::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    const auto mixin = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (const Gene& g : genes_) {
        mixin(static_cast<std::uint8_t>(g.op));
        mixin(static_cast<std::uint8_t>(g.arity));
        mixin(static_cast<std::uint8_t>(g.mantissa));
        mixin(static_cast<std::uint8_t>(g.exponent + 8));
    }
    return h;
}

namespace {

// One grow step: operators are drawn 15/19 of the time (uniform within
// kind), mirroring the symbol-set size split.
void grow(std::vector<Gene>& out, int remaining, bool on_spine, Rng& rng) {
    const bool must_leaf = remaining <= 1;
    const bool want_operator = on_spine || (!must_leaf && rng.uniform() < 15.0 / 19.0);
    if (must_leaf || !want_operator) {
        const std::size_t pick = rng.index(4);
        if (pick == 3) {
            const ConstantSpec c = ConstantSpec::random(rng);
            out.push_back(Gene{Op::kConst, 0, static_cast<std::int8_t>(c.mantissa),
                               static_cast<std::int8_t>(c.exponent)});
        } else {
            out.push_back(Gene{kVariables[pick], 0, 0, 0});
        }
        return;
    }
    // Uniform over the 15 operators; sum/mean fix their arity 50/50.
    const std::size_t pick = rng.index(15);
    Op op;
    int arity;
    if (pick < 2) {
        op = pick == 0 ? Op::kSum : Op::kMean;
        arity = rng.uniform() < 0.5 ? 1 : 2;
    } else if (pick < 7) {
        op = kBinaryOnly[pick - 2];
        arity = 2;
    } else {
        op = kUnaryOnly[pick - 7];
        arity = 1;
    }
    out.push_back(Gene{op, static_cast<std::int8_t>(arity), 0, 0});
    const std::size_t spine_child = on_spine ? rng.index(static_cast<std::size_t>(arity)) : 0;
    for (int k = 0; k < arity; ++k) {
        grow(out, remaining - 1, on_spine && static_cast<std::size_t>(k) == spine_child, rng);
    }
}

}  // namespace

ExprTree random_tree(int depth_lo, int depth_hi, Rng& rng) {
    if (depth_lo < 1 || depth_hi < depth_lo || depth_hi > kMaxDepth) {
        throw std::invalid_argument("invalid depth range");
    }
    for (int attempt = 0; attempt < 10; ++attempt) {
        const int target = rng.uniform_int(depth_lo, depth_hi);
        std::vector<Gene> genes;
        grow(genes, target, true, rng);
        ExprTree t(std::move(genes));
        if (t.has_variable()) return t;
    }
    return ExprTree::variable(Op::kX);
}

}  // namespace lsre::sym
