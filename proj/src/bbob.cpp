#include "lsre/bbob.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "json.hpp"

namespace lsre::bbob {
namespace {

using json = nlohmann::ordered_json;

void check_id(int id) {
    if (id < 1 || id > kFunctionCount) {
        throw std::invalid_argument("bbob function id must be in [1, 24], got " + std::to_string(id));
    }
}

void check_input(std::span<const double> x) {
    if (x.size() < 2) throw std::invalid_argument("bbob functions require dim >= 2");
    for (double v : x) {
        if (!std::isfinite(v)) throw std::domain_error("non-finite input to bbob function");
    }
}

// Diagonal conditioning Lambda^alpha: alpha^(i / (2(D-1))) for 0-based i.
double lambda_scale(int i, int dim, double alpha) {
    return std::pow(alpha, 0.5 * static_cast<double>(i) / static_cast<double>(dim - 1));
}

double boundary_penalty(std::span<const double> x) {
    double p = 0.0;
    for (double v : x) {
        const double over = std::abs(v) - 5.0;
        if (over > 0.0) p += over * over;
    }
    return p;
}

// Frozen internal structure of the multi-peak / sign-dependent functions.
// Derived from a fixed tag so the raw forms are global constants per (id, dim).
struct BaseStructure {
    std::vector<double> signs;        // f20, f24: +-1 per coordinate
    Eigen::MatrixXd peaks;            // f21, f22: n_peaks x dim positions
    std::vector<double> peak_weights; // f21, f22
    std::vector<double> peak_alphas;  // f21, f22 condition numbers
};

std::uint64_t structure_seed(int id, int dim) {
    return seed_combine(fnv1a64("base-structure"), static_cast<std::uint64_t>(id),
                        static_cast<std::uint64_t>(dim));
}

BaseStructure make_structure(int id, int dim) {
    BaseStructure s;
    Rng rng(structure_seed(id, dim));
    if (id == 20 || id == 24) {
        s.signs.resize(static_cast<std::size_t>(dim));
        for (auto& v : s.signs) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } else if (id == 21 || id == 22) {
        const int n_peaks = id == 21 ? 101 : 21;
        const double global_range = id == 21 ? 4.0 : 3.92;
        const double denom = id == 21 ? 99.0 : 19.0;
        s.peaks.resize(n_peaks, dim);
        for (int j = 0; j < dim; ++j) s.peaks(0, j) = rng.uniform(-global_range, global_range);
        for (int i = 1; i < n_peaks; ++i) {
            for (int j = 0; j < dim; ++j) s.peaks(i, j) = rng.uniform(-4.9, 4.9);
        }
        s.peak_weights.resize(static_cast<std::size_t>(n_peaks));
        s.peak_weights[0] = 10.0;
        for (int i = 1; i < n_peaks; ++i) {
            s.peak_weights[static_cast<std::size_t>(i)] = 1.1 + 8.0 * static_cast<double>(i - 1) / denom;
        }
        std::vector<double> alphas(static_cast<std::size_t>(n_peaks - 1));
        for (std::size_t j = 0; j < alphas.size(); ++j) {
            alphas[j] = std::pow(1000.0, 2.0 * static_cast<double>(j) / denom);
        }
        rng.shuffle(alphas);
        s.peak_alphas.resize(static_cast<std::size_t>(n_peaks));
        s.peak_alphas[0] = id == 21 ? 1000.0 : 1000.0 * 1000.0;
        std::copy(alphas.begin(), alphas.end(), s.peak_alphas.begin() + 1);
    }
    return s;
}

const BaseStructure& structure(int id, int dim) {
    thread_local std::unordered_map<std::uint64_t, BaseStructure> cache;
    const std::uint64_t key = (static_cast<std::uint64_t>(id) << 32) | static_cast<std::uint64_t>(dim);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, make_structure(id, dim)).first;
    return it->second;
}

constexpr double kSchwefelOpt = 4.2096874633;
constexpr double kSchwefelBase = 4.189828872724339;

double weierstrass_sum(double t) {
    double acc = 0.0;
    double ak = 1.0;
    double bk = 1.0;
    for (int k = 0; k <= 11; ++k) {
        acc += ak * std::cos(2.0 * std::numbers::pi * bk * (t + 0.5));
        ak *= 0.5;
        bk *= 3.0;
    }
    return acc;
}

double gallagher(std::span<const double> x, const BaseStructure& s) {
    const int dim = static_cast<int>(x.size());
    const int n_peaks = static_cast<int>(s.peak_weights.size());
    double best = 0.0;
    for (int i = 0; i < n_peaks; ++i) {
        const double alpha = s.peak_alphas[static_cast<std::size_t>(i)];
        const double norm = std::pow(alpha, 0.25);
        double q = 0.0;
        for (int j = 0; j < dim; ++j) {
            const double c = lambda_scale(j, dim, alpha) / norm;
            const double dxy = x[static_cast<std::size_t>(j)] - s.peaks(i, j);
            q += c * dxy * dxy;
        }
        const double v = s.peak_weights[static_cast<std::size_t>(i)] *
                         std::exp(-q / (2.0 * static_cast<double>(dim)));
        best = std::max(best, v);
    }
    const double t = 10.0 - best;
    return t * t + boundary_penalty(x);
}

double rosenbrock_shifted(std::span<const double> x, double scale) {
    const auto dim = x.size();
    double f = 0.0;
    for (std::size_t i = 0; i + 1 < dim; ++i) {
        const double zi = scale * x[i] + 0.5;
        const double zn = scale * x[i + 1] + 0.5;
        const double a = zi * zi - zn;
        const double b = zi - 1.0;
        f += 100.0 * a * a + b * b;
    }
    return f;
}

}  // namespace

double evaluate_base(int id, std::span<const double> x) {
    check_id(id);
    check_input(x);
    const int dim = static_cast<int>(x.size());
    const double D = static_cast<double>(dim);

    switch (id) {
        case 1: {  // sphere
            double f = 0.0;
            for (double v : x) f += v * v;
            return f;
        }
        case 2:
        case 10: {  // ellipsoid (10^6 conditioning)
            double f = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double c = std::pow(10.0, 6.0 * static_cast<double>(i) / (D - 1.0));
                f += c * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
            }
            return f;
        }
        case 3:
        case 15: {  // rastrigin with Lambda^10 conditioning
            double cosum = 0.0, sq = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double z = lambda_scale(i, dim, 10.0) * x[static_cast<std::size_t>(i)];
                cosum += std::cos(2.0 * std::numbers::pi * z);
                sq += z * z;
            }
            return 10.0 * (D - cosum) + sq;
        }
        case 4: {  // bueche-rastrigin
            double cosum = 0.0, sq = 0.0;
            for (int i = 0; i < dim; ++i) {
                double s = lambda_scale(i, dim, 10.0);
                if (i % 2 == 0 && x[static_cast<std::size_t>(i)] > 0.0) s *= 10.0;
                const double z = s * x[static_cast<std::size_t>(i)];
                cosum += std::cos(2.0 * std::numbers::pi * z);
                sq += z * z;
            }
            return 10.0 * (D - cosum) + sq + 100.0 * boundary_penalty(x);
        }
        case 5: {  // linear slope, optimum at the +5 corner
            double f = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double s = std::pow(10.0, static_cast<double>(i) / (D - 1.0));
                const double z = std::min(x[static_cast<std::size_t>(i)], 5.0);
                f += s * (5.0 - z);
            }
            return f;
        }
        case 6: {  // attractive sector
            double f = 0.0;
            for (double v : x) {
                const double s = v > 0.0 ? 100.0 : 1.0;
                f += s * v * s * v;
            }
            return std::pow(f, 0.9);
        }
        case 7: {  // step ellipsoid
            double sq = 0.0;
            double z0 = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double zh = lambda_scale(i, dim, 10.0) * x[static_cast<std::size_t>(i)];
                if (i == 0) z0 = zh;
                const double zt = std::abs(zh) > 0.5 ? std::floor(0.5 + zh)
                                                     : std::floor(0.5 + 10.0 * zh) / 10.0;
                const double c = std::pow(10.0, 2.0 * static_cast<double>(i) / (D - 1.0));
                sq += c * zt * zt;
            }
            return 0.1 * std::max(std::abs(z0) * 1e-4, sq) + boundary_penalty(x);
        }
        case 8: {  // rosenbrock, optimum at (1, ..., 1)
            double f = 0.0;
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                const double a = x[i + 1] - x[i] * x[i];
                const double b = x[i] - 1.0;
                f += 100.0 * a * a + b * b;
            }
            return f;
        }
        case 9: {  // rosenbrock, scaled and half-shifted
            return rosenbrock_shifted(x, std::max(1.0, std::sqrt(D) / 8.0));
        }
        case 11: {  // discus
            double f = 1e6 * x[0] * x[0];
            for (std::size_t i = 1; i < x.size(); ++i) f += x[i] * x[i];
            return f;
        }
        case 12: {  // bent cigar
            double f = x[0] * x[0];
            for (std::size_t i = 1; i < x.size(); ++i) f += 1e6 * x[i] * x[i];
            return f;
        }
        case 13: {  // sharp ridge
            double tail = 0.0;
            for (std::size_t i = 1; i < x.size(); ++i) tail += x[i] * x[i];
            return x[0] * x[0] + 100.0 * std::sqrt(tail);
        }
        case 14: {  // different powers
            double f = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double e = 2.0 + 4.0 * static_cast<double>(i) / (D - 1.0);
                f += std::pow(std::abs(x[static_cast<std::size_t>(i)]), e);
            }
            return std::sqrt(f);
        }
        case 16: {  // weierstrass
            const double f0 = weierstrass_sum(0.0);
            double acc = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double z = lambda_scale(i, dim, 0.01) * x[static_cast<std::size_t>(i)];
                acc += weierstrass_sum(z);
            }
            const double t = acc / D - f0;
            return 10.0 * t * t * t + (10.0 / D) * boundary_penalty(x);
        }
        case 17:
        case 18: {  // schaffers F7, moderately / highly ill-conditioned
            const double alpha = id == 17 ? 10.0 : 1000.0;
            double acc = 0.0;
            for (int i = 0; i + 1 < dim; ++i) {
                const double zi = lambda_scale(i, dim, alpha) * x[static_cast<std::size_t>(i)];
                const double zn = lambda_scale(i + 1, dim, alpha) * x[static_cast<std::size_t>(i + 1)];
                const double s = std::sqrt(zi * zi + zn * zn);
                const double srt = std::sqrt(s);
                const double sn = std::sin(50.0 * std::pow(s, 0.2));
                acc += srt + srt * sn * sn;
            }
            const double t = acc / (D - 1.0);
            return t * t + 10.0 * boundary_penalty(x);
        }
        case 19: {  // composite griewank-rosenbrock
            const double scale = std::max(1.0, std::sqrt(D) / 8.0);
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < x.size(); ++i) {
                const double zi = scale * x[i] + 0.5;
                const double zn = scale * x[i + 1] + 0.5;
                const double a = zi * zi - zn;
                const double b = zi - 1.0;
                const double s = 100.0 * a * a + b * b;
                acc += s / 4000.0 - std::cos(s);
            }
            return 10.0 * acc / (D - 1.0) + 10.0;
        }
        case 20: {  // schwefel x sin(sqrt|x|), seeded signs
            const auto& st = structure(20, dim);
            double acc = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double v = 100.0 * x[static_cast<std::size_t>(i)];
                acc += st.signs[static_cast<std::size_t>(i)] * v * std::sin(std::sqrt(std::abs(v)));
            }
            return kSchwefelBase - acc / (100.0 * D) + 100.0 * boundary_penalty(x);
        }
        case 21:
        case 22: {  // gallagher 101 / 21 peaks
            return gallagher(x, structure(id, dim));
        }
        case 23: {  // katsuura
            const double expo = 10.0 / std::pow(D, 1.2);
            double prod = 1.0;
            for (int i = 0; i < dim; ++i) {
                double inner = 0.0;
                double tw = 2.0;
                for (int j = 1; j <= 32; ++j) {
                    const double t = tw * x[static_cast<std::size_t>(i)];
                    inner += std::abs(t - std::round(t)) / tw;
                    tw *= 2.0;
                }
                prod *= std::pow(1.0 + static_cast<double>(i + 1) * inner, expo);
            }
            const double c = 10.0 / (D * D);
            return c * prod - c + boundary_penalty(x);
        }
        case 24: {  // lunacek bi-rastrigin, seeded signs
            const auto& st = structure(24, dim);
            const double mu0 = 2.5;
            const double s = 1.0 - 1.0 / (2.0 * std::sqrt(D + 20.0) - 8.2);
            const double d0 = 1.0;
            const double mu1 = -std::sqrt((mu0 * mu0 - d0) / s);
            double sum0 = 0.0, sum1 = 0.0, cosum = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double xh = 2.0 * st.signs[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
                const double a = xh - mu0;
                const double b = xh - mu1;
                sum0 += a * a;
                sum1 += b * b;
                cosum += std::cos(2.0 * std::numbers::pi * a);
            }
            return std::min(sum0, d0 * D + s * sum1) + 10.0 * (D - cosum) +
                   1e4 * boundary_penalty(x);
        }
        default:
            break;
    }
    throw std::invalid_argument("unreachable bbob id");
}

std::string function_name(int id) {
    check_id(id);
    static const std::array<const char*, 24> names = {
        "sphere", "ellipsoid", "rastrigin", "bueche_rastrigin", "linear_slope",
        "attractive_sector", "step_ellipsoid", "rosenbrock", "rosenbrock_scaled",
        "ellipsoid_hc", "discus", "bent_cigar", "sharp_ridge", "different_powers",
        "rastrigin_hc", "weierstrass", "schaffers_f7", "schaffers_f7_ill",
        "griewank_rosenbrock", "schwefel", "gallagher_101", "gallagher_21",
        "katsuura", "lunacek_bi_rastrigin"};
    return names[static_cast<std::size_t>(id - 1)];
}

Vec base_optimum_point(int id, int dim) {
    check_id(id);
    if (dim < 2) throw std::invalid_argument("dim must be >= 2");
    Vec p(static_cast<std::size_t>(dim), 0.0);
    switch (id) {
        case 5:
            std::fill(p.begin(), p.end(), 5.0);
            break;
        case 8:
            std::fill(p.begin(), p.end(), 1.0);
            break;
        case 9:
        case 19: {
            const double scale = std::max(1.0, std::sqrt(static_cast<double>(dim)) / 8.0);
            std::fill(p.begin(), p.end(), 0.5 / scale);
            break;
        }
        case 20: {
            const auto& st = structure(20, dim);
            for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = st.signs[static_cast<std::size_t>(i)] * kSchwefelOpt;
            break;
        }
        case 21:
        case 22: {
            const auto& st = structure(id, dim);
            for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = st.peaks(0, i);
            break;
        }
        case 24: {
            const auto& st = structure(24, dim);
            for (int i = 0; i < dim; ++i) p[static_cast<std::size_t>(i)] = st.signs[static_cast<std::size_t>(i)] * 1.25;
            break;
        }
        default:
            break;  // origin
    }
    return p;
}

double base_optimum_value(int id, int dim) {
    check_id(id);
    (void)dim;
    return 0.0;
}

TransformedInstance::TransformedInstance(int base, int dim, std::uint64_t seed) {
    check_id(base);
    if (dim < 2) throw std::invalid_argument("instance dim must be >= 2, got " + std::to_string(dim));
    base_ = base;
    dim_ = dim;
    seed_ = seed;

    Rng rng(seed);
    Eigen::MatrixXd g(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    rotation_ = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int k = 0; k < dim; ++k) {
        if (r(k, k) < 0.0) rotation_.col(k) *= -1.0;
    }

    shift_.resize(dim);
    for (int i = 0; i < dim; ++i) shift_(i) = rng.uniform(-4.0, 4.0);
}

TransformedInstance TransformedInstance::identity(int base, int dim) {
    check_id(base);
    if (dim < 2) throw std::invalid_argument("instance dim must be >= 2");
    TransformedInstance inst;
    inst.base_ = base;
    inst.dim_ = dim;
    inst.seed_ = 0;
    inst.identity_ = true;
    inst.rotation_ = Eigen::MatrixXd::Identity(dim, dim);
    inst.shift_ = Eigen::VectorXd::Zero(dim);
    return inst;
}

double TransformedInstance::evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) {
        throw std::invalid_argument("dimension mismatch: instance dim " + std::to_string(dim_) +
                                    ", input dim " + std::to_string(x.size()));
    }
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), dim_);
    const Eigen::VectorXd z = rotation_.transpose() * (xv - shift_);
    return evaluate_base(base_, std::span<const double>(z.data(), static_cast<std::size_t>(dim_)));
}

Vec TransformedInstance::optimum_point() const {
    const Vec xb = base_optimum_point(base_, dim_);
    Eigen::Map<const Eigen::VectorXd> xbv(xb.data(), dim_);
    const Eigen::VectorXd xs = shift_ + rotation_ * xbv;
    return Vec(xs.data(), xs.data() + dim_);
}

std::optional<double> TransformedInstance::known_optimum() const {
    for (double v : optimum_point()) {
        if (std::abs(v) > kDomainHi) return std::nullopt;
    }
    return base_optimum_value(base_, dim_);
}

std::string TransformedInstance::id() const {
    if (identity_) return "f" + std::to_string(base_) + "_d" + std::to_string(dim_) + "_identity";
    return "f" + std::to_string(base_) + "_d" + std::to_string(dim_) + "_s" + std::to_string(seed_);
}

std::uint64_t instance_seed(std::uint64_t master_seed, int base, int dim, int index) {
    return seed_combine(master_seed, static_cast<std::uint64_t>(base), static_cast<std::uint64_t>(dim),
                        static_cast<std::uint64_t>(index));
}

std::vector<TransformedInstance> build_distribution(const DistributionSpec& spec) {
    if (spec.instances_per_function < 1) {
        throw std::invalid_argument("instances_per_function must be >= 1");
    }
    std::vector<TransformedInstance> out;
    out.reserve(spec.total_instances());
    for (int dim : spec.dims) {
        for (int base = 1; base <= kFunctionCount; ++base) {
            for (int index = 0; index < spec.instances_per_function; ++index) {
                out.emplace_back(base, dim, instance_seed(spec.master_seed, base, dim, index));
            }
        }
    }
    return out;
}

std::string manifest_to_json(const std::vector<TransformedInstance>& instances) {
    json rows = json::array();
    for (const auto& inst : instances) {
        rows.push_back({{"base_id", inst.base()}, {"dim", inst.dim()}, {"seed", inst.seed()}});
    }
    json doc;
    doc["instances"] = std::move(rows);
    return doc.dump(2);
}

std::vector<TransformedInstance> manifest_from_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    if (!doc.contains("instances") || !doc["instances"].is_array()) {
        throw config_error("manifest missing 'instances' array");
    }
    std::vector<TransformedInstance> out;
    out.reserve(doc["instances"].size());
    for (const auto& row : doc["instances"]) {
        out.emplace_back(row.at("base_id").get<int>(), row.at("dim").get<int>(),
                         row.at("seed").get<std::uint64_t>());
    }
    return out;
}

}  // namespace lsre::bbob
