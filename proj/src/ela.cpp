#include "lsre/ela.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lsre/parallel.hpp"

namespace lsre::ela {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_w_interact.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_conv.conv_prob",
    "ela_conv.lin_prob",
    "ela_conv.lin_dev_orig",
    "ela_conv.lin_dev_abs",
    "ic.h_max",
    "ic.eps_s",
    "ic.eps_max",
    "ic.eps_ratio",
    "ic.m0",
    "ela_distr.skewness",
    "ela_distr.kurtosis",
    "ela_distr.number_of_peaks",
};

namespace {

constexpr double kConvTol = 1e-10;  // linearity tolerance for the convexity probe
constexpr double kEpsGridMin = 1e-8;
constexpr int kEpsGridSize = 200;
constexpr int kKdeGridSize = 512;

struct Fit {
    Eigen::VectorXd beta;
    double adj_r2 = 0.0;
};

Fit fit_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y) {
    const auto n = a.rows();
    const auto cols = a.cols();
    if (n <= cols) throw degenerate_error("not enough samples for regression model");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < cols) throw degenerate_error("singular design matrix");
    Fit fit;
    fit.beta = qr.solve(y);
    const double ss_res = (y - a * fit.beta).squaredNorm();
    const double mean = y.mean();
    const double ss_tot = (y.array() - mean).matrix().squaredNorm();
    if (ss_tot <= 0.0) throw degenerate_error("zero variance in objective values");
    const double r2 = 1.0 - ss_res / ss_tot;
    const double p = static_cast<double>(cols - 1);  // predictors, intercept excluded
    fit.adj_r2 = 1.0 - (1.0 - r2) * (static_cast<double>(n) - 1.0) /
                           (static_cast<double>(n) - p - 1.0);
    return fit;
}

Eigen::MatrixXd design_matrix(const SampleDesign& design, bool quadratic, bool interactions) {
    const int n = design.n();
    const int d = design.dim;
    const int n_inter = interactions ? d * (d - 1) / 2 : 0;
    const int cols = 1 + d + (quadratic ? d : 0) + n_inter;
    Eigen::MatrixXd a(n, cols);
    a.col(0).setOnes();
    a.block(0, 1, n, d) = design.points;
    int c = 1 + d;
    if (quadratic) {
        a.block(0, c, n, d) = design.points.array().square().matrix();
        c += d;
    }
    if (interactions) {
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                a.col(c++) = design.points.col(i).cwiseProduct(design.points.col(j));
            }
        }
    }
    return a;
}

double quantile(Vec sorted, double p) {
    const std::size_t n = sorted.size();
    const double h = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - std::floor(h);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

// Greedy nearest-neighbor tour from a seeded start; ties to the lower index.
std::vector<int> nn_tour(const Eigen::MatrixXd& points, std::uint64_t seed) {
    const int n = static_cast<int>(points.rows());
    std::vector<int> tour;
    tour.reserve(static_cast<std::size_t>(n));
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    Rng rng(seed);
    int current = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
    tour.push_back(current);
    visited[static_cast<std::size_t>(current)] = 1;
    for (int step = 1; step < n; ++step) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (visited[static_cast<std::size_t>(j)]) continue;
            const double dist = (points.row(j) - points.row(current)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        current = best;
        tour.push_back(current);
        visited[static_cast<std::size_t>(current)] = 1;
    }
    return tour;
}

std::vector<int> symbol_sequence(const Vec& diffs, double eps) {
    std::vector<int> symbols(diffs.size());
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        symbols[i] = diffs[i] < -eps ? -1 : (diffs[i] > eps ? 1 : 0);
    }
    return symbols;
}

// Entropy over the six ordered pairs of differing consecutive symbols, log
// base 6, so H is always in [0, 1].
double block_entropy(const std::vector<int>& symbols) {
    if (symbols.size() < 2) return 0.0;
    std::array<std::array<double, 3>, 3> counts{};
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
        counts[static_cast<std::size_t>(symbols[i] + 1)][static_cast<std::size_t>(symbols[i + 1] + 1)] += 1.0;
    }
    const double total = static_cast<double>(symbols.size() - 1);
    double h = 0.0;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a == b) continue;
            const double p = counts[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] / total;
            if (p > 0.0) h -= p * std::log(p) / std::log(6.0);
        }
    }
    return h;
}

// Partial information: fraction of sign alternations after dropping zeros.
double partial_information(const std::vector<int>& symbols) {
    int last = 0;
    int changes = 0;
    for (int s : symbols) {
        if (s == 0) continue;
        if (last != 0 && s != last) ++changes;
        last = s;
    }
    return static_cast<double>(changes) / static_cast<double>(symbols.size());
}

}  // namespace

int resolved_samples(const ElaConfig& config, int dim) {
    int n = config.n_samples;
    if (n <= 0) n = std::min(config.samples_per_dim * dim, config.samples_cap);
    return std::max(n, 100);
}

SampleDesign sample_design(const Problem& instance, int n_samples, std::uint64_t seed) {
    if (n_samples < 50) throw std::invalid_argument("sample design requires n_samples >= 50");
    const int d = instance.dim();
    SampleDesign design;
    design.dim = d;
    design.seed = seed;
    design.points.resize(n_samples, d);
    Rng rng(seed);
    std::vector<int> perm(static_cast<std::size_t>(n_samples));
    const double width = (kDomainHi - kDomainLo) / static_cast<double>(n_samples);
    for (int k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        for (int i = 0; i < n_samples; ++i) {
            design.points(i, k) = kDomainLo + (static_cast<double>(perm[static_cast<std::size_t>(i)]) +
                                               rng.uniform()) * width;
        }
    }
    design.values.resize(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) {
        const Eigen::RowVectorXd row = design.points.row(i);
        const double v = instance.evaluate(std::span<const double>(row.data(), static_cast<std::size_t>(d)));
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "non-finite objective value at sample " << i << ": (";
            for (int k = 0; k < d; ++k) msg << (k ? ", " : "") << row(k);
            msg << ")";
            throw invalid_design_error(msg.str());
        }
        design.values[static_cast<std::size_t>(i)] = v;
    }
    return design;
}

std::array<double, 9> ela_meta(const SampleDesign& design) {
    const int n = design.n();
    const int d = design.dim;
    Eigen::Map<const Eigen::VectorXd> y(design.values.data(), n);

    const Fit lin = fit_least_squares(design_matrix(design, false, false), y);
    const Fit lin_i = fit_least_squares(design_matrix(design, false, true), y);
    const Fit quad = fit_least_squares(design_matrix(design, true, false), y);
    const Fit quad_i = fit_least_squares(design_matrix(design, true, true), y);

    const Eigen::VectorXd slopes = lin.beta.segment(1, d).cwiseAbs();
    const double coef_min = slopes.minCoeff();
    const double coef_max = slopes.maxCoeff();
    const Eigen::VectorXd quad_coefs = quad.beta.segment(1 + d, d).cwiseAbs();
    const double cond = quad_coefs.maxCoeff() / quad_coefs.minCoeff();

    return {lin.adj_r2,   lin.beta(0), coef_min, coef_max, coef_max / coef_min,
            lin_i.adj_r2, quad.adj_r2, quad_i.adj_r2, cond};
}

std::array<double, 4> ela_convexity(const Problem& instance, int n_pairs, std::uint64_t seed) {
    if (n_pairs < 100) throw std::invalid_argument("convexity probe requires n_pairs >= 100");
    const int d = instance.dim();
    Rng rng(seed);
    Vec xa(static_cast<std::size_t>(d)), xb(static_cast<std::size_t>(d)), xm(static_cast<std::size_t>(d));
    int n_convex = 0;
    int n_linear = 0;
    double dev_sum = 0.0;
    double dev_abs = 0.0;
    for (int it = 0; it < n_pairs; ++it) {
        for (auto& v : xa) v = rng.uniform(kDomainLo, kDomainHi);
        for (auto& v : xb) v = rng.uniform(kDomainLo, kDomainHi);
        const double lambda = rng.uniform();
        for (int k = 0; k < d; ++k) {
            xm[static_cast<std::size_t>(k)] = lambda * xa[static_cast<std::size_t>(k)] +
                                              (1.0 - lambda) * xb[static_cast<std::size_t>(k)];
        }
        const double fa = instance.evaluate(xa);
        const double fb = instance.evaluate(xb);
        const double fm = instance.evaluate(xm);
        if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm)) {
            throw invalid_design_error("non-finite value in convexity probe");
        }
        const double delta = fm - (lambda * fa + (1.0 - lambda) * fb);
        if (delta < -kConvTol) ++n_convex;
        if (std::abs(delta) <= kConvTol) ++n_linear;
        dev_sum += -delta;
        dev_abs += std::abs(delta);
    }
    const double total = static_cast<double>(n_pairs);
    return {static_cast<double>(n_convex) / total, static_cast<double>(n_linear) / total,
            dev_sum / total, dev_abs / total};
}

std::array<double, 5> ela_information_content(const SampleDesign& design, const Vec& eps_grid,
                                              std::uint64_t seed) {
    const int n = design.n();
    if (n < 100) throw std::invalid_argument("information content requires n >= 100");
    const std::vector<int> tour = nn_tour(design.points, seed);
    Vec diffs(static_cast<std::size_t>(n - 1));
    double max_abs = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        diffs[static_cast<std::size_t>(i)] = design.values[static_cast<std::size_t>(tour[static_cast<std::size_t>(i + 1)])] -
                                             design.values[static_cast<std::size_t>(tour[static_cast<std::size_t>(i)])];
        max_abs = std::max(max_abs, std::abs(diffs[static_cast<std::size_t>(i)]));
    }

    // Degenerate tour: no fitness change anywhere.
    if (max_abs <= kEpsGridMin) {
        return {0.0, kEpsGridMin, kEpsGridMin, kEpsGridMin, 0.0};
    }

    Vec grid = eps_grid;
    if (grid.empty()) {
        grid.resize(kEpsGridSize);
        const double log_lo = std::log10(kEpsGridMin);
        const double log_hi = std::log10(max_abs);
        for (int i = 0; i < kEpsGridSize; ++i) {
            grid[static_cast<std::size_t>(i)] =
                std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                    static_cast<double>(kEpsGridSize - 1));
        }
    }

    double h_max = 0.0;
    double eps_max = grid.front();
    double eps_s = grid.front();
    bool any_settle = false;
    const double m0 = partial_information(symbol_sequence(diffs, 0.0));
    double eps_ratio = grid.front();
    bool ratio_found = false;
    for (double eps : grid) {
        const auto symbols = symbol_sequence(diffs, eps);
        const double h = block_entropy(symbols);
        if (h > h_max) {
            h_max = h;
            eps_max = eps;
        }
        if (h > 0.05) {
            eps_s = eps;
            any_settle = true;
        }
        if (!ratio_found && m0 > 0.0 && partial_information(symbols) <= 0.5 * m0) {
            eps_ratio = eps;
            ratio_found = true;
        }
    }
    if (!any_settle) eps_s = grid.front();
    return {h_max, eps_s, eps_max, eps_ratio, m0};
}

std::array<double, 3> ela_distribution(const SampleDesign& design) {
    const std::size_t n = design.values.size();
    if (n < 4) throw std::invalid_argument("distribution features require n >= 4");
    const double nn = static_cast<double>(n);
    const double mean = std::accumulate(design.values.begin(), design.values.end(), 0.0) / nn;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : design.values) {
        const double t = v - mean;
        m2 += t * t;
        m3 += t * t * t;
        m4 += t * t * t * t;
    }
    m2 /= nn;
    m3 /= nn;
    m4 /= nn;
    if (m2 <= 0.0) throw degenerate_error("zero variance in objective values");

    const double skew = (m3 / std::pow(m2, 1.5)) * std::sqrt(nn * (nn - 1.0)) / (nn - 2.0);
    const double kurt = m4 / (m2 * m2);

    // KDE peak count with Silverman bandwidth on a fixed grid.
    Vec sorted = design.values;
    std::sort(sorted.begin(), sorted.end());
    const double sd = std::sqrt(m2 * nn / (nn - 1.0));
    const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.349) : sd;
    const double bw = 0.9 * spread * std::pow(nn, -0.2);
    const double lo = sorted.front() - 3.0 * bw;
    const double hi = sorted.back() + 3.0 * bw;
    Vec density(kKdeGridSize, 0.0);
    for (int i = 0; i < kKdeGridSize; ++i) {
        const double g = lo + (hi - lo) * static_cast<double>(i) / (kKdeGridSize - 1);
        double acc = 0.0;
        for (double v : sorted) {
            const double t = (g - v) / bw;
            acc += std::exp(-0.5 * t * t);
        }
        density[static_cast<std::size_t>(i)] = acc;
    }
    int peaks = 0;
    for (int i = 1; i + 1 < kKdeGridSize; ++i) {
        if (density[static_cast<std::size_t>(i)] > density[static_cast<std::size_t>(i - 1)] &&
            density[static_cast<std::size_t>(i)] > density[static_cast<std::size_t>(i + 1)]) {
            ++peaks;
        }
    }
    return {skew, kurt, static_cast<double>(std::max(peaks, 1))};
}

ElaVector compute_ela(const Problem& instance, const ElaConfig& config) {
    ElaVector out;
    try {
        const int n = resolved_samples(config, instance.dim());
        const SampleDesign design =
            sample_design(instance, n, seed_tag(config.seed, "ela-design"));
        const auto meta = ela_meta(design);
        const auto conv = ela_convexity(instance, config.n_pairs, seed_tag(config.seed, "ela-conv"));
        const auto ic = ela_information_content(design, {}, seed_tag(config.seed, "ela-ic"));
        const auto distr = ela_distribution(design);
        std::size_t k = 0;
        for (double v : meta) out.features[k++] = v;
        for (double v : conv) out.features[k++] = v;
        for (double v : ic) out.features[k++] = v;
        for (double v : distr) out.features[k++] = v;
        for (double v : out.features) {
            if (!std::isfinite(v)) throw degenerate_error("non-finite feature value");
        }
        out.valid = true;
    } catch (const std::exception& e) {
        out.valid = false;
        out.error = e.what();
    }
    return out;
}

std::vector<ElaVector> compute_ela_batch(const std::vector<const Problem*>& instances,
                                         const ElaConfig& config, int workers) {
    std::vector<ElaVector> out(instances.size());
    par::for_each_index(instances.size(), workers,
                        [&](std::size_t i) { out[i] = compute_ela(*instances[i], config); });
    return out;
}

void write_csv(std::ostream& os, const std::vector<std::string>& ids,
               const std::vector<ElaVector>& vectors) {
    if (ids.size() != vectors.size()) throw std::invalid_argument("id/vector count mismatch");
    os << "instance_id";
    for (const char* name : kFeatureNames) os << "," << name;
    os << "\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        os << ids[i];
        for (double v : vectors[i].features) os << "," << v;
        os << "\n";
    }
}

std::pair<std::vector<std::string>, std::vector<std::array<double, kFeatureCount>>> read_csv(
    std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw config_error("empty ELA csv");
    std::vector<std::string> ids;
    std::vector<std::array<double, kFeatureCount>> rows;
    std::vector<std::size_t> bad_rows;
    std::size_t row_number = 1;
    while (std::getline(is, line)) {
        ++row_number;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != kFeatureCount + 1) {
            bad_rows.push_back(row_number);
            continue;
        }
        std::array<double, kFeatureCount> row{};
        bool ok = true;
        for (int k = 0; k < kFeatureCount; ++k) {
            try {
                row[static_cast<std::size_t>(k)] = std::stod(cells[static_cast<std::size_t>(k + 1)]);
            } catch (const std::exception&) {
                ok = false;
                break;
            }
            if (!std::isfinite(row[static_cast<std::size_t>(k)])) {
                ok = false;
                break;
            }
        }
        if (!ok) {
            bad_rows.push_back(row_number);
            continue;
        }
        ids.push_back(cells[0]);
        rows.push_back(row);
    }
    if (!bad_rows.empty()) {
        std::string msg = "invalid ELA csv rows:";
        for (std::size_t r : bad_rows) msg += " " + std::to_string(r);
        throw config_error(msg);
    }
    return {std::move(ids), std::move(rows)};
}

}  // namespace lsre::ela
