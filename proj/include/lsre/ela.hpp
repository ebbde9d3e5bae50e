#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsre/common.hpp"

namespace lsre::ela {

inline constexpr int kFeatureCount = 21;

// Fixed feature order: ela_meta (9), ela_conv (4), ic (5), ela_distr (3).
extern const std::array<const char*, kFeatureCount> kFeatureNames;

struct SampleDesign {
    Eigen::MatrixXd points;  // n x d, inside [-5, 5]^d
    Vec values;              // n finite objective values
    int dim = 0;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(points.rows()); }
};

struct ElaConfig {
    int n_samples = 0;  // 0 => samples_per_dim * d capped at samples_cap
    int samples_per_dim = 250;
    int samples_cap = 2500;
    int n_pairs = 1000;
    std::uint64_t seed = 0;
};

int resolved_samples(const ElaConfig& config, int dim);

struct ElaVector {
    std::array<double, kFeatureCount> features{};
    bool valid = false;
    std::string error;
};

// Latin hypercube design over [-5, 5]^d, evaluated on the instance.
// Throws invalid_design_error when any value is non-finite.
SampleDesign sample_design(const Problem& instance, int n_samples, std::uint64_t seed);

// Meta-model features: adjusted R^2 of four least-squares fits plus the
// linear model's intercept / coefficient statistics and the pure-quadratic
// condition (max |quad coef| / min |quad coef|).
std::array<double, 9> ela_meta(const SampleDesign& design);

// Convexity probe over n_pairs random segment midpoints.
std::array<double, 4> ela_convexity(const Problem& instance, int n_pairs, std::uint64_t seed);

// Information content of the fitness sequence along a nearest-neighbor tour.
// An empty eps_grid selects the default 200-point log grid.
std::array<double, 5> ela_information_content(const SampleDesign& design, const Vec& eps_grid,
                                              std::uint64_t seed);

// Value-distribution features: bias-corrected skewness, kurtosis (m4/m2^2,
// normal = 3) and the KDE peak count.
std::array<double, 3> ela_distribution(const SampleDesign& design);

ElaVector compute_ela(const Problem& instance, const ElaConfig& config);

// Batch kernel; workers <= 1 runs the serial reference path.
std::vector<ElaVector> compute_ela_batch(const std::vector<const Problem*>& instances,
                                         const ElaConfig& config, int workers);

void write_csv(std::ostream& os, const std::vector<std::string>& ids,
               const std::vector<ElaVector>& vectors);
// Returns (ids, feature rows); throws config_error listing bad row numbers.
std::pair<std::vector<std::string>, std::vector<std::array<double, kFeatureCount>>> read_csv(
    std::istream& is);

}  // namespace lsre::ela
