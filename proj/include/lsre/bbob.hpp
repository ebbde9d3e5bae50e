#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lsre/common.hpp"

namespace lsre::bbob {

inline constexpr int kFunctionCount = 24;

// Raw mathematical form of base function `id` (1..24), evaluated at x with
// no rotation or shift applied. The multi-peak functions derive their
// internal structure from a frozen seed, so every id is a fixed function.
double evaluate_base(int id, std::span<const double> x);

std::string function_name(int id);

// Canonical optimum of the raw form; the value is 0 for every id.
Vec base_optimum_point(int id, int dim);
double base_optimum_value(int id, int dim);

// f'(x) = f(R^T (x - s)) with R a seeded random rotation and s a seeded
// shift in [-4, 4]^d. Immutable after construction.
class TransformedInstance : public Problem {
public:
    TransformedInstance(int base, int dim, std::uint64_t seed);

    // R = I, s = 0; used by tests and identity probes.
    static TransformedInstance identity(int base, int dim);

    int base() const { return base_; }
    int dim() const override { return dim_; }
    std::uint64_t seed() const { return seed_; }
    bool is_identity() const { return identity_; }
    const Eigen::MatrixXd& rotation() const { return rotation_; }
    const Eigen::VectorXd& shift() const { return shift_; }

    double evaluate(std::span<const double> x) const override;

    // The transformed optimum point s + R x*; its value is always 0.
    Vec optimum_point() const;
    // Exposed only when the transformed optimum lies inside [-5, 5]^d.
    std::optional<double> known_optimum() const override;

    std::string id() const override;

private:
    TransformedInstance() = default;

    int base_ = 1;
    int dim_ = 2;
    std::uint64_t seed_ = 0;
    bool identity_ = false;
    Eigen::MatrixXd rotation_;
    Eigen::VectorXd shift_;
};

struct DistributionSpec {
    std::vector<int> dims;
    int instances_per_function = 1;
    std::uint64_t master_seed = 0;

    std::size_t total_instances() const {
        return static_cast<std::size_t>(kFunctionCount) * dims.size() *
               static_cast<std::size_t>(instances_per_function);
    }
};

// Deterministic instance seed for slot (base, dim, index) under a master seed.
std::uint64_t instance_seed(std::uint64_t master_seed, int base, int dim, int index);

// Enumerates dims x bases x indices in that nesting order.
std::vector<TransformedInstance> build_distribution(const DistributionSpec& spec);

// Manifest rows are {base_id, dim, seed}; R and s are always re-derived.
std::string manifest_to_json(const std::vector<TransformedInstance>& instances);
std::vector<TransformedInstance> manifest_from_json(const std::string& json_text);

}  // namespace lsre::bbob
