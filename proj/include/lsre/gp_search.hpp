#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lsre/autoencoder.hpp"
#include "lsre/common.hpp"
#include "lsre/ela.hpp"
#include "lsre/symbolic.hpp"

namespace lsre::gp {

struct GPConfig {
    int pop_size = 1000;
    int generations = 50;
    int tournament_size = 50;
    double stopping_criteria = 1e-2;  // non-finite or <= 0 disables early stop
    double p_crossover = 0.60;
    double p_subtree_mutation = 0.25;
    double p_point_mutation = 0.10;
    double p_hoist_mutation = 0.04;
    double p_reproduce = 0.01;
    int init_depth_lo = 5;
    int init_depth_hi = 8;
    int mutate_depth_lo = 5;
    int mutate_depth_hi = 15;
    int max_depth = sym::kMaxDepth;
    int eval_workers = 10;
    std::vector<int> local_search_dims = {2, 5, 10};
    bool local_search_enabled = true;
    bool generational_replacement = false;  // ablation switch; default is per-slot elitism
    std::uint64_t seed = 0;
    ela::ElaConfig ela;

    void validate() const;
};

struct Individual {
    sym::ExprTree tree;
    int dim = 2;
    double objective = std::numeric_limits<double>::infinity();
    bool ela_valid = false;
};

struct SearchTarget {
    std::array<double, 2> h{0.0, 0.0};
    int target_id = 0;
};

// 1/2 * ||W_theta(E_tau) - h||_2 with a deterministic ELA seed derived from
// (config seed, target id, tree hash, dim). Invalid ELA yields +inf.
double objective(const sym::ExprTree& tree, int dim, const SearchTarget& target,
                 const ae::Model& model, const GPConfig& config);

// Minimum objective over k uniform samples drawn with replacement; ties go to
// the smaller tree, then the lower population index. `exhaustive` scans the
// whole population instead of sampling.
std::size_t tournament_select(const std::vector<Individual>& population, int k, Rng& rng,
                              bool exhaustive = false);

enum class ReproOp { kCrossover, kSubtreeMutation, kPointMutation, kHoistMutation, kReproduce };

struct Offspring {
    sym::ExprTree tree;
    ReproOp applied = ReproOp::kReproduce;
};

using DonorFn = std::function<const sym::ExprTree&()>;

// Draws one of the five operators at the configured rates. Offspring that
// break the depth bound or lose every variable operand are retried up to five
// times, after which the parent is copied.
Offspring roulette_reproduction(const sym::ExprTree& parent, const DonorFn& donor,
                                const GPConfig& config, Rng& rng);

// Evaluates the tree at every configured dimension and keeps the best; ties go
// to the smaller dimension. With local search disabled only the first listed
// dimension is evaluated.
Individual cross_dimension_local_search(const sym::ExprTree& tree, const SearchTarget& target,
                                        const ae::Model& model, const GPConfig& config);

struct SearchResult {
    Individual best;
    Vec trace;  // best objective after initialization and after each generation
    std::uint64_t evaluations = 0;
    double wall_seconds = 0.0;
    int generations_run = 0;
};

using ProgressFn = std::function<void(int generation, double best_objective)>;

struct SearchHooks {
    ProgressFn progress;
    std::string checkpoint_path;  // per-generation checkpoint + resume when non-empty
};

SearchResult gp_search(const SearchTarget& target, const ae::Model& model, const GPConfig& config,
                       const SearchHooks& hooks = {});

std::string search_result_json(const SearchTarget& target, const SearchResult& result);

}  // namespace lsre::gp
