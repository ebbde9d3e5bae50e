#include "lsre/gp_search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "lsre/parallel.hpp"

namespace lsre::gp {
namespace {

using json = nlohmann::ordered_json;

constexpr int kReproductionRetries = 5;

bool offspring_ok(const sym::ExprTree& tree, const GPConfig& config) {
    return tree.depth() <= config.max_depth && tree.has_variable();
}

sym::ExprTree point_mutated(const sym::ExprTree& tree, Rng& rng) {
    auto genes = tree.genes();
    const std::size_t i = rng.index(genes.size());
    sym::Gene& g = genes[i];
    if (g.arity == 0) {
        const std::size_t pick = rng.index(4);
        if (pick == 3) {
            const auto c = sym::ConstantSpec::random(rng);
            g = sym::Gene{sym::Op::kConst, 0, static_cast<std::int8_t>(c.mantissa),
                          static_cast<std::int8_t>(c.exponent)};
        } else {
            static const std::array<sym::Op, 3> vars = {sym::Op::kX, sym::Op::kXa, sym::Op::kXb};
            g = sym::Gene{vars[pick], 0, 0, 0};
        }
    } else if (g.arity == 1) {
        static const std::array<sym::Op, 10> unary = {
            sym::Op::kNeg, sym::Op::kSin, sym::Op::kCos, sym::Op::kAbs, sym::Op::kTanh,
            sym::Op::kExp, sym::Op::kLog, sym::Op::kSqrt, sym::Op::kSum, sym::Op::kMean};
        g.op = unary[rng.index(unary.size())];
        g.mantissa = 0;
        g.exponent = 0;
    } else {
        static const std::array<sym::Op, 7> binary = {
            sym::Op::kAdd, sym::Op::kSub, sym::Op::kMul, sym::Op::kDiv,
            sym::Op::kPow, sym::Op::kSum, sym::Op::kMean};
        g.op = binary[rng.index(binary.size())];
        g.mantissa = 0;
        g.exponent = 0;
    }
    return sym::ExprTree(std::move(genes));
}

}  // namespace

void GPConfig::validate() const {
    const double psum = p_crossover + p_subtree_mutation + p_point_mutation + p_hoist_mutation + p_reproduce;
    if (std::abs(psum - 1.0) > 1e-9) {
        throw config_error("reproduction probabilities must sum to 1, got " + std::to_string(psum));
    }
    if (pop_size < 1 || pop_size < tournament_size) {
        throw config_error("pop_size must be >= tournament_size >= 1");
    }
    if (init_depth_lo < 1 || init_depth_hi < init_depth_lo || init_depth_hi > max_depth ||
        mutate_depth_lo < 1 || mutate_depth_hi < mutate_depth_lo || mutate_depth_hi > max_depth ||
        max_depth > sym::kMaxDepth) {
        throw config_error("invalid depth configuration");
    }
    if (local_search_dims.empty()) throw config_error("local_search_dims must be non-empty");
    for (int d : local_search_dims) {
        if (d < 2) throw config_error("local search dimensions must be >= 2");
    }
    if (generations < 0 || eval_workers < 1) throw config_error("invalid generations/eval_workers");
}

double objective(const sym::ExprTree& tree, int dim, const SearchTarget& target,
                 const ae::Model& model, const GPConfig& config) {
    if (dim < 2) throw std::invalid_argument("objective dim must be >= 2");
    ela::ElaConfig ec = config.ela;
    ec.seed = seed_combine(config.seed, static_cast<std::uint64_t>(target.target_id), tree.hash(),
                           static_cast<std::uint64_t>(dim));
    const sym::TreeProblem problem(tree, dim);
    const ela::ElaVector e = ela::compute_ela(problem, ec);
    if (!e.valid) return std::numeric_limits<double>::infinity();
    const auto h = model.encode(e.features);
    const double dx = h[0] - target.h[0];
    const double dy = h[1] - target.h[1];
    return 0.5 * std::sqrt(dx * dx + dy * dy);
}

std::size_t tournament_select(const std::vector<Individual>& population, int k, Rng& rng,
                              bool exhaustive) {
    if (population.empty()) throw std::invalid_argument("empty population");
    const auto better = [&population](std::size_t a, std::size_t b) {
        const Individual& ia = population[a];
        const Individual& ib = population[b];
        if (ia.objective != ib.objective) return ia.objective < ib.objective;
        if (ia.tree.size() != ib.tree.size()) return ia.tree.size() < ib.tree.size();
        return a < b;
    };
    if (exhaustive) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < population.size(); ++i) {
            if (better(i, best)) best = i;
        }
        return best;
    }
    std::size_t best = rng.index(population.size());
    for (int draw = 1; draw < k; ++draw) {
        const std::size_t cand = rng.index(population.size());
        if (better(cand, best)) best = cand;
    }
    return best;
}

Offspring roulette_reproduction(const sym::ExprTree& parent, const DonorFn& donor,
                                const GPConfig& config, Rng& rng) {
    const double u = rng.uniform();
    ReproOp op;
    if (u < config.p_crossover) {
        op = ReproOp::kCrossover;
    } else if (u < config.p_crossover + config.p_subtree_mutation) {
        op = ReproOp::kSubtreeMutation;
    } else if (u < config.p_crossover + config.p_subtree_mutation + config.p_point_mutation) {
        op = ReproOp::kPointMutation;
    } else if (u < config.p_crossover + config.p_subtree_mutation + config.p_point_mutation +
                       config.p_hoist_mutation) {
        op = ReproOp::kHoistMutation;
    } else {
        op = ReproOp::kReproduce;
    }

    if (op == ReproOp::kReproduce) return {parent, ReproOp::kReproduce};

    for (int attempt = 0; attempt < kReproductionRetries; ++attempt) {
        sym::ExprTree child = parent;
        switch (op) {
            case ReproOp::kCrossover: {
                const sym::ExprTree& d = donor();
                const std::size_t i = rng.index(parent.size());
                const std::size_t j = rng.index(d.size());
                child = parent.with_replaced_subtree(i, d.subtree(j));
                break;
            }
            case ReproOp::kSubtreeMutation: {
                const std::size_t i = rng.index(parent.size());
                const sym::ExprTree fresh =
                    sym::random_tree(config.mutate_depth_lo, config.mutate_depth_hi, rng);
                child = parent.with_replaced_subtree(i, fresh);
                break;
            }
            case ReproOp::kPointMutation:
                child = point_mutated(parent, rng);
                break;
            case ReproOp::kHoistMutation: {
                const std::size_t i = rng.index(parent.size());
                const sym::ExprTree sub = parent.subtree(i);
                const std::size_t j = rng.index(sub.size());
                child = parent.with_replaced_subtree(i, sub.subtree(j));
                break;
            }
            case ReproOp::kReproduce:
                break;
        }
        if (offspring_ok(child, config)) return {std::move(child), op};
    }
    return {parent, ReproOp::kReproduce};
}

Individual cross_dimension_local_search(const sym::ExprTree& tree, const SearchTarget& target,
                                        const ae::Model& model, const GPConfig& config) {
    Individual best;
    best.tree = tree;
    bool first = true;
    const std::size_t n_dims = config.local_search_enabled ? config.local_search_dims.size() : 1;
    for (std::size_t k = 0; k < n_dims; ++k) {
        const int dim = config.local_search_dims[k];
        const double obj = objective(tree, dim, target, model, config);
        if (first || obj < best.objective ||
            (obj == best.objective && dim < best.dim)) {
            best.dim = dim;
            best.objective = obj;
            first = false;
        }
    }
    best.ela_valid = std::isfinite(best.objective);
    return best;
}

namespace {

struct Checkpoint {
    int generation = -1;
    std::string rng_state;
    std::vector<Individual> population;
    Vec trace;
    std::uint64_t evaluations = 0;

    json to_json() const {
        json doc;
        doc["generation"] = generation;
        doc["rng_state"] = rng_state;
        doc["trace"] = trace;
        doc["evaluations"] = evaluations;
        json pop = json::array();
        for (const auto& ind : population) {
            pop.push_back({{"tree", ind.tree.serialize()},
                           {"dim", ind.dim},
                           {"objective", ind.ela_valid ? json(ind.objective) : json("inf")},
                           {"ela_valid", ind.ela_valid}});
        }
        doc["population"] = std::move(pop);
        return doc;
    }

    static Checkpoint from_json(const json& doc) {
        Checkpoint c;
        c.generation = doc.at("generation").get<int>();
        c.rng_state = doc.at("rng_state").get<std::string>();
        c.trace = doc.at("trace").get<Vec>();
        c.evaluations = doc.at("evaluations").get<std::uint64_t>();
        for (const auto& row : doc.at("population")) {
            Individual ind;
            ind.tree = sym::ExprTree::parse(row.at("tree").get<std::string>());
            ind.dim = row.at("dim").get<int>();
            ind.ela_valid = row.at("ela_valid").get<bool>();
            ind.objective = ind.ela_valid ? row.at("objective").get<double>()
                                          : std::numeric_limits<double>::infinity();
            c.population.push_back(std::move(ind));
        }
        return c;
    }
};

std::size_t best_index(const std::vector<Individual>& population) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < population.size(); ++i) {
        const auto& a = population[i];
        const auto& b = population[best];
        if (a.objective < b.objective ||
            (a.objective == b.objective && a.tree.size() < b.tree.size())) {
            best = i;
        }
    }
    return best;
}

bool early_stop(double best, double threshold) {
    return std::isfinite(threshold) && threshold > 0.0 && best <= threshold;
}

}  // namespace

SearchResult gp_search(const SearchTarget& target, const ae::Model& model, const GPConfig& config,
                       const SearchHooks& hooks) {
    config.validate();
    if (!model.initialized()) throw config_error("gp_search requires a trained model");
    const auto t0 = std::chrono::steady_clock::now();

    const auto n = static_cast<std::size_t>(config.pop_size);
    Rng rng(seed_tag(config.seed, "gp"));
    std::vector<Individual> population(n);
    SearchResult result;
    int start_generation = 1;

    const auto save_checkpoint = [&](int generation) {
        if (hooks.checkpoint_path.empty()) return;
        Checkpoint c;
        c.generation = generation;
        c.rng_state = rng.save_state();
        c.population = population;
        c.trace = result.trace;
        c.evaluations = result.evaluations;
        std::ofstream os(hooks.checkpoint_path);
        os << c.to_json().dump();
    };

    bool resumed = false;
    if (!hooks.checkpoint_path.empty() && std::filesystem::exists(hooks.checkpoint_path)) {
        std::ifstream is(hooks.checkpoint_path);
        const Checkpoint c = Checkpoint::from_json(json::parse(is));
        if (c.population.size() == n) {
            population = c.population;
            result.trace = c.trace;
            result.evaluations = c.evaluations;
            rng.load_state(c.rng_state);
            start_generation = c.generation + 1;
            result.generations_run = c.generation;
            resumed = true;
        }
    }

    const std::size_t dims_per_eval = config.local_search_enabled ? config.local_search_dims.size() : 1;

    if (!resumed) {
        std::vector<sym::ExprTree> trees(n);
        for (auto& t : trees) t = sym::random_tree(config.init_depth_lo, config.init_depth_hi, rng);
        par::for_each_index(n, config.eval_workers, [&](std::size_t i) {
            population[i] = cross_dimension_local_search(trees[i], target, model, config);
        });
        result.evaluations += n * dims_per_eval;
        result.trace.push_back(population[best_index(population)].objective);
        if (hooks.progress) hooks.progress(0, result.trace.back());
        save_checkpoint(0);
    }

    if (!early_stop(result.trace.back(), config.stopping_criteria)) {
        for (int g = start_generation; g <= config.generations; ++g) {
            // Selection and reproduction run on the coordinator so the RNG
            // stream is independent of worker scheduling.
            std::vector<sym::ExprTree> offspring(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t p = tournament_select(population, config.tournament_size, rng);
                const DonorFn donor = [&]() -> const sym::ExprTree& {
                    return population[tournament_select(population, config.tournament_size, rng)].tree;
                };
                offspring[i] = roulette_reproduction(population[p].tree, donor, config, rng).tree;
            }
            std::vector<Individual> evaluated(n);
            par::for_each_index(n, config.eval_workers, [&](std::size_t i) {
                evaluated[i] = cross_dimension_local_search(offspring[i], target, model, config);
            });
            result.evaluations += n * dims_per_eval;
            for (std::size_t i = 0; i < n; ++i) {
                if (config.generational_replacement || evaluated[i].objective <= population[i].objective) {
                    population[i] = std::move(evaluated[i]);
                }
            }
            result.trace.push_back(population[best_index(population)].objective);
            result.generations_run = g;
            if (hooks.progress) hooks.progress(g, result.trace.back());
            save_checkpoint(g);
            if (early_stop(result.trace.back(), config.stopping_criteria)) break;
        }
    }

    result.best = population[best_index(population)];
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::string search_result_json(const SearchTarget& target, const SearchResult& result) {
    json doc;
    doc["target_id"] = target.target_id;
    doc["h"] = {target.h[0], target.h[1]};
    doc["best_tree"] = result.best.tree.serialize();
    doc["best_dim"] = result.best.dim;
    doc["best_objective"] =
        result.best.ela_valid ? json(result.best.objective) : json("inf");
    doc["trace"] = result.trace;
    doc["evaluations_used"] = result.evaluations;
    doc["wall_time"] = result.wall_seconds;
    return doc.dump(2);
}

}  // namespace lsre::gp
