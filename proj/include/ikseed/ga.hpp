#pragma once

// Real-valued elitist genetic algorithm.
//
// Each generation keeps the `parents` fittest finite genes unchanged and fills
// the rest of the population with children of two uniformly drawn parents:
// uniform crossover, then per-variable gaussian mutation, clamped to range.
// All random draws happen on the calling thread in a fixed order; fitness
// evaluation may run in parallel but results are gathered by gene index.

#include "ikseed/errors.hpp"
#include "ikseed/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace ikseed {

struct GeneRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct GAParams {
  std::size_t population = 50;
  std::size_t parents = 10;
  std::size_t max_generations = 300;
  std::size_t stagnation = 100;
  double mutation_probability = 0.1;
  double mutation_sigma = 0.05;  // fraction of each variable's range
  std::size_t init_retries = 10;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (population < 2) throw ValidationError("GA population must be at least 2");
    if (parents < 1 || parents >= population) throw ValidationError("GA parents must be in [1, population)");
    if (stagnation < 1) throw ValidationError("GA stagnation window must be positive");
    if (mutation_probability < 0.0 || mutation_probability > 1.0)
      throw ValidationError("GA mutation probability must be in [0, 1]");
    if (mutation_sigma < 0.0) throw ValidationError("GA mutation sigma must be non-negative");
  }
};

using Gene = std::vector<double>;

struct GAResult {
  Gene best_gene;
  double best_fitness = -std::numeric_limits<double>::infinity();
  /// Best fitness and gene of each generation; index 0 is the initial population.
  std::vector<double> fitness_history;
  std::vector<Gene> gene_history;
  /// Generation at which best_fitness was first reached.
  std::size_t best_generation = 0;
  std::size_t generations() const { return fitness_history.size(); }
};

/// Maximizes fitness(gene). Genes with fitness -inf are infeasible.
template <typename Fitness>
GAResult evolve(const std::vector<GeneRange>& ranges, const GAParams& params, Fitness&& fitness,
                unsigned threads = 1) {
  params.validate();
  if (ranges.empty()) throw ValidationError("GA needs at least one gene variable");
  for (const auto& r : ranges)
    if (!(r.lo < r.hi)) throw ValidationError("gene ranges need lo < hi");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t nvar = ranges.size();

  auto evaluate = [&](const std::vector<Gene>& genes, std::vector<double>& out, std::size_t from) {
    parallel_for(genes.size() - from, threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const double f = fitness(genes[from + i]);
        out[from + i] = std::isnan(f) ? kNegInf : f;
      }
    });
  };

  std::vector<Gene> pop(params.population, Gene(nvar));
  std::vector<double> fit(params.population, kNegInf);
  bool feasible = false;
  for (std::size_t round = 0; round < params.init_retries && !feasible; ++round) {
    for (auto& g : pop)
      for (std::size_t v = 0; v < nvar; ++v) g[v] = ranges[v].lo + unit(rng) * (ranges[v].hi - ranges[v].lo);
    evaluate(pop, fit, 0);
    feasible = std::any_of(fit.begin(), fit.end(), [](double f) { return f > kNegInf; });
  }
  if (!feasible) throw InfeasibleError("scenario infeasible: no gene reached every goal after initialization retries");

  GAResult result;
  std::size_t since_improvement = 0;
  for (std::size_t gen = 0;; ++gen) {
    // stable sort by descending fitness
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });

    const double best = fit[order[0]];
    if (gen == 0 || best > result.best_fitness) {
      result.best_fitness = best;
      result.best_gene = pop[order[0]];
      result.best_generation = gen;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    result.fitness_history.push_back(result.best_fitness);
    result.gene_history.push_back(result.best_gene);

    if (gen >= params.max_generations || since_improvement >= params.stagnation) break;

    // elites: top `parents` genes with finite fitness
    std::vector<Gene> next;
    std::vector<double> next_fit;
    for (std::size_t k = 0; k < params.parents && k < order.size(); ++k) {
      if (!(fit[order[k]] > kNegInf)) break;
      next.push_back(pop[order[k]]);
      next_fit.push_back(fit[order[k]]);
    }
    const std::size_t n_parents = next.size();
    std::uniform_int_distribution<std::size_t> pick(0, n_parents - 1);
    while (next.size() < params.population) {
      const Gene& a = next[pick(rng)];
      const Gene& b = next[pick(rng)];
      Gene child(nvar);
      for (std::size_t v = 0; v < nvar; ++v) {
        child[v] = unit(rng) < 0.5 ? a[v] : b[v];
        if (unit(rng) < params.mutation_probability) {
          const double span = ranges[v].hi - ranges[v].lo;
          child[v] = std::clamp(child[v] + normal(rng) * params.mutation_sigma * span, ranges[v].lo, ranges[v].hi);
        }
      }
      next.push_back(std::move(child));
      next_fit.push_back(kNegInf);
    }
    evaluate(next, next_fit, n_parents);
    pop = std::move(next);
    fit = std::move(next_fit);
  }
  return result;
}

}  // namespace ikseed
