#pragma once

// Variable-length differential evolution (rand/1/bin with trimming) plus a
// cut-and-swap second crossover that lets genome lengths drift.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "decnn/errors.hpp"
#include "decnn/types.hpp"

namespace decnn {

using Rng = std::mt19937_64;

struct EvolutionConfig {
  std::size_t population_size = 30;
  std::size_t generations = 20;
  double F = 0.6;           // differential rate
  double Cr = 0.45;         // crossover rate
  double mu = 10.0;         // initial length centre
  double sigma = 1.0;       // initial length std
  double rho = 2.0;         // second-crossover cut std
  std::size_t min_length = 1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;  // concurrent fitness evaluations

  void validate() const {
    if (population_size < 4) throw ConfigError("population_size must be >= 4");
    if (!(F > 0.0)) throw ConfigError("F must be > 0");
    if (!(Cr >= 0.0 && Cr <= 1.0)) throw ConfigError("Cr must lie in [0, 1]");
    if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
    if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
    if (min_length < 1) throw ConfigError("min_length must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

template <class E>
concept Evaluator = requires(const E& e, const Genome& g) {
  { e(g) } -> std::convertible_to<FitnessReport>;
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double mean_length = 0.0;
  Genome best_genome;
};

/// Record 0 describes the evaluated initial population; record g the population
/// after generation g.
struct EvolutionTrace {
  std::vector<GenerationRecord> records;
};

struct EvolutionResult {
  Individual best;
  EvolutionTrace trace;
  std::vector<Individual> population;
};

// ---------------------------------------------------------------------------
// Operators

inline std::size_t sample_length(double mu, double sigma, std::size_t min_length, Rng& rng) {
  std::normal_distribution<double> gauss(mu, sigma);
  const double draw = std::round(gauss(rng));
  if (draw < static_cast<double>(min_length)) return min_length;
  return static_cast<std::size_t>(draw);
}

inline Genome random_genome(std::size_t length, Rng& rng) {
  std::uniform_real_distribution<double> dim(kDimMin, kDimMax);
  Genome g;
  g.dims.resize(length);
  for (auto& d : g.dims) d = dim(rng);
  return g;
}

inline std::vector<Individual> init_population(const EvolutionConfig& config, Rng& rng) {
  std::vector<Individual> pop;
  pop.reserve(config.population_size);
  for (std::size_t i = 0; i < config.population_size; ++i) {
    const std::size_t len = sample_length(config.mu, config.sigma, config.min_length, rng);
    pop.push_back({random_genome(len, rng), std::nullopt});
  }
  return pop;
}

/// v = x_r0 + F (x_r1 - x_r2) over the common prefix of the three donors.
inline Genome mutate(const Genome& x_r0, const Genome& x_r1, const Genome& x_r2, double F) {
  const std::size_t len = std::min({x_r0.size(), x_r1.size(), x_r2.size()});
  Genome v;
  v.dims.resize(len);
  for (std::size_t j = 0; j < len; ++j) v[j] = clamp_dim(x_r0[j] + F * (x_r1[j] - x_r2[j]));
  return v;
}

/// Binomial crossover with the trial trimmed to the parent's length. Positions
/// the (shorter) trial does not cover keep the parent's value.
inline Genome de_crossover(const Genome& parent, const Genome& trial, double Cr, Rng& rng) {
  const std::size_t len = parent.size();
  if (len == 0) return parent;
  std::uniform_int_distribution<std::size_t> pick(0, len - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t j_rand = pick(rng);
  Genome u = parent;
  for (std::size_t j = 0; j < len; ++j) {
    const bool cross = unit(rng) < Cr || j == j_rand;
    if (cross && j < trial.size()) u[j] = clamp_dim(trial[j]);
  }
  return u;
}

/// Higher fitness wins; the trial wins ties.
inline const Individual& de_select(const Individual& parent, const Individual& trial) {
  if (!parent.fitness || !trial.fitness) throw ContractError("de_select on unevaluated individual");
  return *trial.fitness >= *parent.fitness ? trial : parent;
}

inline std::pair<Genome, Genome> second_crossover_at(const Genome& p1, const Genome& p2,
                                                     std::size_t cut1, std::size_t cut2) {
  if (cut1 > p1.size() || cut2 > p2.size()) throw ContractError("cut point beyond genome");
  Genome c1, c2;
  c1.dims.reserve(cut1 + p2.size() - cut2);
  c2.dims.reserve(cut2 + p1.size() - cut1);
  c1.dims.insert(c1.dims.end(), p1.dims.begin(), p1.dims.begin() + cut1);
  c1.dims.insert(c1.dims.end(), p2.dims.begin() + cut2, p2.dims.end());
  c2.dims.insert(c2.dims.end(), p2.dims.begin(), p2.dims.begin() + cut2);
  c2.dims.insert(c2.dims.end(), p1.dims.begin() + cut1, p1.dims.end());
  return {std::move(c1), std::move(c2)};
}

/// Gaussian cut around the middle of a genome, kept strictly inside it.
inline std::size_t sample_cut(std::size_t length, double rho, Rng& rng) {
  std::normal_distribution<double> gauss(static_cast<double>(length) / 2.0, rho);
  const double cut = std::round(gauss(rng));
  return static_cast<std::size_t>(std::clamp(cut, 1.0, static_cast<double>(length - 1)));
}

inline std::pair<Genome, Genome> second_crossover(const Genome& p1, const Genome& p2, double rho,
                                                  Rng& rng) {
  if (p1.size() < 2 || p2.size() < 2)
    throw ContractError("second_crossover needs both parents of length >= 2");
  const std::size_t cut1 = sample_cut(p1.size(), rho, rng);
  const std::size_t cut2 = sample_cut(p2.size(), rho, rng);
  return second_crossover_at(p1, p2, cut1, cut2);
}

/// Best two of {p1, p2, c1, c2}, best first. Ties prefer children, then the
/// earlier argument.
inline std::pair<Individual, Individual> second_selection(const Individual& p1,
                                                          const Individual& p2,
                                                          const Individual& c1,
                                                          const Individual& c2) {
  const std::array<const Individual*, 4> order{&c1, &c2, &p1, &p2};
  for (const auto* ind : order)
    if (!ind->fitness) throw ContractError("second_selection on unevaluated individual");
  std::array<std::size_t, 4> rank{0, 1, 2, 3};
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return *order[a]->fitness > *order[b]->fitness;
  });
  return {*order[rank[0]], *order[rank[1]]};
}

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluates every genome, optionally on several threads. Result i belongs to
/// genome i regardless of scheduling. The first failing genome (by index) is
/// rethrown with `context(i)` prepended.
template <Evaluator E>
std::vector<FitnessReport> evaluate_all(const E& evaluator, std::span<const Genome* const> genomes,
                                        std::size_t workers,
                                        const std::function<std::string(std::size_t)>& context) {
  const std::size_t n = genomes.size();
  std::vector<FitnessReport> reports(n);
  std::vector<std::exception_ptr> errors(n);

  const auto run_one = [&](std::size_t i) {
    try {
      FitnessReport r = evaluator(*genomes[i]);
      if (!std::isfinite(r.fitness) || r.fitness < 0.0 || r.fitness > 1.0)
        throw EvaluationError("fitness " + std::to_string(r.fitness) + " outside [0, 1]");
      reports[i] = std::move(r);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t threads = std::min(workers, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_one(i);
      });
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw EvaluationError(context(i) + ": " + e.what());
    }
  }
  return reports;
}

namespace detail {

inline std::string genome_text(const Genome& g) {
  std::string s = "[";
  for (const auto& ip : to_ip_list(g)) {
    if (s.size() > 1) s += ' ';
    s += ip;
  }
  return s + "]";
}

inline GenerationRecord summarize(std::size_t generation, const std::vector<Individual>& pop) {
  GenerationRecord rec;
  rec.generation = generation;
  double sum_fit = 0.0, sum_len = 0.0;
  const Individual* best = &pop.front();
  for (const auto& ind : pop) {
    sum_fit += *ind.fitness;
    sum_len += static_cast<double>(ind.genome.size());
    if (*ind.fitness > *best->fitness) best = &ind;
  }
  rec.best_fitness = *best->fitness;
  rec.mean_fitness = sum_fit / static_cast<double>(pop.size());
  rec.mean_length = sum_len / static_cast<double>(pop.size());
  rec.best_genome = best->genome;
  return rec;
}

/// Three mutually distinct indices, all different from `target`.
inline std::array<std::size_t, 3> pick_donors(std::size_t n, std::size_t target, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::array<std::size_t, 3> r{};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t c;
    do {
      c = pick(rng);
    } while (c == target || std::find(r.begin(), r.begin() + k, c) != r.begin() + k);
    r[k] = c;
  }
  return r;
}

}  // namespace detail

using GenerationObserver = std::function<void(const GenerationRecord&)>;

template <Evaluator E>
EvolutionResult evolve(const EvolutionConfig& config, const E& evaluator,
                       const GenerationObserver& observer = {}) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t n = config.population_size;

  const auto evaluate = [&](std::vector<Individual*> targets, std::size_t generation,
                            const char* phase) {
    std::vector<const Genome*> genomes;
    genomes.reserve(targets.size());
    for (auto* t : targets) genomes.push_back(&t->genome);
    auto reports = evaluate_all(evaluator, genomes, config.workers, [&](std::size_t i) {
      return std::string("generation ") + std::to_string(generation) + " " + phase +
             " candidate " + std::to_string(i) + " " + detail::genome_text(*genomes[i]);
    });
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->fitness = reports[i].fitness;
  };

  EvolutionResult result;
  std::vector<Individual> pop = init_population(config, rng);
  {
    std::vector<Individual*> all;
    for (auto& ind : pop) all.push_back(&ind);
    evaluate(all, 0, "initial");
  }
  const auto record = [&](std::size_t generation) {
    result.trace.records.push_back(detail::summarize(generation, pop));
    if (observer) observer(result.trace.records.back());
  };
  record(0);

  for (std::size_t gen = 1; gen <= config.generations; ++gen) {
    // DE mutation, binomial crossover and one-to-one selection.
    std::vector<Individual> trials(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = detail::pick_donors(n, i, rng);
      const Genome v = mutate(pop[r[0]].genome, pop[r[1]].genome, pop[r[2]].genome, config.F);
      trials[i].genome = de_crossover(pop[i].genome, v, config.Cr, rng);
    }
    {
      std::vector<Individual*> all;
      for (auto& t : trials) all.push_back(&t);
      evaluate(all, gen, "trial");
    }
    for (std::size_t i = 0; i < n; ++i) pop[i] = de_select(pop[i], trials[i]);

    // Second crossover over disjoint random pairs.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    struct Pairing {
      std::size_t a, b;
      Individual c1, c2;
    };
    std::vector<Pairing> pairings;
    for (std::size_t k = 0; k + 1 < n; k += 2) {
      const std::size_t a = order[k], b = order[k + 1];
      if (pop[a].genome.size() < 2 || pop[b].genome.size() < 2) continue;
      auto [g1, g2] = second_crossover(pop[a].genome, pop[b].genome, config.rho, rng);
      pairings.push_back({a, b, {std::move(g1), std::nullopt}, {std::move(g2), std::nullopt}});
    }
    {
      std::vector<Individual*> children;
      for (auto& p : pairings) {
        children.push_back(&p.c1);
        children.push_back(&p.c2);
      }
      evaluate(children, gen, "child");
    }
    for (auto& p : pairings) {
      auto [first, second] = second_selection(pop[p.a], pop[p.b], p.c1, p.c2);
      pop[p.a] = std::move(first);
      pop[p.b] = std::move(second);
    }

    record(gen);
  }

  const auto best = std::max_element(pop.begin(), pop.end(), [](const auto& a, const auto& b) {
    return *a.fitness < *b.fitness;
  });
  result.best = *best;
  result.population = std::move(pop);
  return result;
}

}  // namespace decnn
