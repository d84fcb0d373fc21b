#pragma once

// Per-request local optimisation: a generational GA over variable-length
// aggregations, seeded from the serving habitat's pool and previously
// deployed applications. Deterministic given the rng state; evaluation order
// never affects results.

#include "decosim/core.hpp"
#include "decosim/fitness.hpp"
#include "decosim/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace decosim {

struct EvolutionParams {
    int pop_size = 50;
    int tournament_k = 3;
    double p_crossover = 0.7;
    double p_mutate_replace = 0.10; // applied per genome
    double p_mutate_insert = 0.05;
    double p_mutate_delete = 0.05;
    int max_generations = 100;
    int stagnation_window = 20;
    int elitism = 1;
};

struct EvolutionResult {
    Aggregation best;
    double best_fitness = 0.0;
    int generations_run = 0;
    std::set<AgentId> used_migrant_ids; // agent ids appearing in best
};

/// Immutable snapshot of a habitat's agent pool, ordered by ascending id.
/// Genomes under evolution reference pool agents through this view.
class PoolView {
public:
    PoolView() = default;

    explicit PoolView(std::vector<const Agent*> agents_by_id) : agents_(std::move(agents_by_id))
    {
        ids_.reserve(agents_.size());
        for (const Agent* a : agents_) {
            ids_.push_back(a->id);
        }
    }

    std::size_t size() const { return agents_.size(); }
    bool empty() const { return agents_.empty(); }
    const Agent* agent(std::size_t index) const { return agents_[index]; }

    const Agent* resolve(AgentId id) const
    {
        const auto index = index_of(id);
        return index ? agents_[*index] : nullptr;
    }

    std::optional<std::size_t> index_of(AgentId id) const
    {
        const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - ids_.begin());
    }

private:
    std::vector<const Agent*> agents_;
    std::vector<AgentId> ids_;
};

namespace detail {

/// One-point crossover on raw gene vectors. Cut points are uniform in
/// [0, len] of each parent independently, so children may change length.
/// An empty child is repaired with one uniform-random parent gene.
template <typename Gene>
std::pair<std::vector<Gene>, std::vector<Gene>>
one_point_crossover(const std::vector<Gene>& a, const std::vector<Gene>& b, Rng& rng)
{
    const std::size_t cut_a = rng.below(a.size() + 1);
    const std::size_t cut_b = rng.below(b.size() + 1);
    std::vector<Gene> first(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(cut_a));
    first.insert(first.end(), b.begin() + static_cast<std::ptrdiff_t>(cut_b), b.end());
    std::vector<Gene> second(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut_b));
    second.insert(second.end(), a.begin() + static_cast<std::ptrdiff_t>(cut_a), a.end());
    const auto repair = [&](std::vector<Gene>& child) {
        if (!child.empty()) {
            return;
        }
        const std::size_t pick = rng.below(a.size() + b.size());
        child.push_back(pick < a.size() ? a[pick] : b[pick - a.size()]);
    };
    repair(first);
    repair(second);
    return {std::move(first), std::move(second)};
}

/// Per-genome mutation: replace / insert / delete, each applied with its own
/// probability. Genome length never drops below 1.
template <typename Gene, typename PickGene>
void mutate_genome(std::vector<Gene>& genome, PickGene&& pick, const EvolutionParams& params,
                   Rng& rng)
{
    if (rng.bernoulli(params.p_mutate_replace) && !genome.empty()) {
        genome[rng.below(genome.size())] = pick(rng);
    }
    if (rng.bernoulli(params.p_mutate_insert)) {
        const std::size_t at = rng.below(genome.size() + 1);
        genome.insert(genome.begin() + static_cast<std::ptrdiff_t>(at), pick(rng));
    }
    if (rng.bernoulli(params.p_mutate_delete) && genome.size() >= 2) {
        genome.erase(genome.begin() + static_cast<std::ptrdiff_t>(rng.below(genome.size())));
    }
}

} // namespace detail

/// Public one-point crossover over aggregations. Both parents must be
/// non-empty; children are guaranteed non-empty.
inline std::pair<Aggregation, Aggregation> crossover(const Aggregation& a, const Aggregation& b,
                                                     Rng& rng)
{
    if (a.empty() || b.empty()) {
        throw SimError("crossover requires non-empty parents");
    }
    auto [first, second] = detail::one_point_crossover(a.genome, b.genome, rng);
    return {Aggregation{std::move(first), std::nullopt}, Aggregation{std::move(second), std::nullopt}};
}

/// Builds the initial population for a request. Previously deployed
/// aggregations that still resolve and score above the floor are copied in
/// first, best-first, up to half the population; the rest are uniform-random
/// sequences over the pool with length in [1, 2 * request length].
inline std::vector<Aggregation> seed_population(const PoolView& pool,
                                                const std::vector<const Aggregation*>& deployed,
                                                const Request& request,
                                                const EvolutionParams& params,
                                                const FitnessParams& fitness_params, Rng& rng)
{
    if (pool.empty()) {
        throw SimError("habitat has no agents");
    }
    const auto resolve = [&](AgentId id) { return pool.resolve(id); };

    struct Candidate {
        const Aggregation* aggregation;
        double fitness_value;
        std::size_t order; // recency: higher = deployed later
    };
    std::vector<Candidate> candidates;
    candidates.reserve(deployed.size());
    for (std::size_t i = 0; i < deployed.size(); ++i) {
        const Aggregation* agg = deployed[i];
        if (agg->empty()) {
            continue;
        }
        const bool resolvable = std::all_of(agg->genome.begin(), agg->genome.end(),
                                            [&](AgentId id) { return pool.resolve(id) != nullptr; });
        if (!resolvable) {
            continue;
        }
        const double f = fitness(request, *agg, resolve, fitness_params);
        if (f > fitness_params.floor) {
            candidates.push_back(Candidate{agg, f, i});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.fitness_value != b.fitness_value) {
            return a.fitness_value > b.fitness_value;
        }
        return a.order > b.order;
    });

    std::vector<Aggregation> population;
    population.reserve(static_cast<std::size_t>(params.pop_size));
    const std::size_t reuse_cap = static_cast<std::size_t>(params.pop_size) / 2;
    for (const auto& c : candidates) {
        if (population.size() >= reuse_cap) {
            break;
        }
        population.push_back(Aggregation{c.aggregation->genome, c.fitness_value});
    }
    while (population.size() < static_cast<std::size_t>(params.pop_size)) {
        const std::size_t length =
            static_cast<std::size_t>(rng.uniform_int(1, 2 * static_cast<std::int64_t>(request.length())));
        Aggregation agg;
        agg.genome.reserve(length);
        for (std::size_t i = 0; i < length; ++i) {
            agg.genome.push_back(pool.agent(rng.below(pool.size()))->id);
        }
        population.push_back(std::move(agg));
    }
    return population;
}

/// Optional per-generation hook, invoked after each generation is evaluated
/// (generation index, population as agent-id genomes, best fitness so far).
using GenerationObserver =
    std::function<void(int, const std::vector<Aggregation>&, double)>;

namespace detail {

/// Lazily memoized position scores for one request over one pool snapshot:
/// score(agent, position) is a pure function, so each pair is computed once.
class PositionScoreTable {
public:
    PositionScoreTable(const Request& request, const PoolView& pool, double alpha)
        : request_(request), pool_(pool), alpha_(alpha), positions_(request.length()),
          scores_(pool.size() * request.length(), 0.0),
          computed_(pool.size() * request.length(), false)
    {
    }

    double score(std::size_t agent_index, std::size_t position)
    {
        const std::size_t slot = agent_index * positions_ + position;
        if (!computed_[slot]) {
            scores_[slot] = position_score(request_.services[position],
                                           pool_.agent(agent_index)->description, alpha_);
            computed_[slot] = true;
        }
        return scores_[slot];
    }

private:
    const Request& request_;
    const PoolView& pool_;
    double alpha_;
    std::size_t positions_;
    std::vector<double> scores_;
    std::vector<char> computed_;
};

} // namespace detail

/// Generational GA: elitist copy, tournament selection, one-point crossover,
/// per-genome mutations. Terminates at max_generations, on reaching
/// max_fitness(request), or after stagnation_window generations without
/// improvement.
inline EvolutionResult evolve(const Request& request, const std::vector<Aggregation>& seed,
                              const PoolView& pool, const EvolutionParams& params,
                              const FitnessParams& fitness_params, Rng& rng,
                              const GenerationObserver& observer = {})
{
    if (pool.empty()) {
        throw SimError("habitat has no agents");
    }
    using IndexGenome = std::vector<std::uint32_t>;

    // Translate agent-id genomes to dense pool indices.
    std::vector<IndexGenome> population;
    population.reserve(seed.size());
    for (const auto& agg : seed) {
        IndexGenome genome;
        genome.reserve(agg.size());
        for (AgentId id : agg.genome) {
            const auto index = pool.index_of(id);
            if (!index) {
                throw SimError("cannot resolve agent id " + std::to_string(id));
            }
            genome.push_back(static_cast<std::uint32_t>(*index));
        }
        population.push_back(std::move(genome));
    }

    detail::PositionScoreTable scores(request, pool, fitness_params.alpha);
    const std::size_t request_length = request.length();
    const auto evaluate = [&](const IndexGenome& genome) {
        if (genome.empty()) {
            return fitness_params.floor;
        }
        const std::size_t aligned = std::min(request_length, genome.size());
        double f = 0.0;
        for (std::size_t i = 0; i < aligned; ++i) {
            f += scores.score(genome[i], i);
        }
        f -= fitness_params.beta
             * std::abs(static_cast<double>(request_length) - static_cast<double>(genome.size()));
        return f;
    };

    std::vector<double> fitness_values(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) {
        fitness_values[i] = evaluate(population[i]);
    }

    const auto best_index = [&]() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < population.size(); ++i) {
            if (fitness_values[i] > fitness_values[best]) {
                best = i;
            }
        }
        return best;
    };

    const auto to_aggregation = [&](const IndexGenome& genome, double f) {
        Aggregation agg;
        agg.genome.reserve(genome.size());
        for (std::uint32_t index : genome) {
            agg.genome.push_back(pool.agent(index)->id);
        }
        agg.cached_fitness = f;
        return agg;
    };

    const auto snapshot = [&]() {
        std::vector<Aggregation> out;
        out.reserve(population.size());
        for (std::size_t i = 0; i < population.size(); ++i) {
            out.push_back(to_aggregation(population[i], fitness_values[i]));
        }
        return out;
    };

    const double optimum = max_fitness(request);
    std::size_t best = best_index();
    double best_fitness = fitness_values[best];
    IndexGenome best_genome = population[best];
    int generations_run = 0;
    int since_improvement = 0;

    if (observer) {
        observer(0, snapshot(), best_fitness);
    }

    const auto pick_agent = [&](Rng& r) { return static_cast<std::uint32_t>(r.below(pool.size())); };
    const auto tournament = [&]() {
        std::size_t winner = rng.below(population.size());
        for (int i = 1; i < params.tournament_k; ++i) {
            const std::size_t challenger = rng.below(population.size());
            if (fitness_values[challenger] > fitness_values[winner]
                || (fitness_values[challenger] == fitness_values[winner] && challenger < winner)) {
                winner = challenger;
            }
        }
        return winner;
    };

    while (best_fitness < optimum && generations_run < params.max_generations
           && since_improvement < params.stagnation_window) {
        // Elites: best `elitism` genomes, ties broken by population index.
        std::vector<std::size_t> ranked(population.size());
        std::iota(ranked.begin(), ranked.end(), std::size_t{0});
        std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
            return fitness_values[a] > fitness_values[b];
        });

        std::vector<IndexGenome> next;
        std::vector<double> next_fitness;
        next.reserve(population.size());
        next_fitness.reserve(population.size());
        for (int e = 0; e < params.elitism && next.size() < population.size(); ++e) {
            next.push_back(population[ranked[static_cast<std::size_t>(e)]]);
            next_fitness.push_back(fitness_values[ranked[static_cast<std::size_t>(e)]]);
        }

        while (next.size() < population.size()) {
            const std::size_t parent_a = tournament();
            const std::size_t parent_b = tournament();
            IndexGenome child_a;
            IndexGenome child_b;
            if (rng.bernoulli(params.p_crossover)) {
                auto children =
                    detail::one_point_crossover(population[parent_a], population[parent_b], rng);
                child_a = std::move(children.first);
                child_b = std::move(children.second);
            } else {
                child_a = population[parent_a];
                child_b = population[parent_b];
            }
            detail::mutate_genome(child_a, pick_agent, params, rng);
            detail::mutate_genome(child_b, pick_agent, params, rng);
            next.push_back(std::move(child_a));
            next_fitness.push_back(evaluate(next.back()));
            if (next.size() < population.size()) {
                next.push_back(std::move(child_b));
                next_fitness.push_back(evaluate(next.back()));
            }
        }

        population = std::move(next);
        fitness_values = std::move(next_fitness);
        ++generations_run;

        const std::size_t generation_best = best_index();
        if (fitness_values[generation_best] > best_fitness) {
            best_fitness = fitness_values[generation_best];
            best_genome = population[generation_best];
            since_improvement = 0;
        } else {
            ++since_improvement;
        }
        if (observer) {
            observer(generations_run, snapshot(), best_fitness);
        }
    }

    EvolutionResult result;
    result.best = to_aggregation(best_genome, best_fitness);
    result.best_fitness = best_fitness;
    result.generations_run = generations_run;
    result.used_migrant_ids.insert(result.best.genome.begin(), result.best.genome.end());
    return result;
}

} // namespace decosim
