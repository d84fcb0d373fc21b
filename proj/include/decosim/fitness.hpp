#pragma once

// Fitness of an aggregation against a request: a position-wise semantic
// distance. Agent i of the genome serves atomic service i of the request;
// matched attributes score +1, superfluous attributes cost alpha, and each
// position of length mismatch costs beta.

#include "decosim/core.hpp"
#include "decosim/result.hpp"

#include <cmath>
#include <concepts>
#include <string>

namespace decosim {

struct FitnessParams {
    double alpha = 0.5;    // penalty weight per superfluous attribute
    double beta = 1.5;     // penalty per position of length mismatch
    double floor = -1.0e6; // fitness of an empty genome
};

/// Resolves an agent id to the agent record, or nullptr when unknown.
template <typename R>
concept AgentResolver = requires(R r, AgentId id) {
    { r(id) } -> std::convertible_to<const Agent*>;
};

/// Score contributed by one genome position: |S ∩ A| - alpha * |A \ S|.
inline double position_score(const AtomicServiceDescription& service,
                             const AtomicServiceDescription& agent_description, double alpha)
{
    const std::size_t matched = agent_description.attributes.intersection_size(service.attributes);
    const std::size_t superfluous = agent_description.attributes.size() - matched;
    return static_cast<double>(matched) - alpha * static_cast<double>(superfluous);
}

/// F = sum over aligned positions of position_score, minus beta * |L - m|.
/// An empty genome scores params.floor. Throws SimError naming the id when
/// a genome entry does not resolve.
template <AgentResolver R>
double fitness(const Request& request, const Aggregation& aggregation, R&& resolve,
               const FitnessParams& params)
{
    if (aggregation.empty()) {
        return params.floor;
    }
    const std::size_t request_length = request.length();
    const std::size_t genome_length = aggregation.size();
    const std::size_t aligned = std::min(request_length, genome_length);
    double score = 0.0;
    for (std::size_t i = 0; i < aligned; ++i) {
        const Agent* agent = resolve(aggregation.genome[i]);
        if (agent == nullptr) {
            throw SimError("cannot resolve agent id " + std::to_string(aggregation.genome[i]));
        }
        score += position_score(request.services[i], agent->description, params.alpha);
    }
    const double mismatch =
        std::abs(static_cast<double>(request_length) - static_cast<double>(genome_length));
    return score - params.beta * mismatch;
}

/// Upper bound of fitness for a request: the total attribute count, attained
/// exactly by a genome of matching length whose agents reproduce every
/// service description.
inline double max_fitness(const Request& request)
{
    std::size_t total = 0;
    for (const auto& service : request.services) {
        total += service.attributes.size();
    }
    return static_cast<double>(total);
}

} // namespace decosim
