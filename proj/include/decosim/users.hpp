#pragma once

// The environmental selection pressure: users attached to habitats issue
// requests with configurable length/modularity distributions, and register
// new services over time. Users are grouped into communities with strongly
// overlapping attribute vocabularies; distinct communities draw from
// disjoint attribute ranges.

#include "decosim/core.hpp"
#include "decosim/result.hpp"
#include "decosim/rng.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace decosim {

struct User {
    UserId id = 0;
    HabitatId habitat_id = 0;
    std::uint32_t community_id = 0;
    AttributeSet vocabulary; // the attribute pool this user's requests and services draw from
};

struct UserModelConfig {
    std::size_t n_users = 100;
    std::size_t n_communities = 2;
    std::size_t vocab_size = 20;    // attributes per user vocabulary
    double overlap_frac = 0.8;      // shared fraction of vocabulary within a community
    std::size_t catalog_size = 30;  // agents seeded per habitat
    double p_new_service = 0.02;    // per-step service creation probability
    DistributionSpec length_dist = UniformSpec{1, 17};
    DistributionSpec modularity_dist = UniformSpec{1, 11};
};

/// Draws an integer from the distribution: uniform over [lo, hi]; a rounded
/// normal draw redrawn until it lands in [lo, hi] (rejection, so no mass
/// piles up at the support edges); or k with probability proportional to
/// k^-gamma, exactly normalized over the finite support.
inline int sample(const DistributionSpec& dist, Rng& rng)
{
    if (const auto* u = std::get_if<UniformSpec>(&dist)) {
        return static_cast<int>(rng.uniform_int(u->lo, u->hi));
    }
    if (const auto* g = std::get_if<GaussianSpec>(&dist)) {
        for (;;) {
            const double draw = rng.normal(g->mu, g->sigma);
            const long k = std::lround(draw);
            if (k >= g->lo && k <= g->hi) {
                return static_cast<int>(k);
            }
        }
    }
    const auto& pl = std::get<PowerLawSpec>(dist);
    const auto probabilities = pmf(dist);
    double u = rng.real01();
    for (std::size_t i = 0; i + 1 < probabilities.size(); ++i) {
        if (u < probabilities[i]) {
            return pl.lo + static_cast<int>(i);
        }
        u -= probabilities[i];
    }
    return pl.hi;
}

namespace detail {

/// k distinct attributes drawn uniformly from the vocabulary
/// (partial Fisher-Yates over a scratch copy).
inline AttributeSet pick_distinct_attributes(const AttributeSet& vocabulary, std::size_t k,
                                             Rng& rng)
{
    if (k > vocabulary.size()) {
        throw SimError("vocabulary of size " + std::to_string(vocabulary.size())
                       + " cannot supply " + std::to_string(k) + " distinct attributes");
    }
    std::vector<AttributeId> scratch = vocabulary.ids();
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.below(scratch.size() - i);
        std::swap(scratch[i], scratch[j]);
    }
    scratch.resize(k);
    return AttributeSet::from(std::move(scratch));
}

} // namespace detail

/// L = sample(length_dist) atomic services, each with k = sample(modularity)
/// distinct attributes from the user's vocabulary.
inline Request generate_request(const User& user, const UserModelConfig& config,
                                std::int64_t step, Rng& rng)
{
    const int length = sample(config.length_dist, rng);
    const auto cap = static_cast<std::size_t>(support_hi(config.modularity_dist));
    std::vector<AtomicServiceDescription> services;
    services.reserve(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
        const auto k = static_cast<std::size_t>(sample(config.modularity_dist, rng));
        auto description = AtomicServiceDescription::make(
            detail::pick_distinct_attributes(user.vocabulary, k, rng), cap);
        services.push_back(std::move(description).expect());
    }
    return Request::make(std::move(services), user.id, step).expect();
}

/// With probability p_new_service, a freshly registered service agent for
/// the user's habitat; otherwise nothing. The caller inserts the agent into
/// the habitat pool.
inline std::optional<Agent> maybe_create_agent(const User& user, const UserModelConfig& config,
                                               std::int64_t step, AgentIdSource& ids, Rng& rng)
{
    if (!rng.bernoulli(config.p_new_service)) {
        return std::nullopt;
    }
    const auto k = static_cast<std::size_t>(sample(config.modularity_dist, rng));
    auto description = AtomicServiceDescription::make(
        detail::pick_distinct_attributes(user.vocabulary, k, rng),
        static_cast<std::size_t>(support_hi(config.modularity_dist)));
    return Agent::make(ids.next(), std::move(description).expect(), user.habitat_id, step,
                       AgentProvenance::user_created)
        .expect();
}

struct BuiltUsers {
    std::vector<User> users;
    std::map<HabitatId, std::vector<Agent>> catalogs; // initial habitat pools
};

/// Partitions users evenly into communities and builds their vocabularies:
/// each community owns a disjoint slice of the attribute range, with a
/// shared core of overlap_frac * vocab_size attributes plus per-user private
/// attributes from the community's remainder. Each user's habitat catalog is
/// seeded with catalog_size agents drawn from the user's vocabulary with
/// modularity-distributed sizes. User u owns habitat u.
inline BuiltUsers build_users(const UserModelConfig& config, std::size_t a_max,
                              AgentIdSource& ids, Rng& rng)
{
    if (config.n_communities == 0 || config.n_users < config.n_communities) {
        throw SimError("user model requires 1 <= n_communities <= n_users");
    }
    const std::size_t block = a_max / config.n_communities;
    if (config.vocab_size > block) {
        throw SimError("infeasible vocabulary constraints: vocab_size "
                       + std::to_string(config.vocab_size) + " exceeds the per-community share "
                       + std::to_string(block) + " of the attribute range");
    }
    const auto shared_size =
        static_cast<std::size_t>(std::lround(config.overlap_frac * static_cast<double>(config.vocab_size)));
    const std::size_t private_size = config.vocab_size - shared_size;

    // Community attribute ranges are disjoint, so cross-community vocabulary
    // overlap is zero.
    std::vector<std::vector<AttributeId>> community_pool(config.n_communities);
    std::vector<AttributeSet> community_core(config.n_communities);
    for (std::size_t c = 0; c < config.n_communities; ++c) {
        std::vector<AttributeId> range;
        range.reserve(block);
        for (std::size_t a = 0; a < block; ++a) {
            range.push_back(static_cast<AttributeId>(c * block + a));
        }
        AttributeSet range_set = AttributeSet::from(range);
        community_core[c] = detail::pick_distinct_attributes(range_set, shared_size, rng);
        for (AttributeId a : range_set.ids()) {
            if (!community_core[c].contains(a)) {
                community_pool[c].push_back(a);
            }
        }
        if (community_pool[c].size() < private_size) {
            throw SimError("infeasible vocabulary constraints: community remainder too small");
        }
    }

    BuiltUsers built;
    built.users.reserve(config.n_users);
    for (std::size_t u = 0; u < config.n_users; ++u) {
        User user;
        user.id = static_cast<UserId>(u);
        user.habitat_id = static_cast<HabitatId>(u);
        user.community_id = static_cast<std::uint32_t>(u % config.n_communities);
        std::vector<AttributeId> vocabulary = community_core[user.community_id].ids();
        const AttributeSet privates = detail::pick_distinct_attributes(
            AttributeSet::from(community_pool[user.community_id]), private_size, rng);
        vocabulary.insert(vocabulary.end(), privates.ids().begin(), privates.ids().end());
        user.vocabulary = AttributeSet::from(std::move(vocabulary));

        std::vector<Agent> catalog;
        catalog.reserve(config.catalog_size);
        for (std::size_t i = 0; i < config.catalog_size; ++i) {
            const auto k = static_cast<std::size_t>(sample(config.modularity_dist, rng));
            auto description = AtomicServiceDescription::make(
                detail::pick_distinct_attributes(user.vocabulary, k, rng),
                static_cast<std::size_t>(support_hi(config.modularity_dist)));
            catalog.push_back(Agent::make(ids.next(), std::move(description).expect(),
                                          user.habitat_id, 0, AgentProvenance::catalog)
                                  .expect());
        }
        built.catalogs.emplace(user.habitat_id, std::move(catalog));
        built.users.push_back(std::move(user));
    }
    return built;
}

} // namespace decosim
