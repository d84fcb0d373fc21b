#include "decosim/core.hpp"
#include "decosim/fitness.hpp"
#include "decosim/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace decosim;

namespace {

struct Fixture {
    std::map<AgentId, Agent> agents;
    AgentIdSource ids;

    AgentId add_agent(std::vector<AttributeId> attrs)
    {
        const AgentId id = ids.next();
        agents.emplace(id, Agent{id, AtomicServiceDescription{AttributeSet::from(std::move(attrs))},
                                 0, 0, AgentProvenance::catalog});
        return id;
    }

    auto resolver() const
    {
        return [this](AgentId id) -> const Agent* {
            const auto it = agents.find(id);
            return it == agents.end() ? nullptr : &it->second;
        };
    }
};

Request make_request(std::vector<std::vector<AttributeId>> services)
{
    std::vector<AtomicServiceDescription> descriptions;
    for (auto& attrs : services) {
        descriptions.push_back(AtomicServiceDescription{AttributeSet::from(std::move(attrs))});
    }
    return Request{std::move(descriptions), 0, 0};
}

// Reference evaluation written independently of the library path: plain
// std::set arithmetic, no shared helpers.
double reference_fitness(const Request& request, const Aggregation& aggregation,
                         const Fixture& fixture, const FitnessParams& params)
{
    if (aggregation.genome.empty()) {
        return params.floor;
    }
    double total = 0.0;
    const std::size_t aligned = std::min(request.length(), aggregation.genome.size());
    for (std::size_t i = 0; i < aligned; ++i) {
        std::set<AttributeId> service(request.services[i].attributes.ids().begin(),
                                      request.services[i].attributes.ids().end());
        const Agent& agent = fixture.agents.at(aggregation.genome[i]);
        std::set<AttributeId> owned(agent.description.attributes.ids().begin(),
                                    agent.description.attributes.ids().end());
        double matched = 0.0;
        double superfluous = 0.0;
        for (AttributeId a : owned) {
            if (service.count(a) > 0) {
                matched += 1.0;
            } else {
                superfluous += 1.0;
            }
        }
        total += matched - params.alpha * superfluous;
    }
    const double longer = static_cast<double>(std::max(request.length(), aggregation.genome.size()));
    const double shorter = static_cast<double>(std::min(request.length(), aggregation.genome.size()));
    return total - params.beta * (longer - shorter);
}

} // namespace

TEST_CASE("perfect match scores the total attribute count")
{
    Fixture f;
    const AgentId a = f.add_agent({1, 2});
    const AgentId b = f.add_agent({3});
    const Request request = make_request({{1, 2}, {3}});
    const Aggregation aggregation{{a, b}, std::nullopt};
    const FitnessParams params;
    CHECK(fitness(request, aggregation, f.resolver(), params) == doctest::Approx(3.0));
    CHECK(fitness(request, aggregation, f.resolver(), params)
          == doctest::Approx(reference_fitness(request, aggregation, f, params)));
    CHECK(max_fitness(request) == doctest::Approx(3.0));
}

TEST_CASE("empty genome scores the floor")
{
    Fixture f;
    const Request request = make_request({{1, 2}, {3}});
    const FitnessParams params;
    CHECK(fitness(request, Aggregation{}, f.resolver(), params) == doctest::Approx(params.floor));
}

TEST_CASE("superfluous attributes cost alpha each")
{
    Fixture f;
    const AgentId a = f.add_agent({1, 3});
    const Request request = make_request({{1, 2}});
    const Aggregation aggregation{{a}, std::nullopt};
    FitnessParams params;
    params.alpha = 0.5;
    const double value = fitness(request, aggregation, f.resolver(), params);
    CHECK(value == doctest::Approx(0.5));
    CHECK(value == doctest::Approx(reference_fitness(request, aggregation, f, params)));
}

TEST_CASE("a surplus position costs beta and nothing else")
{
    Fixture f;
    const AgentId a = f.add_agent({1});
    const AgentId b = f.add_agent({2});
    const Request request = make_request({{1}});
    const Aggregation aggregation{{a, b}, std::nullopt};
    FitnessParams params;
    params.alpha = 0.5;
    params.beta = 1.5;
    // Aligned position matches fully (+1); the extra agent sits beyond the
    // request and is charged only the length penalty: 1 - 1.5 = -0.5.
    const double value = fitness(request, aggregation, f.resolver(), params);
    CHECK(value == doctest::Approx(-0.5));
    CHECK(value == doctest::Approx(reference_fitness(request, aggregation, f, params)));
}

TEST_CASE("max_fitness sums service sizes")
{
    CHECK(max_fitness(make_request({{7}})) == doctest::Approx(1.0));
    CHECK(max_fitness(make_request({{1, 2}, {1, 2}, {1, 2}})) == doctest::Approx(6.0));
}

TEST_CASE("unresolvable agent id raises an error naming the id")
{
    Fixture f;
    const Request request = make_request({{1}});
    const Aggregation aggregation{{424242}, std::nullopt};
    try {
        fitness(request, aggregation, f.resolver(), FitnessParams{});
        FAIL("expected SimError");
    } catch (const SimError& e) {
        CHECK(std::string(e.what()).find("424242") != std::string::npos);
    }
}

TEST_CASE("fitness never exceeds max_fitness")
{
    Rng rng(2024);
    for (int trial = 0; trial < 500; ++trial) {
        Fixture f;
        std::vector<AgentId> pool;
        const int n_agents = 1 + static_cast<int>(rng.below(8));
        for (int i = 0; i < n_agents; ++i) {
            std::vector<AttributeId> attrs;
            const int k = 1 + static_cast<int>(rng.below(5));
            for (int j = 0; j < k; ++j) {
                attrs.push_back(static_cast<AttributeId>(rng.below(12)));
            }
            pool.push_back(f.add_agent(std::move(attrs)));
        }
        std::vector<std::vector<AttributeId>> services;
        const int length = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < length; ++i) {
            std::set<AttributeId> attrs;
            const int k = 1 + static_cast<int>(rng.below(4));
            while (static_cast<int>(attrs.size()) < k) {
                attrs.insert(static_cast<AttributeId>(rng.below(12)));
            }
            services.emplace_back(attrs.begin(), attrs.end());
        }
        const Request request = make_request(std::move(services));
        Aggregation aggregation;
        const int genome_length = static_cast<int>(rng.below(6));
        for (int i = 0; i < genome_length; ++i) {
            aggregation.genome.push_back(pool[rng.below(pool.size())]);
        }
        const FitnessParams params;
        const double value = fitness(request, aggregation, f.resolver(), params);
        CHECK(value <= max_fitness(request));
        CHECK(value == doctest::Approx(reference_fitness(request, aggregation, f, params)));
    }
}

TEST_CASE("fitness is invariant under consistent attribute relabeling")
{
    Rng rng(515);
    for (int trial = 0; trial < 200; ++trial) {
        // Random permutation of the attribute universe.
        std::vector<AttributeId> permutation(40);
        for (std::size_t i = 0; i < permutation.size(); ++i) {
            permutation[i] = static_cast<AttributeId>(i);
        }
        for (std::size_t i = permutation.size(); i > 1; --i) {
            std::swap(permutation[i - 1], permutation[rng.below(i)]);
        }

        Fixture original;
        Fixture relabeled;
        std::vector<AgentId> genome;
        const int n_agents = 1 + static_cast<int>(rng.below(5));
        for (int i = 0; i < n_agents; ++i) {
            std::vector<AttributeId> attrs;
            std::vector<AttributeId> mapped;
            const int k = 1 + static_cast<int>(rng.below(5));
            for (int j = 0; j < k; ++j) {
                const auto a = static_cast<AttributeId>(rng.below(40));
                attrs.push_back(a);
                mapped.push_back(permutation[a]);
            }
            genome.push_back(original.add_agent(attrs));
            relabeled.add_agent(mapped);
        }
        std::vector<std::vector<AttributeId>> services;
        std::vector<std::vector<AttributeId>> mapped_services;
        const int length = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < length; ++i) {
            std::vector<AttributeId> attrs;
            std::vector<AttributeId> mapped;
            const int k = 1 + static_cast<int>(rng.below(4));
            for (int j = 0; j < k; ++j) {
                const auto a = static_cast<AttributeId>(rng.below(40));
                attrs.push_back(a);
                mapped.push_back(permutation[a]);
            }
            services.push_back(std::move(attrs));
            mapped_services.push_back(std::move(mapped));
        }
        const Aggregation aggregation{genome, std::nullopt};
        const FitnessParams params;
        const double a = fitness(make_request(services), aggregation, original.resolver(), params);
        const double b =
            fitness(make_request(mapped_services), aggregation, relabeled.resolver(), params);
        CHECK(a == doctest::Approx(b));
    }
}

TEST_CASE("appending an unrelated agent to a full-length genome strictly lowers fitness")
{
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        Fixture f;
        std::vector<std::vector<AttributeId>> services;
        const int length = 1 + static_cast<int>(rng.below(4));
        for (int i = 0; i < length; ++i) {
            services.push_back({static_cast<AttributeId>(rng.below(10))});
        }
        const Request request = make_request(services);
        Aggregation aggregation;
        const int genome_length = length + static_cast<int>(rng.below(3));
        for (int i = 0; i < genome_length; ++i) {
            aggregation.genome.push_back(f.add_agent({static_cast<AttributeId>(rng.below(10))}));
        }
        // Attribute 100+ never appears in any service.
        const AgentId disjoint = f.add_agent({static_cast<AttributeId>(100 + rng.below(10))});
        Aggregation longer = aggregation;
        longer.genome.push_back(disjoint);
        const FitnessParams params;
        CHECK(fitness(request, longer, f.resolver(), params)
              < fitness(request, aggregation, f.resolver(), params));
    }
}
