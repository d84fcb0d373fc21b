#pragma once

// The distributed level of the two-level optimisation: habitats with agent
// pools and deployed applications, probabilistic bi-directional connections,
// agent migration, and Hebbian reweighting of connection probabilities from
// migration success and failure.

#include "decosim/core.hpp"
#include "decosim/rng.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace decosim {

struct NetworkParams {
    double p0 = 0.10;  // initial connection probability
    double p_min = 0.01;
    double p_max = 0.99;
    double eta = 0.1;         // Hebbian learning rate
    int pending_window = 10;  // ledger entries expire after this many destination requests
    std::size_t deployed_cap = 20;
    std::size_t pool_cap = 200;
    double topology_threshold = 0.3;
};

/// A migrant awaiting its fate at the destination: used in a winning
/// solution (success) or expired unused (failure).
struct PendingMigrant {
    AgentId id = 0;
    std::uint64_t arrival_request_count = 0; // destination requests served at arrival
    std::int64_t arrival_step = 0;
};

/// Directed connection state. The two directions of a habitat pair are
/// independent and may hold different probabilities.
struct ConnectionState {
    double p = 0.0;
    std::vector<PendingMigrant> pending;
    std::uint64_t successes = 0;
    std::uint64_t failures = 0;
};

/// A deployed application. Agent attribute counts are snapshotted at deploy
/// time: pool eviction may later remove the underlying agents, but the
/// application as deployed keeps its measured shape.
struct DeployedApp {
    Aggregation aggregation;
    std::int64_t step = 0;
    std::vector<std::uint16_t> agent_attr_counts;
};

struct PoolEntry {
    Agent agent;
    std::int64_t last_used_step = 0; // last appearance in a deployed best solution
};

struct Habitat {
    HabitatId id = 0;
    UserId owner_user = 0;
    std::map<AgentId, PoolEntry> pool;
    std::deque<DeployedApp> deployed; // oldest first
    std::map<HabitatId, ConnectionState> out;
    std::uint64_t requests_served = 0;
};

struct Network {
    std::map<HabitatId, Habitat> habitats;
};

/// Fully connected directed graph over n habitats (no self-connections),
/// every connection starting at p0. Habitat ids are 0..n-1.
inline Network build_network(std::size_t n_habitats, double p0)
{
    Network network;
    for (std::size_t i = 0; i < n_habitats; ++i) {
        Habitat habitat;
        habitat.id = static_cast<HabitatId>(i);
        for (std::size_t j = 0; j < n_habitats; ++j) {
            if (i == j) {
                continue;
            }
            habitat.out.emplace(static_cast<HabitatId>(j), ConnectionState{p0, {}, 0, 0});
        }
        network.habitats.emplace(habitat.id, std::move(habitat));
    }
    return network;
}

/// Inserts an agent into the habitat pool, evicting the least-recently-used
/// agent (ties by lowest id) when the pool exceeds its capacity. Insertion
/// counts as a use.
inline void insert_agent(Habitat& habitat, Agent agent, std::int64_t step, std::size_t pool_cap)
{
    const AgentId id = agent.id;
    habitat.pool.insert_or_assign(id, PoolEntry{std::move(agent), step});
    while (habitat.pool.size() > pool_cap) {
        auto victim = habitat.pool.begin();
        for (auto it = habitat.pool.begin(); it != habitat.pool.end(); ++it) {
            if (it->second.last_used_step < victim->second.last_used_step) {
                victim = it;
            }
        }
        habitat.pool.erase(victim);
    }
}

/// Appends an aggregation to the habitat's deployed applications (evicting
/// the oldest past capacity) and marks its constituent agents used at `step`.
/// Throws SimError when the aggregation is empty or an id does not resolve.
inline void deploy(Habitat& habitat, const Aggregation& aggregation, std::int64_t step,
                   std::size_t deployed_cap)
{
    if (aggregation.empty()) {
        throw SimError("cannot deploy an empty aggregation");
    }
    DeployedApp app;
    app.aggregation = aggregation;
    app.step = step;
    app.agent_attr_counts.reserve(aggregation.size());
    for (AgentId id : aggregation.genome) {
        const auto it = habitat.pool.find(id);
        if (it == habitat.pool.end()) {
            throw SimError("cannot resolve agent id " + std::to_string(id));
        }
        app.agent_attr_counts.push_back(
            static_cast<std::uint16_t>(it->second.agent.description.attributes.size()));
    }
    for (AgentId id : aggregation.genome) {
        habitat.pool.at(id).last_used_step = step;
    }
    habitat.deployed.push_back(std::move(app));
    while (habitat.deployed.size() > deployed_cap) {
        habitat.deployed.pop_front();
    }
}

/// For each outgoing connection of the source, with probability p: copy the
/// aggregation's agents into the destination pool (fresh ids, same
/// descriptions, origin = source) and ledger each copy on the connection.
/// Returns the number of connections that fired. The source pool is never
/// mutated.
inline std::size_t migrate(Network& network, HabitatId source_id, const Aggregation& aggregation,
                           std::int64_t step, AgentIdSource& ids, const NetworkParams& params,
                           Rng& rng)
{
    Habitat& source = network.habitats.at(source_id);
    std::size_t copies_sent = 0;
    for (auto& [dest_id, connection] : source.out) {
        if (!rng.bernoulli(connection.p)) {
            continue;
        }
        ++copies_sent;
        Habitat& dest = network.habitats.at(dest_id);
        for (AgentId id : aggregation.genome) {
            const auto it = source.pool.find(id);
            if (it == source.pool.end()) {
                throw SimError("cannot resolve agent id " + std::to_string(id));
            }
            Agent copy = it->second.agent;
            copy.id = ids.next();
            copy.origin_habitat = source_id;
            copy.created_step = step;
            copy.provenance = AgentProvenance::migrant;
            connection.pending.push_back(PendingMigrant{copy.id, dest.requests_served, step});
            insert_agent(dest, std::move(copy), step, params.pool_cap);
        }
    }
    return copies_sent;
}

/// Hebbian reweighting: success moves p toward 1 by eta * (1 - p), failure
/// decays p by (1 - eta); the result is clamped to [p_min, p_max].
inline void hebbian_update(ConnectionState& connection, bool success, double eta = 0.1,
                           double p_min = 0.01, double p_max = 0.99)
{
    if (success) {
        connection.p = connection.p + eta * (1.0 - connection.p);
        ++connection.successes;
    } else {
        connection.p = (1.0 - eta) * connection.p;
        ++connection.failures;
    }
    connection.p = std::min(p_max, std::max(p_min, connection.p));
}

/// Settles the pending ledgers of every inbound connection of `dest_id`
/// after a completed request there. Entries whose migrant appears in the
/// winning solution count as successes; entries older than the pending
/// window (in destination requests) count as failures. Entries are resolved
/// in arrival order.
inline void settle_pending(Network& network, HabitatId dest_id,
                           const std::set<AgentId>& used_migrant_ids, const NetworkParams& params)
{
    const std::uint64_t served = network.habitats.at(dest_id).requests_served;
    for (auto& [source_id, source] : network.habitats) {
        if (source_id == dest_id) {
            continue;
        }
        const auto conn_it = source.out.find(dest_id);
        if (conn_it == source.out.end()) {
            continue;
        }
        ConnectionState& connection = conn_it->second;
        std::vector<PendingMigrant> keep;
        keep.reserve(connection.pending.size());
        for (const PendingMigrant& entry : connection.pending) {
            if (used_migrant_ids.count(entry.id) > 0) {
                hebbian_update(connection, true, params.eta, params.p_min, params.p_max);
            } else if (served - entry.arrival_request_count
                       >= static_cast<std::uint64_t>(params.pending_window)) {
                hebbian_update(connection, false, params.eta, params.p_min, params.p_max);
            } else {
                keep.push_back(entry);
            }
        }
        connection.pending = std::move(keep);
    }
}

struct TopologyMetrics {
    double clustering_coefficient = std::numeric_limits<double>::quiet_NaN();
    double characteristic_path_length = std::numeric_limits<double>::quiet_NaN();
    std::size_t edge_count = 0;
    /// Expected clustering of an Erdos-Renyi graph with the same node and
    /// edge count (the edge density); the small-world comparison baseline.
    double random_clustering_baseline = 0.0;
    std::size_t largest_component = 0;
};

/// Binarizes the network (edge iff max(p_ij, p_ji) >= threshold) and
/// computes the Watts-Strogatz mean local clustering coefficient over all
/// nodes plus the mean shortest-path length over the largest connected
/// component. Metrics are NaN when undefined (no edges / no pairs).
inline TopologyMetrics topology_metrics(const Network& network, double threshold = 0.3)
{
    std::vector<HabitatId> ids;
    ids.reserve(network.habitats.size());
    for (const auto& [id, habitat] : network.habitats) {
        ids.push_back(id);
    }
    const std::size_t n = ids.size();
    std::map<HabitatId, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
        index[ids[i]] = i;
    }

    std::vector<std::vector<char>> adjacent(n, std::vector<char>(n, 0));
    TopologyMetrics metrics;
    for (const auto& [source_id, habitat] : network.habitats) {
        for (const auto& [dest_id, connection] : habitat.out) {
            const std::size_t i = index.at(source_id);
            const std::size_t j = index.at(dest_id);
            if (connection.p >= threshold && !adjacent[i][j]) {
                adjacent[i][j] = 1;
                adjacent[j][i] = 1;
                ++metrics.edge_count;
            }
        }
    }
    if (n >= 2) {
        metrics.random_clustering_baseline =
            2.0 * static_cast<double>(metrics.edge_count) / (static_cast<double>(n) * static_cast<double>(n - 1));
    }
    if (metrics.edge_count == 0) {
        metrics.largest_component = n > 0 ? 1 : 0;
        return metrics;
    }

    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (adjacent[i][j]) {
                neighbors[i].push_back(j);
            }
        }
    }

    // Mean local clustering over all nodes; degree < 2 contributes 0.
    double clustering_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t degree = neighbors[i].size();
        if (degree < 2) {
            continue;
        }
        std::size_t closed = 0;
        for (std::size_t a = 0; a < degree; ++a) {
            for (std::size_t b = a + 1; b < degree; ++b) {
                if (adjacent[neighbors[i][a]][neighbors[i][b]]) {
                    ++closed;
                }
            }
        }
        clustering_sum +=
            2.0 * static_cast<double>(closed) / (static_cast<double>(degree) * static_cast<double>(degree - 1));
    }
    metrics.clustering_coefficient = n > 0 ? clustering_sum / static_cast<double>(n) : 0.0;

    // Largest connected component via BFS.
    std::vector<int> component(n, -1);
    int n_components = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (component[start] != -1) {
            continue;
        }
        const int label = n_components++;
        std::vector<std::size_t> frontier{start};
        component[start] = label;
        while (!frontier.empty()) {
            const std::size_t node = frontier.back();
            frontier.pop_back();
            for (std::size_t next : neighbors[node]) {
                if (component[next] == -1) {
                    component[next] = label;
                    frontier.push_back(next);
                }
            }
        }
    }
    std::vector<std::size_t> component_sizes(static_cast<std::size_t>(n_components), 0);
    for (std::size_t i = 0; i < n; ++i) {
        ++component_sizes[static_cast<std::size_t>(component[i])];
    }
    int largest_label = 0;
    for (int c = 1; c < n_components; ++c) {
        if (component_sizes[static_cast<std::size_t>(c)]
            > component_sizes[static_cast<std::size_t>(largest_label)]) {
            largest_label = c;
        }
    }
    metrics.largest_component = component_sizes[static_cast<std::size_t>(largest_label)];

    // Mean shortest-path length over ordered pairs of the largest component.
    if (metrics.largest_component >= 2) {
        double distance_sum = 0.0;
        std::uint64_t pair_count = 0;
        std::vector<std::size_t> bfs_distance(n);
        for (std::size_t start = 0; start < n; ++start) {
            if (component[start] != largest_label) {
                continue;
            }
            std::fill(bfs_distance.begin(), bfs_distance.end(), std::numeric_limits<std::size_t>::max());
            bfs_distance[start] = 0;
            std::deque<std::size_t> queue{start};
            while (!queue.empty()) {
                const std::size_t node = queue.front();
                queue.pop_front();
                for (std::size_t next : neighbors[node]) {
                    if (bfs_distance[next] == std::numeric_limits<std::size_t>::max()) {
                        bfs_distance[next] = bfs_distance[node] + 1;
                        queue.push_back(next);
                    }
                }
            }
            for (std::size_t other = 0; other < n; ++other) {
                if (other != start && component[other] == largest_label) {
                    distance_sum += static_cast<double>(bfs_distance[other]);
                    ++pair_count;
                }
            }
        }
        metrics.characteristic_path_length = distance_sum / static_cast<double>(pair_count);
    }
    return metrics;
}

/// Topology snapshot: one row per directed connection.
inline void write_topology_csv(std::ostream& out, const Network& network)
{
    out << "source_id,dest_id,p,successes,failures\n";
    for (const auto& [source_id, habitat] : network.habitats) {
        for (const auto& [dest_id, connection] : habitat.out) {
            out << source_id << ',' << dest_id << ',' << connection.p << ',' << connection.successes
                << ',' << connection.failures << '\n';
        }
    }
}

} // namespace decosim
