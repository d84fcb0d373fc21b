#pragma once

// Shared domain types: attributes, service descriptions, agents, aggregations,
// requests and the request-property distributions. Types are immutable value
// records; invariant-checked construction goes through the make() factories.

#include "decosim/result.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace decosim {

using AttributeId = std::uint16_t;
using AgentId = std::uint64_t;
using HabitatId = std::uint32_t;
using UserId = std::uint32_t;

/// Sorted, duplicate-free set of attribute ids. Kept as a flat vector:
/// descriptions are tiny (a handful of attributes), so linear merges beat
/// node-based containers in the fitness inner loop.
class AttributeSet {
public:
    AttributeSet() = default;

    static AttributeSet from(std::vector<AttributeId> ids)
    {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        AttributeSet s;
        s.ids_ = std::move(ids);
        return s;
    }

    std::size_t size() const { return ids_.size(); }
    bool empty() const { return ids_.empty(); }

    bool contains(AttributeId id) const
    {
        return std::binary_search(ids_.begin(), ids_.end(), id);
    }

    /// |this ∩ other|
    std::size_t intersection_size(const AttributeSet& other) const
    {
        std::size_t n = 0;
        auto a = ids_.begin();
        auto b = other.ids_.begin();
        while (a != ids_.end() && b != other.ids_.end()) {
            if (*a < *b) {
                ++a;
            } else if (*b < *a) {
                ++b;
            } else {
                ++n;
                ++a;
                ++b;
            }
        }
        return n;
    }

    /// |this \ other|
    std::size_t difference_size(const AttributeSet& other) const
    {
        return ids_.size() - intersection_size(other);
    }

    const std::vector<AttributeId>& ids() const { return ids_; }

    bool operator==(const AttributeSet&) const = default;

private:
    std::vector<AttributeId> ids_;
};

/// Ontological description of one atomic service: a non-empty attribute set
/// of bounded size.
struct AtomicServiceDescription {
    AttributeSet attributes;

    static Result<AtomicServiceDescription> make(AttributeSet attributes, std::size_t attr_cap)
    {
        if (attributes.empty()) {
            return Result<AtomicServiceDescription>::fail("atomic service description is empty");
        }
        if (attributes.size() > attr_cap) {
            return Result<AtomicServiceDescription>::fail(
                "atomic service description exceeds attribute cap of " + std::to_string(attr_cap));
        }
        return Result<AtomicServiceDescription>::ok(AtomicServiceDescription{std::move(attributes)});
    }

    bool operator==(const AtomicServiceDescription&) const = default;
};

/// How an agent entered a habitat pool. Pools only ever gain agents through
/// these three paths.
enum class AgentProvenance : std::uint8_t {
    catalog,      // seeded with the habitat at build time
    user_created, // registered by the owning user during the run
    migrant,      // copied in across a connection
};

/// An atomic service: ontological description plus provenance metadata.
/// The executable payload of a real service is deliberately absent.
struct Agent {
    AgentId id = 0;
    AtomicServiceDescription description;
    HabitatId origin_habitat = 0;
    std::int64_t created_step = 0;
    AgentProvenance provenance = AgentProvenance::catalog;

    static Result<Agent> make(AgentId id, AtomicServiceDescription description,
                              HabitatId origin_habitat, std::int64_t created_step,
                              AgentProvenance provenance)
    {
        if (description.attributes.empty()) {
            return Result<Agent>::fail("agent " + std::to_string(id) + " has an empty description");
        }
        return Result<Agent>::ok(
            Agent{id, std::move(description), origin_habitat, created_step, provenance});
    }
};

/// Issues run-unique, strictly increasing agent ids.
class AgentIdSource {
public:
    AgentId next() { return next_++; }

private:
    AgentId next_ = 1;
};

/// Ordered sequence of agent ids; the genome of the evolutionary search and,
/// once deployed, an application. May be empty while under evolution; the
/// deployment path rejects empty genomes.
struct Aggregation {
    std::vector<AgentId> genome;
    std::optional<double> cached_fitness;

    std::size_t size() const { return genome.size(); }
    bool empty() const { return genome.empty(); }
};

/// A user's semantic description of a desired application.
struct Request {
    std::vector<AtomicServiceDescription> services;
    UserId issuer = 0;
    std::int64_t step = 0;

    std::size_t length() const { return services.size(); }

    static Result<Request> make(std::vector<AtomicServiceDescription> services, UserId issuer,
                                std::int64_t step)
    {
        if (services.empty()) {
            return Result<Request>::fail("request has no services");
        }
        return Result<Request>::ok(Request{std::move(services), issuer, step});
    }
};

// --- request-property distributions -------------------------------------

struct UniformSpec {
    int lo = 1;
    int hi = 1;
    bool operator==(const UniformSpec&) const = default;
};

struct GaussianSpec {
    double mu = 0.0;
    double sigma = 1.0;
    int lo = 1;
    int hi = 1;
    bool operator==(const GaussianSpec&) const = default;
};

struct PowerLawSpec {
    double gamma = 1.0;
    int lo = 1;
    int hi = 1;
    bool operator==(const PowerLawSpec&) const = default;
};

/// Tagged alternative over the three supported shapes. Supports are integer
/// ranges [lo, hi] with lo >= 1.
using DistributionSpec = std::variant<UniformSpec, GaussianSpec, PowerLawSpec>;

inline int support_lo(const DistributionSpec& d)
{
    return std::visit([](const auto& s) { return s.lo; }, d);
}

inline int support_hi(const DistributionSpec& d)
{
    return std::visit([](const auto& s) { return s.hi; }, d);
}

namespace detail {

/// Standard-normal mass of [lo_x, hi_x], computed from whichever tail keeps
/// erfc small so the difference never cancels.
inline double standard_normal_mass(double lo_x, double hi_x)
{
    double mass;
    if (lo_x + hi_x > 0.0) {
        mass = 0.5 * std::erfc(lo_x / std::numbers::sqrt2)
               - 0.5 * std::erfc(hi_x / std::numbers::sqrt2);
    } else {
        mass = 0.5 * std::erfc(-hi_x / std::numbers::sqrt2)
               - 0.5 * std::erfc(-lo_x / std::numbers::sqrt2);
    }
    return std::max(mass, 0.0);
}

} // namespace detail

/// Invariant check; violation strings are prefixed with `key` so config
/// errors name the offending field.
inline std::vector<std::string> validate(const DistributionSpec& d, const std::string& key)
{
    std::vector<std::string> violations;
    const int lo = support_lo(d);
    const int hi = support_hi(d);
    if (lo < 1) {
        violations.push_back(key + ": lo must be >= 1");
    }
    if (lo > hi) {
        violations.push_back(key + ": lo > hi");
    }
    if (const auto* g = std::get_if<GaussianSpec>(&d)) {
        if (!(g->sigma > 0.0)) {
            violations.push_back(key + ": sigma must be > 0");
        } else if (lo <= hi && lo >= 1) {
            // Rejection sampling needs the support to carry real mass.
            double support_mass = 0.0;
            for (int k = lo; k <= hi; ++k) {
                support_mass += detail::standard_normal_mass((k - 0.5 - g->mu) / g->sigma,
                                                             (k + 0.5 - g->mu) / g->sigma);
            }
            if (support_mass < 1e-9) {
                violations.push_back(key + ": support carries almost no probability mass");
            }
        }
    }
    if (const auto* p = std::get_if<PowerLawSpec>(&d); p && !(p->gamma > 0.0)) {
        violations.push_back(key + ": gamma must be > 0");
    }
    return violations;
}

/// Exact probability mass over the support [lo, hi], normalized to sum to 1.
///
/// Gaussian mass reproduces the sampler exactly: a draw is rounded to the
/// nearest integer and redrawn until it lands in the support, so bin k holds
/// the normal mass of [k - 1/2, k + 1/2) renormalized over the support.
inline std::vector<double> pmf(const DistributionSpec& d)
{
    const int lo = support_lo(d);
    const int hi = support_hi(d);
    const std::size_t bins = static_cast<std::size_t>(hi - lo + 1);
    std::vector<double> p(bins, 0.0);
    if (const auto* u = std::get_if<UniformSpec>(&d)) {
        (void)u;
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(bins));
        return p;
    }
    if (const auto* g = std::get_if<GaussianSpec>(&d)) {
        for (std::size_t i = 0; i < bins; ++i) {
            const double k = static_cast<double>(lo + static_cast<int>(i));
            p[i] = detail::standard_normal_mass((k - 0.5 - g->mu) / g->sigma,
                                                (k + 0.5 - g->mu) / g->sigma);
        }
    } else {
        const auto& pl = std::get<PowerLawSpec>(d);
        for (std::size_t i = 0; i < bins; ++i) {
            const double k = static_cast<double>(lo + static_cast<int>(i));
            p[i] = std::pow(k, -pl.gamma);
        }
    }
    double z = 0.0;
    for (double v : p) {
        z += v;
    }
    if (!(z > 0.0)) {
        throw SimError("distribution support carries no probability mass");
    }
    for (double& v : p) {
        v /= z;
    }
    return p;
}

/// Expected value of the distribution over its integer support.
inline double mean(const DistributionSpec& d)
{
    const auto p = pmf(d);
    const int lo = support_lo(d);
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        m += static_cast<double>(lo + static_cast<int>(i)) * p[i];
    }
    return m;
}

} // namespace decosim
