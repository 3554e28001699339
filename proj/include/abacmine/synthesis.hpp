#pragma once

// Synthetic ground truth: entity universes, random policies, and logs
// obtained by evaluating a policy on every request of a universe, optionally
// thinned out or corrupted with decision flips.

#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "abacmine/encoding.hpp"
#include "abacmine/errors.hpp"
#include "abacmine/model.hpp"
#include "abacmine/rng.hpp"

namespace abacmine {

inline constexpr std::uint64_t kDefaultTupleCap = 10'000'000;

// How many entities of one kind to create. With `enumerate` every
// combination of attribute values becomes one entity and `count` is ignored.
struct EntitySpec {
    std::size_t count = 0;
    bool enumerate = false;
};

struct UniverseSpec {
    EntitySpec users{50, false};
    EntitySpec objects{60, false};
    EntitySpec sessions{0, true};
};

namespace detail {

inline std::string entity_id(char prefix, std::size_t i, std::size_t n) {
    auto s = std::to_string(i);
    const auto width = std::to_string(n > 0 ? n - 1 : 0).size();
    return std::string(1, prefix) + std::string(width - std::min(width, s.size()), '0') + s;
}

inline std::vector<Entity> make_entities(const Schema& schema, Kind kind, const EntitySpec& spec, Rng& rng) {
    const auto& attrs = schema.attributes(kind);
    const char prefix = kind == Kind::User ? 'u' : kind == Kind::Object ? 'o' : 's';
    std::vector<Entity> out;
    if (attrs.empty()) {
        if (kind == Kind::Session) out.push_back(null_session(schema));
        return out;
    }
    if (spec.enumerate) {
        std::size_t n = 1;
        for (const auto& a : attrs) n *= schema.range(a).size();
        std::vector<std::size_t> digit(attrs.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            Entity e{entity_id(prefix, i, n), kind, {}};
            for (std::size_t k = 0; k < attrs.size(); ++k) e.attrs[attrs[k]] = schema.range(attrs[k])[digit[k]];
            out.push_back(std::move(e));
            for (std::size_t k = attrs.size(); k-- > 0;) {
                if (++digit[k] < schema.range(attrs[k]).size()) break;
                digit[k] = 0;
            }
        }
        return out;
    }
    for (std::size_t i = 0; i < spec.count; ++i) {
        Entity e{entity_id(prefix, i, spec.count), kind, {}};
        for (const auto& a : attrs) {
            const auto& range = schema.range(a);
            e.attrs[a] = range[rng.below(range.size())];
        }
        out.push_back(std::move(e));
    }
    return out;
}

// Count of `fraction` of n, robust to representation error (0.1 * 100 = 10).
inline std::size_t fraction_count(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

} // namespace detail

// Entities drawn uniformly per attribute (or enumerated), one generator
// substream per kind.
inline std::shared_ptr<const EntityStore> generate_universe(const Schema& schema, const UniverseSpec& spec,
                                                            std::uint64_t seed) {
    Rng ur(substream_seed(seed, "users")), orng(substream_seed(seed, "objects")), sr(substream_seed(seed, "sessions"));
    auto users = detail::make_entities(schema, Kind::User, spec.users, ur);
    auto objects = detail::make_entities(schema, Kind::Object, spec.objects, orng);
    auto sessions = detail::make_entities(schema, Kind::Session, spec.sessions, sr);
    if (users.empty() || objects.empty() || sessions.empty()) throw ConfigError("universe has an empty entity kind");
    return std::make_shared<const EntityStore>(schema, std::move(users), std::move(objects), std::move(sessions));
}

struct RandomPolicySpec {
    std::size_t n_rules = 10;
    std::size_t user_attrs = 3;
    std::size_t object_attrs = 3;
    std::size_t session_attrs = 2;
    std::size_t min_values = 2;
    std::size_t max_values = 5;
    std::size_t operations = 3;
    std::size_t min_filter = 1;
    std::size_t max_filter = 3;
    // Chance that an object attribute reuses a user attribute's range,
    // making relations between the two possible.
    double shared_range = 0.5;
    double relation_probability = 0.3;
    double negative_probability = 0.0;

    void validate() const {
        if (user_attrs == 0 || object_attrs == 0) throw ConfigError("random policy needs user and object attributes");
        if (min_values < 1 || min_values > max_values) throw ConfigError("invalid value-count range");
        if (operations == 0) throw ConfigError("random policy needs at least one operation");
        if (min_filter > max_filter) throw ConfigError("invalid filter-size range");
        for (double p : {shared_range, relation_probability, negative_probability}) {
            if (!(p >= 0 && p <= 1)) throw ConfigError("probabilities must lie in [0, 1]");
        }
    }
};

inline Policy generate_random_policy(const RandomPolicySpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    auto values = [&](std::size_t n) {
        std::vector<std::string> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back("v" + std::to_string(i));
        return v;
    };
    auto draw_count = [&] { return spec.min_values + rng.below(spec.max_values - spec.min_values + 1); };

    Schema::Ranges ranges;
    std::vector<std::string> ua, oa, sa;
    for (std::size_t i = 0; i < spec.user_attrs; ++i) {
        ua.push_back("ua" + std::to_string(i));
        ranges[ua.back()] = values(draw_count());
    }
    for (std::size_t i = 0; i < spec.object_attrs; ++i) {
        oa.push_back("oa" + std::to_string(i));
        if (rng.bernoulli(spec.shared_range)) {
            ranges[oa.back()] = ranges[ua[rng.below(ua.size())]];
        } else {
            ranges[oa.back()] = values(draw_count());
        }
    }
    for (std::size_t i = 0; i < spec.session_attrs; ++i) {
        sa.push_back("sa" + std::to_string(i));
        ranges[sa.back()] = values(draw_count());
    }
    std::vector<std::string> ops;
    for (std::size_t i = 0; i < spec.operations; ++i) ops.push_back("op" + std::to_string(i));
    Schema schema(ua, oa, sa, ops, ranges);

    const auto all = schema.all_attributes();
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& u : ua) {
        for (const auto& o : oa) {
            if (schema.same_range(u, o)) pairs.emplace_back(u, o);
        }
    }

    if (spec.min_filter > all.size()) throw ConfigError("random policy asks for more filters than attributes");

    // draw until n_rules distinct rules exist; a spec too narrow to hold that
    // many gives up rather than loop forever
    std::set<Rule> rules;
    const std::size_t max_draws = 100 * spec.n_rules + 100;
    for (std::size_t draw = 0; rules.size() < spec.n_rules; ++draw) {
        if (draw == max_draws) throw ConfigError("random policy spec cannot produce that many distinct rules");
        const auto size = std::min(all.size(), spec.min_filter + rng.below(spec.max_filter - spec.min_filter + 1));
        std::vector<FilterTuple> filter;
        std::set<std::string> used;
        for (auto i : rng.sample_indices(all.size(), size)) {
            const auto& a = all[i];
            const auto& range = schema.range(a);
            const auto p = rng.bernoulli(spec.negative_probability) ? Polarity::Negative : Polarity::Positive;
            filter.push_back({a, range[rng.below(range.size())], p});
            used.insert(a);
        }
        std::vector<RelationTuple> relation;
        if (!pairs.empty() && rng.bernoulli(spec.relation_probability)) {
            const auto& [u, o] = pairs[rng.below(pairs.size())];
            if (!used.count(u) && !used.count(o)) {
                const auto p = rng.bernoulli(spec.negative_probability) ? Polarity::Negative : Polarity::Positive;
                relation.emplace_back(u, o, p);
            }
        }
        rules.insert({AttributeFilter(std::move(filter)), RelationCondition(std::move(relation)),
                      ops[rng.below(ops.size())], Polarity::Positive});
    }
    return Policy(schema, {rules.begin(), rules.end()});
}

// Every request of the universe with the policy's decision, in canonical
// (user, object, session, op) order.
inline AccessLog generate_complete_log(const Policy& policy, std::shared_ptr<const EntityStore> store,
                                       std::uint64_t cap = kDefaultTupleCap) {
    if (!store) throw ConfigError("complete log needs an entity store");
    if (!(store->schema() == policy.schema())) throw SchemaMismatch("policy and universe schemas differ");
    const auto nu = store->users().size(), no = store->objects().size(), ns = store->sessions().size();
    const auto nop = policy.schema().operations().size();
    const long double total = static_cast<long double>(nu) * no * ns * nop;
    if (total > static_cast<long double>(cap)) {
        throw CapExceeded("complete log of " + std::to_string(static_cast<std::uint64_t>(total)) +
                          " tuples exceeds the cap of " + std::to_string(cap));
    }

    const FeatureSpace space(policy.schema());
    const CompiledPolicy compiled(space, policy);
    const auto users = detail::code_entities(*store, space, Kind::User);
    const auto objects = detail::code_entities(*store, space, Kind::Object);
    const auto sessions = detail::code_entities(*store, space, Kind::Session);

    std::vector<AuthorizationTuple> tuples;
    tuples.reserve(static_cast<std::size_t>(total));
    std::vector<Code> row(space.size());
    for (std::uint32_t u = 0; u < nu; ++u) {
        const auto& uc = users.class_codes[users.class_of[u]];
        std::copy(uc.begin(), uc.end(), row.begin());
        for (std::uint32_t o = 0; o < no; ++o) {
            const auto& oc = objects.class_codes[objects.class_of[o]];
            std::copy(oc.begin(), oc.end(), row.begin() + uc.size());
            for (std::uint32_t s = 0; s < ns; ++s) {
                const auto& sc = sessions.class_codes[sessions.class_of[s]];
                std::copy(sc.begin(), sc.end(), row.begin() + uc.size() + oc.size());
                for (std::uint16_t op = 0; op < nop; ++op) {
                    // operations are sorted, so the op index is its code
                    row[space.op_feature()] = op;
                    tuples.push_back({{u, o, s, op}, compiled.permits(row) ? Decision::Permit : Decision::Deny});
                }
            }
        }
    }
    return AccessLog(std::move(store), std::move(tuples));
}

// Stratified sample keeping ceil(fraction * n) tuples of each decision, in
// their original order.
inline AccessLog sparsify(const AccessLog& log, double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw ConfigError("sparsify fraction must lie in (0, 1]");
    Rng rng(seed);
    std::vector<bool> keep(log.size(), false);
    for (Decision d : {Decision::Permit, Decision::Deny}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < log.size(); ++i) {
            if (log.tuples()[i].decision == d) idx.push_back(i);
        }
        for (auto j : rng.sample_indices(idx.size(), detail::fraction_count(fraction, idx.size()))) keep[idx[j]] = true;
    }
    std::vector<AuthorizationTuple> out;
    for (std::size_t i = 0; i < log.size(); ++i) {
        if (keep[i]) out.push_back(log.tuples()[i]);
    }
    return log.with_tuples(std::move(out));
}

struct NoisyLog {
    AccessLog log;
    std::vector<std::size_t> flipped;  // ascending tuple indices
};

// Flips the decision of ceil(fraction * |L|) tuples drawn from the whole log.
inline NoisyLog add_noise(const AccessLog& log, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0 && fraction <= 1)) throw ConfigError("noise fraction must lie in [0, 1]");
    Rng rng(seed);
    auto idx = rng.sample_indices(log.size(), detail::fraction_count(fraction, log.size()));
    auto tuples = log.tuples();
    for (auto i : idx) tuples[i].decision = flip(tuples[i].decision);
    return {log.with_tuples(std::move(tuples)), std::move(idx)};
}

} // namespace abacmine
