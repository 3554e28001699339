#pragma once

// Test-only oracles and fixtures. The oracles re-derive results along a
// second path (string maps, per-tuple replay, quadratic loops) and share no
// evaluation code with the library.

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "abacmine/abacmine.hpp"

namespace support {

using namespace abacmine;

// ---------------------------------------------------------------------------
// Decision oracle: filters, relations and rules expanded literally.

inline const std::string* lookup(const Entity& u, const Entity& o, const Entity& s, const std::string& attr) {
    for (const Entity* e : {&u, &o, &s}) {
        auto it = e->attrs.find(attr);
        if (it != e->attrs.end()) return &it->second;
    }
    return nullptr;
}

inline bool oracle_rule(const Entity& u, const Entity& o, const Entity& s, const std::string& op, const Rule& r) {
    for (const auto& t : r.filter.tuples()) {
        const auto* v = lookup(u, o, s, t.attr);
        if (!v) return false;
        if (t.polarity == Polarity::Positive && *v != t.value) return false;
        if (t.polarity == Polarity::Negative && *v == t.value) return false;
    }
    for (const auto& t : r.relation.tuples()) {
        const auto* a = lookup(u, o, s, t.left);
        const auto* b = lookup(u, o, s, t.right);
        if (!a || !b) return false;
        if (t.polarity == Polarity::Positive && *a != *b) return false;
        if (t.polarity == Polarity::Negative && *a == *b) return false;
    }
    if (r.op_polarity == Polarity::Positive) return op == r.op;
    return op != r.op;
}

inline Decision oracle_decision(const std::vector<Rule>& rules, const EntityStore& store, const AccessRequest& q) {
    const auto& u = store.users()[q.user];
    const auto& o = store.objects()[q.object];
    const auto& s = store.sessions()[q.session];
    const auto& op = store.schema().operations()[q.op];
    for (const auto& r : rules) {
        if (oracle_rule(u, o, s, op, r)) return Decision::Permit;
    }
    return Decision::Deny;
}

// ---------------------------------------------------------------------------
// Metrics oracle: replay every tuple and apply the formulas in one place.

struct ReferenceMetrics {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    double acc = 0, precision = 0, recall = 0, f = 0, wsc = 0, wsc_max = 0, dwsc = 0, q = 0;
};

inline ReferenceMetrics reference_metrics(const std::vector<Rule>& rules, const AccessLog& log) {
    double tp = 0, fp = 0, tn = 0, fn = 0, pos = 0, neg = 0;
    for (const auto& t : log.tuples()) {
        const bool permit = oracle_decision(rules, log.store(), t.request) == Decision::Permit;
        if (t.decision == Decision::Permit) {
            pos += 1;
            (permit ? tp : fn) += 1;
        } else {
            neg += 1;
            (permit ? fp : tn) += 1;
        }
    }
    ReferenceMetrics m;
    m.tp = pos > 0 ? tp / pos : 0;
    m.fn = pos > 0 ? fn / pos : 0;
    m.fp = neg > 0 ? fp / neg : 0;
    m.tn = neg > 0 ? tn / neg : 0;
    m.acc = (m.tp + m.tn) / (m.tp + m.tn + m.fp + m.fn);
    m.precision = m.tp + m.fp > 0 ? m.tp / (m.tp + m.fp) : 0;
    m.recall = m.tp + m.fn > 0 ? m.tp / (m.tp + m.fn) : 0;
    m.f = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0;
    for (const auto& r : rules) m.wsc += static_cast<double>(r.filter.size() + r.relation.size());

    // one fully pinned rule per distinct (attribute values, op) of L+
    std::set<std::vector<std::string>> distinct;
    for (const auto& t : log.tuples()) {
        if (t.decision != Decision::Permit) continue;
        std::vector<std::string> key;
        for (const Entity* e : {&log.store().users()[t.request.user], &log.store().objects()[t.request.object],
                                &log.store().sessions()[t.request.session]}) {
            for (const auto& [a, v] : e->attrs) key.push_back(a + "=" + v);
        }
        key.push_back(log.schema().operations()[t.request.op]);
        distinct.insert(key);
    }
    m.wsc_max = static_cast<double>(distinct.size() * log.schema().attribute_count());
    if (m.wsc_max > 0) {
        m.dwsc = (m.wsc_max - m.wsc + 1) / m.wsc_max;
        m.q = (m.f > 0 && m.dwsc > 0) ? 2 * m.f * m.dwsc / (m.f + m.dwsc) : 0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Clustering oracles

// Mean silhouette with every record expanded by its weight, O(n^2).
inline double brute_silhouette(const RecordSet& records, const std::vector<std::size_t>& assign, std::size_t k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
        for (std::uint64_t w = 0; w < records.weight(i); ++w) idx.push_back(i);
    }
    double total = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        std::vector<double> sum(k, 0);
        std::vector<std::size_t> count(k, 0);
        for (std::size_t b = 0; b < idx.size(); ++b) {
            if (a == b) continue;
            sum[assign[idx[b]]] += static_cast<double>(hamming_dissimilarity(records.row(idx[a]), records.row(idx[b])));
            count[assign[idx[b]]] += 1;
        }
        const auto own = assign[idx[a]];
        if (count[own] == 0) continue;  // singleton: silhouette 0
        const double in = sum[own] / static_cast<double>(count[own]);
        double out = INFINITY;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && count[c] > 0) out = std::min(out, sum[c] / static_cast<double>(count[c]));
        }
        if (std::isinf(out)) continue;
        const double m = std::max(in, out);
        total += m > 0 ? (out - in) / m : 0;
    }
    return total / static_cast<double>(idx.size());
}

// ---------------------------------------------------------------------------
// Extraction oracle over string records (last column is the op).

struct BruteRule {
    std::set<std::tuple<std::string, std::string, bool>> filter;  // attr, value, positive
    std::set<std::tuple<std::string, std::string, bool>> relation;
};

inline BruteRule brute_extract(const std::vector<std::string>& attrs,
                               const std::vector<std::vector<std::string>>& ranges,
                               const std::vector<std::vector<std::string>>& cluster,
                               const std::vector<std::vector<std::string>>& log, const Thresholds& t) {
    auto freq = [](const std::vector<std::vector<std::string>>& rows, auto pred) {
        double n = 0;
        for (const auto& r : rows) n += pred(r) ? 1 : 0;
        return n / static_cast<double>(rows.size());
    };
    BruteRule out;
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        for (const auto& v : ranges[a]) {
            auto is_v = [&](const std::vector<std::string>& r) { return r[a] == v; };
            const double c = freq(cluster, is_v), l = freq(log, is_v);
            if (c - l > t.t_pos) out.filter.insert({attrs[a], v, true});
            if (l - c > t.t_neg) out.filter.insert({attrs[a], v, false});
        }
    }
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        for (std::size_t b = a + 1; b < attrs.size(); ++b) {
            if (ranges[a] != ranges[b]) continue;
            auto eq = [&](const std::vector<std::string>& r) { return r[a] == r[b]; };
            const double c = freq(cluster, eq), l = freq(log, eq);
            auto [x, y] = std::minmax(attrs[a], attrs[b]);
            if (c - l > t.theta_pos) out.relation.insert({x, y, true});
            if (l - c > t.theta_neg) out.relation.insert({x, y, false});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures

// Random schema with `n_attrs` attributes spread over the three kinds,
// some pairs sharing ranges.
inline Schema random_schema(Rng& rng, std::size_t n_attrs, std::size_t n_ops = 3) {
    std::vector<std::string> kinds[3];
    Schema::Ranges ranges;
    std::vector<std::vector<std::string>> pool;
    for (std::size_t i = 0; i < n_attrs; ++i) {
        const auto k = i < 3 ? i : rng.below(3);
        const std::string name = std::string(1, "uos"[k]) + "a" + std::to_string(i);
        kinds[k].push_back(name);
        if (!pool.empty() && rng.bernoulli(0.4)) {
            ranges[name] = pool[rng.below(pool.size())];
        } else {
            std::vector<std::string> values;
            const auto n = 2 + rng.below(3);
            for (std::size_t v = 0; v < n; ++v) values.push_back("v" + std::to_string(v));
            ranges[name] = values;
            pool.push_back(values);
        }
    }
    std::vector<std::string> ops;
    for (std::size_t i = 0; i < n_ops; ++i) ops.push_back("op" + std::to_string(i));
    return Schema(kinds[0], kinds[1], kinds[2], ops, ranges);
}

inline Rule random_rule(Rng& rng, const Schema& schema, double negative = 0.3, std::size_t max_filter = 3) {
    const auto attrs = schema.all_attributes();
    std::vector<FilterTuple> f;
    std::map<std::string, std::set<std::string>> negatives;
    const auto n = rng.below(max_filter + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = attrs[rng.below(attrs.size())];
        const auto& range = schema.range(a);
        const auto& v = range[rng.below(range.size())];
        const bool neg = rng.bernoulli(negative);
        // skip anything that would contradict an earlier tuple
        bool clash = false;
        for (const auto& t : f) clash |= t.attr == a && (t.value == v || (!neg && t.polarity == Polarity::Positive));
        if (!clash) f.push_back({a, v, neg ? Polarity::Negative : Polarity::Positive});
    }
    std::vector<RelationTuple> r;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        for (std::size_t j = i + 1; j < attrs.size(); ++j) {
            if (schema.same_range(attrs[i], attrs[j]) && rng.bernoulli(0.15)) {
                r.emplace_back(attrs[i], attrs[j], rng.bernoulli(negative) ? Polarity::Negative : Polarity::Positive);
            }
        }
    }
    const auto& ops = schema.operations();
    return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), ops[rng.below(ops.size())],
                rng.bernoulli(0.1) ? Polarity::Negative : Polarity::Positive};
}

inline std::vector<Rule> random_rules(Rng& rng, const Schema& schema, std::size_t n, double negative = 0.3) {
    std::vector<Rule> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_rule(rng, schema, negative));
    return out;
}

// Random log over a random universe; decisions come from `truth` when given
// and are coin flips otherwise.
inline AccessLog random_log(Rng& rng, const Schema& schema, std::size_t n, const std::vector<Rule>* truth = nullptr) {
    UniverseSpec spec{{6, false}, {6, false}, {3, false}};
    auto store = generate_universe(schema, spec, rng.next());
    std::vector<AuthorizationTuple> tuples;
    for (std::size_t i = 0; i < n; ++i) {
        AccessRequest q{static_cast<std::uint32_t>(rng.below(store->users().size())),
                        static_cast<std::uint32_t>(rng.below(store->objects().size())),
                        static_cast<std::uint32_t>(rng.below(store->sessions().size())),
                        static_cast<std::uint16_t>(rng.below(schema.operations().size()))};
        Decision d = truth ? oracle_decision(*truth, *store, q) : (rng.bernoulli(0.5) ? Decision::Permit : Decision::Deny);
        tuples.push_back({q, d});
    }
    return AccessLog(store, std::move(tuples));
}

// Random categorical records with `width` features of cardinality <= card.
inline RecordSet random_records(Rng& rng, std::size_t n, std::size_t width, std::size_t card) {
    RecordSet out(width);
    std::vector<Code> row(width);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& c : row) c = static_cast<Code>(rng.below(card));
        out.push_back(row, 1 + rng.below(3));
    }
    return out;
}

// Four rules over pairwise-disjoint attribute sets, balanced enumerated
// universe (81 users x 81 objects x 2 sessions x 2 ops).
inline Policy disjoint_policy() {
    const std::vector<std::string> v3{"a", "b", "c"};
    Schema schema({"u1", "u2", "u3", "u4"}, {"o1", "o2", "o3", "o4"}, {"s1"}, {"read", "write"},
                  {{"u1", v3}, {"u2", v3}, {"u3", v3}, {"u4", v3}, {"o1", v3}, {"o2", v3}, {"o3", v3}, {"o4", v3},
                   {"s1", {"x", "y"}}});
    auto rule = [](std::vector<FilterTuple> f, std::vector<RelationTuple> r, std::string op) {
        return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), std::move(op), Polarity::Positive};
    };
    return Policy(schema, {
                              rule({{"u1", "a"}, {"o1", "a"}}, {}, "read"),
                              rule({{"u2", "b"}, {"o2", "c"}}, {}, "write"),
                              rule({{"u3", "c"}, {"s1", "x"}}, {}, "write"),
                              rule({{"o3", "b"}}, {{"u4", "o4"}}, "read"),
                          });
}

inline UniverseSpec enumerated_universe() { return {{0, true}, {0, true}, {0, true}}; }

inline AccessLog complete_log(const Policy& p, const UniverseSpec& u = enumerated_universe(), std::uint64_t seed = 7) {
    return generate_complete_log(p, generate_universe(p.schema(), u, seed));
}

// True iff both rule sets decide every request of the log's universe alike.
inline bool decision_equivalent(const std::vector<Rule>& a, const std::vector<Rule>& b, const EntityStore& store) {
    const auto ops = store.schema().operations().size();
    for (std::uint32_t u = 0; u < store.users().size(); ++u)
        for (std::uint32_t o = 0; o < store.objects().size(); ++o)
            for (std::uint32_t s = 0; s < store.sessions().size(); ++s)
                for (std::uint16_t op = 0; op < ops; ++op) {
                    const AccessRequest q{u, o, s, op};
                    if (oracle_decision(a, store, q) != oracle_decision(b, store, q)) return false;
                }
    return true;
}

// Faculty/gradebook schema of the restricted-versus-relaxed rule example.
// With `extra`, one more user and object attribute each: on the bare
// four-attribute universe the most complex policy is so small that Q ranks
// the relaxed rule above the true one.
inline Schema gradebook_schema(bool extra = true) {
    const std::vector<std::string> depts{"CS", "EE", "ME"};
    Schema::Ranges ranges{{"position", {"faculty", "staff", "student"}},
                          {"uDept", depts},
                          {"type", {"article", "gradebook", "transcript"}},
                          {"oDept", depts}};
    if (!extra) return Schema({"position", "uDept"}, {"type", "oDept"}, {}, {"read", "setScore"}, ranges);
    ranges["year"] = {"junior", "senior"};
    ranges["level"] = {"graduate", "undergraduate"};
    return Schema({"position", "uDept", "year"}, {"type", "oDept", "level"}, {}, {"read", "setScore"}, ranges);
}

inline Rule gradebook_rule(bool with_dept) {
    std::vector<FilterTuple> f{{"position", "faculty"}, {"type", "gradebook"}};
    if (with_dept) f.push_back({"uDept", "EE"});
    return Rule{AttributeFilter(std::move(f)), {}, "setScore", Polarity::Positive};
}

} // namespace support
