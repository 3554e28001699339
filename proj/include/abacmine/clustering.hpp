#pragma once

// K-modes clustering of categorical records under simple-matching (Hamming)
// dissimilarity, seeded by density and distance, with silhouette-driven
// selection of the cluster count.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "abacmine/encoding.hpp"
#include "abacmine/rng.hpp"

namespace abacmine {

using Mode = std::vector<Code>;

inline std::size_t hamming_dissimilarity(std::span<const Code> a, std::span<const Code> b) {
    if (a.size() != b.size()) throw DataError("records of different length");
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

inline std::size_t hamming_dissimilarity(const CategoricalRecord& a, const CategoricalRecord& b) {
    return hamming_dissimilarity(std::span<const Code>(a.values), std::span<const Code>(b.values));
}

struct KSearchConfig {
    std::size_t k_min = 10;
    std::size_t k_max = 20;
    std::size_t n_restarts = 3;
    std::size_t max_iter = 100;
    std::uint64_t seed = 0;
    // Only consulted when k_min == 1: k = 1 is chosen unless some k >= 2
    // reaches this mean silhouette.
    double min_silhouette = 0.25;

    void validate() const {
        if (k_min < 1 || k_min > k_max) throw ConfigError("k search needs 1 <= k_min <= k_max");
        if (n_restarts < 1) throw ConfigError("k search needs at least one restart");
        if (max_iter < 1) throw ConfigError("k search needs max_iter >= 1");
    }
};

struct ClusterModel {
    std::size_t k = 0;
    std::vector<Mode> modes;
    std::vector<std::size_t> assignments;
    std::uint64_t cost = 0;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    // Cost after the initial assignment and after every (update, assign) cycle.
    std::vector<std::uint64_t> cost_history;
    // Final cost of every restart, in restart order.
    std::vector<std::uint64_t> restart_costs;

    std::vector<std::uint64_t> cluster_weights(const RecordSet& records) const {
        std::vector<std::uint64_t> w(k, 0);
        for (std::size_t i = 0; i < assignments.size(); ++i) w[assignments[i]] += records.weight(i);
        return w;
    }

    std::vector<std::size_t> members(std::size_t cluster) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i) {
            if (assignments[i] == cluster) out.push_back(i);
        }
        return out;
    }

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

// Weighted sum of dissimilarities of records to their assigned modes.
inline std::uint64_t clustering_cost(const RecordSet& records, const std::vector<Mode>& modes,
                                     const std::vector<std::size_t>& assignments) {
    std::uint64_t cost = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        cost += records.weight(i) * hamming_dissimilarity(records.row(i), modes.at(assignments[i]));
    }
    return cost;
}

namespace detail {

// density(r) * W * m: weighted count of feature matches of r with every record.
inline std::vector<std::uint64_t> match_mass(const RecordSet& records) {
    const auto m = records.width();
    std::vector<std::vector<std::uint64_t>> counts(m);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto r = records.row(i);
        for (std::size_t f = 0; f < m; ++f) {
            if (counts[f].size() <= r[f]) counts[f].resize(r[f] + 1u, 0);
            counts[f][r[f]] += records.weight(i);
        }
    }
    std::vector<std::uint64_t> mass(records.size(), 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto r = records.row(i);
        for (std::size_t f = 0; f < m; ++f) mass[i] += counts[f][r[f]];
    }
    return mass;
}

// Density-times-distance seeding starting from `first`.
inline std::vector<Mode> seed_from(const RecordSet& records, std::size_t k, std::size_t first,
                                   const std::vector<std::uint64_t>& mass) {
    std::vector<Mode> centers;
    auto to_mode = [&](std::size_t i) {
        auto r = records.row(i);
        return Mode(r.begin(), r.end());
    };
    centers.push_back(to_mode(first));
    std::vector<std::size_t> min_dist(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) min_dist[i] = hamming_dissimilarity(records.row(i), centers[0]);
    while (centers.size() < k) {
        std::size_t best = records.size();
        std::uint64_t best_score = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            // density and distance product; the common 1/(W m) factor is dropped
            const std::uint64_t score = mass[i] * min_dist[i];
            if (score > best_score) {
                best_score = score;
                best = i;
            }
        }
        if (best == records.size()) throw ConfigError("k exceeds the number of distinct records");
        centers.push_back(to_mode(best));
        for (std::size_t i = 0; i < records.size(); ++i) {
            min_dist[i] = std::min(min_dist[i], hamming_dissimilarity(records.row(i), centers.back()));
        }
    }
    return centers;
}

} // namespace detail

// Per-record density: mean fraction of features shared with every record,
// weighted by multiplicity.
inline std::vector<double> record_density(const RecordSet& records) {
    const auto mass = detail::match_mass(records);
    const double scale = static_cast<double>(records.total_weight()) * static_cast<double>(records.width());
    std::vector<double> out(mass.size());
    for (std::size_t i = 0; i < mass.size(); ++i) out[i] = static_cast<double>(mass[i]) / scale;
    return out;
}

// Deterministic initial modes: the densest record first, then repeatedly the
// record maximizing density times distance to the nearest chosen mode.
// Ties go to the lowest record index.
inline std::vector<Mode> cao_init(const RecordSet& records, std::size_t k) {
    if (records.empty()) throw DataError("cannot seed clusters from an empty record set");
    if (k == 0) throw ConfigError("k must be at least 1");
    const auto mass = detail::match_mass(records);
    const auto first = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
    return detail::seed_from(records, k, first, mass);
}

namespace detail {

inline std::size_t nearest_mode(std::span<const Code> row, const std::vector<Mode>& modes, std::size_t* dist = nullptr) {
    std::size_t best = 0, best_d = std::numeric_limits<std::size_t>::max();
    for (std::size_t c = 0; c < modes.size(); ++c) {
        const auto d = hamming_dissimilarity(row, modes[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

inline std::vector<std::size_t> assign(const RecordSet& records, std::vector<Mode>& modes) {
    const std::size_t k = modes.size();
    std::vector<std::size_t> assignment(records.size());
    std::vector<std::size_t> dist(records.size());
    std::vector<std::uint64_t> sizes(k, 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        assignment[i] = nearest_mode(records.row(i), modes, &dist[i]);
        ++sizes[assignment[i]];
    }
    // Empty cluster repair: take over the record farthest from its mode.
    for (std::size_t c = 0; c < k; ++c) {
        while (sizes[c] == 0) {
            std::size_t far = records.size(), far_d = 0;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (dist[i] > far_d && sizes[assignment[i]] > 1) {
                    far_d = dist[i];
                    far = i;
                }
            }
            if (far == records.size()) throw ConfigError("k exceeds the number of distinct records");
            --sizes[assignment[far]];
            assignment[far] = c;
            ++sizes[c];
            dist[far] = 0;
            auto r = records.row(far);
            modes[c].assign(r.begin(), r.end());
        }
    }
    return assignment;
}

// Weighted per-feature majority within each cluster; ties to the lowest code.
inline void update_modes(const RecordSet& records, const std::vector<std::size_t>& assignment, std::vector<Mode>& modes) {
    const std::size_t m = records.width();
    std::vector<std::vector<std::vector<std::uint64_t>>> counts(modes.size(), std::vector<std::vector<std::uint64_t>>(m));
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& cc = counts[assignment[i]];
        auto r = records.row(i);
        for (std::size_t f = 0; f < m; ++f) {
            if (cc[f].size() <= r[f]) cc[f].resize(r[f] + 1u, 0);
            cc[f][r[f]] += records.weight(i);
        }
    }
    for (std::size_t c = 0; c < modes.size(); ++c) {
        if (counts[c][0].empty()) continue;
        for (std::size_t f = 0; f < m; ++f) {
            const auto& v = counts[c][f];
            modes[c][f] = static_cast<Code>(std::max_element(v.begin(), v.end()) - v.begin());
        }
    }
}

} // namespace detail

// One Lloyd-style run from fixed initial modes.
inline ClusterModel kmodes_run(const RecordSet& records, std::vector<Mode> modes, std::size_t max_iter) {
    if (records.empty()) throw DataError("cannot cluster an empty record set");
    ClusterModel model;
    model.k = modes.size();
    auto assignment = detail::assign(records, modes);
    model.cost_history.push_back(clustering_cost(records, modes, assignment));
    for (std::size_t it = 1; it <= max_iter; ++it) {
        detail::update_modes(records, assignment, modes);
        auto next = detail::assign(records, modes);
        model.cost_history.push_back(clustering_cost(records, modes, next));
        model.iterations = it;
        const bool stable = next == assignment;
        assignment = std::move(next);
        if (stable) break;
    }
    model.modes = std::move(modes);
    model.assignments = std::move(assignment);
    model.cost = clustering_cost(records, model.modes, model.assignments);
    return model;
}

// Restart 0 uses the deterministic density seeding; restart r > 0 starts the
// same seeding from a record drawn with the r-th substream of `seed`. The
// cheapest partition wins, ties to the earlier restart.
inline ClusterModel kmodes_fit(const RecordSet& records, std::size_t k, const KSearchConfig& config) {
    if (records.empty()) throw DataError("cannot cluster an empty record set");
    if (k == 0) throw ConfigError("k must be at least 1");
    const auto mass = detail::match_mass(records);
    std::optional<ClusterModel> best;
    std::vector<std::uint64_t> costs;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, config.n_restarts); ++r) {
        std::size_t first;
        std::uint64_t seed = config.seed;
        if (r == 0) {
            first = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
        } else {
            seed = substream_seed(config.seed, "kmodes-restart-" + std::to_string(r));
            first = static_cast<std::size_t>(Rng(seed).below(records.size()));
        }
        auto model = kmodes_run(records, detail::seed_from(records, k, first, mass), config.max_iter);
        model.seed = seed;
        costs.push_back(model.cost);
        if (!best || model.cost < best->cost) best = std::move(model);
    }
    best->restart_costs = std::move(costs);
    return *best;
}

// Mean silhouette under Hamming dissimilarity, weighting each record by its
// multiplicity. Per-cluster value counts make it O(n k m) instead of O(n^2).
inline double silhouette(const RecordSet& records, const std::vector<std::size_t>& assignments, std::size_t k) {
    if (k < 2) throw ConfigError("silhouette is undefined for fewer than two clusters");
    const std::size_t m = records.width();
    std::vector<std::vector<std::vector<std::uint64_t>>> counts(k, std::vector<std::vector<std::uint64_t>>(m));
    std::vector<std::uint64_t> size(k, 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto c = assignments[i];
        auto r = records.row(i);
        size[c] += records.weight(i);
        for (std::size_t f = 0; f < m; ++f) {
            if (counts[c][f].size() <= r[f]) counts[c][f].resize(r[f] + 1u, 0);
            counts[c][f][r[f]] += records.weight(i);
        }
    }
    double total = 0;
    std::uint64_t weight = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto own = assignments[i];
        auto r = records.row(i);
        weight += records.weight(i);
        if (size[own] <= 1) continue;  // singleton: s = 0
        auto spread = [&](std::size_t c) {
            std::uint64_t s = 0;
            for (std::size_t f = 0; f < m; ++f) {
                const auto& cf = counts[c][f];
                s += size[c] - (r[f] < cf.size() ? cf[r[f]] : 0);
            }
            return static_cast<double>(s);
        };
        const double a = spread(own) / static_cast<double>(size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || size[c] == 0) continue;
            b = std::min(b, spread(c) / static_cast<double>(size[c]));
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        if (denom > 0) total += static_cast<double>(records.weight(i)) * (b - a) / denom;
    }
    return weight ? total / static_cast<double>(weight) : 0.0;
}

enum class KCriterion { Silhouette, Elbow, Quality };

struct KScore {
    std::size_t k = 0;
    double silhouette = 0;  // NaN for k = 1
    std::uint64_t cost = 0; // elbow statistic
    double quality = 0;     // only with a quality function
};

struct KSelection {
    std::size_t k = 0;
    std::vector<KScore> scores;
    ClusterModel model;
};

// Scores a fitted model, e.g. by cross-validated policy quality.
using ClusterQualityFn = std::function<double(const ClusterModel&)>;

// Knee of the cost curve: the k farthest from the chord joining the curve's
// endpoints.
inline std::size_t elbow_k(const std::vector<KScore>& scores) {
    if (scores.size() < 3) return scores.front().k;
    const double x0 = static_cast<double>(scores.front().k), y0 = static_cast<double>(scores.front().cost);
    const double x1 = static_cast<double>(scores.back().k), y1 = static_cast<double>(scores.back().cost);
    std::size_t best = scores.front().k;
    double best_d = -1;
    for (const auto& s : scores) {
        const double d = std::abs((y1 - y0) * static_cast<double>(s.k) - (x1 - x0) * static_cast<double>(s.cost) +
                                  x1 * y0 - y1 * x0);
        if (d > best_d + 1e-12) {
            best_d = d;
            best = s.k;
        }
    }
    return best;
}

inline std::size_t distinct_count(const RecordSet& records) { return records.canonical().size(); }

// Fits every k in [k_min, k_max] (capped at the distinct record count) and
// picks the maximal mean silhouette, ties to the smaller k. k = 1 has no
// silhouette and is only chosen as the fallback described in KSearchConfig.
inline KSelection select_k(const RecordSet& records, const KSearchConfig& config,
                           KCriterion criterion = KCriterion::Silhouette, const ClusterQualityFn& quality_fn = {}) {
    config.validate();
    if (records.empty()) throw DataError("cannot select k for an empty record set");
    if (criterion == KCriterion::Quality && !quality_fn) throw ConfigError("quality criterion needs a quality function");
    const std::size_t distinct = distinct_count(records);
    const std::size_t k_max = std::min(config.k_max, distinct);
    KSelection out;
    std::vector<ClusterModel> models;
    for (std::size_t k = config.k_min; k <= k_max; ++k) {
        auto model = kmodes_fit(records, k, config);
        KScore s;
        s.k = k;
        s.cost = model.cost;
        s.silhouette = k >= 2 ? silhouette(records, model.assignments, k) : std::numeric_limits<double>::quiet_NaN();
        if (quality_fn) s.quality = quality_fn(model);
        out.scores.push_back(s);
        models.push_back(std::move(model));
    }
    if (out.scores.empty()) {
        throw DataError("no valid k in [" + std::to_string(config.k_min) + ", " + std::to_string(config.k_max) +
                        "]: only " + std::to_string(distinct) + " distinct record(s)");
    }

    std::optional<std::size_t> pick;
    switch (criterion) {
    case KCriterion::Silhouette: {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.scores.size(); ++i) {
            if (out.scores[i].k < 2) continue;
            if (out.scores[i].silhouette > best) {
                best = out.scores[i].silhouette;
                pick = i;
            }
        }
        if (config.k_min == 1 && (!pick || best < config.min_silhouette)) pick = 0;
        break;
    }
    case KCriterion::Elbow: {
        const auto k = elbow_k(out.scores);
        pick = k - out.scores.front().k;
        break;
    }
    case KCriterion::Quality: {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < out.scores.size(); ++i) {
            if (out.scores[i].quality > best) {
                best = out.scores[i].quality;
                pick = i;
            }
        }
        break;
    }
    }
    if (!pick) throw DataError("no valid k: records show no dispersion");
    out.k = out.scores[*pick].k;
    out.model = std::move(models[*pick]);
    return out;
}

} // namespace abacmine
