#pragma once

// Rule extraction from clusters of permitted requests. An attribute value
// (or an attribute-pair equality) becomes part of a cluster's rule when its
// frequency inside the cluster departs from its frequency in the baseline
// log by more than a threshold: upwards for positive tuples, downwards for
// negative ones.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abacmine/clustering.hpp"
#include "abacmine/encoding.hpp"
#include "abacmine/metrics.hpp"
#include "abacmine/model.hpp"
#include "abacmine/rng.hpp"

namespace abacmine {

struct Thresholds {
    double t_pos = 0.25;     // effective positive attribute
    double t_neg = 0.25;     // effective negative attribute
    double theta_pos = 0.25; // effective positive relation
    double theta_neg = 0.25; // effective negative relation

    void validate() const {
        for (double t : {t_pos, t_neg, theta_pos, theta_neg}) {
            if (!(t >= 0 && t <= 1)) throw ConfigError("thresholds must lie in [0, 1]");
        }
    }
    double sum() const { return t_pos + t_neg + theta_pos + theta_neg; }
    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

// Which records frequencies inside a cluster are compared against.
enum class FrequencyBaseline { Log, PositiveLog };

// Attribute-pair features eligible for relations: distinct non-operation
// features sharing an identical range.
inline std::vector<std::pair<std::size_t, std::size_t>> relation_pairs(const FeatureSpace& space) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 0; a < space.attribute_count(); ++a) {
        for (std::size_t b = a + 1; b < space.attribute_count(); ++b) {
            if (space.same_dictionary(a, b)) out.emplace_back(a, b);
        }
    }
    return out;
}

// Weighted relative frequencies of every (feature, value) and of equality
// on every relation pair, over one record set.
class FrequencyTable {
public:
    FrequencyTable() = default;

    FrequencyTable(const FeatureSpace& space, const RecordSet& records)
        : pairs_(relation_pairs(space)), total_(records.total_weight()) {
        if (records.empty()) throw DataError("frequency of an empty record set is undefined");
        values_.resize(space.size());
        for (std::size_t f = 0; f < space.size(); ++f) values_[f].assign(space.cardinality(f), 0.0);
        equal_.assign(pairs_.size(), 0.0);
        for (std::size_t i = 0; i < records.size(); ++i) {
            auto r = records.row(i);
            const auto w = static_cast<double>(records.weight(i));
            for (std::size_t f = 0; f < space.size(); ++f) values_[f][r[f]] += w;
            for (std::size_t p = 0; p < pairs_.size(); ++p) {
                if (r[pairs_[p].first] == r[pairs_[p].second]) equal_[p] += w;
            }
        }
        const auto t = static_cast<double>(total_);
        for (auto& v : values_) {
            for (auto& x : v) x /= t;
        }
        for (auto& x : equal_) x /= t;
    }

    double value(std::size_t feature, Code code) const { return values_.at(feature).at(code); }
    double equality(std::size_t pair) const { return equal_.at(pair); }
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const { return pairs_; }
    std::uint64_t total_weight() const { return total_; }

private:
    std::vector<std::pair<std::size_t, std::size_t>> pairs_;
    std::vector<std::vector<double>> values_;
    std::vector<double> equal_;
    std::uint64_t total_ = 0;
};

// Weighted fraction of records whose `feature` equals `value`.
inline double freq(const RecordSet& records, std::size_t feature, Code value) {
    const auto total = records.total_weight();
    if (total == 0) throw DataError("frequency of an empty record set is undefined");
    std::uint64_t hits = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records.row(i)[feature] == value) hits += records.weight(i);
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// One extracted tuple with the frequencies that justified it.
struct TupleEvidence {
    std::string component;  // "filter", "relation" or "op"
    std::string left;
    std::string right;      // value for filters and ops, attribute for relations
    Polarity polarity = Polarity::Positive;
    double cluster_freq = 0;
    double baseline_freq = 0;
};

inline AttributeFilter extract_attribute_filters(const FeatureSpace& space, const FrequencyTable& cluster,
                                                 const FrequencyTable& baseline, const Thresholds& t,
                                                 std::vector<TupleEvidence>* evidence = nullptr) {
    std::vector<FilterTuple> tuples;
    for (std::size_t f = 0; f < space.attribute_count(); ++f) {
        for (Code v = 0; v < space.cardinality(f); ++v) {
            const double in = cluster.value(f, v), base = baseline.value(f, v);
            std::optional<Polarity> p;
            if (in - base > t.t_pos) p = Polarity::Positive;
            if (base - in > t.t_neg) p = Polarity::Negative;
            if (!p) continue;
            tuples.push_back({space.name(f), space.value(f, v), *p});
            if (evidence) evidence->push_back({"filter", space.name(f), space.value(f, v), *p, in, base});
        }
    }
    return AttributeFilter(std::move(tuples));
}

inline AttributeFilter extract_attribute_filters(const FeatureSpace& space, const RecordSet& cluster,
                                                 const RecordSet& log, const Thresholds& t) {
    t.validate();
    return extract_attribute_filters(space, FrequencyTable(space, cluster), FrequencyTable(space, log), t);
}

inline RelationCondition extract_relations(const FeatureSpace& space, const FrequencyTable& cluster,
                                           const FrequencyTable& baseline, const Thresholds& t,
                                           std::vector<TupleEvidence>* evidence = nullptr) {
    std::vector<RelationTuple> tuples;
    for (std::size_t p = 0; p < cluster.pairs().size(); ++p) {
        const auto [a, b] = cluster.pairs()[p];
        const double in = cluster.equality(p), base = baseline.equality(p);
        std::optional<Polarity> pol;
        if (in - base > t.theta_pos) pol = Polarity::Positive;
        if (base - in > t.theta_neg) pol = Polarity::Negative;
        if (!pol) continue;
        tuples.emplace_back(space.name(a), space.name(b), *pol);
        if (evidence) evidence->push_back({"relation", tuples.back().left, tuples.back().right, *pol, in, base});
    }
    return RelationCondition(std::move(tuples));
}

inline RelationCondition extract_relations(const FeatureSpace& space, const RecordSet& cluster, const RecordSet& log,
                                           const Thresholds& t) {
    t.validate();
    return extract_relations(space, FrequencyTable(space, cluster), FrequencyTable(space, log), t);
}

// Operation of a cluster's rule: the most effective positive op value if
// any; else the single effective negative value, negated; else the
// weighted-majority op.
inline std::pair<std::string, Polarity> extract_operation(const FeatureSpace& space, const FrequencyTable& cluster,
                                                          const FrequencyTable& baseline, const Thresholds& t,
                                                          std::vector<TupleEvidence>* evidence = nullptr) {
    const auto f = space.op_feature();
    std::optional<Code> best_pos, majority;
    double best_gap = 0;
    std::vector<Code> negatives;
    for (Code v = 0; v < space.cardinality(f); ++v) {
        const double in = cluster.value(f, v), base = baseline.value(f, v);
        if (in - base > t.t_pos && (!best_pos || in - base > best_gap)) {
            best_pos = v;
            best_gap = in - base;
        }
        if (base - in > t.t_neg) negatives.push_back(v);
        if (!majority || in > cluster.value(f, *majority)) majority = v;
    }
    auto note = [&](Code v, Polarity p) {
        if (evidence) evidence->push_back({"op", "op", space.value(f, v), p, cluster.value(f, v), baseline.value(f, v)});
    };
    if (best_pos) {
        note(*best_pos, Polarity::Positive);
        return {space.value(f, *best_pos), Polarity::Positive};
    }
    if (negatives.size() == 1) {
        note(negatives[0], Polarity::Negative);
        return {space.value(f, negatives[0]), Polarity::Negative};
    }
    note(*majority, Polarity::Positive);
    return {space.value(f, *majority), Polarity::Positive};
}

inline Rule rule_from_cluster(const FeatureSpace& space, const FrequencyTable& cluster, const FrequencyTable& baseline,
                              const Thresholds& t, std::vector<TupleEvidence>* evidence = nullptr) {
    Rule r;
    r.filter = extract_attribute_filters(space, cluster, baseline, t, evidence);
    r.relation = extract_relations(space, cluster, baseline, t, evidence);
    std::tie(r.op, r.op_polarity) = extract_operation(space, cluster, baseline, t, evidence);
    return r;
}

inline Rule rule_from_cluster(const FeatureSpace& space, const RecordSet& cluster, const RecordSet& log,
                              const Thresholds& t) {
    t.validate();
    if (cluster.empty()) throw DataError("cannot extract a rule from an empty cluster");
    return rule_from_cluster(space, FrequencyTable(space, cluster), FrequencyTable(space, log), t);
}

// Drops tuples implied by others in the same rule: negative tuples on an
// attribute pinned by a positive tuple, and relations decided by two pinned
// attributes. The set of satisfying requests does not change.
inline Rule drop_implied_tuples(const Rule& rule) {
    std::map<std::string, std::string> pinned;
    for (const auto& t : rule.filter.tuples()) {
        if (t.polarity == Polarity::Positive) pinned[t.attr] = t.value;
    }
    std::vector<FilterTuple> filters;
    for (const auto& t : rule.filter.tuples()) {
        if (t.polarity == Polarity::Negative && pinned.count(t.attr)) continue;
        filters.push_back(t);
    }
    std::vector<RelationTuple> relations;
    for (const auto& t : rule.relation.tuples()) {
        auto a = pinned.find(t.left), b = pinned.find(t.right);
        if (a != pinned.end() && b != pinned.end()) {
            const bool equal = a->second == b->second;
            // a contradicted relation keeps the rule unsatisfiable as before
            if (equal == (t.polarity == Polarity::Positive)) continue;
        }
        relations.push_back(t);
    }
    return Rule{AttributeFilter(std::move(filters)), RelationCondition(std::move(relations)), rule.op, rule.op_polarity};
}

// ---------------------------------------------------------------------------
// Policy extraction

struct MiningConfig {
    // Fixed cluster count; unset means select_k over `ksearch`.
    std::optional<std::size_t> k;
    KSearchConfig ksearch;
    KCriterion criterion = KCriterion::Silhouette;
    Thresholds thresholds;
    FrequencyBaseline baseline = FrequencyBaseline::Log;
    bool simplify = true;
};

struct ClusterDiagnostics {
    std::size_t cluster = 0;
    std::uint64_t weight = 0;
    std::size_t distinct_records = 0;
    std::vector<TupleEvidence> evidence;
};

// Clustering of the permitted records, independent of thresholds, so that
// many threshold settings can be tried against one partition.
struct ClusteredLog {
    RecordSet positives;
    ClusterModel model;
    std::vector<KScore> k_scores;
    std::vector<FrequencyTable> cluster_tables;
    std::vector<std::uint64_t> cluster_weights;
    std::vector<std::size_t> cluster_sizes;
};

// Per-cluster frequency tables of a fitted model.
inline ClusteredLog summarize_clusters(const FeatureSpace& space, RecordSet positives, ClusterModel model) {
    ClusteredLog out;
    for (std::size_t c = 0; c < model.k; ++c) {
        auto members = model.members(c);
        if (members.empty()) continue;
        auto sub = positives.select(members);
        out.cluster_tables.emplace_back(space, sub);
        out.cluster_weights.push_back(sub.total_weight());
        out.cluster_sizes.push_back(sub.size());
    }
    out.positives = std::move(positives);
    out.model = std::move(model);
    return out;
}

inline std::vector<Rule> rules_from_clusters(const FeatureSpace& space, const ClusteredLog& clustered,
                                      const FrequencyTable& baseline, const Thresholds& t, bool simplify,
                                      std::vector<ClusterDiagnostics>* diagnostics);

// Quality criterion for select_k: Q of the rules extracted from a candidate
// model, scored against `eval`'s log.
inline ClusterQualityFn extraction_quality(const FeatureSpace& space, const RecordSet& positives,
                                           const FrequencyTable& baseline, const MiningConfig& config,
                                           const Evaluator& eval) {
    return [&space, &positives, &baseline, &config, &eval](const ClusterModel& model) {
        const auto clustered = summarize_clusters(space, positives, model);
        const auto rules =
            rules_from_clusters(space, clustered, baseline, config.thresholds, config.simplify, nullptr);
        return eval.quality(rules, space.schema());
    };
}

// Clusters the permitted records with a fixed k or by select_k. The quality
// criterion needs `eval`, the log the candidate policies are scored on.
inline ClusteredLog cluster_records(const FeatureSpace& space, RecordSet positives, const MiningConfig& config,
                                    const FrequencyTable* baseline = nullptr, const Evaluator* eval = nullptr) {
    if (positives.empty()) throw DataError("cannot mine a policy from an empty positive log");
    ClusterModel model;
    std::vector<KScore> scores;
    if (config.k) {
        model = kmodes_fit(positives, std::min(*config.k, distinct_count(positives)), config.ksearch);
    } else {
        ClusterQualityFn quality;
        if (config.criterion == KCriterion::Quality) {
            if (!baseline || !eval) throw ConfigError("the quality criterion needs a log to score policies on");
            quality = extraction_quality(space, positives, *baseline, config, *eval);
        }
        auto sel = select_k(positives, config.ksearch, config.criterion, quality);
        model = std::move(sel.model);
        scores = std::move(sel.scores);
    }
    auto out = summarize_clusters(space, std::move(positives), std::move(model));
    out.k_scores = std::move(scores);
    return out;
}

inline std::vector<Rule> rules_from_clusters(const FeatureSpace& space, const ClusteredLog& clustered,
                                             const FrequencyTable& baseline, const Thresholds& t, bool simplify,
                                             std::vector<ClusterDiagnostics>* diagnostics) {
    t.validate();
    std::vector<Rule> rules;
    for (std::size_t c = 0; c < clustered.cluster_tables.size(); ++c) {
        ClusterDiagnostics d{c, clustered.cluster_weights[c], clustered.cluster_sizes[c], {}};
        auto rule = rule_from_cluster(space, clustered.cluster_tables[c], baseline, t, diagnostics ? &d.evidence : nullptr);
        rules.push_back(simplify ? drop_implied_tuples(rule) : rule);
        if (diagnostics) diagnostics->push_back(std::move(d));
    }
    std::sort(rules.begin(), rules.end());
    rules.erase(std::unique(rules.begin(), rules.end()), rules.end());
    return rules;
}

struct MiningResult {
    Policy policy;
    std::size_t k = 0;
    ClusterModel model;
    std::vector<KScore> k_scores;
    std::vector<ClusterDiagnostics> diagnostics;
};

inline FrequencyTable baseline_table(const AccessLog& log, const FeatureSpace& space, FrequencyBaseline baseline) {
    return FrequencyTable(space, encode_log(log, space, baseline == FrequencyBaseline::Log ? Selection::All
                                                                                          : Selection::Positive));
}

// Mines rules from `positives` (records over `space`) against a baseline
// frequency table, one rule per non-empty cluster, identical rules merged.
inline MiningResult mine_records(const FeatureSpace& space, RecordSet positives, const FrequencyTable& baseline,
                                 const MiningConfig& config, std::shared_ptr<const EntityStore> entities = nullptr,
                                 const Evaluator* eval = nullptr) {
    auto clustered = cluster_records(space, std::move(positives), config, &baseline, eval);
    MiningResult out;
    auto rules = rules_from_clusters(space, clustered, baseline, config.thresholds, config.simplify, &out.diagnostics);
    out.policy = Policy(space.schema(), std::move(rules), std::move(entities));
    out.k = clustered.model.k;
    out.model = std::move(clustered.model);
    out.k_scores = std::move(clustered.k_scores);
    return out;
}

inline MiningResult extract_policy(const AccessLog& log, const MiningConfig& config) {
    if (log.positive_count() == 0) throw DataError("cannot mine a policy from an empty positive log");
    const FeatureSpace space(log.schema());
    std::optional<Evaluator> eval;
    if (config.criterion == KCriterion::Quality && !config.k) eval.emplace(log);
    return mine_records(space, encode_log(log, space, Selection::Positive), baseline_table(log, space, config.baseline),
                        config, log.store_ptr(), eval ? &*eval : nullptr);
}

// ---------------------------------------------------------------------------
// Threshold tuning

struct ThresholdGrid {
    std::vector<double> t_pos{0.15, 0.2, 0.25, 0.3, 0.35};
    std::vector<double> t_neg{0.15, 0.2, 0.25, 0.3, 0.35};
    std::vector<double> theta_pos{0.15, 0.2, 0.25, 0.3, 0.35};
    std::vector<double> theta_neg{0.15, 0.2, 0.25, 0.3, 0.35};

    static ThresholdGrid single(const Thresholds& t) { return {{t.t_pos}, {t.t_neg}, {t.theta_pos}, {t.theta_neg}}; }

    std::vector<Thresholds> points() const {
        std::vector<Thresholds> out;
        for (double a : t_pos)
            for (double b : t_neg)
                for (double c : theta_pos)
                    for (double d : theta_neg) out.push_back({a, b, c, d});
        return out;
    }
};

// Score maximised on the held-out folds.
enum class TuningObjective { FScore, Accuracy, Quality };

struct TuningResult {
    Thresholds best;
    double mean_score = 0;  // of the tuning objective
    std::size_t folds_used = 0;
    std::vector<std::pair<Thresholds, double>> scores;
    std::vector<std::string> warnings;
};

// Fold index of every tuple, stratified by decision.
inline std::vector<std::size_t> stratified_folds(const AccessLog& log, std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold(log.size());
    Rng rng(seed);
    for (Decision d : {Decision::Permit, Decision::Deny}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < log.size(); ++i) {
            if (log.tuples()[i].decision == d) idx.push_back(i);
        }
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = j % folds;
    }
    return fold;
}

// Grid search by stratified k-fold cross-validation: mine on the training
// folds, score the held-out fold (F-score by default), and keep the grid
// point with the best mean; ties go to the smaller threshold sum, then grid
// order.
inline TuningResult tune_thresholds(const AccessLog& log, const ThresholdGrid& grid, std::size_t folds,
                                    const MiningConfig& config, std::uint64_t seed,
                                    TuningObjective objective = TuningObjective::FScore) {
    const auto points = grid.points();
    if (points.empty()) throw ConfigError("threshold grid is empty");
    if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
    for (const auto& p : points) p.validate();

    const FeatureSpace space(log.schema());
    const auto fold_of = stratified_folds(log, folds, seed);
    TuningResult out;
    std::vector<double> totals(points.size(), 0.0);

    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<AuthorizationTuple> train, test;
        for (std::size_t i = 0; i < log.size(); ++i) {
            (fold_of[i] == f ? test : train).push_back(log.tuples()[i]);
        }
        const auto train_log = log.with_tuples(std::move(train));
        const auto test_log = log.with_tuples(std::move(test));
        if (train_log.positive_count() == 0 || test_log.empty()) {
            out.warnings.push_back("fold " + std::to_string(f) + " skipped: no permitted training tuples");
            continue;
        }
        const auto baseline = baseline_table(train_log, space, config.baseline);
        std::optional<Evaluator> eval;
        if (config.criterion == KCriterion::Quality && !config.k) eval.emplace(train_log);
        const auto clustered = cluster_records(space, encode_log(train_log, space, Selection::Positive), config,
                                               &baseline, eval ? &*eval : nullptr);
        const auto held_out = encode_labeled(test_log, space);
        std::size_t distinct_positive = 0;
        for (auto p : held_out.permits) distinct_positive += p > 0 ? 1 : 0;
        const double wsc_max = max_wsc(distinct_positive, log.schema());

        std::map<std::vector<Rule>, double> memo;
        for (std::size_t p = 0; p < points.size(); ++p) {
            auto rules = rules_from_clusters(space, clustered, baseline, points[p], config.simplify, nullptr);
            auto it = memo.find(rules);
            if (it == memo.end()) {
                const auto rates = RelativeRates::from_counts(confusion_counts(held_out, CompiledPolicy(space, rules)));
                double score = f_score(rates);
                if (objective == TuningObjective::Accuracy) score = accuracy(rates);
                if (objective == TuningObjective::Quality) {
                    score = wsc_max > 0 ? policy_quality(score, delta_wsc(wsc(rules, log.schema()), wsc_max)) : 0.0;
                }
                it = memo.emplace(std::move(rules), score).first;
            }
            totals[p] += it->second;
        }
        ++out.folds_used;
    }
    if (out.folds_used == 0) throw DataError("threshold tuning: every fold lacked permitted training tuples");

    std::size_t best = 0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const double mean = totals[p] / static_cast<double>(out.folds_used);
        out.scores.emplace_back(points[p], mean);
        const double best_mean = totals[best] / static_cast<double>(out.folds_used);
        if (mean > best_mean + 1e-12 || (std::abs(mean - best_mean) <= 1e-12 && points[p].sum() < points[best].sum() - 1e-12)) {
            best = p;
        }
    }
    out.best = points[best];
    out.mean_score = totals[best] / static_cast<double>(out.folds_used);
    return out;
}

} // namespace abacmine
