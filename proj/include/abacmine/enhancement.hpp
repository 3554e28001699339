#pragma once

// Post-processing of mined policies. Pruning drops one of two similar rules
// when that raises policy quality. Refinement mines the false negatives and
// false positives of the current policy and uses those rules to loosen
// over-restricted rules and tighten over-permissive ones.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "abacmine/decision.hpp"
#include "abacmine/metrics.hpp"
#include "abacmine/mining.hpp"

namespace abacmine {

// How tuples from rules mined on false positives are merged into a similar
// rule. Invert appends their negation (the mined rule describes the region
// to exclude); Union appends them as they are.
enum class FalsePositiveMerge { Invert, Union };

struct RefinementConfig {
    std::size_t max_iterations = 10;
    double similarity_threshold = 0.5;
    double quality_epsilon = 1e-9;
    FalsePositiveMerge fp_merge = FalsePositiveMerge::Invert;
    // Extraction settings for the error sets; k is searched in [1, 5].
    MiningConfig error_mining = [] {
        MiningConfig m;
        m.ksearch.k_min = 1;
        m.ksearch.k_max = 5;
        return m;
    }();

    void validate() const {
        if (!(similarity_threshold > 0 && similarity_threshold <= 1)) {
            throw ConfigError("similarity threshold must lie in (0, 1]");
        }
        if (quality_epsilon < 0) throw ConfigError("quality epsilon must be non-negative");
        error_mining.thresholds.validate();
        error_mining.ksearch.validate();
    }
};

// Jaccard similarity over the rules' elements: filter tuples, relation
// tuples and the (operation, polarity) pair.
inline double rule_jaccard(const Rule& a, const Rule& b) {
    using Element = std::variant<FilterTuple, RelationTuple, std::pair<std::string, Polarity>>;
    auto elements = [](const Rule& r) {
        std::set<Element> s;
        for (const auto& t : r.filter.tuples()) s.insert(t);
        for (const auto& t : r.relation.tuples()) s.insert(t);
        s.insert(std::pair{r.op, r.op_polarity});
        return s;
    };
    const auto ea = elements(a), eb = elements(b);
    std::size_t common = 0;
    for (const auto& e : ea) common += eb.count(e);
    const std::size_t total = ea.size() + eb.size() - common;
    return total == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(total);
}

namespace detail {

inline std::vector<Rule> without(const std::vector<Rule>& rules, std::size_t i) {
    std::vector<Rule> out;
    for (std::size_t j = 0; j < rules.size(); ++j) {
        if (j != i) out.push_back(rules[j]);
    }
    return out;
}

inline std::vector<Rule> canonical_rules(std::vector<Rule> rules) {
    for (auto& r : rules) r = drop_implied_tuples(r);
    std::sort(rules.begin(), rules.end());
    rules.erase(std::unique(rules.begin(), rules.end()), rules.end());
    return rules;
}

} // namespace detail

// For every pair of distinct rules more similar than the threshold, try
// removing either one and keep the better removal if it does not lower
// quality. The scan restarts after each removal.
inline std::vector<Rule> prune_rules(std::vector<Rule> rules, const Schema& schema, const Evaluator& eval,
                                     const RefinementConfig& config) {
    double q = eval.quality(rules, schema);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < rules.size() && !changed; ++i) {
            for (std::size_t j = 0; j < rules.size() && !changed; ++j) {
                if (i == j || rule_jaccard(rules[i], rules[j]) <= config.similarity_threshold) continue;
                auto p_i = detail::without(rules, i), p_j = detail::without(rules, j);
                const double q_i = eval.quality(p_i, schema), q_j = eval.quality(p_j, schema);
                if (q_i >= q && q_i >= q_j) {
                    rules = std::move(p_i);
                    q = q_i;
                    changed = true;
                } else if (q_j >= q && q_j >= q_i) {
                    rules = std::move(p_j);
                    q = q_j;
                    changed = true;
                }
            }
        }
    }
    return rules;
}

inline Policy prune_rules(const Policy& policy, const AccessLog& log, const RefinementConfig& config = {}) {
    if (log.empty()) throw DataError("pruning needs a non-empty log");
    config.validate();
    const Evaluator eval(log);
    return policy.with_rules(prune_rules(policy.rules(), policy.schema(), eval, config));
}

struct ErrorSets {
    AccessLog false_negatives;
    AccessLog false_positives;
};

inline ErrorSets classify_errors(const Policy& mined, const AccessLog& log) {
    std::vector<AuthorizationTuple> fn, fp;
    for (const auto& t : log.tuples()) {
        const auto d = policy_decision(mined, log.store(), t.request);
        if (t.decision == Decision::Permit && d == Decision::Deny) fn.push_back(t);
        if (t.decision == Decision::Deny && d == Decision::Permit) fp.push_back(t);
    }
    return {log.with_tuples(std::move(fn)), log.with_tuples(std::move(fp))};
}

namespace detail {

// Error rows of `rules` over the evaluator's distinct rows, weighted by
// their permit (false negatives) or deny (false positives) multiplicity.
inline std::pair<RecordSet, RecordSet> error_records(const Evaluator& eval, const std::vector<Rule>& rules) {
    const auto& rec = eval.records();
    const CompiledPolicy compiled(eval.space(), rules);
    RecordSet fn(eval.space().size()), fp(eval.space().size());
    for (std::size_t i = 0; i < rec.rows.size(); ++i) {
        const bool permit = compiled.permits(rec.rows.row(i));
        if (!permit && rec.permits[i] > 0) fn.push_back(rec.rows.row(i), rec.permits[i]);
        if (permit && rec.denies[i] > 0) fp.push_back(rec.rows.row(i), rec.denies[i]);
    }
    return {std::move(fn), std::move(fp)};
}

inline std::vector<Rule> mine_errors(const FeatureSpace& space, RecordSet records, const FrequencyTable& baseline,
                                     const MiningConfig& config) {
    if (records.empty()) return {};
    return mine_records(space, std::move(records), baseline, config).policy.rules();
}

// Tuples of `target` that also occur in `source`; the operation is kept.
inline Rule intersect(const Rule& target, const Rule& source) {
    std::vector<FilterTuple> f;
    for (const auto& t : target.filter.tuples()) {
        if (std::binary_search(source.filter.tuples().begin(), source.filter.tuples().end(), t)) f.push_back(t);
    }
    std::vector<RelationTuple> r;
    for (const auto& t : target.relation.tuples()) {
        if (std::binary_search(source.relation.tuples().begin(), source.relation.tuples().end(), t)) r.push_back(t);
    }
    return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), target.op, target.op_polarity};
}

// Adds the tuples of `source` missing from `target`, negated when `invert`.
// Additions that would conflict with a tuple already on the same attribute
// (or attribute pair) are skipped.
inline Rule merge(const Rule& target, const Rule& source, bool invert) {
    auto f = target.filter.tuples();
    for (auto t : source.filter.tuples()) {
        if (std::binary_search(target.filter.tuples().begin(), target.filter.tuples().end(), t)) continue;
        if (invert) t.polarity = flip(t.polarity);
        const bool conflict = std::any_of(f.begin(), f.end(), [&](const FilterTuple& e) {
            if (e.attr != t.attr) return false;
            if (e.value == t.value) return e.polarity != t.polarity;
            return e.polarity == Polarity::Positive || t.polarity == Polarity::Positive;
        });
        if (!conflict) f.push_back(t);
    }
    auto r = target.relation.tuples();
    for (auto t : source.relation.tuples()) {
        if (std::binary_search(target.relation.tuples().begin(), target.relation.tuples().end(), t)) continue;
        if (invert) t.polarity = flip(t.polarity);
        const bool conflict = std::any_of(r.begin(), r.end(), [&](const RelationTuple& e) {
            return e.left == t.left && e.right == t.right;
        });
        if (!conflict) r.push_back(t);
    }
    return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), target.op, target.op_polarity};
}

} // namespace detail

// One refinement pass: rules mined from the false negatives either join the
// policy (no similar rule) or cut every similar rule down to the shared
// tuples; rules mined from the false positives of the result then extend
// every similar rule.
inline std::vector<Rule> refine_once(const std::vector<Rule>& rules, const Evaluator& eval,
                                     const FrequencyTable& baseline, const RefinementConfig& config) {
    const auto& space = eval.space();
    auto working = rules;

    auto [fn, fp_unused] = detail::error_records(eval, working);
    for (const auto& mined : detail::mine_errors(space, std::move(fn), baseline, config.error_mining)) {
        bool similar = false;
        for (auto& r : working) {
            if (rule_jaccard(mined, r) > config.similarity_threshold) {
                r = detail::intersect(r, mined);
                similar = true;
            }
        }
        if (!similar) working.push_back(mined);
    }
    working = detail::canonical_rules(std::move(working));

    auto [fn_unused, fp] = detail::error_records(eval, working);
    for (const auto& mined : detail::mine_errors(space, std::move(fp), baseline, config.error_mining)) {
        for (auto& r : working) {
            if (rule_jaccard(mined, r) > config.similarity_threshold) {
                r = detail::merge(r, mined, config.fp_merge == FalsePositiveMerge::Invert);
            }
        }
    }
    return detail::canonical_rules(std::move(working));
}

struct EnhancementStep {
    std::string pass;  // "initial", "prune" or "refine"
    std::size_t iteration = 0;
    std::size_t rules_before = 0;
    std::size_t rules_after = 0;
    double f_score = 0;
    double wsc = 0;
    double quality = 0;
};

struct EnhancementResult {
    Policy policy;
    EvaluationReport report;
    std::vector<EnhancementStep> trace;
};

namespace detail {

inline EnhancementStep step(std::string pass, std::size_t it, std::size_t before, const EvaluationReport& r) {
    return {std::move(pass), it, before, r.rules, r.f_score, r.wsc, r.quality};
}

} // namespace detail

// Repeats refinement passes while quality improves by more than epsilon;
// returns the best rule set seen.
inline Policy refine_policy(const Policy& mined, const AccessLog& log, const RefinementConfig& config = {}) {
    if (log.empty()) throw DataError("refinement needs a non-empty log");
    config.validate();
    const Evaluator eval(log);
    const auto baseline = baseline_table(log, eval.space(), config.error_mining.baseline);
    auto best = mined.rules();
    double best_q = eval.quality(best, mined.schema());
    auto current = best;
    for (std::size_t it = 0; it < config.max_iterations; ++it) {
        current = refine_once(current, eval, baseline, config);
        const double q = eval.quality(current, mined.schema());
        if (q <= best_q + config.quality_epsilon) {
            if (q > best_q) best = current, best_q = q;
            break;
        }
        best = current;
        best_q = q;
    }
    return mined.with_rules(std::move(best));
}

// Alternates pruning and refinement; stops when an iteration fails to raise
// the best quality by more than epsilon or after max_iterations, and returns
// the best policy seen.
inline EnhancementResult enhance(const Policy& mined, const AccessLog& log, const RefinementConfig& config = {}) {
    if (log.empty()) throw DataError("enhancement needs a non-empty log");
    config.validate();
    const Evaluator eval(log);
    const auto& schema = mined.schema();
    const auto baseline = baseline_table(log, eval.space(), config.error_mining.baseline);

    EnhancementResult out;
    auto best = mined.rules();
    auto best_report = eval.report(best, schema);
    out.trace.push_back(detail::step("initial", 0, best.size(), best_report));

    auto current = best;
    for (std::size_t it = 1; it <= config.max_iterations; ++it) {
        const double start_q = best_report.quality;

        const auto before_prune = current.size();
        current = prune_rules(std::move(current), schema, eval, config);
        auto r = eval.report(current, schema);
        out.trace.push_back(detail::step("prune", it, before_prune, r));
        if (r.quality > best_report.quality) best = current, best_report = r;

        const auto before_refine = current.size();
        current = refine_once(current, eval, baseline, config);
        r = eval.report(current, schema);
        out.trace.push_back(detail::step("refine", it, before_refine, r));
        if (r.quality > best_report.quality) best = current, best_report = r;

        if (best_report.quality <= start_q + config.quality_epsilon) break;
    }
    out.policy = mined.with_rules(std::move(best));
    out.report = best_report;
    return out;
}

} // namespace abacmine
