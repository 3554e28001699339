#pragma once

// Policy scoring against an access log: relative confusion rates, accuracy,
// F-score, weighted structural complexity (WSC), its relative reduction
// against the most complex mined policy, and the combined quality score.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abacmine/encoding.hpp"
#include "abacmine/model.hpp"

namespace abacmine {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t positives() const { return tp + fn; }
    std::uint64_t negatives() const { return fp + tn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Rates are relative to |L+| (tp, fn) and |L-| (fp, tn). When one side of the
// log is empty its pair is flagged undefined and left at zero.
struct RelativeRates {
    double tp = 0, fp = 0, tn = 0, fn = 0;
    ConfusionCounts counts;
    bool positive_defined = false;
    bool negative_defined = false;

    static RelativeRates from_counts(const ConfusionCounts& c) {
        RelativeRates r;
        r.counts = c;
        if (c.positives() > 0) {
            r.positive_defined = true;
            r.tp = static_cast<double>(c.tp) / static_cast<double>(c.positives());
            r.fn = static_cast<double>(c.fn) / static_cast<double>(c.positives());
        }
        if (c.negatives() > 0) {
            r.negative_defined = true;
            r.fp = static_cast<double>(c.fp) / static_cast<double>(c.negatives());
            r.tn = static_cast<double>(c.tn) / static_cast<double>(c.negatives());
        }
        return r;
    }
};

struct WscWeights {
    double user = 1, object = 1, session = 1, relation = 1;
};

inline ConfusionCounts confusion_counts(const LabeledRecords& records, const CompiledPolicy& policy) {
    ConfusionCounts c;
    for (std::size_t i = 0; i < records.rows.size(); ++i) {
        if (policy.permits(records.rows.row(i))) {
            c.tp += records.permits[i];
            c.fp += records.denies[i];
        } else {
            c.fn += records.permits[i];
            c.tn += records.denies[i];
        }
    }
    return c;
}

inline RelativeRates confusion(const Policy& policy, const AccessLog& log) {
    const FeatureSpace space(log.schema());
    return RelativeRates::from_counts(confusion_counts(encode_labeled(log, space), CompiledPolicy(space, policy)));
}

// Accuracy over relative rates, not raw counts.
inline double accuracy(const RelativeRates& r) {
    const double denom = r.tp + r.tn + r.fp + r.fn;
    return denom > 0 ? (r.tp + r.tn) / denom : 0.0;
}

inline double precision(const RelativeRates& r) { return r.tp + r.fp > 0 ? r.tp / (r.tp + r.fp) : 0.0; }
inline double recall(const RelativeRates& r) { return r.tp + r.fn > 0 ? r.tp / (r.tp + r.fn) : 0.0; }

inline double f_score(const RelativeRates& r) {
    const double p = precision(r), q = recall(r);
    return p + q > 0 ? 2 * p * q / (p + q) : 0.0;
}

// Conventional count-based accuracy; reported for diagnostics only.
inline double count_accuracy(const ConfusionCounts& c) {
    const auto n = c.tp + c.fp + c.tn + c.fn;
    return n ? static_cast<double>(c.tp + c.tn) / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Structural complexity

inline double wsc(const Rule& rule, const Schema& schema, const WscWeights& w = {}) {
    double total = w.relation * static_cast<double>(rule.relation.size());
    for (const auto& t : rule.filter.tuples()) {
        switch (schema.kind_of(t.attr).value()) {
        case Kind::User: total += w.user; break;
        case Kind::Object: total += w.object; break;
        case Kind::Session: total += w.session; break;
        }
    }
    return total;
}

inline double wsc(const std::vector<Rule>& rules, const Schema& schema, const WscWeights& w = {}) {
    double total = 0;
    for (const auto& r : rules) total += wsc(r, schema, w);
    return total;
}

inline double wsc(const Policy& policy, const WscWeights& w = {}) { return wsc(policy.rules(), policy.schema(), w); }

// One fully pinned rule per distinct permitted (user, object, session, op).
inline Policy most_complex_policy(const AccessLog& log) {
    if (log.positive_count() == 0) throw DataError("most complex policy needs a non-empty positive log");
    const FeatureSpace space(log.schema());
    const auto records = encode_log(log, space, Selection::Positive);
    std::vector<Rule> rules;
    rules.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto row = records.row(i);
        std::vector<FilterTuple> tuples;
        for (std::size_t f = 0; f < space.attribute_count(); ++f) {
            tuples.push_back({space.name(f), space.value(f, row[f]), Polarity::Positive});
        }
        rules.push_back({AttributeFilter(std::move(tuples)), {}, space.value(space.op_feature(), row[space.op_feature()]),
                         Polarity::Positive});
    }
    return Policy(log.schema(), std::move(rules), log.store_ptr());
}

// WSC of most_complex_policy(log) without materializing its rules.
inline double max_wsc(std::size_t distinct_positive_rows, const Schema& schema, const WscWeights& w = {}) {
    const double per_rule = w.user * static_cast<double>(schema.user_attrs().size()) +
                            w.object * static_cast<double>(schema.object_attrs().size()) +
                            w.session * static_cast<double>(schema.session_attrs().size());
    return per_rule * static_cast<double>(distinct_positive_rows);
}

inline double delta_wsc(double policy_wsc, double wsc_max) {
    if (!(wsc_max > 0)) throw DataError("delta WSC needs a positive maximum complexity");
    return (wsc_max - policy_wsc + 1) / wsc_max;
}

// Harmonic mean of F-score and delta WSC. Zero when either side is
// non-positive (a policy above the maximal complexity has no quality).
inline double policy_quality(double f, double dwsc) {
    if (f <= 0 || dwsc <= 0) return 0.0;
    return 2 * f * dwsc / (f + dwsc);
}

// Weighted form; beta sets the importance of F-score over complexity.
inline double general_quality(double f, double dwsc, double beta) {
    if (!(beta > 0)) throw ConfigError("beta must be positive");
    if (f <= 0 || dwsc <= 0) return 0.0;
    const double alpha = 1.0 / (1.0 + beta * beta);
    return 1.0 / (alpha / f + (1 - alpha) / dwsc);
}

// ---------------------------------------------------------------------------
// Reports

struct EvaluationReport {
    RelativeRates rates;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f_score = 0;
    double wsc = 0;
    double wsc_max = 0;
    double delta_wsc = 0;
    double quality = 0;
    double count_accuracy = 0;  // not part of the relative metric suite
    std::size_t rules = 0;

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["tp"] = rates.tp;
        j["fp"] = rates.fp;
        j["tn"] = rates.tn;
        j["fn"] = rates.fn;
        j["tp_count"] = rates.counts.tp;
        j["fp_count"] = rates.counts.fp;
        j["tn_count"] = rates.counts.tn;
        j["fn_count"] = rates.counts.fn;
        j["positive_rates_defined"] = rates.positive_defined;
        j["negative_rates_defined"] = rates.negative_defined;
        j["accuracy"] = accuracy;
        j["precision"] = precision;
        j["recall"] = recall;
        j["f_score"] = f_score;
        j["wsc"] = wsc;
        j["wsc_max"] = wsc_max;
        j["delta_wsc"] = delta_wsc;
        j["quality"] = quality;
        j["count_accuracy_nonrelative"] = count_accuracy;
        j["rules"] = rules;
        return j;
    }

    static std::string csv_header() { return "acc,f_score,wsc,q"; }

    std::string csv_row() const {
        std::ostringstream os;
        os.precision(10);
        os << accuracy << ',' << f_score << ',' << wsc << ',' << quality;
        return os.str();
    }
};

// Scores many candidate rule sets against one log; the log is encoded once
// and the maximum complexity is computed once.
class Evaluator {
public:
    Evaluator(const AccessLog& log, WscWeights weights = {})
        : space_(log.schema()), records_(encode_labeled(log, space_)), weights_(weights) {
        std::size_t distinct_positive = 0;
        for (auto p : records_.permits) distinct_positive += p > 0 ? 1 : 0;
        wsc_max_ = max_wsc(distinct_positive, log.schema(), weights_);
    }

    const FeatureSpace& space() const { return space_; }
    const LabeledRecords& records() const { return records_; }
    double wsc_max() const { return wsc_max_; }
    const WscWeights& weights() const { return weights_; }

    RelativeRates rates(const std::vector<Rule>& rules) const {
        return RelativeRates::from_counts(confusion_counts(records_, CompiledPolicy(space_, rules)));
    }

    EvaluationReport report(const std::vector<Rule>& rules, const Schema& rule_schema) const {
        EvaluationReport r;
        r.rates = rates(rules);
        r.accuracy = abacmine::accuracy(r.rates);
        r.precision = abacmine::precision(r.rates);
        r.recall = abacmine::recall(r.rates);
        r.f_score = abacmine::f_score(r.rates);
        r.wsc = abacmine::wsc(rules, rule_schema, weights_);
        r.wsc_max = wsc_max_;
        r.delta_wsc = wsc_max_ > 0 ? abacmine::delta_wsc(r.wsc, wsc_max_) : 0.0;
        r.quality = policy_quality(r.f_score, r.delta_wsc);
        r.count_accuracy = abacmine::count_accuracy(r.rates.counts);
        r.rules = rules.size();
        return r;
    }

    EvaluationReport report(const Policy& policy) const { return report(policy.rules(), policy.schema()); }

    double quality(const std::vector<Rule>& rules, const Schema& rule_schema) const {
        return report(rules, rule_schema).quality;
    }

private:
    FeatureSpace space_;
    LabeledRecords records_;
    WscWeights weights_;
    double wsc_max_ = 0;
};

// Full report with wsc_max taken from the most complex policy of `log`.
inline EvaluationReport evaluate(const Policy& policy, const AccessLog& log, const WscWeights& weights = {}) {
    return Evaluator(log, weights).report(policy);
}

} // namespace abacmine
