#pragma once

// Categorical encoding of access logs. Every request maps onto a row of
// per-feature codes (user attrs, object attrs, session attrs, operation);
// identical rows are merged and carry a multiplicity weight.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "abacmine/model.hpp"

namespace abacmine {

using Code = std::uint16_t;
inline constexpr Code kNoCode = std::numeric_limits<Code>::max();

// Per-feature dictionaries derived from a schema. Codes index the sorted
// attribute range (or the sorted operation list for the last feature).
class FeatureSpace {
public:
    FeatureSpace() = default;

    explicit FeatureSpace(const Schema& schema) : schema_(schema) {
        for (Kind kind : {Kind::User, Kind::Object, Kind::Session}) {
            for (const auto& a : schema.attributes(kind)) {
                names_.push_back(a);
                kinds_.push_back(kind);
                values_.push_back(schema.range(a));
            }
        }
        names_.push_back("op");
        values_.push_back(schema.operations());
        for (const auto& v : values_) {
            if (v.size() >= kNoCode) throw ConfigError("attribute range too large to encode");
        }
    }

    const Schema& schema() const { return schema_; }
    std::size_t size() const { return names_.size(); }
    std::size_t attribute_count() const { return names_.size() - 1; }
    std::size_t op_feature() const { return names_.size() - 1; }
    const std::string& name(std::size_t f) const { return names_[f]; }
    Kind kind(std::size_t f) const { return kinds_[f]; }
    bool is_op(std::size_t f) const { return f == op_feature(); }
    const std::vector<std::string>& values(std::size_t f) const { return values_[f]; }
    std::size_t cardinality(std::size_t f) const { return values_[f].size(); }

    std::size_t feature_of(std::string_view attr) const { return schema_.index_of(attr); }

    // kNoCode when the value is outside the dictionary.
    Code code(std::size_t f, std::string_view value) const {
        const auto& v = values_[f];
        auto it = std::lower_bound(v.begin(), v.end(), value);
        if (it == v.end() || *it != value) return kNoCode;
        return static_cast<Code>(it - v.begin());
    }

    const std::string& value(std::size_t f, Code c) const { return values_[f].at(c); }

    bool same_dictionary(std::size_t a, std::size_t b) const { return values_[a] == values_[b]; }

private:
    Schema schema_;
    std::vector<std::string> names_;
    std::vector<Kind> kinds_;
    std::vector<std::vector<std::string>> values_;
};

// A categorical record: one code per feature plus a multiplicity.
struct CategoricalRecord {
    std::vector<Code> values;
    std::uint64_t weight = 1;

    friend bool operator==(const CategoricalRecord&, const CategoricalRecord&) = default;
};

// Flat storage for a list of categorical records sharing one feature space.
class RecordSet {
public:
    RecordSet() = default;
    explicit RecordSet(std::size_t width) : width_(width) {}

    std::size_t width() const { return width_; }
    std::size_t size() const { return weights_.size(); }
    bool empty() const { return weights_.empty(); }

    std::span<const Code> row(std::size_t i) const { return {codes_.data() + i * width_, width_}; }
    std::uint64_t weight(std::size_t i) const { return weights_[i]; }
    const std::vector<std::uint64_t>& weights() const { return weights_; }

    std::uint64_t total_weight() const {
        std::uint64_t w = 0;
        for (auto x : weights_) w += x;
        return w;
    }

    CategoricalRecord record(std::size_t i) const {
        auto r = row(i);
        return {std::vector<Code>(r.begin(), r.end()), weights_[i]};
    }

    void push_back(std::span<const Code> codes, std::uint64_t weight) {
        if (codes.size() != width_) throw DataError("record width mismatch");
        if (weight == 0) throw DataError("record weight must be positive");
        codes_.insert(codes_.end(), codes.begin(), codes.end());
        weights_.push_back(weight);
    }
    void push_back(const CategoricalRecord& r) { push_back(r.values, r.weight); }

    // Subset by record index, keeping order.
    RecordSet select(std::span<const std::size_t> indices) const {
        RecordSet out(width_);
        for (auto i : indices) out.push_back(row(i), weights_[i]);
        return out;
    }

    // Merge identical rows (summing weights) and sort rows lexicographically.
    RecordSet canonical() const {
        std::vector<std::size_t> order(size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
            auto ra = row(a), rb = row(b);
            return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
        });
        RecordSet out(width_);
        for (auto i : order) {
            if (!out.empty()) {
                auto last = out.row(out.size() - 1);
                auto r = row(i);
                if (std::equal(last.begin(), last.end(), r.begin())) {
                    out.weights_.back() += weights_[i];
                    continue;
                }
            }
            out.push_back(row(i), weights_[i]);
        }
        return out;
    }

    friend bool operator==(const RecordSet&, const RecordSet&) = default;

private:
    std::size_t width_ = 0;
    std::vector<Code> codes_;
    std::vector<std::uint64_t> weights_;
};

// Distinct rows of a log with their permit and deny multiplicities; the
// unit of work for policy evaluation.
struct LabeledRecords {
    RecordSet rows;  // weights are permit + deny
    std::vector<std::uint64_t> permits;
    std::vector<std::uint64_t> denies;

    std::uint64_t positive_total() const {
        std::uint64_t n = 0;
        for (auto x : permits) n += x;
        return n;
    }
    std::uint64_t negative_total() const {
        std::uint64_t n = 0;
        for (auto x : denies) n += x;
        return n;
    }
};

enum class Selection { Positive, Negative, All };

namespace detail {

// Codes of every entity of one kind, plus a class id shared by entities
// with identical attribute vectors. Classes are numbered in lexicographic
// order of their codes.
struct CodedEntities {
    std::vector<std::vector<Code>> class_codes;
    std::vector<std::uint32_t> class_of;
};

inline CodedEntities code_entities(const EntityStore& store, const FeatureSpace& space, Kind kind) {
    const auto& schema_attrs = space.schema().attributes(kind);
    std::vector<std::size_t> features;
    for (const auto& a : schema_attrs) features.push_back(space.feature_of(a));
    const auto& list = store.entities(kind);
    std::vector<std::vector<Code>> codes(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        for (std::size_t k = 0; k < schema_attrs.size(); ++k) {
            const auto* v = list[i].find(schema_attrs[k]);
            if (!v) throw SchemaMismatch("entity '" + list[i].id + "' lacks attribute '" + schema_attrs[k] + "'");
            if (v->empty()) {
                throw DataError("missing value of '" + schema_attrs[k] + "' on entity '" + list[i].id +
                                "' (run impute_missing first)");
            }
            const Code c = space.code(features[k], *v);
            if (c == kNoCode) {
                throw DataError("value '" + *v + "' of '" + schema_attrs[k] + "' lies outside its declared range");
            }
            codes[i].push_back(c);
        }
    }
    std::vector<std::uint32_t> order(list.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return codes[a] < codes[b]; });
    CodedEntities out;
    out.class_of.resize(list.size());
    for (auto i : order) {
        if (out.class_codes.empty() || out.class_codes.back() != codes[i]) out.class_codes.push_back(codes[i]);
        out.class_of[i] = static_cast<std::uint32_t>(out.class_codes.size() - 1);
    }
    return out;
}

struct RowKey {
    std::uint32_t user, object, session;
    std::uint16_t op;
    friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

template <class Visit>
void visit_distinct_rows(const AccessLog& log, const FeatureSpace& space, Selection which, Visit&& visit) {
    const auto& store = log.store();
    const auto users = code_entities(store, space, Kind::User);
    const auto objects = code_entities(store, space, Kind::Object);
    const auto sessions = code_entities(store, space, Kind::Session);
    const auto& ops = log.schema().operations();
    std::vector<Code> op_codes(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
        op_codes[i] = space.code(space.op_feature(), ops[i]);
        if (op_codes[i] == kNoCode) throw SchemaMismatch("operation '" + ops[i] + "' unknown to the feature space");
    }

    std::vector<std::pair<RowKey, Decision>> keys;
    keys.reserve(log.size());
    for (const auto& t : log.tuples()) {
        if (which == Selection::Positive && t.decision != Decision::Permit) continue;
        if (which == Selection::Negative && t.decision != Decision::Deny) continue;
        keys.push_back({RowKey{users.class_of[t.request.user], objects.class_of[t.request.object],
                               sessions.class_of[t.request.session], op_codes[t.request.op]},
                        t.decision});
    }
    std::sort(keys.begin(), keys.end());

    std::vector<Code> row;
    row.reserve(space.size());
    std::size_t i = 0;
    while (i < keys.size()) {
        std::size_t j = i;
        std::uint64_t permits = 0, denies = 0;
        while (j < keys.size() && keys[j].first == keys[i].first) {
            (keys[j].second == Decision::Permit ? permits : denies) += 1;
            ++j;
        }
        const auto& k = keys[i].first;
        row.clear();
        row.insert(row.end(), users.class_codes[k.user].begin(), users.class_codes[k.user].end());
        row.insert(row.end(), objects.class_codes[k.object].begin(), objects.class_codes[k.object].end());
        row.insert(row.end(), sessions.class_codes[k.session].begin(), sessions.class_codes[k.session].end());
        row.push_back(k.op);
        visit(std::span<const Code>(row), permits, denies);
        i = j;
    }
}

} // namespace detail

// Records for the selected tuples, deduplicated with summed weights, in
// canonical (lexicographic) order.
inline RecordSet encode_log(const AccessLog& log, const FeatureSpace& space, Selection which) {
    RecordSet out(space.size());
    detail::visit_distinct_rows(log, space, which, [&](std::span<const Code> row, auto permits, auto denies) {
        out.push_back(row, permits + denies);
    });
    return out;
}

inline RecordSet encode_log(const AccessLog& log, Selection which) {
    return encode_log(log, FeatureSpace(log.schema()), which);
}

inline LabeledRecords encode_labeled(const AccessLog& log, const FeatureSpace& space) {
    LabeledRecords out{RecordSet(space.size()), {}, {}};
    detail::visit_distinct_rows(log, space, Selection::All, [&](std::span<const Code> row, auto permits, auto denies) {
        out.rows.push_back(row, permits + denies);
        out.permits.push_back(permits);
        out.denies.push_back(denies);
    });
    return out;
}

// Attribute values (and the operation under key "op") of a record.
inline std::map<std::string, std::string> decode(const FeatureSpace& space, std::span<const Code> row) {
    if (row.size() != space.size()) throw DataError("record width mismatch");
    std::map<std::string, std::string> out;
    for (std::size_t f = 0; f < row.size(); ++f) out[space.name(f)] = space.value(f, row[f]);
    return out;
}

// ---------------------------------------------------------------------------
// Compiled evaluation over coded rows

class CompiledRule {
public:
    CompiledRule(const FeatureSpace& space, const Rule& rule) {
        for (const auto& t : rule.filter.tuples()) {
            if (!space.schema().has_attribute(t.attr)) throw SchemaMismatch("unknown attribute '" + t.attr + "'");
            const auto f = space.feature_of(t.attr);
            filters_.push_back({f, space.code(f, t.value), t.polarity == Polarity::Positive});
        }
        for (const auto& t : rule.relation.tuples()) {
            if (!space.schema().has_attribute(t.left) || !space.schema().has_attribute(t.right)) {
                throw SchemaMismatch("unknown relation attribute <" + t.left + "," + t.right + ">");
            }
            Relation r{space.feature_of(t.left), space.feature_of(t.right), t.polarity == Polarity::Positive, {}};
            if (!space.same_dictionary(r.left, r.right)) {
                // map right-hand codes into the left dictionary by value
                for (Code c = 0; c < space.cardinality(r.right); ++c) {
                    r.right_to_left.push_back(space.code(r.left, space.value(r.right, c)));
                }
            }
            relations_.push_back(std::move(r));
        }
        op_ = space.code(space.op_feature(), rule.op);
        op_positive_ = rule.op_polarity == Polarity::Positive;
        op_feature_ = space.op_feature();
    }

    bool matches(std::span<const Code> row) const {
        if ((row[op_feature_] == op_) != op_positive_) return false;
        for (const auto& f : filters_) {
            if ((row[f.feature] == f.code) != f.positive) return false;
        }
        for (const auto& r : relations_) {
            const Code right = r.right_to_left.empty() ? row[r.right] : r.right_to_left[row[r.right]];
            const bool equal = right != kNoCode && row[r.left] == right;
            if (equal != r.positive) return false;
        }
        return true;
    }

private:
    struct Filter {
        std::size_t feature;
        Code code;
        bool positive;
    };
    struct Relation {
        std::size_t left, right;
        bool positive;
        std::vector<Code> right_to_left;
    };
    std::vector<Filter> filters_;
    std::vector<Relation> relations_;
    Code op_ = kNoCode;
    bool op_positive_ = true;
    std::size_t op_feature_ = 0;
};

class CompiledPolicy {
public:
    CompiledPolicy(const FeatureSpace& space, const std::vector<Rule>& rules) {
        for (const auto& r : rules) rules_.emplace_back(space, r);
    }
    CompiledPolicy(const FeatureSpace& space, const Policy& policy) : CompiledPolicy(space, policy.rules()) {}

    bool permits(std::span<const Code> row) const {
        for (const auto& r : rules_) {
            if (r.matches(row)) return true;
        }
        return false;
    }

    const std::vector<CompiledRule>& rules() const { return rules_; }

private:
    std::vector<CompiledRule> rules_;
};

} // namespace abacmine
