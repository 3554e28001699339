#pragma once

// ABAC data model: schema, entities, filters, relations, rules, policies,
// requests and access logs. All types are values; once built they are not
// mutated, and transformations return new objects.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "abacmine/errors.hpp"

namespace abacmine {

enum class Kind : std::uint8_t { User, Object, Session };
enum class Polarity : std::uint8_t { Positive, Negative };
enum class Decision : std::uint8_t { Deny, Permit };

inline constexpr std::string_view kUnknownValue = "UNK";
inline constexpr std::string_view kNullSessionId = "null-session";

inline std::string_view to_string(Kind k) {
    switch (k) {
    case Kind::User: return "user";
    case Kind::Object: return "object";
    case Kind::Session: return "session";
    }
    return "?";
}

inline std::string_view kind_prefix(Kind k) {
    switch (k) {
    case Kind::User: return "u_";
    case Kind::Object: return "o_";
    case Kind::Session: return "s_";
    }
    return "";
}

inline std::string_view to_string(Polarity p) { return p == Polarity::Positive ? "positive" : "negative"; }
inline std::string_view to_string(Decision d) { return d == Decision::Permit ? "permit" : "deny"; }

inline Polarity parse_polarity(std::string_view s) {
    if (s == "positive") return Polarity::Positive;
    if (s == "negative") return Polarity::Negative;
    throw DataError("unknown polarity '" + std::string(s) + "'");
}

inline Decision parse_decision(std::string_view s) {
    if (s == "permit") return Decision::Permit;
    if (s == "deny") return Decision::Deny;
    throw DataError("unknown decision '" + std::string(s) + "'");
}

inline Decision flip(Decision d) { return d == Decision::Permit ? Decision::Deny : Decision::Permit; }
inline Polarity flip(Polarity p) { return p == Polarity::Positive ? Polarity::Negative : Polarity::Positive; }

// ---------------------------------------------------------------------------
// AttributeSchema

class Schema {
public:
    using Ranges = std::map<std::string, std::vector<std::string>>;

    Schema() = default;

    // Ranges are stored as sorted sets, so two attributes declared with the
    // same values in a different order share an identical range.
    Schema(std::vector<std::string> user_attrs, std::vector<std::string> object_attrs,
           std::vector<std::string> session_attrs, std::vector<std::string> operations, Ranges ranges)
        : attrs_{std::move(user_attrs), std::move(object_attrs), std::move(session_attrs)},
          operations_(std::move(operations)), ranges_(std::move(ranges)) {
        std::sort(operations_.begin(), operations_.end());
        if (std::adjacent_find(operations_.begin(), operations_.end()) != operations_.end()) {
            throw ConfigError("duplicate operation name in schema");
        }
        for (auto& [name, values] : ranges_) {
            std::sort(values.begin(), values.end());
            values.erase(std::unique(values.begin(), values.end()), values.end());
        }
        std::size_t position = 0;
        for (Kind kind : {Kind::User, Kind::Object, Kind::Session}) {
            for (const auto& name : attrs_[static_cast<int>(kind)]) {
                if (name.empty()) throw ConfigError("empty attribute name");
                if (!index_.emplace(name, Slot{kind, position++}).second) {
                    throw ConfigError("attribute name '" + name + "' is not unique");
                }
                auto it = ranges_.find(name);
                if (it == ranges_.end() || it->second.empty()) {
                    throw ConfigError("attribute '" + name + "' has no range");
                }
            }
        }
        for (const auto& [name, values] : ranges_) {
            if (!index_.count(name)) throw ConfigError("range declared for unknown attribute '" + name + "'");
        }
    }

    const std::vector<std::string>& attributes(Kind k) const { return attrs_[static_cast<int>(k)]; }
    const std::vector<std::string>& user_attrs() const { return attributes(Kind::User); }
    const std::vector<std::string>& object_attrs() const { return attributes(Kind::Object); }
    const std::vector<std::string>& session_attrs() const { return attributes(Kind::Session); }
    const std::vector<std::string>& operations() const { return operations_; }
    const Ranges& ranges() const { return ranges_; }

    // Canonical order: user, object, then session attributes.
    std::vector<std::string> all_attributes() const {
        std::vector<std::string> out;
        for (const auto& v : attrs_) out.insert(out.end(), v.begin(), v.end());
        return out;
    }

    std::size_t attribute_count() const { return index_.size(); }

    std::size_t value_count() const {
        std::size_t n = 0;
        for (const auto& [_, values] : ranges_) n += values.size();
        return n;
    }

    bool has_attribute(std::string_view name) const { return index_.count(std::string(name)) > 0; }

    std::optional<Kind> kind_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return it->second.kind;
    }

    // Position of the attribute in canonical order.
    std::size_t index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw SchemaMismatch("unknown attribute '" + std::string(name) + "'");
        return it->second.position;
    }

    const std::vector<std::string>& range(std::string_view name) const {
        auto it = ranges_.find(std::string(name));
        if (it == ranges_.end()) throw SchemaMismatch("unknown attribute '" + std::string(name) + "'");
        return it->second;
    }

    bool in_range(std::string_view name, std::string_view value) const {
        const auto& r = range(name);
        return std::binary_search(r.begin(), r.end(), value);
    }

    bool same_range(std::string_view a, std::string_view b) const { return range(a) == range(b); }

    bool has_operation(std::string_view op) const {
        return std::binary_search(operations_.begin(), operations_.end(), op);
    }

    std::size_t operation_index(std::string_view op) const {
        auto it = std::lower_bound(operations_.begin(), operations_.end(), op);
        if (it == operations_.end() || *it != op) throw SchemaMismatch("unknown operation '" + std::string(op) + "'");
        return static_cast<std::size_t>(it - operations_.begin());
    }

    // Copy of this schema with `value` added to the range of `attr`.
    Schema with_value(const std::string& attr, const std::string& value) const {
        Ranges r = ranges_;
        r.at(attr).push_back(value);
        return Schema(attrs_[0], attrs_[1], attrs_[2], operations_, std::move(r));
    }

    Schema with_ranges(Ranges r) const { return Schema(attrs_[0], attrs_[1], attrs_[2], operations_, std::move(r)); }

    friend bool operator==(const Schema& a, const Schema& b) {
        return std::equal(std::begin(a.attrs_), std::end(a.attrs_), std::begin(b.attrs_)) && a.operations_ == b.operations_ && a.ranges_ == b.ranges_;
    }

private:
    struct Slot {
        Kind kind;
        std::size_t position;
    };
    std::vector<std::string> attrs_[3];
    std::vector<std::string> operations_;
    Ranges ranges_;
    std::unordered_map<std::string, Slot> index_;
};

// ---------------------------------------------------------------------------
// Entities

struct Entity {
    std::string id;
    Kind kind = Kind::User;
    // Attribute function restricted to this entity. An empty value marks a
    // missing attribute (see impute_missing).
    std::map<std::string, std::string> attrs;

    const std::string* find(std::string_view attr) const {
        auto it = attrs.find(std::string(attr));
        return it == attrs.end() ? nullptr : &it->second;
    }

    friend bool operator==(const Entity&, const Entity&) = default;
};

// Owns the users, objects and sessions of one system, indexed by position.
class EntityStore {
public:
    EntityStore() = default;

    EntityStore(Schema schema, std::vector<Entity> users, std::vector<Entity> objects, std::vector<Entity> sessions)
        : schema_(std::move(schema)), entities_{std::move(users), std::move(objects), std::move(sessions)} {
        for (Kind kind : {Kind::User, Kind::Object, Kind::Session}) {
            auto& list = entities_[static_cast<int>(kind)];
            auto& ids = ids_[static_cast<int>(kind)];
            for (std::size_t i = 0; i < list.size(); ++i) {
                auto& e = list[i];
                if (e.kind != kind) throw DataError("entity '" + e.id + "' stored under the wrong kind");
                if (!ids.emplace(e.id, i).second) {
                    throw DataError("duplicate " + std::string(to_string(kind)) + " id '" + e.id + "'");
                }
                for (const auto& [name, _] : e.attrs) {
                    if (schema_.kind_of(name) != kind) {
                        throw SchemaMismatch("entity '" + e.id + "' carries attribute '" + name +
                                             "' not declared for its kind");
                    }
                }
                for (const auto& name : schema_.attributes(kind)) {
                    if (!e.attrs.count(name)) throw DataError("entity '" + e.id + "' lacks attribute '" + name + "'");
                }
            }
        }
    }

    const Schema& schema() const { return schema_; }
    const std::vector<Entity>& entities(Kind k) const { return entities_[static_cast<int>(k)]; }
    const std::vector<Entity>& users() const { return entities(Kind::User); }
    const std::vector<Entity>& objects() const { return entities(Kind::Object); }
    const std::vector<Entity>& sessions() const { return entities(Kind::Session); }

    const Entity& at(Kind k, std::uint32_t index) const {
        const auto& list = entities(k);
        if (index >= list.size()) {
            throw LookupError("dangling " + std::string(to_string(k)) + " index " + std::to_string(index));
        }
        return list[index];
    }

    std::optional<std::uint32_t> find(Kind k, std::string_view id) const {
        const auto& ids = ids_[static_cast<int>(k)];
        auto it = ids.find(std::string(id));
        if (it == ids.end()) return std::nullopt;
        return static_cast<std::uint32_t>(it->second);
    }

    // True iff every attribute value lies in its declared range.
    bool conforms() const {
        for (const auto& list : entities_) {
            for (const auto& e : list) {
                for (const auto& [name, value] : e.attrs) {
                    if (!schema_.in_range(name, value)) return false;
                }
            }
        }
        return true;
    }

private:
    Schema schema_;
    std::vector<Entity> entities_[3];
    std::unordered_map<std::string, std::size_t> ids_[3];
};

// A session entity whose attributes are all UNK, for datasets without sessions.
inline Entity null_session(const Schema& schema) {
    Entity e{std::string(kNullSessionId), Kind::Session, {}};
    for (const auto& a : schema.session_attrs()) e.attrs[a] = std::string(kUnknownValue);
    return e;
}

// ---------------------------------------------------------------------------
// Filters, relations, rules

struct FilterTuple {
    std::string attr;
    std::string value;
    Polarity polarity = Polarity::Positive;

    friend auto operator<=>(const FilterTuple&, const FilterTuple&) = default;
};

class AttributeFilter {
public:
    AttributeFilter() = default;

    AttributeFilter(std::vector<FilterTuple> tuples) : tuples_(std::move(tuples)) {
        std::sort(tuples_.begin(), tuples_.end());
        tuples_.erase(std::unique(tuples_.begin(), tuples_.end()), tuples_.end());
        for (std::size_t i = 0; i + 1 < tuples_.size(); ++i) {
            // sorted by (attr, value, polarity): contradicting pairs are adjacent
            const auto& a = tuples_[i];
            const auto& b = tuples_[i + 1];
            if (a.attr == b.attr && a.value == b.value) {
                throw ConfigError("contradictory filter: <" + a.attr + "," + a.value + "> and <" + a.attr + ",!" +
                                  a.value + ">");
            }
        }
    }

    const std::vector<FilterTuple>& tuples() const { return tuples_; }
    bool empty() const { return tuples_.empty(); }
    std::size_t size() const { return tuples_.size(); }

    // F_U, F_O or F_S: the tuples whose attribute belongs to `kind`.
    std::vector<FilterTuple> component(const Schema& schema, Kind kind) const {
        std::vector<FilterTuple> out;
        for (const auto& t : tuples_) {
            if (schema.kind_of(t.attr) == kind) out.push_back(t);
        }
        return out;
    }

    friend bool operator==(const AttributeFilter&, const AttributeFilter&) = default;
    friend auto operator<=>(const AttributeFilter& a, const AttributeFilter& b) { return a.tuples_ <=> b.tuples_; }

private:
    std::vector<FilterTuple> tuples_;
};

struct RelationTuple {
    std::string left;
    std::string right;
    Polarity polarity = Polarity::Positive;

    RelationTuple() = default;
    RelationTuple(std::string a, std::string b, Polarity p = Polarity::Positive)
        : left(std::move(a)), right(std::move(b)), polarity(p) {
        if (left == right) throw ConfigError("relation over a single attribute '" + left + "'");
        if (right < left) std::swap(left, right);
    }

    friend auto operator<=>(const RelationTuple&, const RelationTuple&) = default;
};

class RelationCondition {
public:
    RelationCondition() = default;

    RelationCondition(std::vector<RelationTuple> tuples) : tuples_(std::move(tuples)) {
        std::sort(tuples_.begin(), tuples_.end());
        tuples_.erase(std::unique(tuples_.begin(), tuples_.end()), tuples_.end());
        for (std::size_t i = 0; i + 1 < tuples_.size(); ++i) {
            if (tuples_[i].left == tuples_[i + 1].left && tuples_[i].right == tuples_[i + 1].right) {
                throw ConfigError("contradictory relation on <" + tuples_[i].left + "," + tuples_[i].right + ">");
            }
        }
    }

    const std::vector<RelationTuple>& tuples() const { return tuples_; }
    bool empty() const { return tuples_.empty(); }
    std::size_t size() const { return tuples_.size(); }

    friend bool operator==(const RelationCondition&, const RelationCondition&) = default;
    friend auto operator<=>(const RelationCondition& a, const RelationCondition& b) { return a.tuples_ <=> b.tuples_; }

private:
    std::vector<RelationTuple> tuples_;
};

struct Rule {
    AttributeFilter filter;
    RelationCondition relation;
    std::string op;
    Polarity op_polarity = Polarity::Positive;

    friend bool operator==(const Rule&, const Rule&) = default;
    friend auto operator<=>(const Rule& a, const Rule& b) {
        if (auto c = a.op <=> b.op; c != 0) return c;
        if (auto c = a.op_polarity <=> b.op_polarity; c != 0) return c;
        if (auto c = a.filter <=> b.filter; c != 0) return c;
        return a.relation <=> b.relation;
    }
};

// ---------------------------------------------------------------------------
// Policy

class Policy {
public:
    Policy() = default;

    // Rules form a set: duplicates collapse and order is canonical.
    Policy(Schema schema, std::vector<Rule> rules, std::shared_ptr<const EntityStore> entities = nullptr)
        : schema_(std::move(schema)), rules_(std::move(rules)), entities_(std::move(entities)) {
        std::sort(rules_.begin(), rules_.end());
        rules_.erase(std::unique(rules_.begin(), rules_.end()), rules_.end());
        for (const auto& r : rules_) validate(r);
    }

    const Schema& schema() const { return schema_; }
    const std::vector<Rule>& rules() const { return rules_; }
    const std::shared_ptr<const EntityStore>& entities() const { return entities_; }
    std::size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    Policy with_rules(std::vector<Rule> rules) const { return Policy(schema_, std::move(rules), entities_); }

    Policy with_entities(std::shared_ptr<const EntityStore> entities) const {
        return Policy(schema_, rules_, std::move(entities));
    }

    friend bool operator==(const Policy& a, const Policy& b) {
        return a.schema_ == b.schema_ && a.rules_ == b.rules_;
    }

private:
    void validate(const Rule& r) const {
        if (!schema_.has_operation(r.op)) throw SchemaMismatch("rule references unknown operation '" + r.op + "'");
        for (const auto& t : r.filter.tuples()) {
            if (!schema_.has_attribute(t.attr)) throw SchemaMismatch("rule references unknown attribute '" + t.attr + "'");
            if (!schema_.in_range(t.attr, t.value)) {
                throw SchemaMismatch("value '" + t.value + "' outside the range of '" + t.attr + "'");
            }
        }
        for (const auto& t : r.relation.tuples()) {
            if (!schema_.has_attribute(t.left) || !schema_.has_attribute(t.right)) {
                throw SchemaMismatch("relation references unknown attribute <" + t.left + "," + t.right + ">");
            }
            if (!schema_.same_range(t.left, t.right)) {
                throw SchemaMismatch("relation <" + t.left + "," + t.right + "> joins attributes with different ranges");
            }
        }
    }

    Schema schema_;
    std::vector<Rule> rules_;
    std::shared_ptr<const EntityStore> entities_;
};

// ---------------------------------------------------------------------------
// Requests and logs

// Entity references are positions in the owning EntityStore; op is the
// position in Schema::operations().
struct AccessRequest {
    std::uint32_t user = 0;
    std::uint32_t object = 0;
    std::uint32_t session = 0;
    std::uint16_t op = 0;

    friend auto operator<=>(const AccessRequest&, const AccessRequest&) = default;
};

struct AuthorizationTuple {
    AccessRequest request;
    Decision decision = Decision::Deny;

    friend auto operator<=>(const AuthorizationTuple&, const AuthorizationTuple&) = default;
};

class AccessLog {
public:
    AccessLog() = default;

    AccessLog(std::shared_ptr<const EntityStore> store, std::vector<AuthorizationTuple> tuples)
        : store_(std::move(store)), tuples_(std::move(tuples)) {
        if (!store_) throw DataError("access log without an entity store");
        const auto ops = store_->schema().operations().size();
        for (const auto& t : tuples_) {
            store_->at(Kind::User, t.request.user);
            store_->at(Kind::Object, t.request.object);
            store_->at(Kind::Session, t.request.session);
            if (t.request.op >= ops) throw LookupError("operation index out of range");
        }
    }

    const Schema& schema() const { return store_->schema(); }
    const EntityStore& store() const { return *store_; }
    const std::shared_ptr<const EntityStore>& store_ptr() const { return store_; }
    const std::vector<AuthorizationTuple>& tuples() const { return tuples_; }
    std::size_t size() const { return tuples_.size(); }
    bool empty() const { return tuples_.empty(); }

    const std::string& op_name(const AccessRequest& q) const { return schema().operations()[q.op]; }

    std::size_t count(Decision d) const {
        return static_cast<std::size_t>(
            std::count_if(tuples_.begin(), tuples_.end(), [d](const auto& t) { return t.decision == d; }));
    }
    std::size_t positive_count() const { return count(Decision::Permit); }
    std::size_t negative_count() const { return count(Decision::Deny); }

    // L+ or L- as a log over the same entity store.
    AccessLog subset(Decision d) const {
        std::vector<AuthorizationTuple> out;
        for (const auto& t : tuples_) {
            if (t.decision == d) out.push_back(t);
        }
        return AccessLog(store_, std::move(out));
    }
    AccessLog positive() const { return subset(Decision::Permit); }
    AccessLog negative() const { return subset(Decision::Deny); }

    AccessLog with_tuples(std::vector<AuthorizationTuple> tuples) const { return AccessLog(store_, std::move(tuples)); }

private:
    std::shared_ptr<const EntityStore> store_;
    std::vector<AuthorizationTuple> tuples_;
};

} // namespace abacmine
