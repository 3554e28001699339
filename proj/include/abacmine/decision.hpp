#pragma once

// Reference decision engine over string-valued entities. The coded
// evaluator in encoding.hpp is the fast path used by the mining pipeline;
// both implement the same permit-if-any-rule-matches semantics.

#include <string>

#include "abacmine/model.hpp"

namespace abacmine {

namespace detail {

// Attribute names are unique across kinds, so whichever entity of the
// request carries the attribute owns it.
inline const std::string& resolve(const Entity& user, const Entity& object, const Entity& session,
                                  const std::string& attr) {
    for (const Entity* e : {&user, &object, &session}) {
        if (const auto* v = e->find(attr)) return *v;
    }
    throw SchemaMismatch("attribute '" + attr + "' is not carried by any entity of the request");
}

} // namespace detail

inline bool satisfies_filter(const Entity& user, const Entity& object, const Entity& session,
                             const AttributeFilter& filter) {
    for (const auto& t : filter.tuples()) {
        const bool equal = detail::resolve(user, object, session, t.attr) == t.value;
        if (equal != (t.polarity == Polarity::Positive)) return false;
    }
    return true;
}

inline bool satisfies_relation(const Entity& user, const Entity& object, const Entity& session,
                               const RelationCondition& relation) {
    for (const auto& t : relation.tuples()) {
        const bool equal =
            detail::resolve(user, object, session, t.left) == detail::resolve(user, object, session, t.right);
        if (equal != (t.polarity == Polarity::Positive)) return false;
    }
    return true;
}

// op_q = op for a positive operation, op_q != op for a negated one.
inline bool operation_matches(const std::string& requested, const Rule& rule) {
    return (requested == rule.op) == (rule.op_polarity == Polarity::Positive);
}

inline bool rule_satisfied(const EntityStore& store, const AccessRequest& q, const Rule& rule) {
    const Entity& u = store.at(Kind::User, q.user);
    const Entity& o = store.at(Kind::Object, q.object);
    const Entity& s = store.at(Kind::Session, q.session);
    const auto& ops = store.schema().operations();
    if (q.op >= ops.size()) throw LookupError("operation index out of range");
    return operation_matches(ops[q.op], rule) && satisfies_filter(u, o, s, rule.filter) &&
           satisfies_relation(u, o, s, rule.relation);
}

inline bool rule_satisfied(const AccessRequest& q, const Rule& rule, const Policy& context) {
    if (!context.entities()) throw LookupError("policy carries no entity map");
    return rule_satisfied(*context.entities(), q, rule);
}

// Deny by default; permit iff some rule is satisfied.
inline Decision policy_decision(const Policy& policy, const EntityStore& store, const AccessRequest& q) {
    for (const auto& r : policy.rules()) {
        if (rule_satisfied(store, q, r)) return Decision::Permit;
    }
    return Decision::Deny;
}

inline Decision policy_decision(const Policy& policy, const AccessRequest& q) {
    if (!policy.entities()) {
        if (policy.empty()) return Decision::Deny;
        throw LookupError("policy carries no entity map");
    }
    return policy_decision(policy, *policy.entities(), q);
}

} // namespace abacmine
