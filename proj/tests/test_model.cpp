#include <gtest/gtest.h>

#include "support.hpp"

using namespace abacmine;
using support::oracle_decision;

namespace {

using Fs = std::vector<FilterTuple>;
using Rs = std::vector<RelationTuple>;

Entity entity(std::string id, Kind kind, std::map<std::string, std::string> attrs) {
    return Entity{std::move(id), kind, std::move(attrs)};
}

// student/article schema used by the rule examples
Schema campus_schema() {
    const std::vector<std::string> depts{"CS", "EE"};
    return Schema({"position", "dept_u"}, {"type", "dept_o", "label"}, {"location"}, {"read", "write"},
                  {{"position", {"faculty", "grad", "student"}},
                   {"dept_u", depts},
                   {"type", {"article", "gradebook"}},
                   {"dept_o", depts},
                   {"label", {"secret", "top-secret", "public"}},
                   {"location", {"campus", "home"}}});
}

Rule student_reads_article() {
    return Rule{AttributeFilter(Fs{{"position", "student"}, {"type", "article"}, {"location", "campus"}}),
                RelationCondition(Rs{{"dept_u", "dept_o"}}), "read", Polarity::Positive};
}

std::shared_ptr<const EntityStore> campus_store() {
    const auto s = campus_schema();
    return std::make_shared<const EntityStore>(
        s,
        std::vector<Entity>{entity("alice", Kind::User, {{"position", "student"}, {"dept_u", "CS"}}),
                            entity("bob", Kind::User, {{"position", "faculty"}, {"dept_u", "EE"}})},
        std::vector<Entity>{entity("paper", Kind::Object, {{"type", "article"}, {"dept_o", "CS"}, {"label", "public"}}),
                            entity("grades", Kind::Object,
                                   {{"type", "gradebook"}, {"dept_o", "EE"}, {"label", "top-secret"}})},
        std::vector<Entity>{entity("s1", Kind::Session, {{"location", "campus"}}),
                            entity("s2", Kind::Session, {{"location", "home"}})});
}

} // namespace

TEST(Filter, PositiveTuplesMustAllMatch) {
    const auto u = entity("u", Kind::User, {{"dept", "CS"}, {"position", "grad"}});
    const Entity none{};
    EXPECT_TRUE(satisfies_filter(u, none, none, AttributeFilter(Fs{{"dept", "CS"}, {"position", "grad"}})));
    EXPECT_FALSE(satisfies_filter(u, none, none, AttributeFilter(Fs{{"dept", "EE"}, {"position", "grad"}})));
}

TEST(Filter, EmptyFilterIsVacuous) {
    const Entity none{};
    EXPECT_TRUE(satisfies_filter(none, none, none, AttributeFilter()));
}

TEST(Filter, NegativeTupleExcludesValue) {
    const Entity none{};
    const AttributeFilter f({{"label", "top-secret", Polarity::Negative}});
    EXPECT_TRUE(satisfies_filter(none, entity("o", Kind::Object, {{"label", "secret"}}), none, f));
    EXPECT_FALSE(satisfies_filter(none, entity("o", Kind::Object, {{"label", "top-secret"}}), none, f));
}

TEST(Filter, UnknownAttributeIsSchemaMismatch) {
    const Entity none{};
    EXPECT_THROW(satisfies_filter(none, none, none, AttributeFilter(Fs{{"nope", "x"}})), SchemaMismatch);
}

TEST(Filter, ContradictionRejected) {
    EXPECT_THROW(AttributeFilter(Fs{{"a", "v"}, {"a", "v", Polarity::Negative}}), ConfigError);
    // several negatives on one attribute are fine
    EXPECT_NO_THROW(AttributeFilter(Fs{{"a", "v1", Polarity::Negative}, {"a", "v2", Polarity::Negative}}));
}

TEST(Relation, EqualityAndInequality) {
    const Entity none{};
    const auto u = entity("u", Kind::User, {{"dept_u", "CS"}});
    EXPECT_TRUE(satisfies_relation(u, entity("o", Kind::Object, {{"dept_o", "CS"}}), none,
                                   RelationCondition(Rs{{"dept_u", "dept_o"}})));
    EXPECT_TRUE(satisfies_relation(u, entity("o", Kind::Object, {{"dept_o", "EE"}}), none,
                                   RelationCondition(Rs{{"dept_u", "dept_o", Polarity::Negative}})));
    EXPECT_TRUE(satisfies_relation(u, none, none, RelationCondition()));
}

TEST(Relation, CanonicalOrder) {
    const RelationTuple a("x", "y"), b("y", "x");
    EXPECT_EQ(a, b);
    EXPECT_THROW(RelationTuple("x", "x"), ConfigError);
    EXPECT_THROW(RelationCondition(Rs{{"x", "y"}, {"y", "x", Polarity::Negative}}), ConfigError);
}

TEST(Rule, OperationOnly) {
    const auto store = campus_store();
    const Rule read{{}, {}, "read", Polarity::Positive};
    const AccessRequest q_read{0, 0, 0, static_cast<std::uint16_t>(store->schema().operation_index("read"))};
    const AccessRequest q_write{0, 0, 0, static_cast<std::uint16_t>(store->schema().operation_index("write"))};
    EXPECT_TRUE(rule_satisfied(*store, q_read, read));
    EXPECT_FALSE(rule_satisfied(*store, q_write, read));
    const Rule not_read{{}, {}, "read", Polarity::Negative};
    EXPECT_FALSE(rule_satisfied(*store, q_read, not_read));
    EXPECT_TRUE(rule_satisfied(*store, q_write, not_read));
}

TEST(Rule, StudentReadsArticleOnCampus) {
    const auto store = campus_store();
    const auto read = static_cast<std::uint16_t>(store->schema().operation_index("read"));
    EXPECT_TRUE(rule_satisfied(*store, {0, 0, 0, read}, student_reads_article()));
    EXPECT_FALSE(rule_satisfied(*store, {0, 0, 1, read}, student_reads_article()));  // at home
    EXPECT_FALSE(rule_satisfied(*store, {1, 0, 0, read}, student_reads_article()));  // faculty
}

TEST(Rule, DanglingIndexIsLookupError) {
    const auto store = campus_store();
    EXPECT_THROW(rule_satisfied(*store, {9, 0, 0, 0}, student_reads_article()), LookupError);
    const Policy p(campus_schema(), {student_reads_article()});
    EXPECT_THROW(rule_satisfied({0, 0, 0, 0}, student_reads_article(), p), LookupError);
}

TEST(Policy, DenyByDefault) {
    const auto store = campus_store();
    const Policy empty(campus_schema(), {}, store);
    const Policy always(campus_schema(), {Rule{{}, {}, "read", Polarity::Positive}}, store);
    EXPECT_EQ(policy_decision(empty, {0, 0, 0, 0}), Decision::Deny);
    EXPECT_EQ(policy_decision(always, {1, 1, 1, 0}), Decision::Permit);
}

TEST(Policy, AnySatisfiedRulePermits) {
    const auto store = campus_store();
    const auto write = static_cast<std::uint16_t>(store->schema().operation_index("write"));
    const Rule faculty_writes{AttributeFilter(Fs{{"position", "faculty"}}), {}, "write", Polarity::Positive};
    const Policy p(campus_schema(), {student_reads_article(), faculty_writes}, store);
    EXPECT_EQ(policy_decision(p, {1, 1, 1, write}), Decision::Permit);
    EXPECT_EQ(policy_decision(p, {0, 1, 1, write}), Decision::Deny);
}

TEST(Policy, RulesFormACanonicalSet) {
    const Rule a{AttributeFilter(Fs{{"position", "faculty"}}), {}, "write", Polarity::Positive};
    const Policy p(campus_schema(), {student_reads_article(), a, a});
    const Policy q(campus_schema(), {a, student_reads_article()});
    EXPECT_EQ(p.size(), 2u);
    EXPECT_EQ(p, q);
}

TEST(Policy, ValidationAgainstSchema) {
    const auto s = campus_schema();
    EXPECT_THROW(Policy(s, {Rule{{}, {}, "delete", Polarity::Positive}}), SchemaMismatch);
    EXPECT_THROW(Policy(s, {Rule{AttributeFilter(Fs{{"position", "dean"}}), {}, "read", Polarity::Positive}}),
                 SchemaMismatch);
    EXPECT_THROW(Policy(s, {Rule{{}, RelationCondition(Rs{{"position", "dept_o"}}), "read", Polarity::Positive}}),
                 SchemaMismatch);
}

TEST(Schema, RejectsMalformedDeclarations) {
    EXPECT_THROW(Schema({"a"}, {"a"}, {}, {"r"}, {{"a", {"x"}}}), ConfigError);
    EXPECT_THROW(Schema({"a"}, {}, {}, {"r"}, {}), ConfigError);
    EXPECT_THROW(Schema({"a"}, {}, {}, {"r", "r"}, {{"a", {"x"}}}), ConfigError);
    EXPECT_THROW(Schema({"a"}, {}, {}, {"r"}, {{"a", {"x"}}, {"b", {"y"}}}), ConfigError);
}

TEST(Schema, RangesCompareAsSets) {
    const Schema s({"a"}, {"b"}, {}, {"r"}, {{"a", {"y", "x"}}, {"b", {"x", "y", "x"}}});
    EXPECT_TRUE(s.same_range("a", "b"));
}

TEST(EntityStore, RejectsInconsistentEntities) {
    const auto s = campus_schema();
    auto user = entity("u", Kind::User, {{"position", "student"}});  // lacks dept_u
    EXPECT_THROW(EntityStore(s, {user}, {}, {}), DataError);
    auto dup = entity("u", Kind::User, {{"position", "student"}, {"dept_u", "CS"}});
    EXPECT_THROW(EntityStore(s, {dup, dup}, {}, {}), DataError);
    auto stray = entity("u", Kind::User, {{"position", "student"}, {"dept_u", "CS"}, {"type", "article"}});
    EXPECT_THROW(EntityStore(s, {stray}, {}, {}), SchemaMismatch);
}

// Random (policy, request) pairs agree with the literal oracle.
TEST(PolicyProperty, MatchesOracle) {
    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const auto schema = support::random_schema(rng, 3 + rng.below(4));
        const auto store = generate_universe(schema, {{5, false}, {5, false}, {2, false}}, rng.next());
        const auto rules = support::random_rules(rng, schema, rng.below(5));
        const Policy p(schema, rules, store);
        for (int i = 0; i < 20; ++i) {
            const AccessRequest q{static_cast<std::uint32_t>(rng.below(5)), static_cast<std::uint32_t>(rng.below(5)),
                                  static_cast<std::uint32_t>(rng.below(store->sessions().size())),
                                  static_cast<std::uint16_t>(rng.below(schema.operations().size()))};
            ASSERT_EQ(policy_decision(p, q), oracle_decision(p.rules(), *store, q));
        }
    }
}

TEST(PolicyProperty, AddingRulesNeverRevokes) {
    Rng rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        const auto schema = support::random_schema(rng, 5);
        const auto store = generate_universe(schema, {{4, false}, {4, false}, {2, false}}, rng.next());
        auto rules = support::random_rules(rng, schema, 3);
        const Policy before(schema, rules, store);
        rules.push_back(support::random_rule(rng, schema));
        const Policy after(schema, rules, store);
        for (std::uint32_t u = 0; u < 4; ++u)
            for (std::uint32_t o = 0; o < 4; ++o)
                for (std::uint16_t op = 0; op < schema.operations().size(); ++op) {
                    const AccessRequest q{u, o, 0, op};
                    if (policy_decision(before, q) == Decision::Permit) {
                        ASSERT_EQ(policy_decision(after, q), Decision::Permit);
                    }
                }
    }
}

TEST(PolicyProperty, FilterSubsetsStaySatisfied) {
    Rng rng(303);
    for (int trial = 0; trial < 200; ++trial) {
        const auto schema = support::random_schema(rng, 5);
        const auto store = generate_universe(schema, {{3, false}, {3, false}, {1, false}}, rng.next());
        const auto rule = support::random_rule(rng, schema, 0.4, 4);
        const auto& u = store->users()[0];
        const auto& o = store->objects()[0];
        const auto& s = store->sessions()[0];
        if (!satisfies_filter(u, o, s, rule.filter)) continue;
        auto tuples = rule.filter.tuples();
        while (!tuples.empty()) {
            tuples.erase(tuples.begin() + static_cast<std::ptrdiff_t>(rng.below(tuples.size())));
            ASSERT_TRUE(satisfies_filter(u, o, s, AttributeFilter(tuples)));
        }
    }
}

TEST(PolicyProperty, OrderIndependent) {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const auto schema = support::random_schema(rng, 5);
        const auto store = generate_universe(schema, {{4, false}, {4, false}, {2, false}}, rng.next());
        auto rules = support::random_rules(rng, schema, 4);
        auto shuffled = rules;
        rng.shuffle(shuffled);
        for (std::uint32_t u = 0; u < 4; ++u)
            for (std::uint16_t op = 0; op < schema.operations().size(); ++op) {
                const AccessRequest q{u, u, 0, op};
                ASSERT_EQ(oracle_decision(rules, *store, q) == Decision::Permit,
                          policy_decision(Policy(schema, shuffled, store), q) == Decision::Permit);
            }
    }
}

TEST(PolicyJson, RoundTrip) {
    Rng rng(505);
    for (int trial = 0; trial < 50; ++trial) {
        const auto schema = support::random_schema(rng, 3 + rng.below(5));
        const Policy p(schema, support::random_rules(rng, schema, rng.below(6)));
        const auto text = policy_to_string(p);
        const auto back = parse_policy(text);
        ASSERT_EQ(back, p);
        ASSERT_EQ(policy_to_string(back), text);
    }
}

TEST(PolicyJson, RejectsWrongFormat) {
    EXPECT_THROW(parse_policy("{}"), Error);
    EXPECT_THROW(parse_policy("not json"), Error);
}
