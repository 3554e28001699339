#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"

using namespace abacmine;

namespace {

AccessLog parse(const std::string& text) {
    std::istringstream in(text);
    return read_log_csv(in);
}

const char* kHours =
    "uid,oid,sid,op,decision,u_dept,o_kind,s_hour\n"
    "u1,o1,s1,read,permit,CS,doc,10\n"
    "u1,o1,s1,read,permit,CS,doc,10\n"
    "u2,o1,s2,read,deny,EE,doc,18\n"
    "u2,o1,s3,write,deny,EE,doc,7.5\n";

Discretizer working_hours() {
    return Discretizer({{"hour", AttributeBinning{{Bin{"working", 8, 18}}, std::string("nonworking")}}});
}

} // namespace

TEST(Encode, DuplicateTuplesMergeWithWeight) {
    const auto log = parse(kHours);
    const auto pos = encode_log(log, Selection::Positive);
    ASSERT_EQ(pos.size(), 1u);
    EXPECT_EQ(pos.weight(0), 2u);
    EXPECT_EQ(encode_log(log, Selection::All).total_weight(), log.size());
    EXPECT_EQ(encode_log(log, Selection::Negative).total_weight(), 2u);
}

TEST(Encode, WidthIsAttributesPlusOperation) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto schema = support::random_schema(rng, 2 + rng.below(6));
        const auto log = support::random_log(rng, schema, 50);
        const FeatureSpace space(schema);
        const auto rec = encode_log(log, space, Selection::All);
        EXPECT_EQ(rec.width(), schema.attribute_count() + 1);
        EXPECT_EQ(rec.total_weight(), log.size());
    }
}

TEST(Encode, PositiveOnlyLogKeepsEveryTuple) {
    const auto log = support::complete_log(support::disjoint_policy()).positive();
    EXPECT_EQ(encode_log(log, Selection::Positive).total_weight(), log.size());
}

TEST(Encode, DecodeReproducesAttributes) {
    Rng rng(5);
    const auto schema = support::random_schema(rng, 6);
    const auto log = support::random_log(rng, schema, 80);
    const FeatureSpace space(schema);
    const auto rec = encode_log(log, space, Selection::All);
    std::set<std::map<std::string, std::string>> decoded;
    for (std::size_t i = 0; i < rec.size(); ++i) decoded.insert(decode(space, rec.row(i)));
    std::set<std::map<std::string, std::string>> direct;
    for (const auto& t : log.tuples()) {
        std::map<std::string, std::string> m;
        for (Kind k : {Kind::User, Kind::Object, Kind::Session}) {
            const std::uint32_t idx = k == Kind::User ? t.request.user : k == Kind::Object ? t.request.object : t.request.session;
            for (const auto& [a, v] : log.store().at(k, idx).attrs) m[a] = v;
        }
        m["op"] = log.op_name(t.request);
        direct.insert(m);
    }
    EXPECT_EQ(decoded, direct);
}

TEST(Encode, ValueOutsideRangeRejected) {
    const Schema narrow({"dept"}, {"kind"}, {}, {"read"}, {{"dept", {"CS"}}, {"kind", {"doc"}}});
    const Schema wide = narrow.with_value("dept", "EE");
    const auto store = std::make_shared<const EntityStore>(
        wide, std::vector<Entity>{{"u", Kind::User, {{"dept", "EE"}}}},
        std::vector<Entity>{{"o", Kind::Object, {{"kind", "doc"}}}}, std::vector<Entity>{null_session(wide)});
    const AccessLog log(store, {{{0, 0, 0, 0}, Decision::Permit}});
    EXPECT_THROW(encode_log(log, FeatureSpace(narrow), Selection::All), DataError);
}

TEST(Impute, MissingBecomesUnk) {
    const auto log = parse(
        "uid,oid,sid,op,decision,u_dept,o_kind\n"
        "u1,o1,,read,permit,,doc\n"
        "u2,o1,,read,deny,EE,doc\n");
    const auto out = impute_missing(log);
    EXPECT_EQ(*out.store().users()[0].find("dept"), "UNK");
    EXPECT_TRUE(out.schema().in_range("dept", "UNK"));
    EXPECT_FALSE(out.schema().in_range("kind", "UNK"));
    EXPECT_NO_THROW(encode_log(out, Selection::All));
    EXPECT_THROW(encode_log(log, Selection::All), DataError);
}

TEST(Impute, IdempotentAndIdentityWithoutGaps) {
    const auto log = parse(kHours);
    const auto once = impute_missing(log);
    EXPECT_EQ(once.schema(), log.schema());
    EXPECT_EQ(once.store().users(), log.store().users());

    const auto gappy = parse(
        "uid,oid,sid,op,decision,u_dept,o_kind\n"
        "u1,o1,,read,permit,UNK,doc\n"
        "u2,o2,,read,deny,EE,\n");
    const auto a = impute_missing(gappy);
    const auto b = impute_missing(a);
    EXPECT_EQ(a.schema(), b.schema());
    EXPECT_EQ(a.store().users(), b.store().users());
    EXPECT_EQ(a.store().objects(), b.store().objects());
}

TEST(Discretize, HalfOpenBins) {
    const auto d = working_hours();
    EXPECT_EQ(d.label("hour", "10"), "working");
    EXPECT_EQ(d.label("hour", "8"), "working");
    EXPECT_EQ(d.label("hour", "18"), "nonworking");
    EXPECT_EQ(d.label("hour", "7.5"), "nonworking");
    EXPECT_EQ(d.label("dept", "CS"), "CS");  // not binned: pass-through
}

TEST(Discretize, ValueOutsideEveryBin) {
    const Discretizer d({{"hour", AttributeBinning{{Bin{"working", 8, 18}}, std::nullopt}}});
    EXPECT_THROW(d.label("hour", "20"), DataError);
    EXPECT_THROW(d.label("hour", "noon"), DataError);
}

TEST(Discretize, RewritesLogAndRange) {
    const auto out = discretize(parse(kHours), working_hours());
    EXPECT_EQ(out.schema().range("hour"), (std::vector<std::string>{"nonworking", "working"}));
    EXPECT_EQ(*out.store().sessions()[0].find("hour"), "working");
    EXPECT_EQ(*out.store().sessions()[1].find("hour"), "nonworking");
    EXPECT_EQ(out.schema().range("dept"), (std::vector<std::string>{"CS", "EE"}));
}

TEST(Discretize, SpecFromJson) {
    const auto d = Discretizer::from_json(nlohmann::json::parse(
        R"({"hour": {"bins": [{"label": "early", "lo": null, "hi": 8}, {"label": "day", "lo": 8, "hi": 18},
                              {"label": "late", "lo": 18, "hi": null}]}})"));
    EXPECT_EQ(d.label("hour", "-3"), "early");
    EXPECT_EQ(d.label("hour", "18"), "late");
    EXPECT_THROW(Discretizer::from_json(nlohmann::json::parse(R"({"hour": {"bins": [{"label": "a", "lo": 2, "hi": 1}]}})")),
                 ConfigError);
    EXPECT_THROW(Discretizer::from_json(nlohmann::json::parse(R"({"hour": {}})")), ConfigError);
}
