#pragma once

// File formats. Policies are versioned JSON documents; logs are flat CSV
// files with one row per authorization tuple and one column per attribute.

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abacmine/clustering.hpp"
#include "abacmine/enhancement.hpp"
#include "abacmine/errors.hpp"
#include "abacmine/mining.hpp"
#include "abacmine/model.hpp"

namespace abacmine {

inline constexpr std::string_view kPolicyFormat = "abacmine-policy";
inline constexpr int kPolicyVersion = 1;

// Shortest decimal form that reads back to the same double.
inline std::string format_number(double x) {
    char buf[32];
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Policy JSON

inline nlohmann::ordered_json schema_to_json(const Schema& s) {
    nlohmann::ordered_json j;
    j["user_attrs"] = s.user_attrs();
    j["object_attrs"] = s.object_attrs();
    j["session_attrs"] = s.session_attrs();
    j["operations"] = s.operations();
    nlohmann::ordered_json ranges = nlohmann::ordered_json::object();
    for (const auto& a : s.all_attributes()) ranges[a] = s.range(a);
    j["ranges"] = ranges;
    return j;
}

inline nlohmann::ordered_json rule_to_json(const Rule& r) {
    nlohmann::ordered_json j;
    j["filter"] = nlohmann::ordered_json::array();
    for (const auto& t : r.filter.tuples()) {
        j["filter"].push_back({{"attr", t.attr}, {"value", t.value}, {"polarity", to_string(t.polarity)}});
    }
    j["relation"] = nlohmann::ordered_json::array();
    for (const auto& t : r.relation.tuples()) {
        j["relation"].push_back({{"left", t.left}, {"right", t.right}, {"polarity", to_string(t.polarity)}});
    }
    j["op"] = r.op;
    j["op_polarity"] = to_string(r.op_polarity);
    return j;
}

inline nlohmann::ordered_json policy_to_json(const Policy& p) {
    nlohmann::ordered_json j;
    j["format"] = kPolicyFormat;
    j["version"] = kPolicyVersion;
    j["schema"] = schema_to_json(p.schema());
    j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : p.rules()) j["rules"].push_back(rule_to_json(r));
    return j;
}

inline std::string policy_to_string(const Policy& p) { return policy_to_json(p).dump(2) + "\n"; }

inline Schema schema_from_json(const nlohmann::json& j) {
    try {
        Schema::Ranges ranges;
        for (const auto& [a, values] : j.at("ranges").items()) ranges[a] = values.get<std::vector<std::string>>();
        return Schema(j.at("user_attrs").get<std::vector<std::string>>(),
                      j.at("object_attrs").get<std::vector<std::string>>(),
                      j.at("session_attrs").get<std::vector<std::string>>(),
                      j.at("operations").get<std::vector<std::string>>(), std::move(ranges));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed schema: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid schema: ") + e.what());
    }
}

inline Rule rule_from_json(const nlohmann::json& j) {
    try {
        std::vector<FilterTuple> f;
        for (const auto& t : j.at("filter")) {
            f.push_back({t.at("attr").get<std::string>(), t.at("value").get<std::string>(),
                         parse_polarity(t.at("polarity").get<std::string>())});
        }
        std::vector<RelationTuple> r;
        for (const auto& t : j.at("relation")) {
            r.emplace_back(t.at("left").get<std::string>(), t.at("right").get<std::string>(),
                           parse_polarity(t.at("polarity").get<std::string>()));
        }
        return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), j.at("op").get<std::string>(),
                    parse_polarity(j.value("op_polarity", std::string("positive")))};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed rule: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("invalid rule: ") + e.what());
    }
}

inline Policy policy_from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != kPolicyFormat) throw DataError("not a policy document");
    if (j.value("version", 0) != kPolicyVersion) {
        throw DataError("unsupported policy version " + std::to_string(j.value("version", 0)));
    }
    auto schema = schema_from_json(j.at("schema"));
    std::vector<Rule> rules;
    for (const auto& r : j.at("rules")) rules.push_back(rule_from_json(r));
    return Policy(std::move(schema), std::move(rules));
}

inline Policy parse_policy(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("policy is not valid JSON: ") + e.what());
    }
    return policy_from_json(j);
}

// ---------------------------------------------------------------------------
// Plain files

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << content;
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

inline Policy load_policy(const std::string& path) { return parse_policy(read_file(path)); }
inline void save_policy(const std::string& path, const Policy& p) { write_file(path, policy_to_string(p)); }

// ---------------------------------------------------------------------------
// CSV

namespace csv {

inline std::string escape(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Splits one record; quoted fields may hold commas and doubled quotes but
// not line breaks.
inline std::vector<std::string> split(std::string_view line, std::size_t line_no) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    if (quoted) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    return out;
}

} // namespace csv

// ---------------------------------------------------------------------------
// Log CSV

inline void write_log_csv(std::ostream& out, const AccessLog& log) {
    const auto& schema = log.schema();
    std::vector<std::string> header{"uid", "oid", "sid", "op", "decision"};
    for (Kind k : {Kind::User, Kind::Object, Kind::Session}) {
        for (const auto& a : schema.attributes(k)) header.push_back(std::string(kind_prefix(k)) + a);
    }
    out << csv::join(header) << '\n';
    std::vector<std::string> row;
    for (const auto& t : log.tuples()) {
        const auto& u = log.store().at(Kind::User, t.request.user);
        const auto& o = log.store().at(Kind::Object, t.request.object);
        const auto& s = log.store().at(Kind::Session, t.request.session);
        row.assign({u.id, o.id, s.id == kNullSessionId ? "" : s.id, log.op_name(t.request),
                    std::string(to_string(t.decision))});
        for (const Entity* e : {&u, &o, &s}) {
            for (const auto& a : schema.attributes(e->kind)) row.push_back(*e->find(a));
        }
        out << csv::join(row) << '\n';
    }
}

inline std::string log_to_csv(const AccessLog& log) {
    std::ostringstream ss;
    write_log_csv(ss, log);
    return ss.str();
}

// Reads a log CSV. Without a schema, attribute kinds come from the column
// prefixes and ranges from the observed values. Empty cells and the literal
// UNK mark missing values; an empty sid is the null session.
inline AccessLog read_log_csv(std::istream& in, const std::optional<Schema>& declared = std::nullopt) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next_line()) throw DataError("log CSV is empty");
    const auto header = csv::split(line, line_no);
    const std::vector<std::string> fixed{"uid", "oid", "sid", "op", "decision"};
    if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
        throw DataError("line 1: header must start with uid,oid,sid,op,decision");
    }
    struct Column {
        Kind kind;
        std::string attr;
    };
    std::vector<Column> columns;
    std::vector<std::string> attrs[3];
    for (std::size_t c = fixed.size(); c < header.size(); ++c) {
        const auto& h = header[c];
        std::optional<Kind> kind;
        for (Kind k : {Kind::User, Kind::Object, Kind::Session}) {
            if (h.rfind(kind_prefix(k), 0) == 0) kind = k;
        }
        if (!kind || h.size() <= 2) throw DataError("line 1: column '" + h + "' lacks a u_/o_/s_ prefix");
        columns.push_back({*kind, h.substr(2)});
        attrs[static_cast<int>(*kind)].push_back(h.substr(2));
    }
    if (declared) {
        for (Kind k : {Kind::User, Kind::Object, Kind::Session}) {
            auto a = attrs[static_cast<int>(k)], b = declared->attributes(k);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (a != b) throw SchemaMismatch("log columns do not match the declared " + std::string(to_string(k)) + " attributes");
        }
    }

    std::map<std::string, std::map<std::string, std::string>> seen[3];
    std::vector<std::string> order[3];
    struct Raw {
        std::string uid, oid, sid, op;
        Decision decision;
    };
    std::vector<Raw> raws;
    std::set<std::string> ops;
    while (next_line()) {
        if (line.empty()) continue;
        const auto fields = csv::split(line, line_no);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        }
        Raw r{fields[0], fields[1], fields[2].empty() ? std::string(kNullSessionId) : fields[2], fields[3],
              Decision::Deny};
        try {
            r.decision = parse_decision(fields[4]);
        } catch (const Error&) {
            throw DataError("line " + std::to_string(line_no) + ": decision must be permit or deny");
        }
        if (r.uid.empty() || r.oid.empty() || r.op.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": uid, oid and op are required");
        }
        std::map<std::string, std::string> entity[3];
        for (std::size_t c = 0; c < columns.size(); ++c) {
            auto v = fields[fixed.size() + c];
            if (v == kUnknownValue) v.clear();
            entity[static_cast<int>(columns[c].kind)][columns[c].attr] = v;
        }
        const std::string* ids[3] = {&r.uid, &r.oid, &r.sid};
        for (int k = 0; k < 3; ++k) {
            auto [it, inserted] = seen[k].emplace(*ids[k], entity[k]);
            if (inserted) {
                order[k].push_back(*ids[k]);
            } else if (it->second != entity[k]) {
                throw DataError("line " + std::to_string(line_no) + ": " + std::string(to_string(static_cast<Kind>(k))) +
                                " '" + *ids[k] + "' has attributes differing from an earlier row");
            }
        }
        ops.insert(r.op);
        raws.push_back(std::move(r));
    }

    Schema schema;
    if (declared) {
        schema = *declared;
    } else {
        Schema::Ranges ranges;
        for (int k = 0; k < 3; ++k) {
            for (const auto& a : attrs[k]) ranges[a];
            for (const auto& [_, values] : seen[k]) {
                for (const auto& [a, v] : values) {
                    if (!v.empty()) ranges[a].push_back(v);
                }
            }
        }
        // an attribute with no observed value gets the UNK placeholder
        for (auto& [a, values] : ranges) {
            if (values.empty()) values.push_back(std::string(kUnknownValue));
        }
        try {
            schema = Schema(attrs[0], attrs[1], attrs[2], {ops.begin(), ops.end()}, std::move(ranges));
        } catch (const ConfigError& e) {
            throw DataError(std::string("log header: ") + e.what());
        }
    }

    std::vector<Entity> entities[3];
    for (int k = 0; k < 3; ++k) {
        for (const auto& id : order[k]) {
            Entity e{id, static_cast<Kind>(k), seen[k][id]};
            if (declared) {
                for (const auto& [a, v] : e.attrs) {
                    if (!v.empty() && !schema.in_range(a, v)) {
                        throw SchemaMismatch("value '" + v + "' of '" + a + "' is outside the declared range");
                    }
                }
            }
            entities[k].push_back(std::move(e));
        }
    }
    if (entities[2].empty()) entities[2].push_back(null_session(schema));
    auto store = std::make_shared<const EntityStore>(schema, std::move(entities[0]), std::move(entities[1]),
                                                     std::move(entities[2]));
    std::vector<AuthorizationTuple> tuples;
    tuples.reserve(raws.size());
    for (const auto& r : raws) {
        if (!schema.has_operation(r.op)) throw SchemaMismatch("unknown operation '" + r.op + "'");
        tuples.push_back({{*store->find(Kind::User, r.uid), *store->find(Kind::Object, r.oid),
                           *store->find(Kind::Session, r.sid), static_cast<std::uint16_t>(schema.operation_index(r.op))},
                          r.decision});
    }
    return AccessLog(std::move(store), std::move(tuples));
}

inline AccessLog load_log(const std::string& path, const std::optional<Schema>& declared = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_log_csv(in, declared);
}

inline void save_log(const std::string& path, const AccessLog& log) { write_file(path, log_to_csv(log)); }

// ---------------------------------------------------------------------------
// Diagnostics

// record,cluster for every clustered record.
inline std::string cluster_assignments_csv(const ClusterModel& model) {
    std::string out = "record,cluster\n";
    for (std::size_t i = 0; i < model.assignments.size(); ++i) {
        out += std::to_string(i) + "," + std::to_string(model.assignments[i]) + "\n";
    }
    return out;
}

inline std::string cluster_modes_csv(const ClusterModel& model, const FeatureSpace& space) {
    std::vector<std::string> header{"cluster"};
    for (std::size_t f = 0; f < space.size(); ++f) header.push_back(space.name(f));
    std::string out = csv::join(header) + "\n";
    for (std::size_t c = 0; c < model.modes.size(); ++c) {
        std::vector<std::string> row{std::to_string(c)};
        for (std::size_t f = 0; f < space.size(); ++f) row.push_back(space.value(f, model.modes[c][f]));
        out += csv::join(row) + "\n";
    }
    return out;
}

inline std::string diagnostics_csv(const std::vector<ClusterDiagnostics>& diags) {
    std::string out = "cluster,weight,distinct_records,component,left,right,polarity,cluster_freq,baseline_freq,delta\n";
    for (const auto& d : diags) {
        const std::string head = std::to_string(d.cluster) + "," + std::to_string(d.weight) + "," +
                                 std::to_string(d.distinct_records) + ",";
        if (d.evidence.empty()) out += head + ",,,,,,\n";
        for (const auto& e : d.evidence) {
            out += head + csv::join({e.component, e.left, e.right, std::string(to_string(e.polarity)),
                                     format_number(e.cluster_freq), format_number(e.baseline_freq),
                                     format_number(e.cluster_freq - e.baseline_freq)}) +
                   "\n";
        }
    }
    return out;
}

inline std::string trace_csv(const std::vector<EnhancementStep>& steps) {
    std::string out = "pass,iteration,rules_before,rules_after,f_score,wsc,q\n";
    for (const auto& s : steps) {
        out += s.pass + "," + std::to_string(s.iteration) + "," + std::to_string(s.rules_before) + "," +
               std::to_string(s.rules_after) + "," + format_number(s.f_score) + "," + format_number(s.wsc) + "," +
               format_number(s.quality) + "\n";
    }
    return out;
}

} // namespace abacmine
