#pragma once

// Built-in ground-truth policies with matching universes. Three base
// policies (university, healthcare, project management) use positive tuples
// only; their "-pn" variants add negative filters and relations.

#include <string>
#include <string_view>
#include <vector>

#include "abacmine/model.hpp"
#include "abacmine/synthesis.hpp"

namespace abacmine {

struct BuiltinPolicy {
    std::string name;
    Policy policy;
    UniverseSpec universe;
};

namespace detail {

// Filter tuples are written "attr=value" or "attr!=value", relations
// "left=right" or "left!=right" (both sides attribute names).
inline FilterTuple parse_filter(std::string_view s) {
    const auto neg = s.find("!=");
    if (neg != std::string_view::npos) {
        return {std::string(s.substr(0, neg)), std::string(s.substr(neg + 2)), Polarity::Negative};
    }
    const auto eq = s.find('=');
    return {std::string(s.substr(0, eq)), std::string(s.substr(eq + 1)), Polarity::Positive};
}

inline RelationTuple parse_relation(std::string_view s) {
    const auto t = parse_filter(s);
    return RelationTuple(t.attr, t.value, t.polarity);
}

inline Rule make_rule(std::string op, std::initializer_list<std::string_view> filter,
                      std::initializer_list<std::string_view> relation = {}) {
    std::vector<FilterTuple> f;
    for (auto s : filter) f.push_back(parse_filter(s));
    std::vector<RelationTuple> r;
    for (auto s : relation) r.push_back(parse_relation(s));
    return Rule{AttributeFilter(std::move(f)), RelationCondition(std::move(r)), std::move(op), Polarity::Positive};
}

inline Schema university_schema() {
    const std::vector<std::string> depts{"bio", "cs", "ee", "math", "me"};
    return Schema({"position", "udept", "year", "standing"},
                  {"otype", "odept", "level", "status", "classification"}, {"location", "time"},
                  {"approve", "grade", "read", "submit", "write"},
                  {{"position", {"admin", "faculty", "grad", "staff", "student", "ta"}},
                   {"udept", depts},
                   {"year", {"y1", "y2", "y3", "y4"}},
                   {"standing", {"good", "probation", "suspended"}},
                   {"otype", {"application", "article", "assignment", "gradebook", "roster", "transcript"}},
                   {"odept", depts},
                   {"level", {"advanced", "graduate", "intro"}},
                   {"status", {"archived", "draft", "published"}},
                   {"classification", {"confidential", "internal", "public"}},
                   {"location", {"campus", "library", "remote"}},
                   {"time", {"afternoon", "evening", "morning", "night"}}});
}

inline std::vector<Rule> university_rules() {
    return {
        make_rule("read", {"position=student", "otype=assignment"}, {"udept=odept"}),
        make_rule("submit", {"position=student", "otype=assignment", "status=published"}, {"udept=odept"}),
        make_rule("grade", {"position=faculty", "otype=gradebook"}, {"udept=odept"}),
        make_rule("write", {"position=ta", "otype=gradebook", "location=campus"}),
        make_rule("read", {"otype=article", "classification=public"}),
        make_rule("write", {"position=faculty", "otype=article", "status=draft"}),
        make_rule("approve", {"position=staff", "otype=application", "location=campus"}),
        make_rule("read", {"position=admin", "otype=transcript"}),
        make_rule("read", {"position=grad", "otype=roster", "level=graduate"}, {"udept=odept"}),
        make_rule("submit", {"position=student", "year=y4", "otype=application"}),
    };
}

inline Schema healthcare_schema() {
    const std::vector<std::string> wards{"cardio", "er", "onco", "peds"};
    const std::vector<std::string> yes_no{"no", "yes"};
    const std::vector<std::string> day_night{"day", "night"};
    return Schema({"role", "uward", "shift", "certified"},
                  {"rtype", "oward", "sensitivity", "ostatus", "agegroup"},
                  {"location", "device", "stime", "emergency"}, {"bill", "prescribe", "schedule", "update", "view"},
                  {{"role", {"doctor", "nurse", "patient", "pharmacist", "receptionist", "technician"}},
                   {"uward", wards},
                   {"shift", day_night},
                   {"certified", yes_no},
                   {"rtype", {"invoice", "labresult", "prescription", "record", "referral", "schedule"}},
                   {"oward", wards},
                   {"sensitivity", {"high", "low"}},
                   {"ostatus", {"closed", "open"}},
                   {"agegroup", {"adult", "child"}},
                   {"location", {"home", "office", "remote", "ward"}},
                   {"device", {"desktop", "mobile"}},
                   {"stime", day_night},
                   {"emergency", yes_no}});
}

inline std::vector<Rule> healthcare_rules() {
    return {
        make_rule("view", {"role=doctor", "rtype=record"}, {"uward=oward"}),
        make_rule("prescribe", {"role=doctor", "certified=yes", "rtype=prescription"}, {"uward=oward"}),
        make_rule("update", {"role=nurse", "rtype=record", "location=ward"}, {"uward=oward"}),
        make_rule("view", {"role=nurse", "rtype=labresult"}, {"uward=oward", "shift=stime"}),
        make_rule("view", {"role=pharmacist", "rtype=prescription"}),
        make_rule("schedule", {"role=receptionist", "rtype=schedule", "location=office"}),
        make_rule("bill", {"role=receptionist", "rtype=invoice"}),
        make_rule("update", {"role=technician", "rtype=labresult", "device=desktop"}),
        make_rule("view", {"role=doctor", "rtype=labresult", "emergency=yes"}),
    };
}

inline Schema project_schema() {
    const std::vector<std::string> projects{"alpha", "beta", "delta", "gamma"};
    const std::vector<std::string> yes_no{"no", "yes"};
    return Schema({"urole", "uproject", "seniority", "budget_auth", "department"},
                  {"otype", "oproject", "ostate", "confidential", "phase"},
                  {"location", "network", "timeslot", "mfa"}, {"approve", "assign", "commit", "edit", "view"},
                  {{"urole", {"analyst", "contractor", "developer", "manager", "tester"}},
                   {"uproject", projects},
                   {"seniority", {"junior", "lead", "senior"}},
                   {"budget_auth", yes_no},
                   {"department", {"eng", "ops"}},
                   {"otype", {"budget", "code", "contract", "report", "task", "testplan"}},
                   {"oproject", projects},
                   {"ostate", {"closed", "open", "review"}},
                   {"confidential", yes_no},
                   {"phase", {"closure", "execution", "planning"}},
                   {"location", {"client", "office", "remote"}},
                   {"network", {"corp", "public", "vpn"}},
                   {"timeslot", {"after", "business"}},
                   {"mfa", yes_no}});
}

inline std::vector<Rule> project_rules() {
    return {
        make_rule("approve", {"urole=manager", "budget_auth=yes", "otype=budget"}, {"uproject=oproject"}),
        make_rule("assign", {"urole=manager", "otype=task"}, {"uproject=oproject"}),
        make_rule("commit", {"urole=developer", "otype=code", "network=corp"}, {"uproject=oproject"}),
        make_rule("edit", {"urole=developer", "otype=task", "ostate=open"}, {"uproject=oproject"}),
        make_rule("edit", {"urole=tester", "otype=testplan"}, {"uproject=oproject"}),
        make_rule("view", {"urole=tester", "otype=code"}),
        make_rule("view", {"urole=analyst", "otype=report", "confidential=no"}),
        make_rule("edit", {"seniority=lead", "otype=report"}, {"uproject=oproject"}),
        make_rule("view", {"urole=contractor", "otype=task", "location=client"}),
        make_rule("view", {"urole=manager", "otype=contract", "mfa=yes"}),
        make_rule("view", {"urole=analyst", "otype=budget", "phase=planning"}),
    };
}

// Replaces the rules at the given positions of `rules`.
inline std::vector<Rule> with_replacements(std::vector<Rule> rules, std::vector<std::pair<std::size_t, Rule>> repl) {
    for (auto& [i, r] : repl) rules.at(i) = std::move(r);
    return rules;
}

} // namespace detail

inline std::vector<std::string> builtin_names() {
    return {"healthcare", "healthcare-pn", "project", "project-pn", "university", "university-pn"};
}

inline BuiltinPolicy builtin(std::string_view name) {
    using detail::make_rule;
    const UniverseSpec university_universe{{60, false}, {80, false}, {0, true}};
    const UniverseSpec healthcare_universe{{50, false}, {60, false}, {0, true}};
    const UniverseSpec project_universe{{50, false}, {60, false}, {0, true}};

    if (name == "university") {
        return {"university", Policy(detail::university_schema(), detail::university_rules()), university_universe};
    }
    if (name == "university-pn") {
        auto rules = detail::with_replacements(
            detail::university_rules(),
            {{4, make_rule("read", {"otype=article", "classification!=confidential", "status!=draft"})},
             {6, make_rule("approve", {"position=staff", "otype=application", "time!=night"})},
             {7, make_rule("read", {"position=admin", "otype=transcript", "standing!=suspended"})},
             {9, make_rule("submit", {"position=student", "otype=application"}, {"udept!=odept"})}});
        return {"university-pn", Policy(detail::university_schema(), std::move(rules)), university_universe};
    }
    if (name == "healthcare") {
        return {"healthcare", Policy(detail::healthcare_schema(), detail::healthcare_rules()), healthcare_universe};
    }
    if (name == "healthcare-pn") {
        auto rules = detail::with_replacements(
            detail::healthcare_rules(),
            {{4, make_rule("view", {"role=pharmacist", "rtype=prescription", "location!=home"})},
             {6, make_rule("bill", {"role=receptionist", "rtype=invoice", "sensitivity!=high"})},
             {8, make_rule("view", {"role=doctor", "rtype=labresult"}, {"uward!=oward"})}});
        return {"healthcare-pn", Policy(detail::healthcare_schema(), std::move(rules)), healthcare_universe};
    }
    if (name == "project") {
        return {"project", Policy(detail::project_schema(), detail::project_rules()), project_universe};
    }
    if (name == "project-pn") {
        auto rules = detail::with_replacements(
            detail::project_rules(),
            {{5, make_rule("view", {"urole=tester", "otype=code", "network!=public"})},
             {8, make_rule("view", {"urole=contractor", "otype=task", "confidential!=yes"}, {"uproject!=oproject"})},
             {10, make_rule("view", {"urole=analyst", "otype=budget", "phase!=closure"})}});
        return {"project-pn", Policy(detail::project_schema(), std::move(rules)), project_universe};
    }
    throw ConfigError("unknown builtin policy '" + std::string(name) + "'");
}

} // namespace abacmine
