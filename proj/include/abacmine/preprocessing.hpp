#pragma once

// Log clean-up ahead of clustering: missing-value imputation and
// discretization of numeric attributes into categorical bins.

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abacmine/encoding.hpp"
#include "abacmine/model.hpp"

namespace abacmine {

namespace detail {

template <class Fn>
AccessLog map_entities(const AccessLog& log, Schema schema, Fn&& fn) {
    const auto& store = log.store();
    std::vector<Entity> lists[3];
    for (Kind kind : {Kind::User, Kind::Object, Kind::Session}) {
        for (Entity e : store.entities(kind)) {
            fn(e);
            lists[static_cast<int>(kind)].push_back(std::move(e));
        }
    }
    auto next = std::make_shared<const EntityStore>(std::move(schema), std::move(lists[0]), std::move(lists[1]),
                                                    std::move(lists[2]));
    return AccessLog(std::move(next), log.tuples());
}

} // namespace detail

// Replaces every missing (empty) attribute value with UNK and adds UNK to
// the range of each affected attribute.
inline AccessLog impute_missing(const AccessLog& log) {
    const std::string unk(kUnknownValue);
    auto ranges = log.schema().ranges();
    bool changed = false;
    for (Kind kind : {Kind::User, Kind::Object, Kind::Session}) {
        for (const auto& e : log.store().entities(kind)) {
            for (const auto& [name, value] : e.attrs) {
                if (value.empty()) {
                    ranges[name].push_back(unk);
                    changed = true;
                }
            }
        }
    }
    if (!changed) return log;
    return detail::map_entities(log, log.schema().with_ranges(std::move(ranges)), [&](Entity& e) {
        for (auto& [_, value] : e.attrs) {
            if (value.empty()) value = unk;
        }
    });
}

// Half-open numeric bin [lo, hi) carrying a categorical label.
struct Bin {
    std::string label;
    double lo = -INFINITY;
    double hi = INFINITY;
};

struct AttributeBinning {
    std::vector<Bin> bins;
    // Label for values no bin covers; without one such values are errors.
    std::optional<std::string> fallback;

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& b : bins) out.push_back(b.label);
        if (fallback) out.push_back(*fallback);
        return out;
    }
};

// Attributes not listed pass through unchanged.
class Discretizer {
public:
    Discretizer() = default;

    explicit Discretizer(std::map<std::string, AttributeBinning> spec) : spec_(std::move(spec)) {
        for (const auto& [attr, binning] : spec_) {
            auto labels = binning.labels();
            std::sort(labels.begin(), labels.end());
            if (labels.empty()) throw ConfigError("no bins declared for '" + attr + "'");
            if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) {
                throw ConfigError("duplicate bin label for '" + attr + "'");
            }
            for (const auto& b : binning.bins) {
                if (!(b.lo < b.hi)) throw ConfigError("empty bin '" + b.label + "' for '" + attr + "'");
            }
        }
    }

    const std::map<std::string, AttributeBinning>& spec() const { return spec_; }
    bool covers(const std::string& attr) const { return spec_.count(attr) > 0; }

    std::string label(const std::string& attr, const std::string& raw) const {
        auto it = spec_.find(attr);
        if (it == spec_.end()) return raw;
        if (raw.empty() || raw == kUnknownValue) return raw;
        double x = 0;
        auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), x);
        if (ec != std::errc() || end != raw.data() + raw.size()) {
            throw DataError("value '" + raw + "' of '" + attr + "' is not numeric");
        }
        for (const auto& b : it->second.bins) {
            if (b.lo <= x && x < b.hi) return b.label;
        }
        if (it->second.fallback) return *it->second.fallback;
        throw DataError("value " + raw + " of '" + attr + "' falls outside every bin");
    }

    // {attr: {bins: [{label, lo, hi}], default?: label}}; lo/hi may be null
    // for an unbounded side.
    static Discretizer from_json(const nlohmann::json& j) {
        std::map<std::string, AttributeBinning> spec;
        try {
            for (const auto& [attr, body] : j.items()) {
                AttributeBinning binning;
                for (const auto& b : body.at("bins")) {
                    Bin bin;
                    bin.label = b.at("label").get<std::string>();
                    if (b.contains("lo") && !b.at("lo").is_null()) bin.lo = b.at("lo").get<double>();
                    if (b.contains("hi") && !b.at("hi").is_null()) bin.hi = b.at("hi").get<double>();
                    binning.bins.push_back(std::move(bin));
                }
                if (body.contains("default")) binning.fallback = body.at("default").get<std::string>();
                spec.emplace(attr, std::move(binning));
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed discretizer spec: ") + e.what());
        }
        return Discretizer(std::move(spec));
    }

private:
    std::map<std::string, AttributeBinning> spec_;
};

// Replaces every numeric value of a binned attribute by its bin label. Missing
// values are left for impute_missing.
inline AccessLog discretize(const AccessLog& log, const Discretizer& spec) {
    auto ranges = log.schema().ranges();
    for (const auto& [attr, binning] : spec.spec()) {
        if (!log.schema().has_attribute(attr)) throw SchemaMismatch("discretizer names unknown attribute '" + attr + "'");
        std::vector<std::string> next;
        for (const auto& v : ranges.at(attr)) {
            next.push_back(spec.label(attr, v));
        }
        ranges[attr] = std::move(next);
    }
    return detail::map_entities(log, log.schema().with_ranges(std::move(ranges)), [&](Entity& e) {
        for (auto& [name, value] : e.attrs) value = spec.label(name, value);
    });
}

} // namespace abacmine
