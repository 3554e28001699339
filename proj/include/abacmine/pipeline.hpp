#pragma once

// End-to-end experiments: ground truth and log generation, preprocessing,
// mining, enhancement and evaluation, driven by one JSON configuration.
// Every random draw derives from the master seed through a named substream.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "abacmine/builtin_policies.hpp"
#include "abacmine/enhancement.hpp"
#include "abacmine/io.hpp"
#include "abacmine/metrics.hpp"
#include "abacmine/mining.hpp"
#include "abacmine/preprocessing.hpp"
#include "abacmine/synthesis.hpp"

namespace abacmine {

enum class EvaluationMode { Full, Holdout };

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string dataset;

    // ground truth: exactly one of builtin, random or file
    std::string builtin_name;
    std::optional<RandomPolicySpec> random_policy;
    std::string policy_file;
    std::optional<UniverseSpec> universe;  // defaults to the builtin's

    double sparsify = 1.0;
    double noise = 0.0;
    std::uint64_t cap = kDefaultTupleCap;

    std::string discretizer_file;

    MiningConfig mining;
    bool tune = false;
    TuningObjective tune_objective = TuningObjective::FScore;
    ThresholdGrid grid;
    std::size_t folds = 5;

    bool enhance = true;
    RefinementConfig refinement;

    EvaluationMode evaluation = EvaluationMode::Full;
    double holdout_fraction = 0.2;

    std::string output = "out";

    // The configuration as parsed, for the manifest.
    nlohmann::ordered_json snapshot;
};

namespace detail {

// Copies recognised keys of `j` into the given setters and rejects the rest.
class Fields {
public:
    Fields(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    template <class T>
    void get(const std::string& key, T& target) {
        seen_.push_back(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        try {
            target = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + "." + key + " has the wrong type");
        }
    }

    const nlohmann::json* child(const std::string& key) {
        seen_.push_back(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
                throw ConfigError("unknown configuration key " + where_ + "." + key);
            }
        }
    }

private:
    const nlohmann::json& j_;
    std::string where_;
    std::vector<std::string> seen_;
};

inline EntitySpec entity_spec(const nlohmann::json& j, const std::string& where, EntitySpec s) {
    Fields f(j, where);
    f.get("count", s.count);
    f.get("enumerate", s.enumerate);
    f.finish();
    return s;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::Fields;
    ExperimentConfig c;
    c.snapshot = j;
    Fields top(j, "config");
    top.get("seed", c.seed);
    top.get("dataset", c.dataset);
    top.get("output", c.output);

    if (const auto* p = top.child("policy")) {
        Fields f(*p, "policy");
        f.get("builtin", c.builtin_name);
        f.get("file", c.policy_file);
        if (const auto* r = f.child("random")) {
            RandomPolicySpec s;
            Fields g(*r, "policy.random");
            g.get("n_rules", s.n_rules);
            g.get("user_attrs", s.user_attrs);
            g.get("object_attrs", s.object_attrs);
            g.get("session_attrs", s.session_attrs);
            g.get("min_values", s.min_values);
            g.get("max_values", s.max_values);
            g.get("operations", s.operations);
            g.get("min_filter", s.min_filter);
            g.get("max_filter", s.max_filter);
            g.get("shared_range", s.shared_range);
            g.get("relation_probability", s.relation_probability);
            g.get("negative_probability", s.negative_probability);
            g.finish();
            s.validate();
            c.random_policy = s;
        }
        f.finish();
    }
    if (const auto* u = top.child("universe")) {
        Fields f(*u, "universe");
        UniverseSpec s;
        if (const auto* x = f.child("users")) s.users = detail::entity_spec(*x, "universe.users", s.users);
        if (const auto* x = f.child("objects")) s.objects = detail::entity_spec(*x, "universe.objects", s.objects);
        if (const auto* x = f.child("sessions")) s.sessions = detail::entity_spec(*x, "universe.sessions", s.sessions);
        f.finish();
        c.universe = s;
    }
    if (const auto* l = top.child("log")) {
        Fields f(*l, "log");
        f.get("sparsify", c.sparsify);
        f.get("noise", c.noise);
        f.get("cap", c.cap);
        f.finish();
    }
    if (const auto* p = top.child("preprocess")) {
        Fields f(*p, "preprocess");
        f.get("discretizer", c.discretizer_file);
        f.finish();
    }
    if (const auto* m = top.child("mining")) {
        Fields f(*m, "mining");
        std::optional<std::size_t> k;
        if (const auto* kj = f.child("k")) {
            if (!kj->is_number_unsigned()) throw ConfigError("mining.k must be a positive integer or null");
            k = kj->get<std::size_t>();
        }
        c.mining.k = k;
        auto& ks = c.mining.ksearch;
        f.get("k_min", ks.k_min);
        f.get("k_max", ks.k_max);
        f.get("restarts", ks.n_restarts);
        f.get("max_iter", ks.max_iter);
        f.get("min_silhouette", ks.min_silhouette);
        std::string criterion = "silhouette", baseline = "log";
        f.get("criterion", criterion);
        if (criterion == "silhouette") c.mining.criterion = KCriterion::Silhouette;
        else if (criterion == "elbow") c.mining.criterion = KCriterion::Elbow;
        else if (criterion == "quality") c.mining.criterion = KCriterion::Quality;
        else throw ConfigError("mining.criterion must be silhouette, elbow or quality");
        f.get("baseline", baseline);
        if (baseline == "log") c.mining.baseline = FrequencyBaseline::Log;
        else if (baseline == "positive") c.mining.baseline = FrequencyBaseline::PositiveLog;
        else throw ConfigError("mining.baseline must be log or positive");
        f.get("simplify", c.mining.simplify);
        if (const auto* t = f.child("thresholds")) {
            Fields g(*t, "mining.thresholds");
            g.get("t_pos", c.mining.thresholds.t_pos);
            g.get("t_neg", c.mining.thresholds.t_neg);
            g.get("theta_pos", c.mining.thresholds.theta_pos);
            g.get("theta_neg", c.mining.thresholds.theta_neg);
            g.finish();
        }
        f.get("tune", c.tune);
        std::string objective = "f_score";
        f.get("tune_objective", objective);
        if (objective == "f_score") c.tune_objective = TuningObjective::FScore;
        else if (objective == "accuracy") c.tune_objective = TuningObjective::Accuracy;
        else if (objective == "quality") c.tune_objective = TuningObjective::Quality;
        else throw ConfigError("mining.tune_objective must be f_score, accuracy or quality");
        f.get("folds", c.folds);
        if (const auto* g = f.child("grid")) {
            Fields h(*g, "mining.grid");
            h.get("t_pos", c.grid.t_pos);
            h.get("t_neg", c.grid.t_neg);
            h.get("theta_pos", c.grid.theta_pos);
            h.get("theta_neg", c.grid.theta_neg);
            h.finish();
        }
        f.finish();
    }
    if (const auto* e = top.child("enhancement")) {
        Fields f(*e, "enhancement");
        f.get("enabled", c.enhance);
        f.get("max_iterations", c.refinement.max_iterations);
        f.get("similarity_threshold", c.refinement.similarity_threshold);
        f.get("quality_epsilon", c.refinement.quality_epsilon);
        std::string merge = "invert";
        f.get("fp_merge", merge);
        if (merge == "invert") c.refinement.fp_merge = FalsePositiveMerge::Invert;
        else if (merge == "union") c.refinement.fp_merge = FalsePositiveMerge::Union;
        else throw ConfigError("enhancement.fp_merge must be invert or union");
        f.finish();
    }
    if (const auto* e = top.child("evaluation")) {
        Fields f(*e, "evaluation");
        std::string mode = "full";
        f.get("mode", mode);
        if (mode == "full") c.evaluation = EvaluationMode::Full;
        else if (mode == "holdout") c.evaluation = EvaluationMode::Holdout;
        else throw ConfigError("evaluation.mode must be full or holdout");
        f.get("holdout_fraction", c.holdout_fraction);
        f.finish();
    }
    top.finish();

    const int sources = !c.builtin_name.empty() + c.random_policy.has_value() + !c.policy_file.empty();
    if (sources > 1) throw ConfigError("policy: give exactly one of builtin, random or file");
    if (!(c.sparsify > 0 && c.sparsify <= 1)) throw ConfigError("log.sparsify must lie in (0, 1]");
    if (!(c.noise >= 0 && c.noise <= 1)) throw ConfigError("log.noise must lie in [0, 1]");
    if (!(c.holdout_fraction > 0 && c.holdout_fraction < 1)) throw ConfigError("evaluation.holdout_fraction must lie in (0, 1)");
    if (c.mining.k && *c.mining.k == 0) throw ConfigError("mining.k must be positive");
    c.mining.thresholds.validate();
    c.mining.ksearch.validate();
    c.refinement.validate();
    if (c.dataset.empty()) {
        c.dataset = !c.builtin_name.empty() ? c.builtin_name
                    : c.random_policy       ? "random"
                    : !c.policy_file.empty() ? std::filesystem::path(c.policy_file).stem().string()
                                             : "log";
    }
    return c;
}

// Named substreams of the master seed.
inline std::uint64_t stage_seed(const ExperimentConfig& c, std::string_view stage) {
    return substream_seed(c.seed, stage);
}

class StageTimer {
public:
    template <class F>
    auto run(const std::string& stage, F&& f) {
        const auto start = std::chrono::steady_clock::now();
        auto stop = [&] {
            timings_.emplace_back(stage,
                                  std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        };
        if constexpr (std::is_void_v<decltype(f())>) {
            f();
            stop();
        } else {
            auto r = f();
            stop();
            return r;
        }
    }

    const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }
    double total() const {
        double t = 0;
        for (const auto& [_, s] : timings_) t += s;
        return t;
    }

private:
    std::vector<std::pair<std::string, double>> timings_;
};

// ---------------------------------------------------------------------------
// Generation

struct GeneratedData {
    Policy policy;
    AccessLog complete;
    AccessLog log;  // after sparsify and noise
    std::vector<std::size_t> flipped;
};

inline Policy ground_truth(const ExperimentConfig& c, UniverseSpec& universe) {
    if (!c.builtin_name.empty()) {
        auto b = builtin(c.builtin_name);
        universe = c.universe.value_or(b.universe);
        return b.policy;
    }
    universe = c.universe.value_or(UniverseSpec{});
    if (c.random_policy) return generate_random_policy(*c.random_policy, stage_seed(c, "generate"));
    if (!c.policy_file.empty()) return load_policy(c.policy_file);
    throw ConfigError("no ground-truth policy configured (policy.builtin, policy.random or policy.file)");
}

inline GeneratedData generate(const ExperimentConfig& c) {
    UniverseSpec universe;
    auto policy = ground_truth(c, universe);
    const auto gen = stage_seed(c, "generate");
    auto store = generate_universe(policy.schema(), universe, substream_seed(gen, "universe"));
    auto complete = generate_complete_log(policy, store, c.cap);
    auto log = c.sparsify < 1 ? sparsify(complete, c.sparsify, substream_seed(gen, "sparsify")) : complete;
    std::vector<std::size_t> flipped;
    if (c.noise > 0) {
        auto noisy = add_noise(log, c.noise, stage_seed(c, "noise"));
        log = std::move(noisy.log);
        flipped = std::move(noisy.flipped);
    }
    return {policy.with_entities(store), std::move(complete), std::move(log), std::move(flipped)};
}

// ---------------------------------------------------------------------------
// Mining

struct MinedPolicy {
    Thresholds thresholds;
    std::optional<TuningResult> tuning;
    MiningResult mining;
    std::optional<EnhancementResult> enhancement;
    Policy policy;  // final policy
    AccessLog training;
    AccessLog evaluation_log;
    EvaluationReport report;
};

inline AccessLog preprocess(const ExperimentConfig& c, const AccessLog& log) {
    auto out = impute_missing(log);
    if (!c.discretizer_file.empty()) {
        nlohmann::json spec;
        try {
            spec = nlohmann::json::parse(read_file(c.discretizer_file));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("discretizer is not valid JSON: ") + e.what());
        }
        out = discretize(out, Discretizer::from_json(spec));
    }
    return out;
}

// Stratified split into (training, held-out) parts.
inline std::pair<AccessLog, AccessLog> holdout_split(const AccessLog& log, double fraction, std::uint64_t seed) {
    const auto held = sparsify(log, fraction, seed);
    std::vector<bool> in_test(log.size(), false);
    // sparsify keeps original order, so a merge walk recovers the indices
    std::size_t j = 0;
    for (std::size_t i = 0; i < log.size() && j < held.size(); ++i) {
        if (log.tuples()[i] == held.tuples()[j]) {
            in_test[i] = true;
            ++j;
        }
    }
    std::vector<AuthorizationTuple> train, test;
    for (std::size_t i = 0; i < log.size(); ++i) (in_test[i] ? test : train).push_back(log.tuples()[i]);
    return {log.with_tuples(std::move(train)), log.with_tuples(std::move(test))};
}

inline MinedPolicy mine(const ExperimentConfig& c, const AccessLog& input, StageTimer& timer) {
    MinedPolicy out;
    auto log = timer.run("preprocess", [&] { return preprocess(c, input); });
    if (c.evaluation == EvaluationMode::Holdout) {
        std::tie(out.training, out.evaluation_log) = holdout_split(log, c.holdout_fraction, stage_seed(c, "split"));
    } else {
        out.training = log;
        out.evaluation_log = log;
    }
    if (out.training.positive_count() == 0) throw DataError("cannot mine a policy from an empty positive log");

    auto mining = c.mining;
    mining.ksearch.seed = stage_seed(c, "cluster");
    out.thresholds = mining.thresholds;
    if (c.tune) {
        out.tuning = timer.run("tune", [&] {
            return tune_thresholds(out.training, c.grid, c.folds, mining, stage_seed(c, "tune"),
                                   c.tune_objective);
        });
        out.thresholds = out.tuning->best;
        mining.thresholds = out.thresholds;
    }
    out.mining = timer.run("mine", [&] { return extract_policy(out.training, mining); });
    out.policy = out.mining.policy;
    if (c.enhance) {
        auto refinement = c.refinement;
        refinement.error_mining.thresholds = out.thresholds;
        refinement.error_mining.baseline = mining.baseline;
        refinement.error_mining.simplify = mining.simplify;
        refinement.error_mining.ksearch.seed = substream_seed(mining.ksearch.seed, "errors");
        out.enhancement = timer.run("enhance", [&] { return enhance(out.policy, out.training, refinement); });
        out.policy = out.enhancement->policy;
    }
    out.report = timer.run("evaluate", [&] { return evaluate(out.policy, out.evaluation_log); });
    return out;
}

// ---------------------------------------------------------------------------
// Manifests and reports

struct RunManifest {
    nlohmann::ordered_json json;

    static RunManifest create(const ExperimentConfig& c, const std::string& command) {
        RunManifest m;
        m.json["command"] = command;
        m.json["dataset"] = c.dataset;
        m.json["config"] = c.snapshot;
        m.json["timings"] = nlohmann::ordered_json::object();
        m.json["artifacts"] = nlohmann::ordered_json::object();
        m.json["metrics"] = nlohmann::ordered_json::object();
        return m;
    }

    void add_timings(const StageTimer& t) {
        for (const auto& [stage, s] : t.timings()) json["timings"][stage] = s;
        json["timings"]["total"] = t.total();
    }

    void add_artifact(const std::string& name, const std::string& path) { json["artifacts"][name] = path; }

    std::string dump() const { return json.dump(2) + "\n"; }
};

inline std::string report_header() { return "dataset,running_time_s,optimal_k,mined_rules,acc,f_score,wsc,q"; }

// One row per manifest, ordered by dataset name.
inline std::string report_table(const std::vector<nlohmann::json>& manifests) {
    if (manifests.empty()) throw ConfigError("report needs at least one manifest");
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& m : manifests) {
        try {
            const auto& metrics = m.at("metrics");
            const std::string dataset = m.at("dataset").get<std::string>();
            std::string row = csv::escape(dataset) + "," + format_number(m.at("timings").at("total").get<double>()) +
                              "," + std::to_string(m.at("optimal_k").get<std::size_t>()) + "," +
                              std::to_string(metrics.at("rules").get<std::size_t>()) + "," +
                              format_number(metrics.at("accuracy").get<double>()) + "," +
                              format_number(metrics.at("f_score").get<double>()) + "," +
                              format_number(metrics.at("wsc").get<double>()) + "," +
                              format_number(metrics.at("quality").get<double>());
            rows.emplace_back(dataset, row);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("manifest lacks a required field: ") + e.what());
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::string out = report_header() + "\n";
    for (const auto& [_, r] : rows) out += r + "\n";
    return out;
}

} // namespace abacmine
