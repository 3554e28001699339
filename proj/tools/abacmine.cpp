// Command-line front end: generate, mine, evaluate, report, tune.
//
// Every configuration field can be overridden with a flag named after its
// dotted path, e.g. `--mining.k_max 12` or `--log.noise 0.1`.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "abacmine/abacmine.hpp"

namespace fs = std::filesystem;
using namespace abacmine;

namespace {

// Flag values are read as JSON when they parse (numbers, booleans, arrays),
// else as plain strings.
nlohmann::json flag_value(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return text;
    }
}

nlohmann::json load_config(const std::string& path, const std::vector<std::string>& extras) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string key = extras[i], value;
        if (key.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + key + "'");
        key = key.substr(2);
        if (auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw ConfigError("flag --" + key + " needs a value");
            value = extras[++i];
        }
        std::string pointer;
        for (char c : key) pointer += c == '.' ? '/' : c;
        try {
            j[nlohmann::json::json_pointer("/" + pointer)] = flag_value(value);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("cannot apply --" + key + ": " + e.what());
        }
    }
    return j;
}

void write_artifact(RunManifest& m, const fs::path& dir, const std::string& name, const std::string& content) {
    write_file((dir / name).string(), content);
    m.add_artifact(fs::path(name).stem().string(), name);
}

fs::path output_dir(const ExperimentConfig& c) {
    fs::path dir(c.output);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + c.output + "': " + ec.message());
    return dir;
}

nlohmann::ordered_json log_counts(const AccessLog& log) {
    return {{"tuples", log.size()}, {"permits", log.positive_count()}, {"denies", log.negative_count()}};
}

int cmd_generate(const ExperimentConfig& c) {
    StageTimer timer;
    auto data = timer.run("generate", [&] { return generate(c); });
    const auto dir = output_dir(c);
    auto m = RunManifest::create(c, "generate");
    write_artifact(m, dir, "ground_truth.json", policy_to_string(data.policy));
    write_artifact(m, dir, "log.csv", log_to_csv(data.log));
    m.json["log"] = log_counts(data.log);
    m.json["complete_log"] = log_counts(data.complete);
    m.json["noise_flips"] = data.flipped.size();
    m.add_timings(timer);
    write_file((dir / "manifest.json").string(), m.dump());
    std::cout << "|L| = " << data.log.size() << "  |L+| = " << data.log.positive_count()
              << "  |L-| = " << data.log.negative_count() << '\n';
    if (!data.flipped.empty()) std::cout << "flipped decisions: " << data.flipped.size() << '\n';
    return 0;
}

int cmd_mine(const ExperimentConfig& c, const std::string& log_path) {
    StageTimer timer;
    std::optional<GeneratedData> data;
    AccessLog log;
    if (!log_path.empty()) {
        log = timer.run("load", [&] { return load_log(log_path); });
    } else {
        data = timer.run("generate", [&] { return generate(c); });
        log = data->log;
    }
    auto mined = mine(c, log, timer);

    const auto dir = output_dir(c);
    auto m = RunManifest::create(c, "mine");
    const FeatureSpace space(mined.training.schema());
    write_artifact(m, dir, "mined_policy.json", policy_to_string(mined.policy));
    write_artifact(m, dir, "clusters.csv", cluster_assignments_csv(mined.mining.model));
    write_artifact(m, dir, "modes.csv", cluster_modes_csv(mined.mining.model, space));
    write_artifact(m, dir, "diagnostics.csv", diagnostics_csv(mined.mining.diagnostics));
    if (mined.enhancement) write_artifact(m, dir, "trace.csv", trace_csv(mined.enhancement->trace));
    write_artifact(m, dir, "evaluation.json", mined.report.to_json().dump(2) + "\n");
    if (data) write_artifact(m, dir, "ground_truth.json", policy_to_string(data->policy));

    m.json["optimal_k"] = mined.mining.k;
    m.json["thresholds"] = {{"t_pos", mined.thresholds.t_pos},
                            {"t_neg", mined.thresholds.t_neg},
                            {"theta_pos", mined.thresholds.theta_pos},
                            {"theta_neg", mined.thresholds.theta_neg}};
    m.json["log"] = log_counts(log);
    m.json["metrics"] = mined.report.to_json();
    if (data) {
        m.json["noise_flips"] = data->flipped.size();
        m.json["metrics_complete_log"] = evaluate(mined.policy, data->complete).to_json();
    }
    m.add_timings(timer);
    write_file((dir / "manifest.json").string(), m.dump());

    const auto& r = mined.report;
    std::cout << "k = " << mined.mining.k << "  rules = " << r.rules << "  ACC = " << format_number(r.accuracy)
              << "  F = " << format_number(r.f_score) << "  WSC = " << format_number(r.wsc)
              << "  Q = " << format_number(r.quality) << '\n';
    return 0;
}

int cmd_evaluate(const std::string& policy_path, const std::string& log_path, const std::string& out) {
    const auto policy = load_policy(policy_path);
    const auto log = impute_missing(load_log(log_path));
    const auto &ps = policy.schema(), &ls = log.schema();
    for (Kind k : {Kind::User, Kind::Object, Kind::Session}) {
        if (ps.attributes(k) != ls.attributes(k) && [&] {
                auto a = ps.attributes(k), b = ls.attributes(k);
                std::sort(a.begin(), a.end());
                std::sort(b.begin(), b.end());
                return a != b;
            }()) {
            throw SchemaMismatch("policy and log disagree on " + std::string(to_string(k)) + " attributes");
        }
    }
    const auto text = evaluate(policy, log).to_json().dump(2) + "\n";
    if (!out.empty()) write_file(out, text);
    std::cout << text;
    return 0;
}

int cmd_report(const std::vector<std::string>& manifests, const std::string& out) {
    std::vector<nlohmann::json> parsed;
    for (const auto& path : manifests) {
        try {
            parsed.push_back(nlohmann::json::parse(read_file(path)));
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("manifest '" + path + "' is not valid JSON: " + e.what());
        }
    }
    const auto table = report_table(parsed);
    if (!out.empty()) write_file(out, table);
    std::cout << table;
    return 0;
}

int cmd_tune(const ExperimentConfig& c, const std::string& log_path) {
    AccessLog log;
    if (!log_path.empty()) {
        log = load_log(log_path);
    } else {
        log = generate(c).log;
    }
    log = preprocess(c, log);
    auto mining = c.mining;
    mining.ksearch.seed = stage_seed(c, "cluster");
    const auto r = tune_thresholds(log, c.grid, c.folds, mining, stage_seed(c, "tune"), c.tune_objective);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    nlohmann::ordered_json j{{"t_pos", r.best.t_pos},
                             {"t_neg", r.best.t_neg},
                             {"theta_pos", r.best.theta_pos},
                             {"theta_neg", r.best.theta_neg},
                             {"mean_score", r.mean_score},
                             {"folds_used", r.folds_used}};
    std::cout << j.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mine ABAC policies from access logs"};
    app.require_subcommand(1);
    std::string config_path, log_path, policy_path, out;
    std::vector<std::string> manifests;

    auto with_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON configuration file");
        sub->allow_extras();
        return sub;
    };
    auto* gen = with_config(app.add_subcommand("generate", "write a ground-truth policy and its log"));
    auto* mine_cmd = with_config(app.add_subcommand("mine", "mine, enhance and evaluate a policy"));
    mine_cmd->add_option("-l,--log", log_path, "log CSV (default: generate from the configuration)");
    auto* eval = app.add_subcommand("evaluate", "score a policy against a log");
    eval->add_option("-p,--policy", policy_path, "policy JSON")->required();
    eval->add_option("-l,--log", log_path, "log CSV")->required();
    eval->add_option("-o,--out", out, "also write the report here");
    auto* report = app.add_subcommand("report", "tabulate run manifests");
    report->add_option("manifests", manifests, "manifest.json files")->required();
    report->add_option("-o,--out", out, "also write the table here");
    auto* tune = with_config(app.add_subcommand("tune", "grid-search the extraction thresholds"));
    tune->add_option("-l,--log", log_path, "log CSV (default: generate from the configuration)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), 2);
    }

    try {
        auto config = [&](CLI::App* sub) { return parse_config(load_config(config_path, sub->remaining())); };
        if (*gen) return cmd_generate(config(gen));
        if (*mine_cmd) return cmd_mine(config(mine_cmd), log_path);
        if (*eval) return cmd_evaluate(policy_path, log_path, out);
        if (*report) return cmd_report(manifests, out);
        if (*tune) return cmd_tune(config(tune), log_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const CapExceeded& e) {
        std::cerr << "cap exceeded: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
