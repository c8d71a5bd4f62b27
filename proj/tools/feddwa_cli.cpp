// Command-line front end: run / compare / plotdata / validate.
// Exit codes: 0 ok, 1 config or input error, 2 runtime (numeric/IO) error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "feddwa/fedcore.hpp"
#include "feddwa/runio.hpp"

namespace fs = std::filesystem;
using namespace feddwa;
using ordered_json = nlohmann::ordered_json;

namespace {

// FEDDWA_OUTPUT_DIR overrides the configured output directory. The override
// is a runtime detail: summaries echo the config as parsed so the same config
// bytes produce the same summary bytes wherever the run lands.
fs::path resolve_output_dir(const ExperimentConfig& cfg) {
    if (const char* dir = std::getenv("FEDDWA_OUTPUT_DIR")) {
        if (*dir != '\0') return dir;
    }
    return cfg.output_dir;
}

// Average of the global-model mean IoU over clients, per round (round -> avg).
std::vector<std::pair<int, double>> global_iou_series(
    const std::vector<RoundReport>& reports) {
    std::vector<std::pair<int, double>> series;  // (round, sum) then averaged
    std::vector<int> counts;
    for (const RoundReport& r : reports) {
        if (r.scope != EvalScope::GlobalOnClientTest) continue;
        if (series.empty() || series.back().first != r.round) {
            series.emplace_back(r.round, 0.0);
            counts.push_back(0);
        }
        series.back().second += r.mean_iou;
        ++counts.back();
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        series[i].second /= counts[i];
    }
    return series;
}

struct RunOutcome {
    fs::path metrics;
    fs::path summary;
    double final_global_iou = 0.0;
    double peak_global_iou = 0.0;
    int peak_round = 0;
    double seconds = 0.0;
};

RunOutcome execute_run(const ExperimentConfig& cfg, const fs::path& out_dir,
                       const std::string& label) {
    fs::create_directories(out_dir);
    MetricsWriter writer(out_dir / "metrics.csv", cfg.geometry.classes);

    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<RoundReport> reports = run_experiment(
        cfg, [&](int round, const std::vector<RoundReport>& round_reports,
                 const ServerState& server) {
            writer.append(round_reports);
            if (cfg.checkpoint_period > 0 && round % cfg.checkpoint_period == 0) {
                char name[32];
                std::snprintf(name, sizeof(name), "checkpoint_%05d.bin", round);
                write_checkpoint(out_dir / name, server.model.params);
            }
        });
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path summary_path = out_dir / "summary.json";
    {
        std::ofstream out(summary_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + summary_path.string());
        out << summary_json(cfg, reports);
    }

    RunOutcome outcome;
    outcome.metrics = out_dir / "metrics.csv";
    outcome.summary = summary_path;
    outcome.seconds = seconds;
    const auto series = global_iou_series(reports);
    if (!series.empty()) {
        outcome.final_global_iou = series.back().second;
        outcome.peak_global_iou = series.front().second;
        outcome.peak_round = series.front().first;
        for (const auto& [round, value] : series) {
            if (value > outcome.peak_global_iou) {
                outcome.peak_global_iou = value;
                outcome.peak_round = round;
            }
        }
    }

    // Timing stays on the console: the summary file must be a pure function
    // of the config so repeated runs compare byte-for-byte.
    std::cout << label << ": " << cfg.rounds << " rounds in " << std::fixed
              << std::setprecision(2) << seconds << "s" << std::defaultfloat
              << ", final global mean IoU " << format_double(outcome.final_global_iou)
              << " (peak " << format_double(outcome.peak_global_iou) << " @ round "
              << outcome.peak_round << ")\n";
    std::cout << "  metrics: " << outcome.metrics.string() << "\n";
    std::cout << "  summary: " << outcome.summary.string() << "\n";
    return outcome;
}

struct Variant {
    std::string name;
    Algorithm algorithm;
    bool daloss;
};

int do_compare(const std::string& config_path, const std::string& algos_csv,
               const std::string& preset) {
    const ExperimentConfig base = parse_config(config_path);
    const fs::path base_dir = resolve_output_dir(base);

    std::vector<Variant> variants;
    std::string note;
    if (!preset.empty()) {
        if (preset != "table3") {
            throw ConfigError("compare: unknown preset \"" + preset + "\"");
        }
        variants = {{"scaffold", Algorithm::Scaffold, false},
                    {"scaffold_daloss", Algorithm::Scaffold, true},
                    {"feddwa", Algorithm::FedDwa, false},
                    {"feddwa_daloss", Algorithm::FedDwa, true}};
        note = "the scaffold baseline stands in for FedBEVT, which this "
               "simulator does not implement";
    } else {
        std::stringstream ss(algos_csv);
        std::string token;
        while (std::getline(ss, token, ',')) {
            if (token.empty()) continue;
            const Algorithm algo = algorithm_from_string(token);
            for (const Variant& v : variants) {
                if (v.name == token) {
                    throw ConfigError("compare: duplicate algorithm \"" + token + "\"");
                }
            }
            variants.push_back({token, algo, base.daloss.enabled});
        }
        if (variants.empty()) {
            throw ConfigError("compare: --algos needs at least one algorithm");
        }
    }

    ordered_json runs = ordered_json::array();
    for (const Variant& v : variants) {
        ExperimentConfig cfg = base;
        cfg.algorithm = v.algorithm;
        cfg.daloss.enabled = v.daloss;
        const RunOutcome outcome = execute_run(cfg, base_dir / v.name, v.name);
        ordered_json entry;
        entry["name"] = v.name;
        entry["algorithm"] = to_string(v.algorithm);
        entry["daloss"] = v.daloss;
        entry["final_global_mean_iou"] = outcome.final_global_iou;
        entry["peak_global_mean_iou"] = outcome.peak_global_iou;
        entry["peak_round"] = outcome.peak_round;
        entry["metrics"] = outcome.metrics.string();
        entry["summary"] = outcome.summary.string();
        runs.push_back(std::move(entry));
    }

    ordered_json comparison;
    if (!note.empty()) comparison["note"] = note;
    comparison["config"] = ordered_json::parse(config_echo_json(base));
    comparison["runs"] = std::move(runs);

    const fs::path out_path = base_dir / "comparison.json";
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_path.string());
    out << comparison.dump(2) << "\n";
    std::cout << "comparison: " << out_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated per-pixel segmentation simulator "
                 "(FedAvg / scaffold / feddwa with optional DALoss)"};
    app.require_subcommand(1);

    std::string config_path;
    std::string metrics_path;
    std::string algos_csv;
    std::string preset;
    std::string plot_out;
    std::string plot_scope = "global";

    CLI::App* cmd_run = app.add_subcommand("run", "Run one experiment");
    cmd_run->add_option("config", config_path, "Config file (JSON)")->required();

    CLI::App* cmd_compare =
        app.add_subcommand("compare", "Run the same config under several algorithms");
    cmd_compare->add_option("config", config_path, "Config file (JSON)")->required();
    CLI::Option* opt_algos = cmd_compare->add_option(
        "--algos", algos_csv, "Comma-separated list: fedavg,scaffold,feddwa");
    CLI::Option* opt_preset = cmd_compare->add_option(
        "--preset", preset, "Named grid; 'table3' runs scaffold and feddwa with and "
        "without DALoss");
    opt_algos->excludes(opt_preset);

    CLI::App* cmd_plot =
        app.add_subcommand("plotdata", "Extract per-client IoU-vs-round series");
    cmd_plot->add_option("metrics", metrics_path, "metrics.csv from a run")->required();
    cmd_plot->add_option("--out", plot_out, "Output directory (default: <metrics dir>/plotdata)");
    cmd_plot->add_option("--scope", plot_scope, "global or local")
        ->check(CLI::IsMember({"global", "local"}));

    CLI::App* cmd_validate =
        app.add_subcommand("validate", "Parse and validate a config, then exit");
    cmd_validate->add_option("config", config_path, "Config file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_run->parsed()) {
            const ExperimentConfig cfg = parse_config(config_path);
            execute_run(cfg, resolve_output_dir(cfg),
                        to_string(cfg.algorithm) +
                            std::string(cfg.daloss.enabled ? "+daloss" : ""));
            return 0;
        }
        if (cmd_compare->parsed()) {
            if (algos_csv.empty() && preset.empty()) {
                throw ConfigError("compare: one of --algos or --preset is required");
            }
            return do_compare(config_path, algos_csv, preset);
        }
        if (cmd_plot->parsed()) {
            fs::path out_dir;
            if (!plot_out.empty()) {
                out_dir = plot_out;
            } else if (const char* env = std::getenv("FEDDWA_OUTPUT_DIR");
                       env != nullptr && *env != '\0') {
                out_dir = env;
            } else {
                out_dir = fs::path(metrics_path).parent_path() / "plotdata";
            }
            const EvalScope scope = plot_scope == "local"
                                        ? EvalScope::LocalOnClientTest
                                        : EvalScope::GlobalOnClientTest;
            const auto written = emit_plotdata(metrics_path, out_dir, scope);
            for (const fs::path& p : written) std::cout << p.string() << "\n";
            return 0;
        }
        if (cmd_validate->parsed()) {
            parse_config(config_path);
            std::cout << "ok\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
