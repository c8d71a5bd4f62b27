#include "feddwa/runio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <json.hpp>

#ifndef FEDDWA_GIT_DESCRIBE
#define FEDDWA_GIT_DESCRIBE "unknown"
#endif

namespace feddwa {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4644574b;  // "FDWK"
constexpr std::uint32_t kCheckpointVersion = 1;

double parse_double(const std::string& token, const std::string& context) {
    const char* begin = token.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw ConfigError(context + ": malformed number \"" + token + "\"");
    }
    return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

EvalScope scope_from_string(const std::string& name, const std::string& context) {
    if (name == "global") return EvalScope::GlobalOnClientTest;
    if (name == "local") return EvalScope::LocalOnClientTest;
    throw ConfigError(context + ": unknown scope \"" + name + "\"");
}

void append_row(std::string& out, const RoundReport& r) {
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.client_id);
    out += ',';
    out += to_string(r.scope);
    out += ',';
    out += format_double(r.loss);
    out += ',';
    out += format_double(r.mean_iou);
    for (Eigen::Index k = 0; k < r.iou_per_class.size(); ++k) {
        out += ',';
        out += format_double(r.iou_per_class(k));
    }
    out += '\n';
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

MetricsWriter::MetricsWriter(const fs::path& path, int classes)
    : path_(path.string()), classes_(classes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw ConfigError("metrics: cannot open " + path_ + " for writing");
    out << "round,client_id,scope,loss,mean_iou";
    for (int k = 0; k < classes_; ++k) out << ",iou_class_" << k;
    out << '\n';
}

void MetricsWriter::append(const std::vector<RoundReport>& reports) {
    std::string block;
    for (const RoundReport& r : reports) {
        if (r.iou_per_class.size() != classes_) {
            throw std::invalid_argument("metrics: report class count mismatch");
        }
        append_row(block, r);
    }
    std::ofstream out(path_, std::ios::app);
    if (!out) throw ConfigError("metrics: cannot append to " + path_);
    out << block;
}

std::vector<RoundReport> read_metrics_csv(const fs::path& path, int* classes_out) {
    std::ifstream in(path);
    if (!in) throw ConfigError("metrics: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("metrics: empty file " + path.string());
    const std::vector<std::string> header = split_csv_row(line);
    if (header.size() < 5 || header[0] != "round") {
        throw ConfigError("metrics: unrecognized header in " + path.string());
    }
    const int classes = static_cast<int>(header.size()) - 5;
    if (classes_out != nullptr) *classes_out = classes;

    std::vector<RoundReport> reports;
    int row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::string context = path.string() + ":" + std::to_string(++row);
        const std::vector<std::string> fields = split_csv_row(line);
        if (fields.size() != header.size()) {
            throw ConfigError(context + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(fields.size()));
        }
        RoundReport r;
        r.round = static_cast<int>(parse_double(fields[0], context));
        r.client_id = static_cast<int>(parse_double(fields[1], context));
        r.scope = scope_from_string(fields[2], context);
        r.loss = parse_double(fields[3], context);
        r.mean_iou = parse_double(fields[4], context);
        r.iou_per_class.resize(classes);
        for (int k = 0; k < classes; ++k) {
            r.iou_per_class(k) = parse_double(fields[5 + static_cast<std::size_t>(k)], context);
        }
        reports.push_back(std::move(r));
    }
    return reports;
}

std::string summary_json(const ExperimentConfig& cfg,
                         const std::vector<RoundReport>& reports) {
    // Group each client/scope series in first-seen (round) order.
    std::map<std::pair<int, EvalScope>, std::vector<RoundReport>> series;
    int last_round = 0;
    for (const RoundReport& r : reports) {
        series[{r.client_id, r.scope}].push_back(r);
        last_round = std::max(last_round, r.round);
    }

    ordered_json clients = ordered_json::array();
    double final_global_sum = 0.0;
    int final_global_count = 0;
    std::map<int, ordered_json> by_client;
    for (const auto& [key, list] : series) {
        const PeakIou peak = rounds_to_peak(list);
        ordered_json scope_entry;
        scope_entry["peak_mean_iou"] = peak.peak_iou;
        scope_entry["peak_round"] = peak.round;
        scope_entry["final_loss"] = list.back().loss;
        scope_entry["final_mean_iou"] = list.back().mean_iou;
        by_client[key.first][to_string(key.second)] = scope_entry;
        if (key.second == EvalScope::GlobalOnClientTest) {
            final_global_sum += list.back().mean_iou;
            ++final_global_count;
        }
    }
    for (auto& [id, entry] : by_client) {
        ordered_json jc;
        jc["id"] = id;
        for (auto& [k, v] : entry.items()) jc[k] = v;
        clients.push_back(std::move(jc));
    }

    ordered_json root;
    root["build"] = FEDDWA_GIT_DESCRIBE;
    root["rounds_completed"] = last_round;
    root["final_global_mean_iou"] =
        final_global_count > 0 ? final_global_sum / final_global_count : 0.0;
    root["clients"] = std::move(clients);
    root["config"] = ordered_json::parse(config_echo_json(cfg));
    return root.dump(2) + "\n";
}

void write_checkpoint(const fs::path& path, const ParamVector& params) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("checkpoint: cannot open " + path.string() + " for writing");
    const std::uint64_t n = static_cast<std::uint64_t>(params.size());
    out.write(reinterpret_cast<const char*>(&kCheckpointMagic), sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw ConfigError("checkpoint: write failed for " + path.string());
}

ParamVector read_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
    std::uint32_t magic = 0, version = 0;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&magic), sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    if (!in || magic != kCheckpointMagic) {
        throw ConfigError("checkpoint: bad magic in " + path.string());
    }
    if (version != kCheckpointVersion) {
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    }
    ParamVector params(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in || in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
        throw ConfigError("checkpoint: truncated file " + path.string());
    }
    return params;
}

std::vector<fs::path> emit_plotdata(const fs::path& metrics_path,
                                    const fs::path& out_dir, EvalScope scope) {
    const std::vector<RoundReport> reports = read_metrics_csv(metrics_path);
    std::map<int, std::string> by_client;
    for (const RoundReport& r : reports) {
        if (r.scope != scope) continue;
        std::string& body = by_client[r.client_id];
        if (body.empty()) body = "round,mean_iou\n";
        body += std::to_string(r.round);
        body += ',';
        body += format_double(r.mean_iou);
        body += '\n';
    }
    if (by_client.empty()) {
        throw ConfigError("plotdata: no rows with scope \"" +
                          std::string(to_string(scope)) + "\" in " + metrics_path.string());
    }
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (const auto& [id, body] : by_client) {
        const fs::path out_path =
            out_dir / ("client_" + std::to_string(id) + "_" + to_string(scope) + ".csv");
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw ConfigError("plotdata: cannot open " + out_path.string());
        out << body;
        written.push_back(out_path);
    }
    return written;
}

}  // namespace feddwa
