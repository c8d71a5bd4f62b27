#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "feddwa/runio.hpp"
#include "feddwa/rng.hpp"

using namespace feddwa;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() / ("feddwa_runio_" + name);
}

RoundReport report_of(int round, int client, EvalScope scope, double loss,
                      double mean_iou, std::initializer_list<double> per_class) {
    RoundReport r;
    r.round = round;
    r.client_id = client;
    r.scope = scope;
    r.loss = loss;
    r.mean_iou = mean_iou;
    r.iou_per_class.resize(static_cast<Eigen::Index>(per_class.size()));
    Eigen::Index i = 0;
    for (double v : per_class) r.iou_per_class(i++) = v;
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("format_double round-trips arbitrary doubles") {
    RngStream rng(rng_key(1, 0x40));
    for (int i = 0; i < 200; ++i) {
        const double v = std::ldexp(rng.normal(), static_cast<int>(rng.below(40)) - 20);
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}

TEST_CASE("metrics CSV round-trips, including absent-class NaN entries") {
    const fs::path path = temp_path("metrics.csv");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MetricsWriter writer(path, 3);
    writer.append({report_of(1, 0, EvalScope::GlobalOnClientTest, 1.25, 0.5,
                             {1.0, 0.0, nan}),
                   report_of(1, 0, EvalScope::LocalOnClientTest, 1.5, 0.25,
                             {0.25, nan, nan})});
    writer.append({report_of(2, 0, EvalScope::GlobalOnClientTest, 0.75, 0.625,
                             {1.0, 0.25, nan})});

    int classes = 0;
    const std::vector<RoundReport> reports = read_metrics_csv(path, &classes);
    fs::remove(path);
    CHECK(classes == 3);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].round == 1);
    CHECK(reports[0].scope == EvalScope::GlobalOnClientTest);
    CHECK(reports[0].loss == 1.25);
    CHECK(reports[0].iou_per_class(0) == 1.0);
    CHECK(std::isnan(reports[0].iou_per_class(2)));
    CHECK(reports[1].scope == EvalScope::LocalOnClientTest);
    CHECK(reports[2].mean_iou == 0.625);
}

TEST_CASE("each append lands on disk, leaving a readable prefix") {
    const fs::path path = temp_path("prefix.csv");
    MetricsWriter writer(path, 2);
    writer.append({report_of(1, 0, EvalScope::GlobalOnClientTest, 1.0, 0.5,
                             {0.5, 0.5})});
    // read while the writer object is still alive
    CHECK(read_metrics_csv(path).size() == 1);
    writer.append({report_of(2, 0, EvalScope::GlobalOnClientTest, 0.9, 0.6,
                             {0.6, 0.6})});
    CHECK(read_metrics_csv(path).size() == 2);
    fs::remove(path);
}

TEST_CASE("malformed metrics files are rejected") {
    const fs::path path = temp_path("bad.csv");
    std::ofstream(path) << "round,client_id,scope,loss,mean_iou,iou_class_0\n"
                        << "1,0,global,0.5\n";
    CHECK_THROWS_AS(read_metrics_csv(path), ConfigError);
    std::ofstream(path) << "round,client_id,scope,loss,mean_iou,iou_class_0\n"
                        << "1,0,sideways,0.5,0.5,0.5\n";
    CHECK_THROWS_AS(read_metrics_csv(path), ConfigError);
    fs::remove(path);
    CHECK_THROWS_AS(read_metrics_csv(path), ConfigError);
}

TEST_CASE("summary reports peaks, finals, and the config echo") {
    ExperimentConfig cfg;
    cfg.algorithm = Algorithm::FedDwa;
    cfg.rounds = 2;
    cfg.geometry = {4, 4, 3, 2};
    ClientProfile p;
    p.client_id = 0;
    p.n_samples = 5;
    p.class_prior.resize(2);
    p.class_prior << 0.5, 0.5;
    cfg.clients.push_back(p);

    const std::vector<RoundReport> reports{
        report_of(1, 0, EvalScope::GlobalOnClientTest, 1.0, 0.7, {0.7, 0.7}),
        report_of(1, 0, EvalScope::LocalOnClientTest, 1.1, 0.4, {0.4, 0.4}),
        report_of(2, 0, EvalScope::GlobalOnClientTest, 0.8, 0.6, {0.6, 0.6}),
        report_of(2, 0, EvalScope::LocalOnClientTest, 0.9, 0.5, {0.5, 0.5}),
    };
    const std::string a = summary_json(cfg, reports);
    CHECK(a == summary_json(cfg, reports));  // deterministic

    CHECK(a.find("\"peak_mean_iou\": 0.7") != std::string::npos);
    CHECK(a.find("\"peak_round\": 1") != std::string::npos);
    CHECK(a.find("\"final_loss\": 0.8") != std::string::npos);
    CHECK(a.find("\"final_global_mean_iou\": 0.6") != std::string::npos);
    CHECK(a.find("\"rounds_completed\": 2") != std::string::npos);
    CHECK(a.find("\"algorithm\": \"feddwa\"") != std::string::npos);
    CHECK(a.find("\"build\"") != std::string::npos);
}

TEST_CASE("checkpoints round-trip bitwise and reject corruption") {
    const fs::path path = temp_path("ckpt.bin");
    RngStream rng(rng_key(2, 0x41));
    ParamVector params(37);
    for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = rng.normal();

    write_checkpoint(path, params);
    const ParamVector loaded = read_checkpoint(path);
    CHECK(loaded == params);

    // flip the magic
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('x');
    f.close();
    CHECK_THROWS_AS(read_checkpoint(path), ConfigError);

    write_checkpoint(path, params);
    fs::resize_file(path, fs::file_size(path) - 8);
    CHECK_THROWS_AS(read_checkpoint(path), ConfigError);
    fs::remove(path);
}

TEST_CASE("plotdata emits one series per client matching the source") {
    const fs::path metrics = temp_path("plot_metrics.csv");
    const auto iou_of = [](int round, int id) { return 0.1 * round + 0.01 * id; };
    MetricsWriter writer(metrics, 2);
    for (int round = 1; round <= 3; ++round) {
        std::vector<RoundReport> reports;
        for (int id : {0, 1, 2, 3}) {
            reports.push_back(report_of(round, id, EvalScope::GlobalOnClientTest,
                                        1.0 / round, iou_of(round, id),
                                        {0.5, 0.5}));
        }
        writer.append(reports);
    }

    const fs::path out_dir = temp_path("plotdata_out");
    const auto written =
        emit_plotdata(metrics, out_dir, EvalScope::GlobalOnClientTest);
    REQUIRE(written.size() == 4);  // one file per client

    // values match the source table exactly
    const std::string series = slurp(out_dir / "client_2_global.csv");
    CHECK(series ==
          "round,mean_iou\n1," + format_double(iou_of(1, 2)) + "\n2," +
              format_double(iou_of(2, 2)) + "\n3," + format_double(iou_of(3, 2)) +
              "\n");

    // rows equal the round count
    int lines = 0;
    for (char ch : series) lines += ch == '\n' ? 1 : 0;
    CHECK(lines == 1 + 3);

    // a scope with no rows is an input error
    CHECK_THROWS_AS(emit_plotdata(metrics, out_dir, EvalScope::LocalOnClientTest),
                    ConfigError);
    fs::remove(metrics);
    fs::remove_all(out_dir);
}
