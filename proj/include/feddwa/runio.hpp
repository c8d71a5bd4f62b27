#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "feddwa/config.hpp"
#include "feddwa/fedcore.hpp"
#include "feddwa/metrics.hpp"

namespace feddwa {

// Append-per-round CSV writer so an interrupted run leaves a readable prefix.
// Columns: round,client_id,scope,loss,mean_iou,iou_class_0..K-1
class MetricsWriter {
public:
    MetricsWriter(const std::filesystem::path& path, int classes);
    void append(const std::vector<RoundReport>& reports);

private:
    std::string path_;
    int classes_;
};

std::vector<RoundReport> read_metrics_csv(const std::filesystem::path& path,
                                          int* classes_out = nullptr);

// Deterministic run summary: peak IoU and round per client and scope, final
// losses, final global mean IoU, config echo and build id. Wall time is
// deliberately not part of the file so identical configs produce identical
// bytes; the CLI reports timing on the console instead.
std::string summary_json(const ExperimentConfig& cfg,
                         const std::vector<RoundReport>& reports);

// Parameter checkpoint: magic u32 = 0x4644574b ("FDWK"), version u32 = 1,
// length u64, then raw little-endian doubles.
void write_checkpoint(const std::filesystem::path& path, const ParamVector& params);
ParamVector read_checkpoint(const std::filesystem::path& path);

// Per-client two-column (round,mean_iou) series extracted from a metrics
// file; returns the written file paths.
std::vector<std::filesystem::path> emit_plotdata(
    const std::filesystem::path& metrics_path,
    const std::filesystem::path& out_dir, EvalScope scope);

// Formats a double with shortest round-trip representation (deterministic).
std::string format_double(double v);

}  // namespace feddwa
