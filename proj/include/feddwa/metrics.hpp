#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace feddwa {

// Per-class pixel counts: true positives, false positives, false negatives.
struct ConfusionCounts {
    std::vector<long> tp, fp, fn;

    explicit ConfusionCounts(int k = 0) : tp(k, 0), fp(k, 0), fn(k, 0) {}
    int classes() const { return static_cast<int>(tp.size()); }
    void add(const ConfusionCounts& other);
};

// Exact counts from two class-index masks of equal length.
ConfusionCounts confusion(const Eigen::VectorXi& pred_mask,
                          const Eigen::VectorXi& true_mask, int k);

// Per-pixel argmax with lowest-class-index tie breaking.
Eigen::VectorXi argmax_mask(const Eigen::MatrixXd& logits);

struct IouResult {
    Eigen::VectorXd per_class;  // NaN for classes absent from both masks
    double mean = 0.0;          // over classes with TP+FP+FN > 0
};

// IoU_k = TP / (TP + FP + FN); classes with an empty union are excluded from
// the mean rather than scored.
IouResult iou(const ConfusionCounts& counts);

enum class EvalScope { GlobalOnClientTest, LocalOnClientTest };

const char* to_string(EvalScope scope);

// One evaluation record: a model (global or the client's own) scored on one
// client's test split after a communication round.
struct RoundReport {
    int round = 0;
    int client_id = 0;
    EvalScope scope = EvalScope::GlobalOnClientTest;
    double loss = 0.0;
    Eigen::VectorXd iou_per_class;
    double mean_iou = 0.0;
};

struct PeakIou {
    double peak_iou = 0.0;
    int round = 0;  // earliest round attaining the peak
};

// Scans a single client/scope series of reports; ties resolve to the earliest
// round. Throws std::invalid_argument on an empty list.
PeakIou rounds_to_peak(const std::vector<RoundReport>& reports);

}  // namespace feddwa
