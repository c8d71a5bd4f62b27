#pragma once

#include <Eigen/Core>

#include <vector>

namespace feddwa {

// Predicted class distributions of a segmentation output, one row per pixel,
// one column per class, stored as log-probabilities.
struct LogProbGrid {
    Eigen::MatrixXd values;  // (H*W) x K, entries <= 0, rows normalized

    Eigen::Index pixels() const { return values.rows(); }
    Eigen::Index classes() const { return values.cols(); }
};

enum class KldReduction { Mean, Sum };

// Local log-probabilities are floored here before entering the divergence so
// a vanishing local class mass cannot produce an infinite result.
inline constexpr double kLogProbFloor = -27.631021115928547;  // ln(1e-12)

// Numerically stable (max-subtraction) per-pixel log softmax.
// Throws NumericError on non-finite input.
LogProbGrid log_softmax(const Eigen::MatrixXd& logits);

// D_KL(global || local), reduced over pixels (mean by default).
// Both arguments are per-pixel log-probability grids of equal shape; the
// global grid is the reference distribution.
double kld(const LogProbGrid& p_global, const LogProbGrid& p_local,
           KldReduction reduction = KldReduction::Mean);

// Sum of per-sample divergences over a client's dataset (the O_m accumulator).
double accumulate_kld(const std::vector<LogProbGrid>& global_preds,
                      const std::vector<LogProbGrid>& local_preds,
                      KldReduction reduction = KldReduction::Mean);

}  // namespace feddwa
