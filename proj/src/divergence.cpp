#include "feddwa/divergence.hpp"

#include <stdexcept>

#include "feddwa/param_ops.hpp"

namespace feddwa {

LogProbGrid log_softmax(const Eigen::MatrixXd& logits) {
    // Overflowing logits are a numeric failure of the producing model, not a
    // caller contract violation.
    if (!logits.allFinite()) {
        throw NumericError("log_softmax: non-finite logits");
    }
    LogProbGrid out;
    out.values.resizeLike(logits);
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        const double m = logits.row(p).maxCoeff();
        const Eigen::ArrayXd shifted = logits.row(p).array() - m;
        const double lse = std::log(shifted.exp().sum());
        out.values.row(p) = shifted - lse;
    }
    return out;
}

double kld(const LogProbGrid& p_global, const LogProbGrid& p_local,
           KldReduction reduction) {
    if (p_global.values.rows() != p_local.values.rows() ||
        p_global.values.cols() != p_local.values.cols()) {
        throw std::invalid_argument("kld: grid shape mismatch");
    }
    const Eigen::ArrayXXd& pg = p_global.values.array();
    const Eigen::ArrayXXd pl = p_local.values.array().max(kLogProbFloor);
    const double total = (pg.exp() * (pg - pl)).sum();
    if (reduction == KldReduction::Mean && p_global.values.rows() > 0) {
        return total / static_cast<double>(p_global.values.rows());
    }
    return total;
}

double accumulate_kld(const std::vector<LogProbGrid>& global_preds,
                      const std::vector<LogProbGrid>& local_preds,
                      KldReduction reduction) {
    if (global_preds.size() != local_preds.size()) {
        throw std::invalid_argument("accumulate_kld: list length mismatch");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < global_preds.size(); ++i) {
        total += kld(global_preds[i], local_preds[i], reduction);
    }
    return total;
}

}  // namespace feddwa
