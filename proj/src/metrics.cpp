#include "feddwa/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace feddwa {

void ConfusionCounts::add(const ConfusionCounts& other) {
    if (other.classes() != classes()) {
        throw std::invalid_argument("ConfusionCounts::add: class count mismatch");
    }
    for (int k = 0; k < classes(); ++k) {
        tp[k] += other.tp[k];
        fp[k] += other.fp[k];
        fn[k] += other.fn[k];
    }
}

ConfusionCounts confusion(const Eigen::VectorXi& pred_mask,
                          const Eigen::VectorXi& true_mask, int k) {
    if (pred_mask.size() != true_mask.size()) {
        throw std::invalid_argument("confusion: mask shape mismatch");
    }
    ConfusionCounts counts(k);
    for (Eigen::Index p = 0; p < pred_mask.size(); ++p) {
        const int pr = pred_mask(p);
        const int tr = true_mask(p);
        if (pr < 0 || pr >= k || tr < 0 || tr >= k) {
            throw std::invalid_argument("confusion: class index out of range");
        }
        if (pr == tr) {
            ++counts.tp[tr];
        } else {
            ++counts.fp[pr];
            ++counts.fn[tr];
        }
    }
    return counts;
}

Eigen::VectorXi argmax_mask(const Eigen::MatrixXd& logits) {
    Eigen::VectorXi mask(logits.rows());
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        int best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(p, c) > logits(p, best)) best = static_cast<int>(c);
        }
        mask(p) = best;
    }
    return mask;
}

IouResult iou(const ConfusionCounts& counts) {
    const int k = counts.classes();
    IouResult res;
    res.per_class = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < k; ++c) {
        const long denom = counts.tp[c] + counts.fp[c] + counts.fn[c];
        if (denom == 0) continue;  // class absent from both masks: excluded
        res.per_class(c) = static_cast<double>(counts.tp[c]) / static_cast<double>(denom);
        total += res.per_class(c);
        ++present;
    }
    res.mean = present > 0 ? total / present : 0.0;
    return res;
}

const char* to_string(EvalScope scope) {
    return scope == EvalScope::GlobalOnClientTest ? "global" : "local";
}

PeakIou rounds_to_peak(const std::vector<RoundReport>& reports) {
    if (reports.empty()) {
        throw std::invalid_argument("rounds_to_peak: empty report list");
    }
    PeakIou best{reports.front().mean_iou, reports.front().round};
    for (const RoundReport& r : reports) {
        if (r.mean_iou > best.peak_iou) {
            best.peak_iou = r.mean_iou;
            best.round = r.round;
        }
    }
    return best;
}

}  // namespace feddwa
