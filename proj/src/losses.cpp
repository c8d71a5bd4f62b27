#include "feddwa/losses.hpp"

#include <stdexcept>

#include "feddwa/divergence.hpp"

namespace feddwa {

namespace {

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out;
    out.resizeLike(logits);
    for (Eigen::Index p = 0; p < logits.rows(); ++p) {
        const Eigen::ArrayXd e =
            (logits.row(p).array() - logits.row(p).maxCoeff()).exp();
        out.row(p) = e / e.sum();
    }
    return out;
}

}  // namespace

CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits,
                                 const Eigen::VectorXi& mask) {
    const Eigen::Index pixels = logits.rows();
    const Eigen::Index k = logits.cols();
    if (mask.size() != pixels) {
        throw std::invalid_argument("cross_entropy: mask/logits pixel count mismatch");
    }
    const LogProbGrid logp = log_softmax(logits);

    CrossEntropyResult res;
    res.dlogits = softmax_rows(logits);
    double total = 0.0;
    for (Eigen::Index p = 0; p < pixels; ++p) {
        const int y = mask(p);
        if (y < 0 || y >= k) {
            throw std::invalid_argument("cross_entropy: class index " +
                                        std::to_string(y) + " out of range at pixel " +
                                        std::to_string(p));
        }
        total -= logp.values(p, y);
        res.dlogits(p, y) -= 1.0;
    }
    res.loss = total / static_cast<double>(pixels);
    res.dlogits /= static_cast<double>(pixels);
    return res;
}

DALossResult daloss(const Eigen::MatrixXd& logits, const Eigen::VectorXi& mask,
                    double kld_value, const ParamVector& g_global_prev,
                    const ParamVector& g_local, const DALossConfig& cfg,
                    const Eigen::MatrixXd* p_global, double pixel_divisor) {
    require_same_length(g_global_prev, g_local, "daloss");
    if (cfg.c < 0.0) {
        throw std::invalid_argument("daloss: negative regularization constant");
    }

    CrossEntropyResult ce = cross_entropy(logits, mask);
    DALossResult res;
    res.dlogits = std::move(ce.dlogits);

    // Both degenerate cases (c == 0, kld == 0) must reduce to plain cross
    // entropy bitwise, so the penalty path is skipped entirely.
    const double weight = cfg.c * kld_value;
    if (weight == 0.0) {
        res.loss = ce.loss;
        res.dparams_extra = ParamVector::Zero(g_local.size());
        return res;
    }

    const ParamVector diff = g_local - g_global_prev;
    const double dist_sq = diff.squaredNorm();
    res.loss = ce.loss + weight * dist_sq;
    res.dparams_extra = (2.0 * weight) * diff;

    if (!cfg.kld_detached) {
        // Differentiate the divergence factor through the local logits:
        // d kld / d logit_c = (sm_c * S - exp(pg_c) * [pl_c above floor]) / P
        // with S the retained global mass.
        if (p_global == nullptr || pixel_divisor <= 0.0) {
            throw std::invalid_argument(
                "daloss: differentiated KLD requires the global log-prob grid");
        }
        const Eigen::MatrixXd sm = softmax_rows(logits);
        const LogProbGrid pl = log_softmax(logits);
        const Eigen::ArrayXXd pg_prob = p_global->array().exp();
        const Eigen::ArrayXXd active =
            (pl.values.array() > kLogProbFloor).cast<double>();
        const Eigen::ArrayXd retained = (pg_prob * active).rowwise().sum();
        Eigen::MatrixXd dkld =
            (sm.array().colwise() * retained - pg_prob * active).matrix() /
            pixel_divisor;
        res.dlogits += (cfg.c * dist_sq) * dkld;
    }
    return res;
}

}  // namespace feddwa
