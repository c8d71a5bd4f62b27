#pragma once

#include <Eigen/Core>

#include "feddwa/param_ops.hpp"

namespace feddwa {

// Configuration of the divergence-adjusted training loss: cross entropy plus
// a KLD-scaled quadratic penalty pulling local parameters toward the previous
// global model.
struct DALossConfig {
    bool enabled = false;
    double c = 0.1;            // regularization constant, >= 0
    bool kld_detached = true;  // treat the KLD factor as a constant weight
};

struct CrossEntropyResult {
    double loss = 0.0;
    Eigen::MatrixXd dlogits;  // (H*W) x K
};

// Mean over pixels of -log softmax(logits)[true class].
// dlogits = (softmax - onehot) / pixel_count.
CrossEntropyResult cross_entropy(const Eigen::MatrixXd& logits,
                                 const Eigen::VectorXi& mask);

struct DALossResult {
    double loss = 0.0;
    Eigen::MatrixXd dlogits;
    ParamVector dparams_extra;  // gradient of the penalty w.r.t. local params
};

// loss = CE + c * kld_value * ||g_global_prev - g_local||^2.
//
// With cfg.kld_detached the KLD factor is a fixed scalar weight; otherwise the
// divergence itself is differentiated through the local logits, which requires
// the global log-probability grid `p_global` the kld_value was computed from.
// `pixel_divisor` is the reduction denominator the divergence used (pixel
// count for mean reduction, 1 for sum).
DALossResult daloss(const Eigen::MatrixXd& logits, const Eigen::VectorXi& mask,
                    double kld_value, const ParamVector& g_global_prev,
                    const ParamVector& g_local, const DALossConfig& cfg,
                    const Eigen::MatrixXd* p_global = nullptr,
                    double pixel_divisor = 0.0);

}  // namespace feddwa
