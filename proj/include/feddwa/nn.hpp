#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "feddwa/losses.hpp"
#include "feddwa/param_ops.hpp"

namespace feddwa {

// Per-pixel classifier: a fully connected network applied independently at
// every pixel, mapping F input features to K class logits. Hidden layers use
// tanh, the output layer is linear.
//
// Parameter layout (fixed, relied on by all ParamVector arithmetic):
//   for each layer l = 0..L-1:
//     weight matrix W_l, shape (out_l x in_l), row-major (output unit major),
//     then bias b_l, length out_l.
struct MlpModel {
    std::vector<int> layer_sizes;  // {F, hidden..., K}
    ParamVector params;

    static Eigen::Index param_count(const std::vector<int>& sizes);
    static MlpModel zeros(std::vector<int> sizes);
    // Uniform Glorot init, driven by the counter RNG for reproducibility.
    static MlpModel glorot(std::vector<int> sizes, std::uint64_t seed);

    int input_features() const { return layer_sizes.front(); }
    int num_classes() const { return layer_sizes.back(); }
    int layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
};

// features: (H*W) x F, one row per pixel. Returns logits (H*W) x K.
Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& features);

// Backpropagates dLoss/dLogits through the network; returns dLoss/dParams.
ParamVector backprop(const MlpModel& model, const Eigen::MatrixXd& features,
                     const Eigen::MatrixXd& dlogits);

// Loss selector for backward(). When `daloss.enabled`, the proximal penalty
// uses `kld_value` and `global_params`; `global_logprobs` is consulted only by
// the differentiated-KLD variant.
struct LossSpec {
    DALossConfig daloss;
    double kld_value = 0.0;
    const ParamVector* global_params = nullptr;
    const Eigen::MatrixXd* global_logprobs = nullptr;
    double pixel_divisor = 0.0;  // divergence reduction denominator
};

struct BackwardResult {
    double loss = 0.0;
    ParamVector grad;
};

// Single forward/backward pass over one sample: loss value plus the full
// parameter gradient (network gradient plus any penalty term).
BackwardResult backward(const MlpModel& model, const Eigen::MatrixXd& features,
                        const Eigen::VectorXi& mask, const LossSpec& spec);

}  // namespace feddwa
