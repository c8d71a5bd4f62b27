#include "feddwa/nn.hpp"

#include <stdexcept>

#include "feddwa/rng.hpp"

namespace feddwa {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;
using WeightMap = Eigen::Map<RowMajorMatrix>;

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) {
        throw std::invalid_argument("MlpModel: need at least input and output sizes");
    }
    for (int s : sizes) {
        if (s < 1) throw std::invalid_argument("MlpModel: non-positive layer size");
    }
}

// Activations for every layer boundary; trace[0] is the input, trace.back()
// the logits.
std::vector<Eigen::MatrixXd> forward_trace(const MlpModel& model,
                                           const Eigen::MatrixXd& features) {
    if (features.cols() != model.input_features()) {
        throw std::invalid_argument(
            "forward: input has " + std::to_string(features.cols()) +
            " features, model expects " + std::to_string(model.input_features()));
    }
    std::vector<Eigen::MatrixXd> trace;
    trace.reserve(model.layer_sizes.size());
    trace.push_back(features);
    Eigen::Index offset = 0;
    for (int l = 0; l < model.layers(); ++l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        ConstWeightMap w(model.params.data() + offset, out, in);
        offset += static_cast<Eigen::Index>(out) * in;
        const auto b = model.params.segment(offset, out);
        offset += out;

        Eigen::MatrixXd z = trace.back() * w.transpose();
        z.rowwise() += b.transpose();
        if (l + 1 < model.layers()) z = z.array().tanh();
        trace.push_back(std::move(z));
    }
    return trace;
}

}  // namespace

Eigen::Index MlpModel::param_count(const std::vector<int>& sizes) {
    check_sizes(sizes);
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        n += static_cast<Eigen::Index>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    }
    return n;
}

MlpModel MlpModel::zeros(std::vector<int> sizes) {
    MlpModel m;
    m.params = ParamVector::Zero(param_count(sizes));
    m.layer_sizes = std::move(sizes);
    return m;
}

MlpModel MlpModel::glorot(std::vector<int> sizes, std::uint64_t seed) {
    MlpModel m = zeros(sizes);
    RngStream rng(rng_key(seed, 0x676c6f72 /* "glor" */));
    Eigen::Index offset = 0;
    for (int l = 0; l < m.layers(); ++l) {
        const int in = m.layer_sizes[l];
        const int out = m.layer_sizes[l + 1];
        const double a = std::sqrt(6.0 / (in + out));
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(out) * in; ++i) {
            m.params(offset + i) = rng.uniform(-a, a);
        }
        offset += static_cast<Eigen::Index>(out) * in + out;  // biases stay 0
    }
    return m;
}

Eigen::MatrixXd forward(const MlpModel& model, const Eigen::MatrixXd& features) {
    return forward_trace(model, features).back();
}

ParamVector backprop(const MlpModel& model, const Eigen::MatrixXd& features,
                     const Eigen::MatrixXd& dlogits) {
    const std::vector<Eigen::MatrixXd> trace = forward_trace(model, features);
    ParamVector grad = ParamVector::Zero(model.params.size());

    // Per-layer parameter offsets in the flat layout.
    std::vector<Eigen::Index> offsets(model.layers());
    Eigen::Index offset = 0;
    for (int l = 0; l < model.layers(); ++l) {
        offsets[l] = offset;
        offset += static_cast<Eigen::Index>(model.layer_sizes[l]) *
                      model.layer_sizes[l + 1] +
                  model.layer_sizes[l + 1];
    }

    Eigen::MatrixXd g = dlogits;  // gradient w.r.t. the layer's pre-activation
    for (int l = model.layers() - 1; l >= 0; --l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        WeightMap dw(grad.data() + offsets[l], out, in);
        dw = g.transpose() * trace[l];
        grad.segment(offsets[l] + static_cast<Eigen::Index>(out) * in, out) =
            g.colwise().sum();
        if (l > 0) {
            ConstWeightMap w(model.params.data() + offsets[l], out, in);
            g = ((g * w).array() * (1.0 - trace[l].array().square())).matrix();
        }
    }
    return grad;
}

BackwardResult backward(const MlpModel& model, const Eigen::MatrixXd& features,
                        const Eigen::VectorXi& mask, const LossSpec& spec) {
    const Eigen::MatrixXd logits = forward(model, features);
    BackwardResult res;
    if (spec.daloss.enabled) {
        if (spec.global_params == nullptr) {
            throw std::invalid_argument("backward: DALoss requires global parameters");
        }
        DALossResult dl =
            daloss(logits, mask, spec.kld_value, *spec.global_params,
                   model.params, spec.daloss, spec.global_logprobs,
                   spec.pixel_divisor);
        res.loss = dl.loss;
        res.grad = backprop(model, features, dl.dlogits) + dl.dparams_extra;
    } else {
        CrossEntropyResult ce = cross_entropy(logits, mask);
        res.loss = ce.loss;
        res.grad = backprop(model, features, ce.dlogits);
    }
    if (!std::isfinite(res.loss) || !all_finite(res.grad)) {
        throw NumericError("backward: non-finite loss or gradient");
    }
    return res;
}

}  // namespace feddwa
