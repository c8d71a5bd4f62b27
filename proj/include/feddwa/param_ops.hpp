#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace feddwa {

// Numerical failure mid-run (non-finite values); the CLI maps this to exit
// code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Flat vector of model parameters. All federated bookkeeping (models,
// control variables, update accumulators) lives in this representation.
using ParamVector = Eigen::VectorXd;

inline void require_same_length(const ParamVector& x, const ParamVector& y,
                                const char* what) {
    if (x.size() != y.size()) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
}

// y + a*x
inline ParamVector param_axpy(double a, const ParamVector& x, const ParamVector& y) {
    require_same_length(x, y, "param_axpy");
    return y + a * x;
}

inline double param_norm_sq(const ParamVector& x) { return x.squaredNorm(); }

inline bool all_finite(const ParamVector& x) { return x.allFinite(); }

inline bool all_finite(const Eigen::MatrixXd& x) { return x.allFinite(); }

}  // namespace feddwa
