#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace feddwa {

// One segmentation data item: per-pixel feature rows plus a ground-truth
// class-index mask. Pixels are stored row-major, pixel p = r * width + c.
struct Sample {
    int height = 0;
    int width = 0;
    Eigen::MatrixXd features;  // (height*width) x F
    Eigen::VectorXi mask;      // height*width, entries in [0, K)
};

struct Geometry {
    int height = 0;
    int width = 0;
    int features = 0;  // F
    int classes = 0;   // K
};

// Data-generating recipe for one client. Heterogeneity has two axes: the
// class prior (label skew) and the pose transform applied to the latent scene
// (sensor placement skew).
struct ClientProfile {
    int client_id = 0;
    int n_samples = 1;
    Eigen::VectorXd class_prior;  // length K, sums to 1
    double pose_angle = 0.0;      // radians
    double pose_tx = 0.0;
    double pose_ty = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct ClientDataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

// Deterministically renders n_samples scenes (discs and rectangles placed per
// the class prior, transformed by the pose) and splits them 80/20 in
// generation order. Same profile + geometry always yields identical bytes.
ClientDataset generate_client_dataset(const ClientProfile& profile,
                                      const Geometry& geom);

// M probability vectors drawn from Dirichlet(alpha, ..., alpha); lower alpha
// gives more skewed priors.
std::vector<Eigen::VectorXd> dirichlet_priors(double alpha, int k, int m,
                                              std::uint64_t seed);

// Little-endian binary dump for cross-run reuse. Layout:
//   magic u32 = 0x46445331 ("FDS1"), version u32 = 1,
//   H, W, F, K, n_samples as u32,
//   then per sample: H*W*F feature doubles stored channel-planar (all pixels
//   of channel 0, then channel 1, ...), followed by H*W int32 mask entries in
//   row-major pixel order.
void save_samples(const std::string& path, const std::vector<Sample>& samples,
                  const Geometry& geom);
std::vector<Sample> load_samples(const std::string& path, Geometry* geom_out = nullptr);

}  // namespace feddwa
