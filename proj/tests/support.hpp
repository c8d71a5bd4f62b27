#pragma once

// Shared fixtures for the federation tests and the golden-file generator.

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "feddwa/fedcore.hpp"
#include "feddwa/rng.hpp"

namespace feddwa::testsupport {

inline Sample make_sample(int h, int w, int f, const Eigen::VectorXi& mask,
                          std::uint64_t seed) {
    Sample s;
    s.height = h;
    s.width = w;
    s.mask = mask;
    s.features.resize(h * w, f);
    RngStream rng(rng_key(seed, 0x30));
    for (Eigen::Index p = 0; p < s.features.rows(); ++p) {
        for (Eigen::Index c = 0; c < s.features.cols(); ++c) {
            s.features(p, c) = rng.normal();
        }
    }
    return s;
}

inline Eigen::VectorXi balanced_mask(int pixels, int k) {
    Eigen::VectorXi mask(pixels);
    for (int p = 0; p < pixels; ++p) mask(p) = p % k;
    return mask;
}

inline Eigen::VectorXi mask_of(std::initializer_list<int> v) {
    Eigen::VectorXi mask(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (int x : v) mask(i++) = x;
    return mask;
}

inline ClientState make_client(int id, std::vector<Sample> train,
                               const MlpModel& shape, double eta = 0.1) {
    ClientState c;
    c.id = id;
    c.train = std::move(train);
    c.model = MlpModel::zeros(shape.layer_sizes);
    c.c_local = ParamVector::Zero(shape.params.size());
    c.eta_local = eta;
    return c;
}

// Small two-client setup shared by the trajectory tests; any change here
// invalidates tests/data/scaffold_golden.bin.
inline ExperimentConfig benchmark_config(Algorithm algo, bool with_daloss,
                                         std::uint64_t data_seed) {
    ExperimentConfig cfg;
    cfg.algorithm = algo;
    cfg.daloss.enabled = with_daloss;
    cfg.rounds = 3;
    cfg.geometry = {8, 8, 5, 3};
    cfg.hidden_sizes = {8};
    cfg.eta_local = 0.1;
    cfg.seeds.data = data_seed;
    for (int id = 0; id < 2; ++id) {
        ClientProfile p;
        p.client_id = id;
        p.n_samples = 10;
        p.class_prior.resize(3);
        p.class_prior << 0.2, (id == 0 ? 0.6 : 0.2), (id == 0 ? 0.2 : 0.6);
        p.pose_angle = id * 0.8;
        p.seed = 100 + static_cast<std::uint64_t>(id);
        cfg.clients.push_back(p);
    }
    return cfg;
}

}  // namespace feddwa::testsupport
