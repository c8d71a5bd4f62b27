#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "feddwa/config.hpp"
#include "feddwa/divergence.hpp"
#include "feddwa/losses.hpp"
#include "feddwa/metrics.hpp"
#include "feddwa/nn.hpp"
#include "feddwa/param_ops.hpp"
#include "feddwa/synthdata.hpp"

namespace feddwa {

struct ClientState {
    int id = 0;
    std::vector<Sample> train;
    std::vector<Sample> test;
    MlpModel model;         // local model
    ParamVector c_local;    // local control variable, zero-initialized
    double eta_local = 0.1;
};

struct ServerState {
    MlpModel model;         // global model
    ParamVector c_global;   // global control variable, zero-initialized
    double eta_global = 1.0;
    int round = 0;          // completed communication rounds
    LrDecay lr_decay;
};

// Per-round behavior switches shared by all three algorithms; the baselines
// are the same local pass with the corresponding switches flipped.
struct RoundOptions {
    DALossConfig daloss;
    bool control_variates = true;    // off for FedAvg
    bool unit_kld_weights = false;   // scaffold: per-sample KLD forced to 1
    bool strict_u_at_round_start = false;
    bool literal_eq9 = false;        // printed-sign global update, for study
    KldReduction kld_reduction = KldReduction::Mean;
    int local_epochs = 1;
    int batch_size = 1;
    std::uint64_t shuffle_seed = 0;
    // Test hook: when set, every accumulated per-minibatch gradient is copied
    // here (in accumulation order).
    std::vector<ParamVector>* grad_log = nullptr;
};

// Everything a client uploads after local training. The server never sees
// raw samples; sample_count is the |N_m| weight FedAvg aggregation uses.
struct ClientRoundResult {
    int client_id = 0;
    ParamVector params;      // trained local model
    ParamVector t_contrib;   // KLD-weighted control contribution T_m
    long sample_count = 0;
    double kld_sum = 0.0;    // O_m, reported for diagnostics
};

// T_m = (O_m / |N_m|) * c_m
ParamVector t_contribution(const ParamVector& c_local, double kld_sum,
                           long sample_count);

// One local pass: initializes the local model from the global one, iterates
// the client's samples in a seeded shuffled order accumulating gradients and
// per-sample divergences, then applies the control-variate-corrected update
// from the round-start parameters and refreshes c_m. Empty datasets are
// skipped by the caller.
ClientRoundResult local_round(ClientState& client, const MlpModel& global_model,
                              const ParamVector& c_global,
                              const RoundOptions& opts, int round_index);

// c_g += mean(T_m); global step aggregates (G_m - G_g) by default, or the
// printed sign (G_g - G_m) when literal_eq9 is set.
void server_update_feddwa(ServerState& server,
                          const std::vector<ClientRoundResult>& results,
                          bool literal_eq9 = false);

// Parameter averaging weighted by sample counts.
void server_update_fedavg(ServerState& server,
                          const std::vector<ClientRoundResult>& results);

// One full communication round (broadcast, parallel local training in id
// order, aggregation, learning-rate decay). Returns the client uploads.
std::vector<ClientRoundResult> run_round(ServerState& server,
                                         std::vector<ClientState>& clients,
                                         Algorithm algo,
                                         const RoundOptions& opts);

// Evaluates a model on one client's test split (cross-entropy loss plus IoU
// aggregated over all test samples).
RoundReport evaluate_model(const MlpModel& model,
                           const std::vector<Sample>& test_set, int round,
                           int client_id, EvalScope scope);

struct ExperimentSetup {
    ServerState server;
    std::vector<ClientState> clients;
    RoundOptions options;
};

// Builds datasets, models and round options from a validated config.
ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

using RoundCallback =
    std::function<void(int round, const std::vector<RoundReport>&,
                       const ServerState&)>;

// Runs cfg.rounds communication rounds; after each round the global model and
// every client's local model are scored on each client's test split. The
// callback (when given) observes each round's reports as they are produced.
std::vector<RoundReport> run_experiment(const ExperimentConfig& cfg,
                                        const RoundCallback& on_round = {});

}  // namespace feddwa
