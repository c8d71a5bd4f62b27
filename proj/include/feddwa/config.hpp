#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feddwa/divergence.hpp"
#include "feddwa/losses.hpp"
#include "feddwa/synthdata.hpp"

namespace feddwa {

// Configuration or input-contract violation; the CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Algorithm { FedAvg, Scaffold, FedDwa };

Algorithm algorithm_from_string(const std::string& name);
const char* to_string(Algorithm algo);

struct LrDecay {
    double factor = 0.5;
    int period = 20;  // rounds between decays
};

struct Seeds {
    std::uint64_t data = 1;
    std::uint64_t init = 2;
    std::uint64_t shuffle = 3;
};

struct ExperimentFlags {
    bool literal_eq9 = false;            // printed-sign global update, for study
    bool strict_u_at_round_start = false;
    KldReduction kld_reduction = KldReduction::Mean;
};

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::FedDwa;
    DALossConfig daloss;
    int rounds = 1;
    Geometry geometry;
    std::vector<int> hidden_sizes;
    double eta_local = 0.1;
    double eta_global = 1.0;
    LrDecay lr_decay;
    Seeds seeds;
    ExperimentFlags flags;
    int local_epochs = 1;
    int batch_size = 1;
    std::vector<ClientProfile> clients;
    // When set, client class priors are drawn from Dirichlet(alpha) with
    // seeds.data, overriding any per-client "class_prior" fields.
    std::optional<double> dirichlet_alpha;
    int checkpoint_period = 0;  // 0 disables parameter checkpoints
    std::string output_dir = "out";

    std::vector<int> layer_sizes() const;
    // Resolved per-client priors (explicit or Dirichlet-drawn).
    std::vector<ClientProfile> resolved_clients() const;
};

// Strict JSON parsing: unknown keys are rejected and every violation message
// carries the offending field path.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

void validate(const ExperimentConfig& cfg);

// Canonical serialized echo of a validated config (used in run summaries).
std::string config_echo_json(const ExperimentConfig& cfg);

}  // namespace feddwa
