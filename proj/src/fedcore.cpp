#include "feddwa/fedcore.hpp"

#include <future>
#include <iostream>
#include <numeric>

#include "feddwa/rng.hpp"

namespace feddwa {

namespace {

// Seeded Fisher-Yates permutation of [0, n).
std::vector<int> shuffled_order(int n, std::uint64_t key) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(key);
    for (int i = n - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    return order;
}

struct MinibatchGrad {
    ParamVector grad;        // mean over the batch, at current parameters
    ParamVector grad_start;  // same but at round-start parameters (strict mode)
    double kld = 0.0;        // mean per-sample divergence over the batch
};

}  // namespace

ParamVector t_contribution(const ParamVector& c_local, double kld_sum,
                           long sample_count) {
    if (sample_count < 1) {
        throw std::invalid_argument("t_contribution: sample_count must be >= 1");
    }
    return (kld_sum / static_cast<double>(sample_count)) * c_local;
}

ClientRoundResult local_round(ClientState& client, const MlpModel& global_model,
                              const ParamVector& c_global,
                              const RoundOptions& opts, int round_index) {
    const int n = static_cast<int>(client.train.size());
    if (n == 0) {
        throw std::invalid_argument("local_round: empty dataset for client " +
                                    std::to_string(client.id));
    }
    require_same_length(c_global, global_model.params, "local_round");

    // Broadcast: start the pass from the previous global model, which also
    // serves as the frozen round-start reference.
    client.model = global_model;

    const bool correct = opts.control_variates;
    ParamVector correction = correct
        ? ParamVector(c_global - client.c_local)
        : ParamVector(ParamVector::Zero(global_model.params.size()));

    // The divergence is needed for the dynamic weights (unless forced to 1)
    // and for the DALoss penalty.
    const bool need_kld = opts.daloss.enabled || (correct && !opts.unit_kld_weights);
    const int batch = std::max(1, opts.batch_size);

    ParamVector u_sum = ParamVector::Zero(global_model.params.size());
    ParamVector w_sum = ParamVector::Zero(global_model.params.size());
    double o_sum = 0.0;
    long units = 0;  // minibatch count; equals n for batch_size 1, one epoch

    for (int epoch = 0; epoch < std::max(1, opts.local_epochs); ++epoch) {
        const std::vector<int> order = shuffled_order(
            n, rng_key(opts.shuffle_seed, static_cast<std::uint64_t>(round_index),
                       static_cast<std::uint64_t>(client.id),
                       static_cast<std::uint64_t>(epoch)));
        for (int begin = 0; begin < n; begin += batch) {
            const int end = std::min(begin + batch, n);
            MinibatchGrad mb;
            mb.grad = ParamVector::Zero(global_model.params.size());
            if (opts.strict_u_at_round_start) {
                mb.grad_start = ParamVector::Zero(global_model.params.size());
            }
            for (int j = begin; j < end; ++j) {
                const Sample& sample = client.train[order[j]];
                const double pixel_divisor =
                    opts.kld_reduction == KldReduction::Mean
                        ? static_cast<double>(sample.mask.size())
                        : 1.0;

                LossSpec spec;
                spec.daloss = opts.daloss;
                spec.global_params = &global_model.params;
                spec.pixel_divisor = pixel_divisor;

                LogProbGrid p_global;
                if (need_kld) {
                    p_global = log_softmax(forward(global_model, sample.features));
                    const LogProbGrid p_local =
                        log_softmax(forward(client.model, sample.features));
                    spec.kld_value = kld(p_global, p_local, opts.kld_reduction);
                    spec.global_logprobs = &p_global.values;
                    mb.kld += spec.kld_value;
                }
                mb.grad += backward(client.model, sample.features, sample.mask, spec).grad;

                if (opts.strict_u_at_round_start) {
                    // Gradient evaluated literally at the round-start model;
                    // its divergence against the frozen global model is zero
                    // because the pass starts from the broadcast parameters.
                    LossSpec start_spec = spec;
                    start_spec.kld_value = 0.0;
                    mb.grad_start +=
                        backward(global_model, sample.features, sample.mask, start_spec)
                            .grad;
                }
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            mb.grad *= inv;
            mb.kld *= inv;
            if (opts.strict_u_at_round_start) mb.grad_start *= inv;

            u_sum += opts.strict_u_at_round_start ? mb.grad_start : mb.grad;
            w_sum += mb.grad;
            o_sum += opts.unit_kld_weights ? 1.0 : mb.kld;
            ++units;
            if (opts.grad_log != nullptr) opts.grad_log->push_back(mb.grad);

            // Working step: corrected SGD at the local step size.
            client.model.params -= client.eta_local * (mb.grad + correction);
        }
    }

    // Corrected aggregate update from the round-start parameters, then the
    // control-variable refresh and the weighted contribution.
    const ParamVector u = client.eta_local * (u_sum + correction);
    client.model.params = global_model.params - u / static_cast<double>(units);

    ClientRoundResult result;
    result.client_id = client.id;
    result.sample_count = n;
    result.kld_sum = o_sum;
    if (correct) {
        client.c_local = w_sum / static_cast<double>(units);
        result.t_contrib = t_contribution(client.c_local, o_sum, units);
    } else {
        result.t_contrib = ParamVector::Zero(global_model.params.size());
    }
    result.params = client.model.params;

    if (!all_finite(result.params) || !all_finite(result.t_contrib)) {
        throw NumericError("local_round: non-finite update for client " +
                           std::to_string(client.id));
    }
    return result;
}

void server_update_feddwa(ServerState& server,
                          const std::vector<ClientRoundResult>& results,
                          bool literal_eq9) {
    const std::size_t m = results.size();
    if (m == 0) throw std::invalid_argument("server_update_feddwa: zero clients");

    ParamVector t_sum = ParamVector::Zero(server.c_global.size());
    ParamVector diff_sum = ParamVector::Zero(server.model.params.size());
    for (const ClientRoundResult& r : results) {
        require_same_length(r.params, server.model.params, "server_update_feddwa");
        t_sum += r.t_contrib;
        if (literal_eq9) {
            diff_sum += server.model.params - r.params;
        } else {
            diff_sum += r.params - server.model.params;
        }
    }
    server.c_global += t_sum / static_cast<double>(m);
    server.model.params += (server.eta_global / static_cast<double>(m)) * diff_sum;
    server.round += 1;
}

void server_update_fedavg(ServerState& server,
                          const std::vector<ClientRoundResult>& results) {
    if (results.empty()) throw std::invalid_argument("server_update_fedavg: zero clients");
    double total = 0.0;
    for (const ClientRoundResult& r : results) total += static_cast<double>(r.sample_count);
    ParamVector avg = ParamVector::Zero(server.model.params.size());
    for (const ClientRoundResult& r : results) {
        require_same_length(r.params, server.model.params, "server_update_fedavg");
        avg += (static_cast<double>(r.sample_count) / total) * r.params;
    }
    server.model.params = avg;
    server.round += 1;
}

std::vector<ClientRoundResult> run_round(ServerState& server,
                                         std::vector<ClientState>& clients,
                                         Algorithm algo,
                                         const RoundOptions& opts) {
    const MlpModel global_snapshot = server.model;
    const ParamVector c_global_snapshot = server.c_global;
    const int round_index = server.round;

    // Local rounds are independent: run them concurrently, collect in id
    // order so aggregation is deterministic.
    std::vector<std::future<ClientRoundResult>> futures;
    std::vector<ClientState*> participants;
    for (ClientState& client : clients) {
        if (client.train.empty()) {
            std::cerr << "warning: client " << client.id
                      << " has no training samples; skipped this round\n";
            continue;
        }
        participants.push_back(&client);
    }
    futures.reserve(participants.size());
    for (ClientState* client : participants) {
        futures.push_back(std::async(std::launch::async, [&, client] {
            return local_round(*client, global_snapshot, c_global_snapshot, opts,
                               round_index);
        }));
    }

    std::vector<ClientRoundResult> results;
    results.reserve(futures.size());
    try {
        for (auto& f : futures) results.push_back(f.get());
    } catch (const NumericError& e) {
        // Drain remaining futures before rethrowing with round context.
        for (auto& f : futures) {
            if (f.valid()) {
                try { f.get(); } catch (...) {}
            }
        }
        throw NumericError("round " + std::to_string(round_index + 1) + ": " + e.what());
    }

    if (algo == Algorithm::FedAvg) {
        server_update_fedavg(server, results);
    } else {
        server_update_feddwa(server, results, opts.literal_eq9);
    }
    if (!all_finite(server.model.params) || !all_finite(server.c_global)) {
        throw NumericError("round " + std::to_string(server.round) +
                           ": non-finite global state after aggregation");
    }

    if (server.lr_decay.period > 0 && server.round % server.lr_decay.period == 0) {
        for (ClientState& client : clients) client.eta_local *= server.lr_decay.factor;
    }
    return results;
}

RoundReport evaluate_model(const MlpModel& model,
                           const std::vector<Sample>& test_set, int round,
                           int client_id, EvalScope scope) {
    if (test_set.empty()) {
        throw std::invalid_argument("evaluate_model: empty test set");
    }
    const int k = model.num_classes();
    ConfusionCounts counts(k);
    double loss = 0.0;
    for (const Sample& sample : test_set) {
        const Eigen::MatrixXd logits = forward(model, sample.features);
        loss += cross_entropy(logits, sample.mask).loss;
        counts.add(confusion(argmax_mask(logits), sample.mask, k));
    }
    const IouResult scores = iou(counts);
    RoundReport report;
    report.round = round;
    report.client_id = client_id;
    report.scope = scope;
    report.loss = loss / static_cast<double>(test_set.size());
    report.iou_per_class = scores.per_class;
    report.mean_iou = scores.mean;
    return report;
}

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
    validate(cfg);

    ExperimentSetup setup;
    const std::vector<int> sizes = cfg.layer_sizes();

    setup.server.model = MlpModel::glorot(sizes, cfg.seeds.init);
    setup.server.c_global = ParamVector::Zero(setup.server.model.params.size());
    setup.server.eta_global = cfg.eta_global;
    setup.server.lr_decay = cfg.lr_decay;

    for (const ClientProfile& profile : cfg.resolved_clients()) {
        ClientDataset data = generate_client_dataset(profile, cfg.geometry);
        ClientState client;
        client.id = profile.client_id;
        client.train = std::move(data.train);
        client.test = std::move(data.test);
        client.model = MlpModel::zeros(sizes);
        client.c_local = ParamVector::Zero(setup.server.model.params.size());
        client.eta_local = cfg.eta_local;
        setup.clients.push_back(std::move(client));
    }

    RoundOptions& opts = setup.options;
    opts.daloss = cfg.daloss;
    opts.control_variates = cfg.algorithm != Algorithm::FedAvg;
    opts.unit_kld_weights = cfg.algorithm != Algorithm::FedDwa;
    opts.strict_u_at_round_start = cfg.flags.strict_u_at_round_start;
    opts.literal_eq9 = cfg.flags.literal_eq9;
    opts.kld_reduction = cfg.flags.kld_reduction;
    opts.local_epochs = cfg.local_epochs;
    opts.batch_size = cfg.batch_size;
    opts.shuffle_seed = cfg.seeds.shuffle;
    return setup;
}

std::vector<RoundReport> run_experiment(const ExperimentConfig& cfg,
                                        const RoundCallback& on_round) {
    ExperimentSetup setup = prepare_experiment(cfg);
    std::vector<RoundReport> all_reports;
    for (int r = 1; r <= cfg.rounds; ++r) {
        run_round(setup.server, setup.clients, cfg.algorithm, setup.options);
        std::vector<RoundReport> round_reports;
        for (const ClientState& client : setup.clients) {
            if (client.test.empty()) continue;
            round_reports.push_back(evaluate_model(setup.server.model, client.test,
                                                   r, client.id,
                                                   EvalScope::GlobalOnClientTest));
            round_reports.push_back(evaluate_model(client.model, client.test, r,
                                                   client.id,
                                                   EvalScope::LocalOnClientTest));
        }
        if (on_round) on_round(r, round_reports, setup.server);
        all_reports.insert(all_reports.end(), round_reports.begin(),
                           round_reports.end());
    }
    return all_reports;
}

}  // namespace feddwa
