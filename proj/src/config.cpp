#include "feddwa/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace feddwa {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "fedavg") return Algorithm::FedAvg;
    if (name == "scaffold") return Algorithm::Scaffold;
    if (name == "feddwa") return Algorithm::FedDwa;
    throw ConfigError("algorithm: expected one of fedavg|scaffold|feddwa, got \"" +
                      name + "\"");
}

const char* to_string(Algorithm algo) {
    switch (algo) {
        case Algorithm::FedAvg: return "fedavg";
        case Algorithm::Scaffold: return "scaffold";
        case Algorithm::FedDwa: return "feddwa";
    }
    return "?";
}

namespace {

// Cursor over a JSON object that rejects unknown keys and reports every
// violation with its full field path.
class Fields {
public:
    Fields(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw ConfigError(path_ + ": expected an object");
        }
    }

    ~Fields() = default;

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError(join(key) + ": unknown field");
            }
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    int integer(const std::string& key, std::optional<int> fallback = {}) {
        const json* v = get(key);
        if (v == nullptr) return require_default(key, fallback);
        if (!v->is_number_integer()) throw ConfigError(join(key) + ": expected an integer");
        return v->get<int>();
    }

    std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
        const json* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_number_integer() ||
            (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
            throw ConfigError(join(key) + ": expected a non-negative integer");
        }
        return v->get<std::uint64_t>();
    }

    double number(const std::string& key, std::optional<double> fallback = {}) {
        const json* v = get(key);
        if (v == nullptr) {
            if (!fallback) throw ConfigError(join(key) + ": missing required field");
            return *fallback;
        }
        if (!v->is_number()) throw ConfigError(join(key) + ": expected a number");
        return v->get<double>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = get(key);
        if (v == nullptr) return fallback;
        if (!v->is_boolean()) throw ConfigError(join(key) + ": expected a boolean");
        return v->get<bool>();
    }

    std::string text(const std::string& key, std::optional<std::string> fallback = {}) {
        const json* v = get(key);
        if (v == nullptr) {
            if (!fallback) throw ConfigError(join(key) + ": missing required field");
            return *fallback;
        }
        if (!v->is_string()) throw ConfigError(join(key) + ": expected a string");
        return v->get<std::string>();
    }

    std::string join(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    int require_default(const std::string& key, std::optional<int> fallback) const {
        if (!fallback) throw ConfigError(join(key) + ": missing required field");
        return *fallback;
    }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

ClientProfile parse_client(const json& node, const std::string& path, int classes) {
    Fields f(node, path);
    ClientProfile profile;
    profile.client_id = f.integer("id");
    profile.n_samples = f.integer("n_samples");
    if (profile.n_samples < 1) {
        throw ConfigError(f.join("n_samples") + ": must be >= 1");
    }
    if (const json* prior = f.get("class_prior")) {
        if (!prior->is_array()) {
            throw ConfigError(f.join("class_prior") + ": expected an array");
        }
        profile.class_prior.resize(static_cast<Eigen::Index>(prior->size()));
        for (std::size_t i = 0; i < prior->size(); ++i) {
            if (!(*prior)[i].is_number()) {
                throw ConfigError(f.join("class_prior") + "[" + std::to_string(i) +
                                  "]: expected a number");
            }
            profile.class_prior(static_cast<Eigen::Index>(i)) = (*prior)[i].get<double>();
        }
        if (profile.class_prior.size() != classes) {
            throw ConfigError(f.join("class_prior") + ": expected " +
                              std::to_string(classes) + " entries");
        }
    }
    profile.pose_angle = f.number("pose_angle", 0.0);
    if (const json* t = f.get("pose_translation")) {
        if (!t->is_array() || t->size() != 2 || !(*t)[0].is_number() || !(*t)[1].is_number()) {
            throw ConfigError(f.join("pose_translation") + ": expected [tx, ty]");
        }
        profile.pose_tx = (*t)[0].get<double>();
        profile.pose_ty = (*t)[1].get<double>();
    }
    profile.noise_sigma = f.number("noise_sigma", 0.0);
    profile.seed = f.u64("seed", static_cast<std::uint64_t>(profile.client_id));
    f.finish();
    return profile;
}

ExperimentConfig parse_json(const json& root) {
    Fields f(root, "");
    ExperimentConfig cfg;

    const std::string algo = f.text("algorithm");
    if (algo.empty()) throw ConfigError("algorithm: must not be empty");
    cfg.algorithm = algorithm_from_string(algo);

    cfg.rounds = f.integer("rounds");

    {
        const json* g = f.get("geometry");
        if (g == nullptr) throw ConfigError("geometry: missing required field");
        Fields gf(*g, "geometry");
        cfg.geometry.height = gf.integer("height");
        cfg.geometry.width = gf.integer("width");
        cfg.geometry.features = gf.integer("features");
        cfg.geometry.classes = gf.integer("classes");
        gf.finish();
    }

    if (const json* h = f.get("hidden_sizes")) {
        if (!h->is_array()) throw ConfigError("hidden_sizes: expected an array");
        for (std::size_t i = 0; i < h->size(); ++i) {
            if (!(*h)[i].is_number_integer()) {
                throw ConfigError("hidden_sizes[" + std::to_string(i) +
                                  "]: expected an integer");
            }
            cfg.hidden_sizes.push_back((*h)[i].get<int>());
        }
    } else {
        cfg.hidden_sizes = {16};
    }

    if (const json* d = f.get("daloss")) {
        Fields df(*d, "daloss");
        cfg.daloss.enabled = df.boolean("enabled", false);
        cfg.daloss.c = df.number("c", 0.1);
        cfg.daloss.kld_detached = df.boolean("kld_detached", true);
        df.finish();
    }

    cfg.eta_local = f.number("eta_local", 0.1);
    cfg.eta_global = f.number("eta_global", 1.0);

    if (const json* d = f.get("lr_decay")) {
        Fields df(*d, "lr_decay");
        cfg.lr_decay.factor = df.number("factor", 0.5);
        cfg.lr_decay.period = df.integer("period", 20);
        df.finish();
    }

    if (const json* s = f.get("seeds")) {
        Fields sf(*s, "seeds");
        cfg.seeds.data = sf.u64("data", 1);
        cfg.seeds.init = sf.u64("init", 2);
        cfg.seeds.shuffle = sf.u64("shuffle", 3);
        sf.finish();
    }

    if (const json* fl = f.get("flags")) {
        Fields ff(*fl, "flags");
        cfg.flags.literal_eq9 = ff.boolean("literal_eq9", false);
        cfg.flags.strict_u_at_round_start = ff.boolean("strict_u_at_round_start", false);
        const std::string red = ff.text("kld_reduction", std::string("mean"));
        if (red == "mean") {
            cfg.flags.kld_reduction = KldReduction::Mean;
        } else if (red == "sum") {
            cfg.flags.kld_reduction = KldReduction::Sum;
        } else {
            throw ConfigError("flags.kld_reduction: expected \"mean\" or \"sum\"");
        }
        ff.finish();
    }

    cfg.local_epochs = f.integer("local_epochs", 1);
    cfg.batch_size = f.integer("batch_size", 1);

    {
        const json* c = f.get("clients");
        if (c == nullptr) throw ConfigError("clients: missing required field");
        if (!c->is_array() || c->empty()) {
            throw ConfigError("clients: expected a non-empty array");
        }
        for (std::size_t i = 0; i < c->size(); ++i) {
            cfg.clients.push_back(parse_client(
                (*c)[i], "clients[" + std::to_string(i) + "]", cfg.geometry.classes));
        }
    }

    if (f.has("dirichlet_alpha")) {
        cfg.dirichlet_alpha = f.number("dirichlet_alpha");
    }
    cfg.checkpoint_period = f.integer("checkpoint_period", 0);
    cfg.output_dir = f.text("output_dir", std::string("out"));
    f.finish();

    validate(cfg);
    return cfg;
}

}  // namespace

std::vector<int> ExperimentConfig::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(geometry.features);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(geometry.classes);
    return sizes;
}

std::vector<ClientProfile> ExperimentConfig::resolved_clients() const {
    std::vector<ClientProfile> profiles = clients;
    std::sort(profiles.begin(), profiles.end(),
              [](const ClientProfile& a, const ClientProfile& b) {
                  return a.client_id < b.client_id;
              });
    if (dirichlet_alpha) {
        const std::vector<Eigen::VectorXd> priors =
            dirichlet_priors(*dirichlet_alpha, geometry.classes,
                             static_cast<int>(profiles.size()), seeds.data);
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            profiles[i].class_prior = priors[i];
        }
    }
    return profiles;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.rounds < 1) throw ConfigError("rounds: must be >= 1");
    const Geometry& g = cfg.geometry;
    if (g.height < 1) throw ConfigError("geometry.height: must be >= 1");
    if (g.width < 1) throw ConfigError("geometry.width: must be >= 1");
    if (g.features < 1) throw ConfigError("geometry.features: must be >= 1");
    if (g.classes < 2) throw ConfigError("geometry.classes: must be >= 2");
    for (std::size_t i = 0; i < cfg.hidden_sizes.size(); ++i) {
        if (cfg.hidden_sizes[i] < 1) {
            throw ConfigError("hidden_sizes[" + std::to_string(i) + "]: must be >= 1");
        }
    }
    if (cfg.daloss.c < 0.0) throw ConfigError("daloss.c: must be >= 0");
    if (!(cfg.eta_local > 0.0)) throw ConfigError("eta_local: must be > 0");
    if (cfg.eta_global < 0.0) throw ConfigError("eta_global: must be >= 0");
    if (!(cfg.lr_decay.factor > 0.0) || cfg.lr_decay.factor > 1.0) {
        throw ConfigError("lr_decay.factor: must be in (0, 1]");
    }
    if (cfg.lr_decay.period < 0) throw ConfigError("lr_decay.period: must be >= 0");
    if (cfg.local_epochs < 1) throw ConfigError("local_epochs: must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (cfg.clients.empty()) throw ConfigError("clients: must not be empty");
    if (cfg.dirichlet_alpha && !(*cfg.dirichlet_alpha > 0.0)) {
        throw ConfigError("dirichlet_alpha: must be > 0");
    }
    if (cfg.checkpoint_period < 0) {
        throw ConfigError("checkpoint_period: must be >= 0");
    }
    if (cfg.output_dir.empty()) throw ConfigError("output_dir: must not be empty");

    std::set<int> ids;
    for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
        const ClientProfile& c = cfg.clients[i];
        const std::string path = "clients[" + std::to_string(i) + "]";
        if (!ids.insert(c.client_id).second) {
            throw ConfigError(path + ".id: duplicate client id " +
                              std::to_string(c.client_id));
        }
        if (c.n_samples < 1) throw ConfigError(path + ".n_samples: must be >= 1");
        if (c.noise_sigma < 0.0) throw ConfigError(path + ".noise_sigma: must be >= 0");
        if (!cfg.dirichlet_alpha) {
            if (c.class_prior.size() == 0) {
                throw ConfigError(path + ".class_prior: required unless dirichlet_alpha is set");
            }
            if (c.class_prior.size() != g.classes) {
                throw ConfigError(path + ".class_prior: expected " +
                                  std::to_string(g.classes) + " entries");
            }
            if ((c.class_prior.array() < 0.0).any()) {
                throw ConfigError(path + ".class_prior: entries must be >= 0");
            }
            if (std::abs(c.class_prior.sum() - 1.0) > 1e-9) {
                throw ConfigError(path + ".class_prior: must sum to 1");
            }
        }
    }
}

ExperimentConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_json(root);
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string config_echo_json(const ExperimentConfig& cfg) {
    ordered_json root;
    root["algorithm"] = to_string(cfg.algorithm);
    root["rounds"] = cfg.rounds;
    root["geometry"] = {{"height", cfg.geometry.height},
                        {"width", cfg.geometry.width},
                        {"features", cfg.geometry.features},
                        {"classes", cfg.geometry.classes}};
    root["hidden_sizes"] = cfg.hidden_sizes;
    root["daloss"] = {{"enabled", cfg.daloss.enabled},
                      {"c", cfg.daloss.c},
                      {"kld_detached", cfg.daloss.kld_detached}};
    root["eta_local"] = cfg.eta_local;
    root["eta_global"] = cfg.eta_global;
    root["lr_decay"] = {{"factor", cfg.lr_decay.factor}, {"period", cfg.lr_decay.period}};
    root["seeds"] = {{"data", cfg.seeds.data},
                     {"init", cfg.seeds.init},
                     {"shuffle", cfg.seeds.shuffle}};
    root["flags"] = {{"literal_eq9", cfg.flags.literal_eq9},
                     {"strict_u_at_round_start", cfg.flags.strict_u_at_round_start},
                     {"kld_reduction",
                      cfg.flags.kld_reduction == KldReduction::Mean ? "mean" : "sum"}};
    root["local_epochs"] = cfg.local_epochs;
    root["batch_size"] = cfg.batch_size;
    ordered_json clients = ordered_json::array();
    for (const ClientProfile& c : cfg.clients) {
        ordered_json jc;
        jc["id"] = c.client_id;
        jc["n_samples"] = c.n_samples;
        if (c.class_prior.size() > 0) {
            jc["class_prior"] =
                std::vector<double>(c.class_prior.data(),
                                    c.class_prior.data() + c.class_prior.size());
        }
        jc["pose_angle"] = c.pose_angle;
        jc["pose_translation"] = {c.pose_tx, c.pose_ty};
        jc["noise_sigma"] = c.noise_sigma;
        jc["seed"] = c.seed;
        clients.push_back(jc);
    }
    root["clients"] = clients;
    if (cfg.dirichlet_alpha) root["dirichlet_alpha"] = *cfg.dirichlet_alpha;
    root["checkpoint_period"] = cfg.checkpoint_period;
    root["output_dir"] = cfg.output_dir;
    return root.dump(2);
}

}  // namespace feddwa
