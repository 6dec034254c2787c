#include "fedvi/serialize.hpp"

#include <fstream>
#include <set>

#include "fedvi/errors.hpp"

namespace fedvi {

using nlohmann::json;

namespace {

json array3_to_json(const Array3<double>& t) {
    json out = json::array();
    for (int i = 0; i < t.dim0(); ++i) {
        json ji = json::array();
        for (int j = 0; j < t.dim1(); ++j)
            ji.push_back(json(std::vector<double>(t.row(i, j).begin(), t.row(i, j).end())));
        out.push_back(std::move(ji));
    }
    return out;
}

json array4_to_json(const Array4<double>& t) {
    json out = json::array();
    for (int i = 0; i < t.dim0(); ++i) {
        json ji = json::array();
        for (int j = 0; j < t.dim1(); ++j) {
            json jj = json::array();
            for (int k = 0; k < t.dim2(); ++k)
                jj.push_back(
                    json(std::vector<double>(t.row(i, j, k).begin(), t.row(i, j, k).end())));
            ji.push_back(std::move(jj));
        }
        out.push_back(std::move(ji));
    }
    return out;
}

Array3<double> array3_from_json(const json& j, int d0, int d1, int d2, const char* what) {
    Array3<double> t(d0, d1, d2, 0.0);
    if (static_cast<int>(j.size()) != d0) throw ConfigError(std::string(what) + ": bad shape");
    for (int i = 0; i < d0; ++i) {
        if (static_cast<int>(j[i].size()) != d1)
            throw ConfigError(std::string(what) + ": bad shape");
        for (int k = 0; k < d1; ++k) {
            const auto& row = j[i][k];
            if (static_cast<int>(row.size()) != d2)
                throw ConfigError(std::string(what) + ": bad shape");
            for (int l = 0; l < d2; ++l) t(i, k, l) = row[l].get<double>();
        }
    }
    return t;
}

Array4<double> array4_from_json(const json& j, int d0, int d1, int d2, int d3,
                                const char* what) {
    Array4<double> t(d0, d1, d2, d3, 0.0);
    if (static_cast<int>(j.size()) != d0) throw ConfigError(std::string(what) + ": bad shape");
    for (int i = 0; i < d0; ++i) {
        if (static_cast<int>(j[i].size()) != d1)
            throw ConfigError(std::string(what) + ": bad shape");
        for (int k = 0; k < d1; ++k) {
            if (static_cast<int>(j[i][k].size()) != d2)
                throw ConfigError(std::string(what) + ": bad shape");
            for (int l = 0; l < d2; ++l) {
                const auto& row = j[i][k][l];
                if (static_cast<int>(row.size()) != d3)
                    throw ConfigError(std::string(what) + ": bad shape");
                for (int m = 0; m < d3; ++m) t(i, k, l, m) = row[m].get<double>();
            }
        }
    }
    return t;
}

template <typename T>
T get_field(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing config field ") + key);
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field ") + key + " has the wrong type");
    }
}

template <typename T>
T get_field_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field ") + key + " has the wrong type");
    }
}

}  // namespace

const char* to_string(EnvKind env) {
    switch (env) {
        case EnvKind::gridworld: return "gridworld";
        case EnvKind::synthetic: return "synthetic";
        case EnvKind::lower_bound: return "lower_bound";
    }
    return "?";
}

const char* to_string(AlgorithmKind algorithm) {
    return algorithm == AlgorithmKind::fed_ucbvi ? "fed_ucbvi" : "concurrent_ucbvi";
}

EnvKind env_from_string(const std::string& name) {
    if (name == "gridworld") return EnvKind::gridworld;
    if (name == "synthetic") return EnvKind::synthetic;
    if (name == "lower_bound") return EnvKind::lower_bound;
    throw ConfigError("config field env must be gridworld, synthetic or lower_bound, got '" +
                      name + "'");
}

AlgorithmKind algorithm_from_string(const std::string& name) {
    if (name == "fed_ucbvi") return AlgorithmKind::fed_ucbvi;
    if (name == "concurrent_ucbvi") return AlgorithmKind::concurrent_ucbvi;
    throw ConfigError(
        "config field algorithm must be fed_ucbvi or concurrent_ucbvi, got '" + name + "'");
}

json mdp_to_json(const TabularMDP& mdp) {
    return json{{"H", mdp.horizon},          {"S", mdp.n_states},
                {"A", mdp.n_actions},        {"start_state", mdp.start_state},
                {"kernel", array4_to_json(mdp.kernel)},
                {"reward", array3_to_json(mdp.reward)}};
}

TabularMDP mdp_from_json(const json& j) {
    TabularMDP mdp;
    mdp.horizon = get_field<int>(j, "H");
    mdp.n_states = get_field<int>(j, "S");
    mdp.n_actions = get_field<int>(j, "A");
    mdp.start_state = get_field<int>(j, "start_state");
    if (mdp.horizon < 1 || mdp.n_states < 1 || mdp.n_actions < 1)
        throw ConfigError("MDP dimensions must be positive");
    mdp.kernel = array4_from_json(get_field<json>(j, "kernel"), mdp.horizon, mdp.n_states,
                                  mdp.n_actions, mdp.n_states, "kernel");
    mdp.reward = array3_from_json(get_field<json>(j, "reward"), mdp.horizon, mdp.n_states,
                                  mdp.n_actions, "reward");
    require_valid(mdp);
    return mdp;
}

json fleet_to_json(const Fleet& fleet) {
    json kernels = json::array();
    for (const auto& ker : fleet.individual_kernels) kernels.push_back(array4_to_json(ker));
    json rewards = json::array();
    for (const auto& rew : fleet.agent_rewards) rewards.push_back(array3_to_json(rew));
    return json{{"M", fleet.n_agents},
                {"eps_p", fleet.eps_p},
                {"eps_r", fleet.eps_r},
                {"common", mdp_to_json(fleet.common)},
                {"individual_kernels", std::move(kernels)},
                {"agent_rewards", std::move(rewards)}};
}

Fleet fleet_from_json(const json& j) {
    Fleet fleet;
    fleet.n_agents = get_field<int>(j, "M");
    fleet.eps_p = get_field<double>(j, "eps_p");
    fleet.eps_r = get_field<double>(j, "eps_r");
    fleet.common = mdp_from_json(get_field<json>(j, "common"));
    const json kernels = get_field<json>(j, "individual_kernels");
    const json rewards = get_field<json>(j, "agent_rewards");
    if (static_cast<int>(kernels.size()) != fleet.n_agents ||
        static_cast<int>(rewards.size()) != fleet.n_agents)
        throw ConfigError("per-agent table count does not match M");
    const int H = fleet.common.horizon, S = fleet.common.n_states, A = fleet.common.n_actions;
    for (int i = 0; i < fleet.n_agents; ++i) {
        fleet.individual_kernels.push_back(
            array4_from_json(kernels[i], H, S, A, S, "individual_kernels"));
        fleet.agent_rewards.push_back(array3_from_json(rewards[i], H, S, A, "agent_rewards"));
    }
    require_valid(fleet);
    return fleet;
}

json config_to_json(const ExperimentConfig& cfg) {
    return json{{"env", to_string(cfg.env)},
                {"S", cfg.n_states},
                {"A", cfg.n_actions},
                {"H", cfg.horizon},
                {"M", cfg.n_agents},
                {"T", cfg.episode_budget},
                {"eps_p", cfg.eps_p},
                {"eps_r", cfg.eps_r},
                {"delta", cfg.delta},
                {"algorithm", to_string(cfg.algorithm)},
                {"seed", cfg.seed},
                {"sync_strict", cfg.sync_strict},
                {"output_path", cfg.output_path}};
}

namespace {

ExperimentConfig config_from_json_impl(const json& j, const std::set<std::string>& extra_keys) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known = {"env",   "S",     "A",        "H",
                                                "M",     "T",     "eps_p",    "eps_r",
                                                "delta", "seed",  "algorithm", "sync_strict",
                                                "output_path"};
    for (const auto& item : j.items())
        if (!known.count(item.key()) && !extra_keys.count(item.key()))
            throw ConfigError("unknown config field " + item.key());

    ExperimentConfig cfg;
    cfg.env = env_from_string(get_field_or<std::string>(j, "env", "synthetic"));
    cfg.n_states = get_field_or<int>(j, "S", cfg.n_states);
    cfg.n_actions = get_field_or<int>(j, "A", cfg.n_actions);
    cfg.horizon = get_field_or<int>(j, "H", cfg.env == EnvKind::gridworld ? 10 : cfg.horizon);
    cfg.n_agents = get_field_or<int>(j, "M", cfg.n_agents);
    cfg.episode_budget = get_field_or<long long>(j, "T", cfg.episode_budget);
    cfg.eps_p = get_field_or<double>(j, "eps_p", cfg.eps_p);
    cfg.eps_r = get_field_or<double>(j, "eps_r", cfg.eps_r);
    cfg.delta = get_field_or<double>(j, "delta", cfg.delta);
    cfg.algorithm =
        algorithm_from_string(get_field_or<std::string>(j, "algorithm", "fed_ucbvi"));
    cfg.seed = get_field_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.sync_strict = get_field_or<bool>(j, "sync_strict", cfg.sync_strict);
    cfg.output_path = get_field_or<std::string>(j, "output_path", cfg.output_path);
    validate_config(cfg);
    return cfg;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) { return config_from_json_impl(j, {}); }

SweepSpec sweep_from_json(const json& j) {
    SweepSpec spec;
    spec.base = config_from_json_impl(j, {"eps_p_values", "M_values", "seeds"});
    spec.eps_p_values = get_field<std::vector<double>>(j, "eps_p_values");
    spec.m_values = get_field<std::vector<int>>(j, "M_values");
    spec.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds");
    if (spec.eps_p_values.empty() || spec.m_values.empty() || spec.seeds.empty())
        throw ConfigError("sweep lists eps_p_values, M_values and seeds must be nonempty");
    for (double eps : spec.eps_p_values)
        if (!(eps >= 0.0 && eps < 1.0))
            throw ConfigError("config field eps_p_values must lie in [0, 1)");
    for (int m : spec.m_values)
        if (m < 1) throw ConfigError("config field M_values must be at least 1");
    return spec;
}

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    return config_from_json(parse_file(path));
}

SweepSpec load_sweep(const std::string& path) { return sweep_from_json(parse_file(path)); }

}  // namespace fedvi
