#pragma once

#include <json.hpp>

#include "fedvi/env.hpp"
#include "fedvi/harness.hpp"
#include "fedvi/mdp.hpp"

namespace fedvi {

// MDP wire format: {H, S, A, start_state, kernel[h][s][a][s'], reward[h][s][a]}.
nlohmann::json mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const nlohmann::json& j);

// Fleet wire format: {M, eps_p, eps_r, common, individual_kernels, agent_rewards}.
nlohmann::json fleet_to_json(const Fleet& fleet);
Fleet fleet_from_json(const nlohmann::json& j);

// Experiment config keys mirror the documented field names exactly:
// env, S, A, H, M, T, eps_p, eps_r, delta, algorithm, seed, sync_strict,
// output_path. Unknown keys are rejected; malformed values raise ConfigError
// naming the field.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// Sweep file: the base config keys plus eps_p_values, M_values, seeds.
SweepSpec sweep_from_json(const nlohmann::json& j);

// File loaders; unreadable files raise IoError, malformed content ConfigError.
ExperimentConfig load_config(const std::string& path);
SweepSpec load_sweep(const std::string& path);

const char* to_string(EnvKind env);
const char* to_string(AlgorithmKind algorithm);
EnvKind env_from_string(const std::string& name);
AlgorithmKind algorithm_from_string(const std::string& name);

}  // namespace fedvi
