#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "symdyn/loop.hpp"

namespace symdyn::cli {

// Invalid configuration or usage; mapped to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schedule constants live under "mbpo" with their loop names
// (N, n, M, k, q, G, warmup, eval_every, eval_episodes, stop_return);
// component settings under "sac", "sr" and "neural". Unknown keys are
// rejected with a field-level message.
mbpo::RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const mbpo::RunConfig& cfg);

nlohmann::json load_config_file(const std::string& path);

// Applies one dotted override like "mbpo.k=2" or "sac.lr=1e-4"; the value is
// parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Fills schedule fields that the user left unset with per-environment
// defaults (n = one episode, G = n, M = 2n).
void apply_env_defaults(nlohmann::json& j);

}  // namespace symdyn::cli
