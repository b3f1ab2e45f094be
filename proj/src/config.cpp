#include "symdyn/config.hpp"

#include <fstream>
#include <map>

#include "symdyn/expr.hpp"

namespace symdyn::cli {

using nlohmann::json;

namespace {

const std::map<std::string, expr::Op>& token_names() {
  static const std::map<std::string, expr::Op> names = {
      {"add", expr::Op::Add},   {"sub", expr::Op::Sub},
      {"mul", expr::Op::Mul},   {"div", expr::Op::Div},
      {"abs", expr::Op::Abs},   {"inv", expr::Op::Inv},
      {"sqrt", expr::Op::Sqrt}, {"log", expr::Op::Log},
      {"exp", expr::Op::Exp},   {"sin", expr::Op::Sin},
      {"cos", expr::Op::Cos},   {"asin", expr::Op::Asin},
      {"acos", expr::Op::Acos}, {"tan", expr::Op::Tan},
      {"atan", expr::Op::Atan}, {"clip", expr::Op::Clip},
      {"trunc", expr::Op::Trunc}, {"pow", expr::Op::Pow}};
  return names;
}

template <typename T>
void read_field(const json& j, const std::string& section,
                const std::string& key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::string& section,
                    const std::vector<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ConfigError("unknown config key '" +
                        (section.empty() ? it.key() : section + "." + it.key()) +
                        "'");
  }
}

}  // namespace

mbpo::RunConfig config_from_json(const json& j) {
  mbpo::RunConfig cfg;
  reject_unknown(j, "", {"env", "model", "seed", "mbpo", "sac", "sr", "neural"});
  read_field(j, "", "env", cfg.env_name);
  read_field(j, "", "model", cfg.model_kind);
  read_field(j, "", "seed", cfg.seed);

  if (j.contains("mbpo")) {
    const json& m = j.at("mbpo");
    reject_unknown(m, "mbpo",
                   {"N", "n", "M", "k", "q", "G", "warmup", "eval_every",
                    "eval_episodes", "stop_return"});
    read_field(m, "mbpo", "N", cfg.epochs);
    read_field(m, "mbpo", "n", cfg.steps_per_epoch);
    read_field(m, "mbpo", "M", cfg.rollouts_per_epoch);
    read_field(m, "mbpo", "k", cfg.rollout_len);
    read_field(m, "mbpo", "q", cfg.init_chunk);
    read_field(m, "mbpo", "G", cfg.grad_updates);
    read_field(m, "mbpo", "warmup", cfg.warmup_steps);
    read_field(m, "mbpo", "eval_every", cfg.eval_every);
    read_field(m, "mbpo", "eval_episodes", cfg.eval_episodes);
    if (m.contains("stop_return") && !m.at("stop_return").is_null()) {
      real v = 0.0;
      read_field(m, "mbpo", "stop_return", v);
      cfg.stop_return = v;
    }
  }
  if (j.contains("sac")) {
    const json& s = j.at("sac");
    reject_unknown(s, "sac",
                   {"lr", "batch", "gamma", "tau", "hidden", "depth", "capacity"});
    read_field(s, "sac", "lr", cfg.sac.lr);
    read_field(s, "sac", "batch", cfg.sac.batch);
    read_field(s, "sac", "gamma", cfg.sac.gamma);
    read_field(s, "sac", "tau", cfg.sac.tau);
    read_field(s, "sac", "hidden", cfg.sac.hidden);
    read_field(s, "sac", "depth", cfg.sac.depth);
    read_field(s, "sac", "capacity", cfg.sac.buffer_capacity);
  }
  if (j.contains("sr")) {
    const json& s = j.at("sr");
    reject_unknown(s, "sr",
                   {"max_nodes", "n_candidates", "population", "generations",
                    "tournament", "p_crossover", "p_mutate", "polish",
                    "subsample", "weights"});
    auto& g = cfg.sr.generator;
    read_field(s, "sr", "max_nodes", g.max_nodes);
    read_field(s, "sr", "n_candidates", g.n_candidates);
    read_field(s, "sr", "population", g.population);
    read_field(s, "sr", "generations", g.generations);
    read_field(s, "sr", "tournament", g.tournament_size);
    read_field(s, "sr", "p_crossover", g.p_crossover);
    read_field(s, "sr", "p_mutate", g.p_mutate);
    read_field(s, "sr", "polish", g.polish_top);
    read_field(s, "sr", "subsample", cfg.sr.subsample);
    if (s.contains("weights")) {
      const json& w = s.at("weights");
      for (auto it = w.begin(); it != w.end(); ++it) {
        const auto& names = token_names();
        const auto found = names.find(it.key());
        if (found == names.end())
          throw ConfigError("sr.weights: unknown token '" + it.key() + "'");
        g.op_weights[static_cast<std::size_t>(found->second)] =
            it.value().get<real>();
      }
    }
  }
  if (j.contains("neural")) {
    const json& nj = j.at("neural");
    reject_unknown(nj, "neural", {"hidden", "passes", "batch", "lr"});
    read_field(nj, "neural", "hidden", cfg.neural.hidden);
    read_field(nj, "neural", "passes", cfg.neural.epochs_over_data);
    read_field(nj, "neural", "batch", cfg.neural.batch);
    read_field(nj, "neural", "lr", cfg.neural.lr);
  }

  const std::string err = cfg.validate();
  if (!err.empty()) throw ConfigError(err);
  return cfg;
}

json config_to_json(const mbpo::RunConfig& cfg) {
  json j;
  j["env"] = cfg.env_name;
  j["model"] = cfg.model_kind;
  j["seed"] = cfg.seed;
  j["mbpo"] = {{"N", cfg.epochs},
               {"n", cfg.steps_per_epoch},
               {"M", cfg.rollouts_per_epoch},
               {"k", cfg.rollout_len},
               {"q", cfg.init_chunk},
               {"G", cfg.grad_updates},
               {"warmup", cfg.warmup_steps},
               {"eval_every", cfg.eval_every},
               {"eval_episodes", cfg.eval_episodes}};
  if (cfg.stop_return) j["mbpo"]["stop_return"] = *cfg.stop_return;
  j["sac"] = {{"lr", cfg.sac.lr},         {"batch", cfg.sac.batch},
              {"gamma", cfg.sac.gamma},   {"tau", cfg.sac.tau},
              {"hidden", cfg.sac.hidden}, {"depth", cfg.sac.depth},
              {"capacity", cfg.sac.buffer_capacity}};
  const auto& g = cfg.sr.generator;
  j["sr"] = {{"max_nodes", g.max_nodes},
             {"n_candidates", g.n_candidates},
             {"population", g.population},
             {"generations", g.generations},
             {"tournament", g.tournament_size},
             {"p_crossover", g.p_crossover},
             {"p_mutate", g.p_mutate},
             {"polish", g.polish_top},
             {"subsample", cfg.sr.subsample}};
  j["neural"] = {{"hidden", cfg.neural.hidden},
                 {"passes", cfg.neural.epochs_over_data},
                 {"batch", cfg.neural.batch},
                 {"lr", cfg.neural.lr}};
  return j;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_override(json& j, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("--set: empty key in '" + path + "'");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

void apply_env_defaults(json& j) {
  const std::string env = j.value("env", "pendulum");
  json& m = j["mbpo"];
  json& sr = j["sr"];
  const auto set_default = [](json& obj, const char* key, json v) {
    if (!obj.contains(key)) obj[key] = std::move(v);
  };
  const std::string model = j.value("model", "symbolic");
  int n = 200;
  if (env == "reacher") n = 50;
  if (env == "car2d") n = 250;
  set_default(m, "n", n);
  // Model-based runs take several gradient steps per env step (the model
  // data is what makes that ratio safe); the model-free baseline keeps the
  // standard one update per env step.
  set_default(m, "G", model == "none" ? n : 5 * n);
  set_default(m, "M", 5 * n);
  // In-loop SR budget: the dynamics refit runs every epoch, so the search is
  // smaller than the standalone fit-sr default.
  set_default(sr, "population", 250);
  set_default(sr, "generations", 15);
}

}  // namespace symdyn::cli
