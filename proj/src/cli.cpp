#include "symdyn/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "symdyn/config.hpp"
#include "symdyn/dataio.hpp"
#include "symdyn/dynmodel.hpp"
#include "symdyn/loop.hpp"

namespace symdyn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef SYMDYN_REVISION
#define SYMDYN_REVISION "unknown"
#endif

namespace {

std::string output_root() {
  if (const char* dir = std::getenv("SYMDYN_RUN_DIR")) return dir;
  return "runs";
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

json build_config_json(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       const std::string& env, const std::string& model) {
  json j = config_path.empty() ? json::object() : load_config_file(config_path);
  if (!env.empty()) j["env"] = env;
  if (!model.empty()) j["model"] = model;
  for (const std::string& o : overrides) apply_override(j, o);
  apply_env_defaults(j);
  return j;
}

json metrics_to_json(const mbpo::EpochMetrics& m) {
  json j;
  j["epoch"] = m.epoch;
  j["env_steps"] = m.env_steps;
  if (m.evaluated) {
    j["eval_return_mean"] = m.eval_return_mean;
    j["eval_return_std"] = m.eval_return_std;
  }
  j["model_mse"] = m.model_mse;
  j["model_refit_failed"] = m.model_refit_failed;
  j["q1_loss"] = m.q1_loss;
  j["q2_loss"] = m.q2_loss;
  j["policy_loss"] = m.policy_loss;
  j["alpha"] = m.alpha;
  j["invalid_fallbacks"] = m.invalid_fallbacks;
  j["be_size"] = m.be_size;
  j["bpi_size"] = m.bpi_size;
  return j;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& env,
              const std::string& model, int n_seeds,
              const std::string& seed_list, std::string out_dir) {
  json base = build_config_json(config_path, overrides, env, model);

  std::vector<std::uint64_t> seeds;
  if (!seed_list.empty()) {
    std::size_t start = 0;
    while (start < seed_list.size()) {
      const std::size_t comma = seed_list.find(',', start);
      seeds.push_back(std::stoull(seed_list.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } else {
    for (int s = 0; s < n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (seeds.empty()) throw ConfigError("no seeds requested");

  // Validate before creating any output.
  base["seed"] = seeds.front();
  mbpo::RunConfig probe = config_from_json(base);

  if (out_dir.empty())
    out_dir = output_root() + "/" + timestamp() + "-" + probe.env_name + "-" +
              probe.model_kind;
  fs::create_directories(out_dir);

  json manifest;
  manifest["config"] = base;
  manifest["seeds"] = seeds;
  manifest["start_time"] = timestamp();
  manifest["revision"] = SYMDYN_REVISION;

  // Aggregate curve: env_steps -> per-seed eval returns.
  std::vector<std::vector<std::pair<long, real>>> curves;

  for (const std::uint64_t seed : seeds) {
    json j = base;
    j["seed"] = seed;
    const mbpo::RunConfig cfg = config_from_json(j);
    const std::string seed_dir = out_dir + "/seed_" + std::to_string(seed);
    fs::create_directories(seed_dir);
    manifest["outputs"]["seed_" + std::to_string(seed)] = seed_dir;

    std::string metrics_lines;
    std::vector<std::pair<long, real>> curve;
    const envs::EnvSpec spec = envs::make_env(cfg.env_name)->spec();

    const mbpo::EpochSink sink = [&](const mbpo::EpochMetrics& m,
                                     const dynmodel::DynamicsModel* mdl) {
      metrics_lines += metrics_to_json(m).dump();
      metrics_lines += '\n';
      if (m.evaluated) curve.emplace_back(m.env_steps, m.eval_return_mean);
      if (const auto* sym = dynamic_cast<const dynmodel::SymbolicDynamics*>(mdl)) {
        if (!sym->expressions().empty()) {
          char name[32];
          std::snprintf(name, sizeof(name), "epoch_%04d.tsv", m.epoch);
          sym->save(seed_dir + "/models/" + name, spec);
        }
      }
      std::printf("seed %llu epoch %d steps %ld%s\n",
                  static_cast<unsigned long long>(seed), m.epoch, m.env_steps,
                  m.evaluated
                      ? (" eval " + std::to_string(m.eval_return_mean)).c_str()
                      : "");
      std::fflush(stdout);
    };

    const mbpo::RunResult res = mbpo::run_training(cfg, sink);
    dataio::atomic_write(seed_dir + "/metrics.jsonl", metrics_lines);

    // Persist the last fitted symbolic model as the run artifact.
    const fs::path models_dir = fs::path(seed_dir) / "models";
    if (fs::exists(models_dir)) {
      fs::path last;
      for (const auto& entry : fs::directory_iterator(models_dir))
        if (last.empty() || entry.path().filename() > last.filename())
          last = entry.path();
      if (!last.empty())
        fs::copy_file(last, seed_dir + "/model_final.tsv",
                      fs::copy_options::overwrite_existing);
    }
    if (res.steps_to_stop)
      std::printf("seed %llu reached stop_return at %ld env steps\n",
                  static_cast<unsigned long long>(seed), *res.steps_to_stop);
    curves.push_back(std::move(curve));
  }

  // Mean/std across seeds at shared checkpoints.
  std::string agg = "env_steps,mean,std\n";
  if (!curves.empty()) {
    std::size_t n_points = curves.front().size();
    for (const auto& c : curves) n_points = std::min(n_points, c.size());
    for (std::size_t i = 0; i < n_points; ++i) {
      real mean = 0.0;
      for (const auto& c : curves) mean += c[i].second;
      mean /= static_cast<real>(curves.size());
      real var = 0.0;
      for (const auto& c : curves)
        var += (c[i].second - mean) * (c[i].second - mean);
      const real stddev = std::sqrt(var / static_cast<real>(curves.size()));
      agg += std::to_string(curves.front()[i].first) + "," +
             dataio::format_real(mean) + "," + dataio::format_real(stddev) + "\n";
    }
  }
  dataio::atomic_write(out_dir + "/aggregate.csv", agg);
  dataio::atomic_write(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::printf("run directory: %s\n", out_dir.c_str());
  return 0;
}

int cmd_collect(const std::string& env_name, int n_traj, int traj_len,
                std::uint64_t seed, const std::string& out_path) {
  auto env = envs::make_env(env_name);
  Rng rng = make_rng(seed, 0xc011ec7);
  const auto transitions =
      envs::collect_exploration_dataset(*env, n_traj, traj_len, rng);
  dataio::atomic_write(out_path,
                       dataio::transitions_to_csv(env->spec(), transitions));
  std::printf("wrote %zu transitions to %s\n", transitions.size(),
              out_path.c_str());
  return 0;
}

int cmd_fit_sr(const std::string& data_path, const std::string& target,
               const std::string& config_path,
               const std::vector<std::string>& overrides, std::uint64_t seed,
               const std::string& out_dir) {
  json j = config_path.empty() ? json::object() : load_config_file(config_path);
  for (const std::string& o : overrides) apply_override(j, o);
  j["seed"] = seed;
  apply_env_defaults(j);
  // The standalone fit keeps the full search budget unless overridden.
  mbpo::RunConfig cfg = config_from_json(j);
  srgen::GeneratorConfig gcfg = cfg.sr.generator;
  if (!j["sr"].contains("population") || j["sr"]["population"].is_null())
    gcfg.population = srgen::GeneratorConfig{}.population;
  if (!j["sr"].contains("generations"))
    gcfg.generations = srgen::GeneratorConfig{}.generations;
  gcfg = [&] {  // re-apply explicit overrides on top of standalone defaults
    srgen::GeneratorConfig g = gcfg;
    if (j["sr"].contains("population"))
      g.population = j["sr"]["population"].get<int>();
    if (j["sr"].contains("generations"))
      g.generations = j["sr"]["generations"].get<int>();
    return g;
  }();
  gcfg.seed = seed;

  const dataio::Csv csv = dataio::read_csv(data_path);
  fitopt::Dataset data = dataio::dataset_from_csv(csv, target);
  Rng sub_rng = make_rng(seed, 0x5ab5a);
  data = srgen::subsample(data, cfg.sr.subsample, sub_rng);

  srgen::GpGenerator gen(gcfg);
  const srgen::DimensionFit fit = srgen::fit_dimension(data, gen, gcfg);

  std::printf("expression: %s\n", expr::to_string(fit.tree).c_str());
  std::printf("held-out mse: %.6g  r2: %.6g  (n_valid %ld)\n", fit.report.mse,
              fit.report.r2, fit.report.n_valid);
  std::string table = "candidate,nodes,r2_before,r2_after,mse_before,mse_after\n";
  for (std::size_t i = 0; i < fit.r2_before.size(); ++i) {
    table += std::to_string(i) + "," + std::to_string(fit.nodes[i]) + "," +
             dataio::format_real(fit.r2_before[i]) + "," +
             dataio::format_real(fit.r2_after[i]) + "," +
             dataio::format_real(fit.mse_before[i]) + "," +
             dataio::format_real(fit.mse_after[i]) + "\n";
    std::printf("candidate %zu: r2 %.4f -> %.4f\n", i, fit.r2_before[i],
                fit.r2_after[i]);
  }
  if (!out_dir.empty()) {
    dataio::atomic_write(out_dir + "/candidates.csv", table);
    dataio::atomic_write(out_dir + "/expression.txt",
                         expr::to_string(fit.tree) + "\n");
  }
  return 0;
}

int cmd_eval_model(const std::string& model_path, const std::string& env_name,
                   int horizon, int episodes, std::uint64_t seed,
                   const std::string& out_path) {
  auto env = envs::make_env(env_name);
  const dynmodel::SymbolicDynamics model =
      dynmodel::SymbolicDynamics::load(model_path, env->spec());

  Rng rng = make_rng(seed, 0xeba1);
  std::vector<VecX> starts;
  for (int i = 0; i < episodes; ++i) {
    env->reset(rng);
    starts.push_back(env->state());
  }
  Rng action_rng = make_rng(seed, 0xac7);
  const envs::EnvSpec& sp = env->spec();
  const dynmodel::Policy random_policy = [&](const VecX&) {
    VecX a(sp.action_dim);
    for (int i = 0; i < sp.action_dim; ++i)
      a(i) = uniform(action_rng, sp.action_low(i), sp.action_high(i));
    return a;
  };
  const std::vector<real> mse =
      dynmodel::horizon_mse(model, *env, starts, random_policy, horizon);

  std::string table = "step,mse\n";
  for (std::size_t i = 0; i < mse.size(); ++i) {
    table += std::to_string(i + 1) + "," + dataio::format_real(mse[i]) + "\n";
    std::printf("step %zu mse %.6g\n", i + 1, mse[i]);
  }
  if (!out_path.empty()) dataio::atomic_write(out_path, table);
  return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args) {
  CLI::App app{"symdyn: model-based policy optimization on symbolic dynamics"};
  app.require_subcommand(1);

  std::string config_path, env, model, out, seed_list, target, data_path,
      model_path;
  std::vector<std::string> overrides;
  int n_seeds = 3, n_traj = 5000, traj_len = 50, horizon = 3, episodes = 20;
  std::uint64_t seed = 0;

  CLI::App* train = app.add_subcommand("train", "run MBPO training over seeds");
  train->add_option("--config", config_path, "JSON config file");
  train->add_option("--env", env, "environment: pendulum|reacher|car2d");
  train->add_option("--model", model, "dynamics model: symbolic|neural|oracle|none");
  train->add_option("--seeds", n_seeds, "number of seeds (0,1,..,n-1)");
  train->add_option("--seed-list", seed_list, "explicit comma-separated seeds");
  train->add_option("--set", overrides, "dotted config override, e.g. mbpo.k=2");
  train->add_option("--out", out, "output run directory");

  CLI::App* collect = app.add_subcommand("collect", "collect an exploration dataset");
  collect->add_option("--env", env, "environment")->required();
  collect->add_option("--n-traj", n_traj, "number of trajectories");
  collect->add_option("--traj-len", traj_len, "transitions per trajectory");
  collect->add_option("--seed", seed, "rng seed");
  collect->add_option("--out", out, "output CSV path")->required();

  CLI::App* fitsr = app.add_subcommand("fit-sr", "symbolic regression on a CSV column");
  fitsr->add_option("--data", data_path, "input CSV")->required();
  fitsr->add_option("--target", target, "target column name")->required();
  fitsr->add_option("--config", config_path, "JSON config file");
  fitsr->add_option("--set", overrides, "dotted config override");
  fitsr->add_option("--seed", seed, "rng seed");
  fitsr->add_option("--out", out, "output directory for candidate table");

  CLI::App* evalm = app.add_subcommand("eval-model", "multi-step MSE of a model file");
  evalm->add_option("--model-file", model_path, "model TSV path")->required();
  evalm->add_option("--env", env, "environment")->required();
  evalm->add_option("--horizon", horizon, "steps to roll out");
  evalm->add_option("--episodes", episodes, "number of start states");
  evalm->add_option("--seed", seed, "rng seed");
  evalm->add_option("--out", out, "output CSV path");

  std::vector<const char*> argv;
  argv.push_back("symdyn");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed())
      return cmd_train(config_path, overrides, env, model, n_seeds, seed_list, out);
    if (collect->parsed())
      return cmd_collect(env, n_traj, traj_len, seed, out);
    if (fitsr->parsed())
      return cmd_fit_sr(data_path, target, config_path, overrides, seed, out);
    if (evalm->parsed())
      return cmd_eval_model(model_path, env, horizon, episodes, seed, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace symdyn::cli
