#pragma once

#include <string>
#include <vector>

#include "symdyn/env.hpp"
#include "symdyn/fit.hpp"
#include "symdyn/transition.hpp"

namespace symdyn::envs {

// Action-hold exploration: ten uniform-random policies with hold periods
// k = 1..10 share the trajectories equally; each trajectory redraws its
// action every k steps. Produces exactly n_traj * traj_len transitions.
std::vector<Transition> collect_exploration_dataset(Env& env, int n_traj,
                                                    int traj_len, Rng& rng);

}  // namespace symdyn::envs

namespace symdyn::dataio {

// Columns: state coords, action coords, next-state coords (next_ prefix),
// reward, done. Values print with shortest round-trip decimals so a fixed
// seed gives a byte-identical file.
std::string transitions_to_csv(const envs::EnvSpec& spec,
                               const std::vector<Transition>& transitions);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<real>> rows;
};

Csv read_csv(const std::string& path);

// Builds a regression dataset from a CSV: `target` names the y column;
// inputs are every column that is not the target, not next_*-prefixed, and
// not reward/done. Throws with row/column positions on malformed input.
fitopt::Dataset dataset_from_csv(const Csv& csv, const std::string& target);

std::vector<Transition> transitions_from_csv(const envs::EnvSpec& spec,
                                             const Csv& csv);

// Write-to-temp-then-rename so interrupted runs never leave partial files.
void atomic_write(const std::string& path, const std::string& contents);

std::string format_real(real v);

}  // namespace symdyn::dataio
