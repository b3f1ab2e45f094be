#pragma once

#include <cstdint>
#include <vector>

#include "symdyn/types.hpp"

namespace symdyn {

enum class Source : std::uint8_t { Env, Model };

// The unit of experience shared by every buffer. `s`/`s2` are observer
// states (what the dynamics model works on), `obs`/`obs2` the raw
// observations the policy consumes.
struct Transition {
  VecX obs, s, a;
  real r = 0.0;
  VecX obs2, s2;
  bool done = false;
  Source src = Source::Env;
};

}  // namespace symdyn
