#pragma once

#include "gradorder/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gradorder {

// Randomized checks of the deterministic inequalities and equivalences the
// orderers rely on. Every category runs `trials` independent instances; any
// violation throws PropertyViolationError with enough detail to reproduce.
struct LemmaOptions {
  int trials = 200;
  Index n_max = 64;  // largest sequence length drawn
  Index d_max = 8;   // largest dimension drawn
  std::uint64_t seed = 0;
};

struct LemmaCategory {
  std::string name;
  int trials = 0;
};

struct LemmaReport {
  std::vector<LemmaCategory> categories;

  int total() const {
    int t = 0;
    for (const auto& c : categories) t += c.trials;
    return t;
  }
};

LemmaReport verify_lemmas(const LemmaOptions& opt);

std::string to_string(const LemmaReport& rep);

}  // namespace gradorder
