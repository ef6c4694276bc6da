#pragma once

#include <string>
#include <vector>

#include "advae/corpus.hpp"
#include "advae/eval.hpp"
#include "advae/model.hpp"
#include "advae/roles.hpp"
#include "advae/training.hpp"

namespace advae::config {

struct EvalConfig {
  int t_dec = 2000;
  int k_importance = 10;
  std::string layer_mode = "all_mean";
  std::string roles = "verb subj dobj pobj";

  roles::RoleSet role_set() const { return roles::parse_role_set(roles); }
};

// Merged settings for a run. Sections: [model], [train], [eval], [synthetic],
// [run]. Unknown sections or keys are rejected up front.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  EvalConfig eval;
  corpus::SyntheticSpec synthetic = corpus::default_synthetic_spec();
  int n_train = 2000;
  int n_test = 500;

  std::string run_dir = "run";
  std::vector<uint64_t> seeds;  // for multi-run aggregation
  uint64_t seed = 1;
  int threads = 1;

  // run_dir resolved against the ADVAE_RUN_ROOT environment variable when it
  // is set and run_dir is relative.
  std::string resolved_run_dir() const;
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies a "section.key=value" override on top of a parsed config.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace advae::config
