#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "advae/corpus.hpp"
#include "advae/model.hpp"

namespace advae::train {

struct TrainConfig {
  double beta_final = 0.3;
  int recon_steps = 3000;   // beta held at 0
  int anneal_steps = 3000;  // linear ramp to beta_final
  double lr = 2e-4;
  int batch_size = 128;
  int epochs = 20;
  double dropout = 0.3;
  double word_dropout_p = 0.1;
  uint64_t seed = 1;
  int min_freq = 1;
  int threads = 1;

  // Adam settings; the paper cites Adam without values.
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// 0 for step < recon_steps, then a linear ramp reaching beta_final exactly at
// recon_steps + anneal_steps, constant afterwards.
double beta_at_step(int64_t step, const TrainConfig& cfg);

struct ElboTerms {
  double recon = 0.0;  // mean over sentences of summed token NLL
  double kl = 0.0;     // mean over sentences
  double total = 0.0;  // recon + beta * kl
};

// One reparameterized sample per sentence; gradients (when grads != null) are
// for the batch mean. Draws are pre-forked per sentence so the result is
// independent of the thread schedule.
ElboTerms elbo_terms(const model::Model& m, const std::vector<std::vector<int>>& sentences,
                     const std::vector<int>& batch_indices, double beta, Rng& rng,
                     const TrainConfig& cfg, bool train_mode, model::GradStore* grads);

// Teacher-forced argmax accuracy with the posterior mean code.
double teacher_forced_accuracy(const model::Model& m,
                               const std::vector<std::vector<int>>& sentences, int limit,
                               int threads);

class AdamOptimizer {
 public:
  AdamOptimizer(const model::ParamSet& ps, double beta1, double beta2, double eps);
  void step(model::ParamSet& ps, const model::GradStore& grads, double lr);
  int64_t steps_taken() const { return t_; }

  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  int64_t t_ = 0;
  double beta1_, beta2_, eps_;
};

struct LogRecord {
  int64_t step = 0;
  int epoch = 0;
  double beta = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<LogRecord> log;  // one record per step
  double accuracy_after_recon_phase = -1.0;
  int64_t final_step = 0;
};

struct TrainHooks {
  // Called after every optimizer step; return false to stop early.
  std::function<bool(const LogRecord&)> on_step;
};

// Full loop: shuffled epochs, beta schedule, Adam, per-epoch checkpoints when
// run_dir is non-empty, NaN abort. Deterministic for a fixed seed and
// threads == 1.
TrainResult train(const std::vector<std::vector<int>>& sentences, const corpus::Vocab& vocab,
                  model::Model& m, const TrainConfig& cfg, const std::string& run_dir,
                  const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Checkpoints: versioned binary container with config, vocab, named parameter
// tensors, optimizer moments, RNG state and counters.
struct Checkpoint {
  model::ModelConfig model_cfg;
  TrainConfig train_cfg;
  corpus::Vocab vocab;
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::vector<std::pair<std::string, Matrix>> opt_m;
  std::vector<std::pair<std::string, Matrix>> opt_v;
  int64_t opt_t = 0;
  int64_t step = 0;
  int epoch = 0;
  std::string rng_state;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const model::Model& m, const TrainConfig& tcfg,
                           const corpus::Vocab& vocab, const AdamOptimizer& opt, int64_t step,
                           int epoch, const std::string& rng_state);
// Rebuilds the model (and optionally the optimizer) from a checkpoint.
model::Model restore_model(const Checkpoint& ck);
void restore_optimizer(const Checkpoint& ck, AdamOptimizer& opt);

}  // namespace advae::train
