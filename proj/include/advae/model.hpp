#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advae/matrix.hpp"
#include "advae/rng.hpp"
#include "advae/tape.hpp"

namespace advae::model {

enum class Variant { advae, tvae, advae_hier };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

struct ModelConfig {
  Variant variant = Variant::advae;
  int d_model = 192;
  int n_layers = 2;
  int n_heads = 4;
  int n_z = 4;
  int d_z = 192;
  double dropout = 0.3;
  int vocab_size = 0;
  int max_len = 24;
  int hier_levels = 1;  // L; advae_hier requires >= 2, other variants ignore it

  int d_ff() const { return 4 * d_model; }
  int total_latent() const { return n_z * d_z; }
  int levels() const { return variant == Variant::advae_hier ? hier_levels : 1; }
  // The evaluation protocol treats each of the tvae's scalar latent
  // components as one variable.
  int n_vars() const { return variant == Variant::tvae ? total_latent() : n_z; }
  int var_dim() const { return variant == Variant::tvae ? 1 : d_z; }
  void validate() const;
};

// Per-variable Gaussian parameters, n_vars x var_dim. z stays empty until
// sampled.
struct LatentState {
  Matrix mu;
  Matrix sigma;
  Matrix z;
};

// z = mu + sigma (.) eps
Matrix sample_latent(const LatentState& state, const Matrix& eps);

// 1/2 sum(mu^2 + sigma^2 - 1 - 2 ln sigma) over all entries.
double kl_to_std_normal(const LatentState& state);

// Cross-attention weights from latent queries to source tokens, one n_z x
// n_tokens row-stochastic matrix per layer and head.
struct AttentionTrace {
  std::vector<std::vector<Matrix>> weights;  // [layer][head]

  // Arithmetic mean over heads, then over layers (layer = -1) or a single
  // layer's heads.
  Matrix averaged(int layer = -1) const;
  int n_layers() const { return static_cast<int>(weights.size()); }
};

struct EncodeResult {
  std::vector<LatentState> levels;  // one per hierarchy level; flat/tvae: one
  AttentionTrace trace;             // empty for tvae

  const LatentState& top() const { return levels.back(); }
};

struct GaussParams {
  Matrix mu;
  Matrix sigma;
};

// Named parameter tensors in stable registration order.
class ParamSet {
 public:
  int add(const std::string& name, int rows, int cols);
  int find(const std::string& name) const;
  int count() const { return static_cast<int>(values_.size()); }
  Matrix& value(int h) { return values_[static_cast<size_t>(h)]; }
  const Matrix& value(int h) const { return values_[static_cast<size_t>(h)]; }
  const std::string& name(int h) const { return names_[static_cast<size_t>(h)]; }
  size_t total_elements() const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// Gradient buffers aligned with a ParamSet.
struct GradStore {
  std::vector<Matrix> grads;

  explicit GradStore(const ParamSet& ps);
  void zero();
  void add_scaled(const GradStore& other, double s);
};

struct EncodeOptions {
  // Zero this latent query's final representation before the mu/sigma heads
  // (posterior-factorization probe); -1 disables.
  int ablate_var = -1;
};

struct ElboBuildOptions {
  bool train_mode = false;     // enables dropout + word dropout
  double word_dropout_p = 0.0;
  Rng* rng = nullptr;          // noise source; required
};

struct ElboVars {
  nn::VarId recon = -1;  // -sum log p(s_j | s_<j, z), tokens + EOS
  nn::VarId kl = -1;     // closed-form KL (summed over hierarchy levels)
  nn::VarId total = -1;  // recon + beta * kl
  int n_target_tokens = 0;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // -- inference (forward only, no gradients) --
  EncodeResult encode_posterior(std::span<const int> ids, const EncodeOptions& = {}) const;

  // z has shape n_vars x var_dim; prefix must begin with BOS. Returns one
  // vocab-logit row per prefix position.
  Matrix decoder_logits(const Matrix& z, std::span<const int> prefix) const;

  // Sum of log softmax at the gold token over all positions of the framed
  // sentence (BOS ... EOS), EOS included.
  double sentence_log_prob(std::span<const int> framed_ids, const Matrix& z) const;

  // Argmax decoding until EOS or max_len tokens; ties break to the lowest
  // vocab id; PAD and BOS are never emitted.
  std::vector<int> greedy_decode(const Matrix& z, int max_len) const;

  // Structured-prior conditional p(z^level | z^{level-1}), level in [1, L).
  GaussParams hier_prior_step(const Matrix& z_prev, int level) const;

  // Ancestral prior draw; chain has one matrix per level, the decoder
  // consumes the last.
  std::vector<Matrix> sample_prior_chain(Rng& rng) const;
  Matrix sample_prior(Rng& rng) const;

  double prior_log_density(const std::vector<Matrix>& chain) const;
  double posterior_log_density(const EncodeResult& enc, const std::vector<Matrix>& chain) const;

  // -- training graph --
  // Builds the per-sentence negative ELBO on the tape. grads gates whether
  // parameter leaves sink gradients (tape must agree).
  ElboVars build_elbo(nn::Tape& tape, std::span<const int> ids, double beta,
                      const ElboBuildOptions& opts, GradStore* grads) const;

 private:
  ModelConfig cfg_;
  ParamSet params_;

  struct AttnH {
    int wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct LnH {
    int g, b;
  };
  struct FfnH {
    int w1, b1, w2, b2;
  };
  struct SelfLayerH {
    LnH ln1;
    AttnH attn;
    LnH ln2;
    FfnH ffn;
  };
  struct CrossLayerH {
    LnH ln1;
    AttnH attn;
    LnH ln2;
    FfnH ffn;
  };
  struct DecLayerH {
    LnH ln1;
    AttnH self;
    LnH lnc;
    AttnH cross;
    LnH ln2;
    FfnH ffn;
  };
  struct SelfStackH {
    std::vector<SelfLayerH> layers;
    LnH lnf;
  };

  int tok_embed_ = -1;
  SelfStackH enc_;
  std::vector<int> enc_queries_;  // one bank per level
  std::vector<CrossLayerH> lat_layers_;
  LnH lat_lnf_{};
  int head_mu_w_ = -1, head_mu_b_ = -1, head_sig_w_ = -1, head_sig_b_ = -1;

  int dec_zid_ = -1, dec_zin_w_ = -1, dec_zin_b_ = -1;
  SelfStackH dec_lat_;
  std::vector<DecLayerH> dec_layers_;
  LnH dec_lnf_{};
  int out_w_ = -1, out_b_ = -1;

  // tvae
  int pool_mu_w_ = -1, pool_mu_b_ = -1, pool_sig_w_ = -1, pool_sig_b_ = -1;
  int zproj_w_ = -1, zproj_b_ = -1;

  // hierarchical prior modules, one per level l in [1, L)
  struct PriorModuleH {
    int zid, zin_w, zin_b;
    SelfStackH src;
    std::vector<DecLayerH> q_layers;
    LnH q_lnf;
    int mu_w, mu_b, sig_w, sig_b;
    int queries;
  };
  std::vector<PriorModuleH> prior_;

  struct Builder;
  friend struct Builder;

  void register_params();
  void init_params(uint64_t seed);
};

}  // namespace advae::model
