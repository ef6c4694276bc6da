#include "advae/model.hpp"

#include <cmath>
#include <stdexcept>

#include "advae/corpus.hpp"

namespace advae::model {

namespace {
constexpr double kSigmaFloor = 1e-6;

// softplus(x) = 0.1: posterior scales start small so the reparameterized
// channel is usable from the first steps
constexpr double kSigmaBiasInit = -2.2521684610440907;

Matrix sinusoidal_pe(int positions, int d_model) {
  Matrix pe(positions, d_model);
  for (int pos = 0; pos < positions; ++pos) {
    for (int j = 0; j < d_model; j += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(j) / d_model);
      pe.at(pos, j) = std::sin(angle);
      if (j + 1 < d_model) pe.at(pos, j + 1) = std::cos(angle);
    }
  }
  return pe;
}

double std_normal_log_density(const Matrix& z) {
  double acc = 0.0;
  for (double v : z.data) acc += -0.5 * (v * v + std::log(2.0 * M_PI));
  return acc;
}

double gauss_log_density(const Matrix& z, const Matrix& mu, const Matrix& sigma) {
  double acc = 0.0;
  for (size_t i = 0; i < z.size(); ++i) {
    const double d = (z.data[i] - mu.data[i]) / sigma.data[i];
    acc += -0.5 * (d * d + std::log(2.0 * M_PI)) - std::log(sigma.data[i]);
  }
  return acc;
}
}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "advae") return Variant::advae;
  if (s == "tvae") return Variant::tvae;
  if (s == "advae_hier") return Variant::advae_hier;
  throw std::runtime_error("unknown model variant: " + s);
}

std::string variant_to_string(Variant v) {
  switch (v) {
    case Variant::advae: return "advae";
    case Variant::tvae: return "tvae";
    case Variant::advae_hier: return "advae_hier";
  }
  return "advae";
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || n_z <= 0 || d_z <= 0)
    throw std::runtime_error("model dimensions must be positive");
  if (d_model % n_heads != 0) throw std::runtime_error("d_model must be divisible by n_heads");
  if (vocab_size < 5) throw std::runtime_error("vocab_size must cover the specials");
  if (max_len < 1) throw std::runtime_error("max_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::runtime_error("dropout out of [0,1)");
  if (variant == Variant::advae_hier && hier_levels < 2)
    throw std::runtime_error("advae_hier requires hier_levels >= 2");
}

Matrix sample_latent(const LatentState& state, const Matrix& eps) {
  assert(state.mu.same_shape(eps));
  Matrix z = state.mu;
  for (size_t i = 0; i < z.size(); ++i) z.data[i] += state.sigma.data[i] * eps.data[i];
  return z;
}

double kl_to_std_normal(const LatentState& state) {
  double kl = 0.0;
  for (size_t i = 0; i < state.mu.size(); ++i) {
    const double m = state.mu.data[i];
    const double s = state.sigma.data[i];
    kl += 0.5 * (m * m + s * s - 1.0) - std::log(s);
  }
  return kl;
}

Matrix AttentionTrace::averaged(int layer) const {
  if (weights.empty()) throw std::runtime_error("empty attention trace");
  const int l0 = layer < 0 ? 0 : layer;
  const int l1 = layer < 0 ? n_layers() : layer + 1;
  if (l0 >= n_layers() || l1 > n_layers()) throw std::runtime_error("attention layer out of range");
  const Matrix& first = weights[static_cast<size_t>(l0)][0];
  Matrix out(first.rows, first.cols);
  int count = 0;
  for (int l = l0; l < l1; ++l) {
    for (const auto& head : weights[static_cast<size_t>(l)]) {
      out.add_inplace(head);
      ++count;
    }
  }
  for (auto& v : out.data) v /= count;
  return out;
}

int ParamSet::add(const std::string& name, int rows, int cols) {
  names_.push_back(name);
  values_.emplace_back(rows, cols);
  return static_cast<int>(values_.size()) - 1;
}

int ParamSet::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

size_t ParamSet::total_elements() const {
  size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

GradStore::GradStore(const ParamSet& ps) {
  grads.reserve(static_cast<size_t>(ps.count()));
  for (int i = 0; i < ps.count(); ++i)
    grads.emplace_back(ps.value(i).rows, ps.value(i).cols);
}

void GradStore::zero() {
  for (auto& g : grads) g.fill(0.0);
}

void GradStore::add_scaled(const GradStore& other, double s) {
  for (size_t i = 0; i < grads.size(); ++i)
    for (size_t k = 0; k < grads[i].size(); ++k) grads[i].data[k] += s * other.grads[i].data[k];
}

// ---------------------------------------------------------------------------
// Parameter registration / init

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  register_params();
  init_params(init_seed);
}

void Model::register_params() {
  const int d = cfg_.d_model;
  const int ff = cfg_.d_ff();
  auto& ps = params_;

  auto add_ln = [&](const std::string& prefix) {
    LnH ln;
    ln.g = ps.add(prefix + ".g", 1, d);
    ln.b = ps.add(prefix + ".b", 1, d);
    return ln;
  };
  auto add_attn = [&](const std::string& prefix) {
    AttnH a;
    a.wq = ps.add(prefix + ".wq", d, d);
    a.bq = ps.add(prefix + ".bq", 1, d);
    a.wk = ps.add(prefix + ".wk", d, d);
    a.bk = ps.add(prefix + ".bk", 1, d);
    a.wv = ps.add(prefix + ".wv", d, d);
    a.bv = ps.add(prefix + ".bv", 1, d);
    a.wo = ps.add(prefix + ".wo", d, d);
    a.bo = ps.add(prefix + ".bo", 1, d);
    return a;
  };
  auto add_ffn = [&](const std::string& prefix) {
    FfnH f;
    f.w1 = ps.add(prefix + ".w1", d, ff);
    f.b1 = ps.add(prefix + ".b1", 1, ff);
    f.w2 = ps.add(prefix + ".w2", ff, d);
    f.b2 = ps.add(prefix + ".b2", 1, d);
    return f;
  };
  auto add_self_stack = [&](const std::string& prefix) {
    SelfStackH s;
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l);
      SelfLayerH layer;
      layer.ln1 = add_ln(lp + ".ln1");
      layer.attn = add_attn(lp + ".attn");
      layer.ln2 = add_ln(lp + ".ln2");
      layer.ffn = add_ffn(lp + ".ffn");
      s.layers.push_back(layer);
    }
    s.lnf = add_ln(prefix + ".lnf");
    return s;
  };
  auto add_dec_layers = [&](const std::string& prefix) {
    std::vector<DecLayerH> out;
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l);
      DecLayerH layer;
      layer.ln1 = add_ln(lp + ".ln1");
      layer.self = add_attn(lp + ".self");
      layer.lnc = add_ln(lp + ".lnc");
      layer.cross = add_attn(lp + ".cross");
      layer.ln2 = add_ln(lp + ".ln2");
      layer.ffn = add_ffn(lp + ".ffn");
      out.push_back(layer);
    }
    return out;
  };

  tok_embed_ = ps.add("tok_embed", cfg_.vocab_size, d);
  enc_ = add_self_stack("enc");

  if (cfg_.variant == Variant::tvae) {
    const int total = cfg_.total_latent();
    pool_mu_w_ = ps.add("pool.mu_w", d, total);
    pool_mu_b_ = ps.add("pool.mu_b", 1, total);
    pool_sig_w_ = ps.add("pool.sig_w", d, total);
    pool_sig_b_ = ps.add("pool.sig_b", 1, total);
    zproj_w_ = ps.add("dec.zproj_w", total, d);
    zproj_b_ = ps.add("dec.zproj_b", 1, d);
    dec_lat_ = add_self_stack("dec.stack");  // causal self-attention stack
    out_w_ = ps.add("out.w", d, cfg_.vocab_size);
    out_b_ = ps.add("out.b", 1, cfg_.vocab_size);
    return;
  }

  for (int lvl = 0; lvl < cfg_.levels(); ++lvl)
    enc_queries_.push_back(ps.add("enc.queries_l" + std::to_string(lvl), cfg_.n_z, d));
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const std::string lp = "lat.l" + std::to_string(l);
    CrossLayerH layer;
    layer.ln1 = add_ln(lp + ".ln1");
    layer.attn = add_attn(lp + ".cross");
    layer.ln2 = add_ln(lp + ".ln2");
    layer.ffn = add_ffn(lp + ".ffn");
    lat_layers_.push_back(layer);
  }
  lat_lnf_ = add_ln("lat.lnf");
  head_mu_w_ = ps.add("head.mu_w", d, cfg_.d_z);
  head_mu_b_ = ps.add("head.mu_b", 1, cfg_.d_z);
  head_sig_w_ = ps.add("head.sig_w", d, cfg_.d_z);
  head_sig_b_ = ps.add("head.sig_b", 1, cfg_.d_z);

  dec_zid_ = ps.add("dec.zid", cfg_.n_z, cfg_.d_z);
  dec_zin_w_ = ps.add("dec.zin_w", 2 * cfg_.d_z, d);
  dec_zin_b_ = ps.add("dec.zin_b", 1, d);
  dec_lat_ = add_self_stack("dec.lat");
  dec_layers_ = add_dec_layers("dec.tok");
  dec_lnf_ = add_ln("dec.lnf");
  out_w_ = ps.add("out.w", d, cfg_.vocab_size);
  out_b_ = ps.add("out.b", 1, cfg_.vocab_size);

  for (int lvl = 1; lvl < cfg_.levels(); ++lvl) {
    const std::string pp = "prior.l" + std::to_string(lvl);
    PriorModuleH pm;
    pm.zid = ps.add(pp + ".zid", cfg_.n_z, cfg_.d_z);
    pm.zin_w = ps.add(pp + ".zin_w", 2 * cfg_.d_z, d);
    pm.zin_b = ps.add(pp + ".zin_b", 1, d);
    pm.src = add_self_stack(pp + ".src");
    pm.queries = ps.add(pp + ".queries", cfg_.n_z, d);
    pm.q_layers = add_dec_layers(pp + ".q");
    pm.q_lnf = add_ln(pp + ".q_lnf");
    pm.mu_w = ps.add(pp + ".mu_w", d, cfg_.d_z);
    pm.mu_b = ps.add(pp + ".mu_b", 1, cfg_.d_z);
    pm.sig_w = ps.add(pp + ".sig_w", d, cfg_.d_z);
    pm.sig_b = ps.add(pp + ".sig_b", 1, cfg_.d_z);
    prior_.push_back(pm);
  }
}

void Model::init_params(uint64_t seed) {
  Rng rng(seed);
  for (int h = 0; h < params_.count(); ++h) {
    const std::string& name = params_.name(h);
    Matrix& m = params_.value(h);
    const bool is_bias = m.rows == 1 && (name.ends_with(".b") || name.ends_with("_b") ||
                                         name.ends_with(".bq") || name.ends_with(".bk") ||
                                         name.ends_with(".bv") || name.ends_with(".bo") ||
                                         name.ends_with(".b1") || name.ends_with(".b2"));
    const bool is_ln_gain = name.ends_with(".g");
    const bool is_embedding_like = name == "tok_embed" || name.find("queries") != std::string::npos ||
                                   name.find("zid") != std::string::npos;
    if (is_ln_gain) {
      m.fill(1.0);
    } else if (is_bias) {
      m.fill(name.ends_with("sig_b") ? kSigmaBiasInit : 0.0);
    } else if (is_embedding_like) {
      for (auto& v : m.data) v = 0.02 * rng.normal();
    } else {
      const double a = std::sqrt(6.0 / (m.rows + m.cols));
      for (auto& v : m.data) v = a * (2.0 * rng.uniform() - 1.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Graph builder shared by training and inference.

struct Model::Builder {
  const Model& m;
  nn::Tape& t;
  GradStore* grads;
  bool train;
  Rng* rng;

  using VarId = nn::VarId;

  VarId leaf(int handle) const {
    return t.param(&m.params_.value(handle),
                   grads ? &grads->grads[static_cast<size_t>(handle)] : nullptr);
  }

  VarId drop(VarId x) const {
    if (!train || m.cfg_.dropout <= 0.0) return x;
    return t.dropout(x, m.cfg_.dropout, *rng);
  }

  VarId linear(VarId x, int w, int b) const { return t.affine(x, leaf(w), leaf(b)); }

  VarId layer_norm(VarId x, const LnH& ln) const { return t.layer_norm(x, leaf(ln.g), leaf(ln.b)); }

  VarId attention(VarId q_in, VarId kv_in, const AttnH& p, const std::vector<uint8_t>& key_valid,
                  nn::MaskKind mask, std::vector<Matrix>* head_weights) const {
    const int dh = m.cfg_.d_model / m.cfg_.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    VarId q = linear(q_in, p.wq, p.bq);
    VarId k = linear(kv_in, p.wk, p.bk);
    VarId v = linear(kv_in, p.wv, p.bv);
    VarId ctx = t.multihead_attention(q, k, v, m.cfg_.n_heads, scale, key_valid, mask,
                                      head_weights);
    return linear(ctx, p.wo, p.bo);
  }

  VarId ffn(VarId x, const FfnH& f) const {
    return linear(t.gelu(linear(x, f.w1, f.b1)), f.w2, f.b2);
  }

  // Pre-norm residual self-attention stack; causal controls the mask.
  VarId self_stack(VarId x, const SelfStackH& s, nn::MaskKind mask) const {
    static const std::vector<uint8_t> no_mask;
    for (const auto& layer : s.layers) {
      VarId a = layer_norm(x, layer.ln1);
      x = t.add(x, drop(attention(a, a, layer.attn, no_mask, mask, nullptr)));
      x = t.add(x, drop(ffn(layer_norm(x, layer.ln2), layer.ffn)));
    }
    return layer_norm(x, s.lnf);
  }

  // PAD positions are excluded from attention keys and from pooling.
  static std::vector<uint8_t> pad_mask(std::span<const int> ids) {
    bool any_pad = false;
    for (int id : ids) any_pad |= id == corpus::Vocab::kPad;
    if (!any_pad) return {};
    std::vector<uint8_t> valid(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) valid[i] = ids[i] != corpus::Vocab::kPad;
    return valid;
  }

  VarId masked_self_stack(VarId x, const SelfStackH& s, nn::MaskKind mask,
                          const std::vector<uint8_t>& key_valid) const {
    for (const auto& layer : s.layers) {
      VarId a = layer_norm(x, layer.ln1);
      x = t.add(x, drop(attention(a, a, layer.attn, key_valid, mask, nullptr)));
      x = t.add(x, drop(ffn(layer_norm(x, layer.ln2), layer.ffn)));
    }
    return layer_norm(x, s.lnf);
  }

  VarId token_memory(std::span<const int> ids, const std::vector<uint8_t>& key_valid) const {
    VarId emb = t.embedding(leaf(m.tok_embed_), ids);
    Matrix pe = sinusoidal_pe(static_cast<int>(ids.size()), m.cfg_.d_model);
    VarId x = t.add(emb, t.constant(std::move(pe)));
    return masked_self_stack(x, m.enc_, nn::MaskKind::none, key_valid);
  }

  // Latent queries cross-attend to the token memory; no self-attention, no
  // positional encoding on the query stream.
  VarId latent_stream(int level, VarId mem, const std::vector<uint8_t>& key_valid,
                      std::vector<std::vector<Matrix>>* trace) const {
    VarId h = leaf(m.enc_queries_[static_cast<size_t>(level)]);
    for (const auto& layer : m.lat_layers_) {
      std::vector<Matrix> heads;
      VarId a = layer_norm(h, layer.ln1);
      h = t.add(h, drop(attention(a, mem, layer.attn, key_valid, nn::MaskKind::none,
                                  trace ? &heads : nullptr)));
      h = t.add(h, drop(ffn(layer_norm(h, layer.ln2), layer.ffn)));
      if (trace) trace->push_back(std::move(heads));
    }
    return layer_norm(h, m.lat_lnf_);
  }

  struct PosteriorVars {
    VarId mu, sigma;
  };

  PosteriorVars posterior_heads(VarId hq, int mu_w, int mu_b, int sig_w, int sig_b) const {
    PosteriorVars pv;
    pv.mu = linear(hq, mu_w, mu_b);
    pv.sigma = t.softplus_floor(linear(hq, sig_w, sig_b), kSigmaFloor);
    return pv;
  }

  // ADVAE decoder: z rows get identifiers and a self-attention encoder, token
  // side runs causal self-attention + cross-attention to the latent memory.
  VarId advae_decoder_logits(VarId z, std::span<const int> prefix) const {
    static const std::vector<uint8_t> no_mask;
    VarId zin = t.concat_cols(z, leaf(m.dec_zid_));
    VarId lat = linear(zin, m.dec_zin_w_, m.dec_zin_b_);
    VarId lat_mem = self_stack(lat, m.dec_lat_, nn::MaskKind::none);

    VarId emb = t.embedding(leaf(m.tok_embed_), prefix);
    Matrix pe = sinusoidal_pe(static_cast<int>(prefix.size()), m.cfg_.d_model);
    VarId x = t.add(emb, t.constant(std::move(pe)));
    for (const auto& layer : m.dec_layers_) {
      VarId a = layer_norm(x, layer.ln1);
      x = t.add(x, drop(attention(a, a, layer.self, no_mask, nn::MaskKind::causal, nullptr)));
      VarId c = layer_norm(x, layer.lnc);
      x = t.add(x, drop(attention(c, lat_mem, layer.cross, no_mask, nn::MaskKind::none, nullptr)));
      x = t.add(x, drop(ffn(layer_norm(x, layer.ln2), layer.ffn)));
    }
    x = layer_norm(x, m.dec_lnf_);
    return linear(x, m.out_w_, m.out_b_);
  }

  // TVAE decoder: latent projected to a first token prepended to the shifted
  // sequence, then a causal decoder-only stack.
  VarId tvae_decoder_logits(VarId z_flat, std::span<const int> prefix) const {
    VarId lat_tok = linear(z_flat, m.zproj_w_, m.zproj_b_);
    VarId emb = t.embedding(leaf(m.tok_embed_), prefix);
    VarId x = t.concat_rows(lat_tok, emb);
    Matrix pe = sinusoidal_pe(static_cast<int>(prefix.size()) + 1, m.cfg_.d_model);
    x = t.add(x, t.constant(std::move(pe)));
    x = self_stack(x, m.dec_lat_, nn::MaskKind::causal);
    VarId logits = linear(x, m.out_w_, m.out_b_);
    return t.slice_rows(logits, 1, static_cast<int>(prefix.size()) + 1);
  }

  PosteriorVars tvae_posterior(std::span<const int> ids) const {
    const auto valid = pad_mask(ids);
    VarId mem = token_memory(ids, valid);
    VarId pooled = t.mean_rows(mem, valid);
    return posterior_heads(pooled, m.pool_mu_w_, m.pool_mu_b_, m.pool_sig_w_, m.pool_sig_b_);
  }

  // Structured-prior conditional: previous-level variables get identifiers
  // and a self-attention encoder; the level's queries run self-attention +
  // cross-attention over that memory.
  PosteriorVars prior_step(VarId z_prev, int level) const {
    static const std::vector<uint8_t> no_mask;
    const PriorModuleH& pm = m.prior_[static_cast<size_t>(level - 1)];
    VarId zin = t.concat_cols(z_prev, leaf(pm.zid));
    VarId src = linear(zin, pm.zin_w, pm.zin_b);
    VarId src_mem = self_stack(src, pm.src, nn::MaskKind::none);
    VarId q = leaf(pm.queries);
    for (const auto& layer : pm.q_layers) {
      VarId a = layer_norm(q, layer.ln1);
      q = t.add(q, drop(attention(a, a, layer.self, no_mask, nn::MaskKind::none, nullptr)));
      VarId c = layer_norm(q, layer.lnc);
      q = t.add(q, drop(attention(c, src_mem, layer.cross, no_mask, nn::MaskKind::none, nullptr)));
      q = t.add(q, drop(ffn(layer_norm(q, layer.ln2), layer.ffn)));
    }
    q = layer_norm(q, pm.q_lnf);
    return posterior_heads(q, pm.mu_w, pm.mu_b, pm.sig_w, pm.sig_b);
  }
};

// ---------------------------------------------------------------------------
// Inference entry points.

EncodeResult Model::encode_posterior(std::span<const int> ids, const EncodeOptions& opts) const {
  if (ids.empty()) throw std::runtime_error("encode_posterior: empty sentence");
  if (static_cast<int>(ids.size()) > cfg_.max_len)
    throw std::runtime_error("encode_posterior: sentence exceeds max_len");
  bool any_real = false;
  for (int id : ids) any_real |= id != corpus::Vocab::kPad;
  if (!any_real) throw std::runtime_error("encode_posterior: all-PAD sentence");
  nn::Tape tape(false);
  Builder b{*this, tape, nullptr, false, nullptr};
  EncodeResult out;

  if (cfg_.variant == Variant::tvae) {
    auto pv = b.tvae_posterior(ids);
    LatentState st;
    const Matrix& mu_row = tape.val(pv.mu);
    const Matrix& sig_row = tape.val(pv.sigma);
    st.mu = Matrix(cfg_.total_latent(), 1);
    st.sigma = Matrix(cfg_.total_latent(), 1);
    for (int i = 0; i < cfg_.total_latent(); ++i) {
      st.mu.at(i, 0) = mu_row.at(0, i);
      st.sigma.at(i, 0) = sig_row.at(0, i);
    }
    out.levels.push_back(std::move(st));
    return out;
  }

  const auto valid = Builder::pad_mask(ids);
  nn::VarId mem = b.token_memory(ids, valid);
  const int n_levels = cfg_.levels();
  std::vector<std::vector<Matrix>> trace;
  for (int lvl = 0; lvl < n_levels; ++lvl) {
    const bool capture = lvl == n_levels - 1;
    nn::VarId hq = b.latent_stream(lvl, mem, valid, capture ? &trace : nullptr);
    if (capture && opts.ablate_var >= 0) {
      // zero the ablated variable's final representation via an elementwise
      // mask; rows are independent through the per-row heads
      Matrix mask = Matrix::filled(cfg_.n_z, cfg_.d_model, 1.0);
      for (int j = 0; j < cfg_.d_model; ++j) mask.at(opts.ablate_var, j) = 0.0;
      hq = tape.mul(hq, tape.constant(std::move(mask)));
    }
    auto pv = b.posterior_heads(hq, head_mu_w_, head_mu_b_, head_sig_w_, head_sig_b_);
    LatentState st;
    st.mu = tape.val(pv.mu);
    st.sigma = tape.val(pv.sigma);
    out.levels.push_back(std::move(st));
  }
  out.trace.weights = std::move(trace);
  return out;
}

Matrix Model::decoder_logits(const Matrix& z, std::span<const int> prefix) const {
  if (prefix.empty() || prefix[0] != corpus::Vocab::kBos)
    throw std::runtime_error("decoder prefix must begin with BOS");
  nn::Tape tape(false);
  Builder b{*this, tape, nullptr, false, nullptr};
  if (cfg_.variant == Variant::tvae) {
    Matrix z_flat(1, cfg_.total_latent());
    assert(static_cast<int>(z.size()) == cfg_.total_latent());
    for (size_t i = 0; i < z.size(); ++i) z_flat.data[i] = z.data[i];
    return tape.val(b.tvae_decoder_logits(tape.constant(std::move(z_flat)), prefix));
  }
  return tape.val(b.advae_decoder_logits(tape.constant(z), prefix));
}

double Model::sentence_log_prob(std::span<const int> framed_ids, const Matrix& z) const {
  if (framed_ids.size() < 2) throw std::runtime_error("framed sentence too short");
  std::span<const int> prefix = framed_ids.subspan(0, framed_ids.size() - 1);
  const Matrix logits = decoder_logits(z, prefix);
  double acc = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    const double* r = logits.row(i);
    double mx = r[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(r[j] - mx);
    const int gold = framed_ids[static_cast<size_t>(i) + 1];
    acc += r[gold] - mx - std::log(sum);
  }
  return acc;
}

std::vector<int> Model::greedy_decode(const Matrix& z, int max_len) const {
  std::vector<int> prefix = {corpus::Vocab::kBos};
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    const Matrix logits = decoder_logits(z, prefix);
    const double* r = logits.row(logits.rows - 1);
    int best = -1;
    for (int j = 0; j < logits.cols; ++j) {
      if (j == corpus::Vocab::kPad || j == corpus::Vocab::kBos) continue;
      if (best < 0 || r[j] > r[best]) best = j;
    }
    if (best == corpus::Vocab::kEos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

GaussParams Model::hier_prior_step(const Matrix& z_prev, int level) const {
  if (cfg_.variant != Variant::advae_hier)
    throw std::runtime_error("hier_prior_step requires the advae_hier variant");
  if (level < 1 || level >= cfg_.levels()) throw std::runtime_error("hier level out of range");
  nn::Tape tape(false);
  Builder b{*this, tape, nullptr, false, nullptr};
  auto pv = b.prior_step(tape.constant(z_prev), level);
  return {tape.val(pv.mu), tape.val(pv.sigma)};
}

std::vector<Matrix> Model::sample_prior_chain(Rng& rng) const {
  std::vector<Matrix> chain;
  Matrix z0(cfg_.n_vars(), cfg_.var_dim());
  for (auto& v : z0.data) v = rng.normal();
  chain.push_back(std::move(z0));
  for (int lvl = 1; lvl < cfg_.levels(); ++lvl) {
    GaussParams p = hier_prior_step(chain.back(), lvl);
    Matrix z = p.mu;
    for (size_t i = 0; i < z.size(); ++i) z.data[i] += p.sigma.data[i] * rng.normal();
    chain.push_back(std::move(z));
  }
  return chain;
}

Matrix Model::sample_prior(Rng& rng) const { return sample_prior_chain(rng).back(); }

double Model::prior_log_density(const std::vector<Matrix>& chain) const {
  double acc = std_normal_log_density(chain.front());
  for (int lvl = 1; lvl < static_cast<int>(chain.size()); ++lvl) {
    GaussParams p = hier_prior_step(chain[static_cast<size_t>(lvl) - 1], lvl);
    acc += gauss_log_density(chain[static_cast<size_t>(lvl)], p.mu, p.sigma);
  }
  return acc;
}

double Model::posterior_log_density(const EncodeResult& enc,
                                    const std::vector<Matrix>& chain) const {
  assert(enc.levels.size() == chain.size());
  double acc = 0.0;
  for (size_t lvl = 0; lvl < chain.size(); ++lvl)
    acc += gauss_log_density(chain[lvl], enc.levels[lvl].mu, enc.levels[lvl].sigma);
  return acc;
}

// ---------------------------------------------------------------------------
// Training graph.

ElboVars Model::build_elbo(nn::Tape& tape, std::span<const int> ids, double beta,
                           const ElboBuildOptions& opts, GradStore* grads) const {
  if (ids.empty()) throw std::runtime_error("build_elbo: empty sentence");
  if (opts.rng == nullptr) throw std::runtime_error("build_elbo: rng required");
  Builder b{*this, tape, grads, opts.train_mode, opts.rng};

  // framed decoder input/targets; word dropout applies to the input side only
  std::vector<int> framed(ids.size() + 2);
  framed[0] = corpus::Vocab::kBos;
  for (size_t i = 0; i < ids.size(); ++i) framed[i + 1] = ids[i];
  framed.back() = corpus::Vocab::kEos;
  std::vector<int> prefix(framed.begin(), framed.end() - 1);
  std::vector<int> targets(framed.begin() + 1, framed.end());
  if (opts.train_mode && opts.word_dropout_p > 0.0)
    prefix = corpus::word_dropout(prefix, opts.word_dropout_p, *opts.rng);

  ElboVars out;
  out.n_target_tokens = static_cast<int>(targets.size());

  if (cfg_.variant == Variant::tvae) {
    auto pv = b.tvae_posterior(ids);
    Matrix eps(1, cfg_.total_latent());
    for (auto& v : eps.data) v = opts.rng->normal();
    nn::VarId z = tape.add(pv.mu, tape.mul(pv.sigma, tape.constant(std::move(eps))));
    out.kl = tape.kl_std_normal(pv.mu, pv.sigma);
    nn::VarId logits = b.tvae_decoder_logits(z, prefix);
    out.recon = tape.cross_entropy_sum(logits, targets);
    out.total = tape.add(out.recon, tape.scale(out.kl, beta));
    return out;
  }

  nn::VarId mem = b.token_memory(ids, {});
  nn::VarId kl_sum = -1;
  nn::VarId z_top = -1;
  nn::VarId z_prev = -1;
  for (int lvl = 0; lvl < cfg_.levels(); ++lvl) {
    nn::VarId hq = b.latent_stream(lvl, mem, {}, nullptr);
    auto pv = b.posterior_heads(hq, head_mu_w_, head_mu_b_, head_sig_w_, head_sig_b_);
    Matrix eps(cfg_.n_z, cfg_.d_z);
    for (auto& v : eps.data) v = opts.rng->normal();
    nn::VarId z = tape.add(pv.mu, tape.mul(pv.sigma, tape.constant(std::move(eps))));
    nn::VarId kl_l;
    if (lvl == 0) {
      kl_l = tape.kl_std_normal(pv.mu, pv.sigma);
    } else {
      auto prior = b.prior_step(z_prev, lvl);
      kl_l = tape.kl_gaussians(pv.mu, pv.sigma, prior.mu, prior.sigma);
    }
    kl_sum = lvl == 0 ? kl_l : tape.add(kl_sum, kl_l);
    z_prev = z;
    z_top = z;
  }
  out.kl = kl_sum;
  nn::VarId logits = b.advae_decoder_logits(z_top, prefix);
  out.recon = tape.cross_entropy_sum(logits, targets);
  out.total = tape.add(out.recon, tape.scale(out.kl, beta));
  return out;
}

}  // namespace advae::model
