#include "advae/training.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "advae/kernels.hpp"

namespace advae::train {

void TrainConfig::validate() const {
  if (beta_final < 0.0) throw std::runtime_error("beta_final must be >= 0");
  if (recon_steps < 0 || anneal_steps < 0)
    throw std::runtime_error("schedule steps must be >= 0");
  if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (epochs < 1) throw std::runtime_error("epochs must be >= 1");
  if (word_dropout_p < 0.0 || word_dropout_p > 1.0)
    throw std::runtime_error("word_dropout_p out of [0,1]");
  if (threads < 1) throw std::runtime_error("threads must be >= 1");
}

double beta_at_step(int64_t step, const TrainConfig& cfg) {
  if (step < cfg.recon_steps) return 0.0;
  if (cfg.anneal_steps == 0) return cfg.beta_final;
  const int64_t into = step - cfg.recon_steps;
  if (into >= cfg.anneal_steps) return cfg.beta_final;
  return cfg.beta_final * (static_cast<double>(into) / cfg.anneal_steps);
}

ElboTerms elbo_terms(const model::Model& m, const std::vector<std::vector<int>>& sentences,
                     const std::vector<int>& batch_indices, double beta, Rng& rng,
                     const TrainConfig& cfg, bool train_mode, model::GradStore* grads) {
  const int n = static_cast<int>(batch_indices.size());
  if (n == 0) throw std::runtime_error("elbo_terms: empty batch");

  // Per-sentence noise streams drawn serially up front keep the math
  // identical across thread counts.
  std::vector<uint64_t> sub_seeds(static_cast<size_t>(n));
  for (auto& s : sub_seeds) s = rng.next_u64();

  std::vector<double> recon(static_cast<size_t>(n)), kl(static_cast<size_t>(n));
  const int nt = std::min(cfg.threads, n);
  std::vector<std::unique_ptr<model::GradStore>> partial;
  if (grads)
    for (int t = 0; t < nt; ++t) partial.push_back(std::make_unique<model::GradStore>(m.params()));

#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (int k = 0; k < n; ++k) {
    Rng local(sub_seeds[static_cast<size_t>(k)]);
    model::GradStore* sink = nullptr;
    if (grads) {
#ifdef _OPENMP
      sink = partial[static_cast<size_t>(omp_get_thread_num())].get();
#else
      sink = partial[0].get();
#endif
    }
    nn::Tape tape(grads != nullptr);
    model::ElboBuildOptions opts;
    opts.train_mode = train_mode;
    opts.word_dropout_p = cfg.word_dropout_p;
    opts.rng = &local;
    const auto& ids = sentences[static_cast<size_t>(batch_indices[static_cast<size_t>(k)])];
    auto vars = m.build_elbo(tape, ids, beta, opts, sink);
    recon[static_cast<size_t>(k)] = tape.scalar(vars.recon);
    kl[static_cast<size_t>(k)] = tape.scalar(vars.kl);
    if (grads) {
      // 1/n on the root scales the whole sentence gradient
      nn::VarId root = tape.scale(vars.total, 1.0 / n);
      tape.backward(root);
    }
  }

  if (grads) {
    // fixed chunk order keeps the reduction deterministic per thread count
    for (int t = 0; t < nt; ++t) grads->add_scaled(*partial[static_cast<size_t>(t)], 1.0);
  }

  ElboTerms out;
  for (int k = 0; k < n; ++k) {
    out.recon += recon[static_cast<size_t>(k)];
    out.kl += kl[static_cast<size_t>(k)];
  }
  out.recon /= n;
  out.kl /= n;
  out.total = out.recon + beta * out.kl;
  return out;
}

double teacher_forced_accuracy(const model::Model& m,
                               const std::vector<std::vector<int>>& sentences, int limit,
                               int threads) {
  const int n = std::min<int>(limit, static_cast<int>(sentences.size()));
  std::vector<int64_t> hits(static_cast<size_t>(n)), totals(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int k = 0; k < n; ++k) {
    const auto& ids = sentences[static_cast<size_t>(k)];
    auto enc = m.encode_posterior(ids);
    std::vector<int> framed = corpus::frame_for_decoder(ids);
    std::span<const int> prefix(framed.data(), framed.size() - 1);
    const Matrix logits = m.decoder_logits(enc.top().mu, prefix);
    int64_t hit = 0;
    for (int i = 0; i < logits.rows; ++i) {
      const double* r = logits.row(i);
      int best = 0;
      for (int j = 1; j < logits.cols; ++j)
        if (r[j] > r[best]) best = j;
      if (best == framed[static_cast<size_t>(i) + 1]) ++hit;
    }
    hits[static_cast<size_t>(k)] = hit;
    totals[static_cast<size_t>(k)] = logits.rows;
  }
  int64_t hit = 0, total = 0;
  for (int k = 0; k < n; ++k) {
    hit += hits[static_cast<size_t>(k)];
    total += totals[static_cast<size_t>(k)];
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

AdamOptimizer::AdamOptimizer(const model::ParamSet& ps, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (int i = 0; i < ps.count(); ++i) {
    m_.emplace_back(ps.value(i).rows, ps.value(i).cols);
    v_.emplace_back(ps.value(i).rows, ps.value(i).cols);
  }
}

void AdamOptimizer::step(model::ParamSet& ps, const model::GradStore& grads, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (int h = 0; h < ps.count(); ++h) {
    Matrix& p = ps.value(h);
    Matrix& m = m_[static_cast<size_t>(h)];
    Matrix& v = v_[static_cast<size_t>(h)];
    const Matrix& g = grads.grads[static_cast<size_t>(h)];
    for (size_t i = 0; i < p.size(); ++i) {
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

TrainResult train(const std::vector<std::vector<int>>& sentences, const corpus::Vocab& vocab,
                  model::Model& m, const TrainConfig& cfg, const std::string& run_dir,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (sentences.empty()) throw std::runtime_error("train: empty corpus");
  kernels::set_max_threads(cfg.threads);

  Rng rng(cfg.seed);
  AdamOptimizer opt(m.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  model::GradStore grads(m.params());
  TrainResult result;

  std::ofstream log;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    log.open(run_dir + "/train_log.jsonl", std::ios::binary);
  }

  int64_t step = 0;
  bool measured_recon_phase = false;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const auto batches = corpus::make_batches(sentences, cfg.batch_size, cfg.seed + 1000003ull * static_cast<uint64_t>(epoch));
    for (const auto& batch : batches) {
      const double beta = beta_at_step(step, cfg);
      grads.zero();
      const ElboTerms terms =
          elbo_terms(m, sentences, batch.sentence_index, beta, rng, cfg, true, &grads);
      if (!std::isfinite(terms.total))
        throw std::runtime_error("training diverged: non-finite loss at step " +
                                 std::to_string(step) + " (recon=" + std::to_string(terms.recon) +
                                 ", kl=" + std::to_string(terms.kl) + ")");
      opt.step(m.params(), grads, cfg.lr);
      ++step;

      LogRecord rec{step, epoch, beta, terms.recon, terms.kl, terms.total};
      result.log.push_back(rec);
      if (log.is_open()) {
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "{\"step\":%lld,\"epoch\":%d,\"beta\":%.6f,\"recon\":%.6f,\"kl\":%.6f,"
                      "\"total\":%.6f}\n",
                      static_cast<long long>(rec.step), rec.epoch, rec.beta, rec.recon, rec.kl,
                      rec.total);
        log << buf;
      }
      if (!measured_recon_phase && step >= cfg.recon_steps) {
        measured_recon_phase = true;
        result.accuracy_after_recon_phase = teacher_forced_accuracy(m, sentences, 256, cfg.threads);
      }
      if (hooks.on_step && !hooks.on_step(rec)) {
        stop = true;
        break;
      }
    }
    if (!run_dir.empty()) {
      Checkpoint ck = make_checkpoint(m, cfg, vocab, opt, step, epoch, rng.state());
      save_checkpoint(run_dir + "/checkpoint.bin", ck);
      save_checkpoint(run_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".bin", ck);
    }
  }
  if (!measured_recon_phase)
    result.accuracy_after_recon_phase = teacher_forced_accuracy(m, sentences, 256, cfg.threads);
  result.final_step = step;
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint IO. Little-endian binary: magic, version, then length-prefixed
// sections. Stable within the repo.

namespace {
constexpr char kMagic[8] = {'A', 'D', 'V', 'A', 'E', 'C', 'K', '1'};

void put_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_matrix(std::ostream& os, const Matrix& m) {
  put_u64(os, static_cast<uint64_t>(m.rows));
  put_u64(os, static_cast<uint64_t>(m.cols));
  os.write(reinterpret_cast<const char*>(m.data.data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
}
void put_named(std::ostream& os, const std::vector<std::pair<std::string, Matrix>>& items) {
  put_u64(os, items.size());
  for (const auto& [name, m] : items) {
    put_str(os, name);
    put_matrix(os, m);
  }
}

uint64_t get_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string get_str(std::istream& is) {
  const uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}
Matrix get_matrix(std::istream& is) {
  const int rows = static_cast<int>(get_u64(is));
  const int cols = static_cast<int>(get_u64(is));
  Matrix m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  return m;
}
std::vector<std::pair<std::string, Matrix>> get_named(std::istream& is) {
  const uint64_t n = get_u64(is);
  std::vector<std::pair<std::string, Matrix>> out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = get_str(is);
    out.emplace_back(std::move(name), get_matrix(is));
  }
  return out;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, 8);
    // model config
    put_str(os, model::variant_to_string(ck.model_cfg.variant));
    put_i64(os, ck.model_cfg.d_model);
    put_i64(os, ck.model_cfg.n_layers);
    put_i64(os, ck.model_cfg.n_heads);
    put_i64(os, ck.model_cfg.n_z);
    put_i64(os, ck.model_cfg.d_z);
    put_f64(os, ck.model_cfg.dropout);
    put_i64(os, ck.model_cfg.vocab_size);
    put_i64(os, ck.model_cfg.max_len);
    put_i64(os, ck.model_cfg.hier_levels);
    // train config
    put_f64(os, ck.train_cfg.beta_final);
    put_i64(os, ck.train_cfg.recon_steps);
    put_i64(os, ck.train_cfg.anneal_steps);
    put_f64(os, ck.train_cfg.lr);
    put_i64(os, ck.train_cfg.batch_size);
    put_i64(os, ck.train_cfg.epochs);
    put_f64(os, ck.train_cfg.dropout);
    put_f64(os, ck.train_cfg.word_dropout_p);
    put_u64(os, ck.train_cfg.seed);
    put_i64(os, ck.train_cfg.min_freq);
    put_f64(os, ck.train_cfg.adam_beta1);
    put_f64(os, ck.train_cfg.adam_beta2);
    put_f64(os, ck.train_cfg.adam_eps);
    // vocab
    put_u64(os, ck.vocab.id_to_token.size());
    for (const auto& t : ck.vocab.id_to_token) put_str(os, t);
    // tensors + optimizer
    put_named(os, ck.tensors);
    put_named(os, ck.opt_m);
    put_named(os, ck.opt_v);
    put_i64(os, ck.opt_t);
    put_i64(os, ck.step);
    put_i64(os, ck.epoch);
    put_str(os, ck.rng_state);
    if (!os) throw std::runtime_error("short write on checkpoint: " + path);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic in " + path);
  Checkpoint ck;
  ck.model_cfg.variant = model::variant_from_string(get_str(is));
  ck.model_cfg.d_model = static_cast<int>(get_i64(is));
  ck.model_cfg.n_layers = static_cast<int>(get_i64(is));
  ck.model_cfg.n_heads = static_cast<int>(get_i64(is));
  ck.model_cfg.n_z = static_cast<int>(get_i64(is));
  ck.model_cfg.d_z = static_cast<int>(get_i64(is));
  ck.model_cfg.dropout = get_f64(is);
  ck.model_cfg.vocab_size = static_cast<int>(get_i64(is));
  ck.model_cfg.max_len = static_cast<int>(get_i64(is));
  ck.model_cfg.hier_levels = static_cast<int>(get_i64(is));
  ck.train_cfg.beta_final = get_f64(is);
  ck.train_cfg.recon_steps = static_cast<int>(get_i64(is));
  ck.train_cfg.anneal_steps = static_cast<int>(get_i64(is));
  ck.train_cfg.lr = get_f64(is);
  ck.train_cfg.batch_size = static_cast<int>(get_i64(is));
  ck.train_cfg.epochs = static_cast<int>(get_i64(is));
  ck.train_cfg.dropout = get_f64(is);
  ck.train_cfg.word_dropout_p = get_f64(is);
  ck.train_cfg.seed = get_u64(is);
  ck.train_cfg.min_freq = static_cast<int>(get_i64(is));
  ck.train_cfg.adam_beta1 = get_f64(is);
  ck.train_cfg.adam_beta2 = get_f64(is);
  ck.train_cfg.adam_eps = get_f64(is);
  const uint64_t vocab_n = get_u64(is);
  for (uint64_t i = 0; i < vocab_n; ++i) {
    std::string tok = get_str(is);
    ck.vocab.token_to_id[tok] = static_cast<int>(i);
    ck.vocab.id_to_token.push_back(std::move(tok));
  }
  ck.tensors = get_named(is);
  ck.opt_m = get_named(is);
  ck.opt_v = get_named(is);
  ck.opt_t = get_i64(is);
  ck.step = get_i64(is);
  ck.epoch = static_cast<int>(get_i64(is));
  ck.rng_state = get_str(is);
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return ck;
}

Checkpoint make_checkpoint(const model::Model& m, const TrainConfig& tcfg,
                           const corpus::Vocab& vocab, const AdamOptimizer& opt, int64_t step,
                           int epoch, const std::string& rng_state) {
  Checkpoint ck;
  ck.model_cfg = m.config();
  ck.train_cfg = tcfg;
  ck.vocab = vocab;
  for (int h = 0; h < m.params().count(); ++h) {
    ck.tensors.emplace_back(m.params().name(h), m.params().value(h));
    ck.opt_m.emplace_back(m.params().name(h), opt.m_[static_cast<size_t>(h)]);
    ck.opt_v.emplace_back(m.params().name(h), opt.v_[static_cast<size_t>(h)]);
  }
  ck.opt_t = opt.steps_taken();
  ck.step = step;
  ck.epoch = epoch;
  ck.rng_state = rng_state;
  return ck;
}

model::Model restore_model(const Checkpoint& ck) {
  model::Model m(ck.model_cfg, /*init_seed=*/0);
  for (const auto& [name, tensor] : ck.tensors) {
    const int h = m.params().find(name);
    if (h < 0) throw std::runtime_error("checkpoint tensor not in model: " + name);
    if (!m.params().value(h).same_shape(tensor))
      throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
    m.params().value(h) = tensor;
  }
  return m;
}

void restore_optimizer(const Checkpoint& ck, AdamOptimizer& opt) {
  if (ck.opt_m.size() != opt.m_.size())
    throw std::runtime_error("optimizer state size mismatch");
  for (size_t i = 0; i < ck.opt_m.size(); ++i) {
    opt.m_[i] = ck.opt_m[i].second;
    opt.v_[i] = ck.opt_v[i].second;
  }
  opt.t_ = ck.opt_t;
}

}  // namespace advae::train
