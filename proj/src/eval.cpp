#include "advae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace advae::eval {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string pair_id_for(int l, int var) {
  char buf[32];
  if (var < 0) std::snprintf(buf, sizeof(buf), "p%06d_orig", l);
  else std::snprintf(buf, sizeof(buf), "p%06d_v%d", l, var);
  return buf;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}
}  // namespace

std::string kind_to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::dec: return "dec";
    case MatrixKind::enc: return "enc";
    case MatrixKind::strct: return "struct";
    case MatrixKind::pb: return "pb";
  }
  return "dec";
}

std::vector<Matrix> perturbation_latents(const model::Model& m, int t_dec, uint64_t seed) {
  if (t_dec < 1) throw std::runtime_error("t_dec must be >= 1");
  const int n_vars = m.config().n_vars();
  const int var_dim = m.config().var_dim();
  Rng rng(seed);
  std::vector<Matrix> latents;
  latents.reserve(static_cast<size_t>(t_dec) * (static_cast<size_t>(n_vars) + 1));
  for (int l = 0; l < t_dec; ++l) {
    const Matrix base = m.sample_prior(rng);
    latents.push_back(base);
    for (int i = 0; i < n_vars; ++i) {
      const Matrix fresh = m.sample_prior(rng);  // ancestral for the hierarchical prior
      Matrix pert = base;
      for (int j = 0; j < var_dim; ++j) pert.at(i, j) = fresh.at(i, j);
      latents.push_back(std::move(pert));
    }
  }
  return latents;
}

std::vector<PairRecord> generate_perturbation_pairs(const model::Model& m,
                                                    const corpus::Vocab& vocab, int t_dec,
                                                    uint64_t seed, int threads) {
  const int n_vars = m.config().n_vars();
  // All latent draws happen serially so the file is byte-identical no matter
  // how the decode loop is scheduled.
  const std::vector<Matrix> latents = perturbation_latents(m, t_dec, seed);
  const int total = static_cast<int>(latents.size());
  std::vector<PairRecord> records(static_cast<size_t>(total));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int k = 0; k < total; ++k) {
    const int l = k / (n_vars + 1);
    const int slot = k % (n_vars + 1);
    PairRecord rec;
    rec.l = l;
    rec.var = slot - 1;
    rec.pair_id = pair_id_for(l, rec.var);
    const auto ids = m.greedy_decode(latents[static_cast<size_t>(k)], m.config().max_len);
    rec.tokens = corpus::decode(vocab, ids);
    records[static_cast<size_t>(k)] = std::move(rec);
  }
  return records;
}

void write_pairs(const std::vector<PairRecord>& records, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write pair records: " + path);
    for (const auto& r : records) {
      os << r.pair_id << '\t' << r.l << '\t' << r.var << '\t' << (r.is_orig() ? "orig" : "pert")
         << '\t' << join(r.tokens) << '\n';
    }
    if (!os) throw std::runtime_error("short write on pair records: " + path);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<PairRecord> read_pairs(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open pair records: " + path);
  std::vector<PairRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    size_t start = 0;
    for (int c = 0; c < 4; ++c) {
      const size_t pos = line.find('\t', start);
      if (pos == std::string::npos)
        throw std::runtime_error("malformed pair record at line " + std::to_string(line_no));
      cols.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    PairRecord rec;
    rec.pair_id = cols[0];
    rec.l = std::stoi(cols[1]);
    rec.var = std::stoi(cols[2]);
    rec.tokens = corpus::tokenize(line.substr(start));
    out.push_back(std::move(rec));
  }
  return out;
}

SpanLookup span_lookup_from_conllu(const std::vector<roles::ParsedSentence>& parses,
                                   const roles::RoleSet& role_set) {
  auto by_id = std::make_shared<std::map<std::string, roles::RoleSpans>>();
  for (const auto& p : parses) {
    const auto it = p.comments.find("pair_id");
    if (it == p.comments.end()) continue;
    (*by_id)[it->second] = roles::extract_roles(p, role_set);
  }
  return [by_id](const PairRecord& rec) -> std::optional<roles::RoleSpans> {
    const auto it = by_id->find(rec.pair_id);
    if (it == by_id->end()) return std::nullopt;
    return it->second;
  };
}

SpanLookup span_lookup_from_annotator(const corpus::SyntheticSpec& spec,
                                      const roles::RoleSet& role_set) {
  auto spec_copy = std::make_shared<corpus::SyntheticSpec>(spec);
  return [spec_copy, role_set](const PairRecord& rec) -> std::optional<roles::RoleSpans> {
    if (rec.tokens.empty()) return roles::RoleSpans(role_set.size());
    const auto parse = corpus::annotate_synthetic(*spec_copy, rec.tokens);
    return roles::extract_roles(parse, role_set);
  };
}

namespace {

struct PairedSpans {
  int l;
  std::optional<roles::RoleSpans> orig;
  std::vector<std::optional<roles::RoleSpans>> pert;  // by variable
};

std::vector<PairedSpans> collect_pairs(const std::vector<PairRecord>& records,
                                       const SpanLookup& spans, int n_vars, int* unparsed) {
  std::map<int, PairedSpans> by_l;
  int missing = 0;
  for (const auto& rec : records) {
    auto& entry = by_l[rec.l];
    entry.l = rec.l;
    if (entry.pert.empty()) entry.pert.resize(static_cast<size_t>(n_vars));
    auto looked = spans(rec);
    if (!looked) ++missing;
    if (rec.is_orig()) entry.orig = std::move(looked);
    else if (rec.var < n_vars) entry.pert[static_cast<size_t>(rec.var)] = std::move(looked);
  }
  if (unparsed) *unparsed = missing;
  std::vector<PairedSpans> out;
  out.reserve(by_l.size());
  for (auto& [l, entry] : by_l) out.push_back(std::move(entry));
  return out;
}

std::vector<std::string> var_labels(int n_vars) {
  std::vector<std::string> out;
  for (int i = 0; i < n_vars; ++i) out.push_back("z" + std::to_string(i));
  return out;
}

std::vector<std::string> role_labels(const roles::RoleSet& role_set) {
  std::vector<std::string> out;
  for (const auto& r : role_set) out.push_back(r.name);
  return out;
}

}  // namespace

DecInfluenceResult dec_influence(const std::vector<PairRecord>& records, const SpanLookup& spans,
                                 const roles::RoleSet& role_set, int n_vars) {
  DecInfluenceResult out;
  const auto pairs = collect_pairs(records, spans, n_vars, &out.unparsed);
  const int n_roles = static_cast<int>(role_set.size());
  Matrix changed(n_roles, n_vars), comparable(n_roles, n_vars);
  for (const auto& p : pairs) {
    if (!p.orig) continue;
    for (int i = 0; i < n_vars; ++i) {
      if (!p.pert[static_cast<size_t>(i)]) continue;
      for (int r = 0; r < n_roles; ++r) {
        const auto rel = roles::realization_equal(*p.orig, *p.pert[static_cast<size_t>(i)], r);
        if (rel == roles::Realization::incomparable) continue;
        comparable.at(r, i) += 1.0;
        if (rel == roles::Realization::different) changed.at(r, i) += 1.0;
      }
    }
  }
  out.gamma.kind = MatrixKind::dec;
  out.gamma.roles = role_labels(role_set);
  out.gamma.vars = var_labels(n_vars);
  out.gamma.values = Matrix(n_roles, n_vars);
  out.gamma.counts = comparable;
  for (int r = 0; r < n_roles; ++r)
    for (int i = 0; i < n_vars; ++i)
      out.gamma.values.at(r, i) =
          comparable.at(r, i) > 0 ? changed.at(r, i) / comparable.at(r, i) : kNaN;
  return out;
}

DecInfluenceResult struct_influence(const std::vector<PairRecord>& records,
                                    const SpanLookup& spans, const roles::RoleSet& role_set,
                                    int n_vars) {
  DecInfluenceResult out;
  const auto pairs = collect_pairs(records, spans, n_vars, &out.unparsed);
  const int n_roles = static_cast<int>(role_set.size());
  Matrix flips(n_roles, n_vars), totals(n_roles, n_vars);
  for (const auto& p : pairs) {
    if (!p.orig) continue;
    for (int i = 0; i < n_vars; ++i) {
      if (!p.pert[static_cast<size_t>(i)]) continue;
      for (int r = 0; r < n_roles; ++r) {
        totals.at(r, i) += 1.0;
        const bool in_orig = (*p.orig)[static_cast<size_t>(r)].has_value();
        const bool in_pert =
            (*p.pert[static_cast<size_t>(i)])[static_cast<size_t>(r)].has_value();
        if (in_orig != in_pert) flips.at(r, i) += 1.0;
      }
    }
  }
  out.gamma.kind = MatrixKind::strct;
  out.gamma.roles = role_labels(role_set);
  out.gamma.vars = var_labels(n_vars);
  out.gamma.values = Matrix(n_roles, n_vars);
  out.gamma.counts = totals;
  for (int r = 0; r < n_roles; ++r)
    for (int i = 0; i < n_vars; ++i)
      out.gamma.values.at(r, i) = totals.at(r, i) > 0 ? flips.at(r, i) / totals.at(r, i) : kNaN;
  return out;
}

LayerMode LayerMode::parse(const std::string& s) {
  if (s == "all_mean" || s.empty()) return {-1};
  if (s.rfind("layer_", 0) == 0) {
    const int k = std::stoi(s.substr(6));
    if (k < 0) throw std::runtime_error("bad layer mode: " + s);
    return {k};
  }
  throw std::runtime_error("bad layer mode: " + s + " (expected all_mean or layer_K)");
}

std::string LayerMode::to_string() const {
  return layer < 0 ? "all_mean" : "layer_" + std::to_string(layer);
}

InfluenceMatrix enc_influence_core(const std::vector<Matrix>& averaged_traces,
                                   const std::vector<roles::RoleSpans>& spans,
                                   const roles::RoleSet& role_set, int n_vars) {
  if (averaged_traces.size() != spans.size())
    throw std::runtime_error("enc_influence_core: trace/span count mismatch");
  const int n_roles = static_cast<int>(role_set.size());
  Matrix hits(n_roles, n_vars);
  std::vector<int64_t> role_present(static_cast<size_t>(n_roles), 0);
  for (size_t s = 0; s < averaged_traces.size(); ++s) {
    const Matrix& avg = averaged_traces[s];
    if (avg.rows != n_vars) throw std::runtime_error("enc_influence_core: bad trace shape");
    std::vector<int> argmax(static_cast<size_t>(n_vars));
    for (int i = 0; i < n_vars; ++i) {
      const double* row = avg.row(i);
      int best = 0;
      for (int j = 1; j < avg.cols; ++j)
        if (row[j] > row[best]) best = j;  // ties keep the lowest index
      argmax[static_cast<size_t>(i)] = best;
    }
    for (int r = 0; r < n_roles; ++r) {
      const auto idx = roles::role_token_indices(spans[s], r);
      if (idx.empty()) continue;  // role not found: discarded for this row
      ++role_present[static_cast<size_t>(r)];
      for (int i = 0; i < n_vars; ++i)
        if (std::find(idx.begin(), idx.end(), argmax[static_cast<size_t>(i)]) != idx.end())
          hits.at(r, i) += 1.0;
    }
  }
  InfluenceMatrix gamma;
  gamma.kind = MatrixKind::enc;
  gamma.roles = role_labels(role_set);
  gamma.vars = var_labels(n_vars);
  gamma.values = Matrix(n_roles, n_vars);
  gamma.counts = Matrix(n_roles, n_vars);
  for (int r = 0; r < n_roles; ++r) {
    const double t = static_cast<double>(role_present[static_cast<size_t>(r)]);
    for (int i = 0; i < n_vars; ++i) {
      gamma.counts.at(r, i) = t;
      gamma.values.at(r, i) = t > 0 ? hits.at(r, i) / t : kNaN;
    }
  }
  return gamma;
}

EncInfluenceResult enc_influence(const std::vector<roles::ParsedSentence>& test_parses,
                                 const model::Model& m, const corpus::Vocab& vocab,
                                 LayerMode layer_mode, const roles::RoleSet& role_set,
                                 int threads) {
  const int n_vars = m.config().n_vars();
  const int n = static_cast<int>(test_parses.size());

  std::vector<std::optional<Matrix>> traces(static_cast<size_t>(n));
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int s = 0; s < n; ++s) {
    const auto& parse = test_parses[static_cast<size_t>(s)];
    if (parse.size() == 0 || parse.size() > m.config().max_len) continue;
    std::vector<std::string> lowered;
    lowered.reserve(parse.tokens.size());
    for (const auto& tok : parse.tokens) {
      const auto parts = corpus::tokenize(tok);
      lowered.push_back(parts.empty() ? tok : parts[0]);
    }
    const auto ids = corpus::encode(vocab, lowered);
    const auto enc = m.encode_posterior(ids);
    if (enc.trace.weights.empty()) continue;  // variant without attention
    Matrix avg = enc.trace.averaged(layer_mode.layer);
    if (avg.cols != parse.size()) continue;
    traces[static_cast<size_t>(s)] = std::move(avg);
  }

  EncInfluenceResult out;
  std::vector<Matrix> usable_traces;
  std::vector<roles::RoleSpans> usable_spans;
  for (int s = 0; s < n; ++s) {
    if (!traces[static_cast<size_t>(s)]) {
      ++out.skipped;
      continue;
    }
    usable_traces.push_back(std::move(*traces[static_cast<size_t>(s)]));
    usable_spans.push_back(roles::extract_roles(test_parses[static_cast<size_t>(s)], role_set));
  }
  out.gamma = enc_influence_core(usable_traces, usable_spans, role_set, n_vars);
  return out;
}

InfluenceMatrix position_baseline(const std::vector<roles::ParsedSentence>& train_parses,
                                  int max_len, const roles::RoleSet& role_set) {
  const int n_roles = static_cast<int>(role_set.size());
  InfluenceMatrix out;
  out.kind = MatrixKind::pb;
  out.roles = role_labels(role_set);
  for (int p = 0; p < max_len; ++p) out.vars.push_back("pos" + std::to_string(p));
  Matrix hits(n_roles, max_len);
  std::vector<int64_t> present(static_cast<size_t>(n_roles), 0);
  for (const auto& parse : train_parses) {
    const auto spans = roles::extract_roles(parse, role_set);
    for (int r = 0; r < n_roles; ++r) {
      const auto idx = roles::role_token_indices(spans, r);
      if (idx.empty()) continue;
      ++present[static_cast<size_t>(r)];
      for (int j : idx)
        if (j < max_len) hits.at(r, j) += 1.0;
    }
  }
  out.values = Matrix(n_roles, max_len);
  out.counts = Matrix(n_roles, max_len);
  for (int r = 0; r < n_roles; ++r) {
    const double t = static_cast<double>(present[static_cast<size_t>(r)]);
    for (int p = 0; p < max_len; ++p) {
      out.counts.at(r, p) = t;
      out.values.at(r, p) = t > 0 ? hits.at(r, p) / t : kNaN;
    }
  }
  return out;
}

RoleDelta delta_gamma_row(const InfluenceMatrix& m, int row) {
  RoleDelta out;
  out.role = m.roles[static_cast<size_t>(row)];
  int finite = 0;
  for (int i = 0; i < m.values.cols; ++i)
    if (!m.missing(row, i)) ++finite;
  if (finite == 0) {
    out.missing = true;
    return out;
  }
  if (finite < 2)
    throw std::runtime_error("delta_gamma: row '" + out.role + "' has fewer than 2 usable cells");
  for (int i = 0; i < m.values.cols; ++i) {
    if (m.missing(row, i)) continue;
    if (out.m1 < 0 || m.values.at(row, i) > m.values.at(row, out.m1)) out.m1 = i;
  }
  for (int i = 0; i < m.values.cols; ++i) {
    if (m.missing(row, i) || i == out.m1) continue;
    if (out.m2 < 0 || m.values.at(row, i) > m.values.at(row, out.m2)) out.m2 = i;
  }
  out.delta = m.values.at(row, out.m1) - m.values.at(row, out.m2);
  return out;
}

DisentanglementReport totals_and_counts(const InfluenceMatrix& m) {
  DisentanglementReport rep;
  rep.kind = kind_to_string(m.kind);
  std::vector<int> winners;
  for (int r = 0; r < m.values.rows; ++r) {
    RoleDelta d = delta_gamma_row(m, r);
    if (!d.missing) {
      rep.d_total += d.delta;
      winners.push_back(d.m1);
    }
    rep.per_role.push_back(std::move(d));
  }
  std::sort(winners.begin(), winners.end());
  winners.erase(std::unique(winners.begin(), winners.end()), winners.end());
  rep.n_gamma = static_cast<int>(winners.size());
  return rep;
}

PplResult ppl_upper_bound(const model::Model& m,
                          const std::vector<std::vector<int>>& sentences, int k_samples,
                          uint64_t seed, int threads) {
  if (k_samples < 1) throw std::runtime_error("ppl_upper_bound: K must be >= 1");
  const int n = static_cast<int>(sentences.size());
  PplResult out;
  out.n_sentences = n;
  out.per_sentence_nll.assign(static_cast<size_t>(n), 0.0);
  std::vector<int64_t> tokens(static_cast<size_t>(n), 0);

  Rng base(seed);
  std::vector<uint64_t> sub_seeds(static_cast<size_t>(n));
  for (auto& s : sub_seeds) s = base.next_u64();

#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (int s = 0; s < n; ++s) {
    const auto& ids = sentences[static_cast<size_t>(s)];
    Rng rng(sub_seeds[static_cast<size_t>(s)]);
    const auto enc = m.encode_posterior(ids);
    const auto framed = corpus::frame_for_decoder(ids);
    std::vector<double> log_w(static_cast<size_t>(k_samples));
    for (int k = 0; k < k_samples; ++k) {
      // one chain of posterior draws across hierarchy levels
      std::vector<Matrix> chain;
      chain.reserve(enc.levels.size());
      for (const auto& level : enc.levels) {
        Matrix eps(level.mu.rows, level.mu.cols);
        for (auto& v : eps.data) v = rng.normal();
        chain.push_back(model::sample_latent(level, eps));
      }
      const double lp_s = m.sentence_log_prob(framed, chain.back());
      const double lp_z = m.prior_log_density(chain);
      const double lq_z = m.posterior_log_density(enc, chain);
      log_w[static_cast<size_t>(k)] = lp_s + lp_z - lq_z;
    }
    double mx = log_w[0];
    for (double w : log_w) mx = std::max(mx, w);
    double sum = 0.0;
    for (double w : log_w) sum += std::exp(w - mx);
    const double lse = mx + std::log(sum);
    out.per_sentence_nll[static_cast<size_t>(s)] =
        -(lse - std::log(static_cast<double>(k_samples)));
    tokens[static_cast<size_t>(s)] = static_cast<int64_t>(ids.size()) + 1;  // + EOS
  }

  for (int s = 0; s < n; ++s) {
    out.nll_bound += out.per_sentence_nll[static_cast<size_t>(s)];
    out.token_count += tokens[static_cast<size_t>(s)];
  }
  out.ppl_bound = std::exp(out.nll_bound / static_cast<double>(out.token_count));
  return out;
}

namespace {
std::string counts_path_for(const std::string& path) {
  const size_t dot = path.rfind('.');
  if (dot == std::string::npos || path.find('/', dot) != std::string::npos)
    return path + "_counts";
  return path.substr(0, dot) + "_counts" + path.substr(dot);
}

void write_csv(const std::string& path, const std::vector<std::string>& roles,
               const std::vector<std::string>& vars, const Matrix& m, bool integer_counts) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write heatmap CSV: " + path);
    os << "role";
    for (const auto& v : vars) os << ',' << v;
    os << '\n';
    char buf[64];
    for (int r = 0; r < m.rows; ++r) {
      os << roles[static_cast<size_t>(r)];
      for (int c = 0; c < m.cols; ++c) {
        const double v = m.at(r, c);
        if (v != v) {
          os << ",nan";
        } else if (integer_counts) {
          std::snprintf(buf, sizeof(buf), ",%.0f", v);
          os << buf;
        } else {
          std::snprintf(buf, sizeof(buf), ",%.6f", v);
          os << buf;
        }
      }
      os << '\n';
    }
    if (!os) throw std::runtime_error("short write on heatmap CSV: " + path);
  }
  std::filesystem::rename(tmp, path);
}
}  // namespace

void emit_heatmap(const InfluenceMatrix& m, const std::string& path) {
  write_csv(path, m.roles, m.vars, m.values, false);
  write_csv(counts_path_for(path), m.roles, m.vars, m.counts, true);
}

InfluenceMatrix read_heatmap(const std::string& path, MatrixKind kind) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open heatmap CSV: " + path);
  InfluenceMatrix out;
  out.kind = kind;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty heatmap CSV: " + path);
  {
    std::istringstream hs(line);
    std::string cell;
    bool first = true;
    while (std::getline(hs, cell, ',')) {
      if (first) first = false;
      else out.vars.push_back(cell);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    out.roles.push_back(cell);
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) vals.push_back(cell == "nan" ? kNaN : std::stod(cell));
    if (vals.size() != out.vars.size())
      throw std::runtime_error("ragged heatmap CSV row in " + path);
    rows.push_back(std::move(vals));
  }
  out.values = Matrix(static_cast<int>(rows.size()), static_cast<int>(out.vars.size()));
  out.counts = Matrix(out.values.rows, out.values.cols);
  for (int r = 0; r < out.values.rows; ++r)
    for (int c = 0; c < out.values.cols; ++c)
      out.values.at(r, c) = rows[static_cast<size_t>(r)][static_cast<size_t>(c)];
  return out;
}

}  // namespace advae::eval
