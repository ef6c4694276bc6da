#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advae/corpus.hpp"
#include "advae/model.hpp"
#include "advae/roles.hpp"

namespace advae::eval {

// One generated sentence from the perturbation protocol: the original decode
// of z^(l) (var = -1) or the decode of z~^(l,i) with variable i resampled.
struct PairRecord {
  std::string pair_id;
  int l = 0;
  int var = -1;  // -1: original
  std::vector<std::string> tokens;

  bool is_orig() const { return var < 0; }
};

// The latent matrices behind the perturbation protocol, in record order:
// for each l, z^(l) followed by n_vars copies with one variable resampled
// from the prior (ancestral draw for the hierarchical variant).
std::vector<Matrix> perturbation_latents(const model::Model& m, int t_dec, uint64_t seed);

// Samples t_dec prior vectors, resamples each variable once, greedy-decodes
// all t_dec * (n_vars + 1) sentences. Deterministic under seed.
std::vector<PairRecord> generate_perturbation_pairs(const model::Model& m,
                                                    const corpus::Vocab& vocab, int t_dec,
                                                    uint64_t seed, int threads);

// Line-delimited records: pair_id \t l \t var \t role \t text.
void write_pairs(const std::vector<PairRecord>& records, const std::string& path);
std::vector<PairRecord> read_pairs(const std::string& path);

enum class MatrixKind { dec, enc, strct, pb };
std::string kind_to_string(MatrixKind k);

// |R| x N_V influence probabilities. NaN marks a missing cell (no usable
// pairs). counts carries the per-cell comparable-pair count (dec/struct) or
// the per-row sentence count (enc/pb, constant across a row).
struct InfluenceMatrix {
  MatrixKind kind = MatrixKind::dec;
  std::vector<std::string> roles;
  std::vector<std::string> vars;
  Matrix values;
  Matrix counts;

  bool missing(int r, int i) const { return !(values.at(r, i) == values.at(r, i)); }
};

// Looks up role spans for a generated sentence; nullopt marks an unparsed
// record, which is excluded and counted.
using SpanLookup = std::function<std::optional<roles::RoleSpans>(const PairRecord&)>;

// Builds a SpanLookup from CoNLL-U sentences keyed by "# pair_id = ..."
// comments, or from the synthetic oracle annotator.
SpanLookup span_lookup_from_conllu(const std::vector<roles::ParsedSentence>& parses,
                                   const roles::RoleSet& role_set);
SpanLookup span_lookup_from_annotator(const corpus::SyntheticSpec& spec,
                                      const roles::RoleSet& role_set);

struct DecInfluenceResult {
  InfluenceMatrix gamma;
  int unparsed = 0;  // records excluded for lack of a parse
};

// Gamma^dec: per (role, var), the share of comparable pairs whose realization
// changed. Pairs where the role appears or disappears (or is absent on both
// sides) are discarded from the cell.
DecInfluenceResult dec_influence(const std::vector<PairRecord>& records, const SpanLookup& spans,
                                 const roles::RoleSet& role_set, int n_vars);

// Structural-change matrix: share of all pairs where the role is present in
// exactly one of the two sentences.
DecInfluenceResult struct_influence(const std::vector<PairRecord>& records,
                                    const SpanLookup& spans, const roles::RoleSet& role_set,
                                    int n_vars);

struct LayerMode {
  int layer = -1;  // -1: mean over all layers, k >= 0: layer k alone
  static LayerMode parse(const std::string& s);
  std::string to_string() const;
};

struct EncInfluenceResult {
  InfluenceMatrix gamma;
  int skipped = 0;  // unparseable/overlong sentences
};

// Gamma^enc: per (role, var), the share of role-bearing sentences where the
// head/layer-averaged attention row of the variable peaks inside the role's
// realization. Argmax ties break to the lowest token index.
EncInfluenceResult enc_influence(const std::vector<roles::ParsedSentence>& test_parses,
                                 const model::Model& m, const corpus::Vocab& vocab,
                                 LayerMode layer_mode, const roles::RoleSet& role_set,
                                 int threads);

// Counting core behind enc_influence, fed with already-averaged attention
// matrices aligned with per-sentence role spans.
InfluenceMatrix enc_influence_core(const std::vector<Matrix>& averaged_traces,
                                   const std::vector<roles::RoleSpans>& spans,
                                   const roles::RoleSet& role_set, int n_vars);

// Position baseline: pseudo-variables are token positions; cell (r, p) is the
// share of role-bearing sentences whose realization covers position p.
InfluenceMatrix position_baseline(const std::vector<roles::ParsedSentence>& train_parses,
                                  int max_len, const roles::RoleSet& role_set);

struct RoleDelta {
  std::string role;
  bool missing = false;  // entire row missing: excluded from totals
  double delta = 0.0;
  int m1 = -1;
  int m2 = -1;
};

struct DisentanglementReport {
  std::string kind;
  std::vector<RoleDelta> per_role;
  double d_total = 0.0;
  int n_gamma = 0;
};

// Top-1 minus top-2 across variables; ties break to the lowest variable
// index. Throws when a present row has fewer than two finite cells.
RoleDelta delta_gamma_row(const InfluenceMatrix& m, int row);
DisentanglementReport totals_and_counts(const InfluenceMatrix& m);

struct PplResult {
  double nll_bound = 0.0;    // total over sentences
  double ppl_bound = 0.0;    // exp(total NLL / total tokens incl. EOS)
  int64_t token_count = 0;
  int n_sentences = 0;
  std::vector<double> per_sentence_nll;
};

// Importance-sampled upper bound on NLL with K posterior samples per
// sentence, combined in log-sum-exp form.
PplResult ppl_upper_bound(const model::Model& m,
                          const std::vector<std::vector<int>>& sentences, int k_samples,
                          uint64_t seed, int threads);

// CSV heatmap: header row of variable labels, one row per role, six decimal
// places; a companion "<stem>_counts.csv" carries the counts.
void emit_heatmap(const InfluenceMatrix& m, const std::string& path);
InfluenceMatrix read_heatmap(const std::string& path, MatrixKind kind);

}  // namespace advae::eval
