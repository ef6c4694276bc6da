#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "advae/rng.hpp"
#include "advae/roles.hpp"

namespace advae::corpus {

// Token/id mapping. The four specials occupy the lowest ids; unknown tokens
// map to UNK on lookup.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;  // includes specials

  int id(const std::string& token) const {
    const auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
  }
  const std::string& token(int id) const { return id_to_token[static_cast<size_t>(id)]; }
  int size() const { return static_cast<int>(id_to_token.size()); }
};

// Frequency-thresholded vocabulary; id order is frequency descending then
// lexicographic, after the specials. Throws on an empty corpus.
Vocab build_vocab(const std::vector<std::vector<std::string>>& sentences, int min_freq);

std::vector<int> encode(const Vocab& vocab, const std::vector<std::string>& tokens);
std::vector<std::string> decode(const Vocab& vocab, std::span<const int> ids);

// BOS-prefixed, EOS-suffixed framing for decoder targets.
std::vector<int> frame_for_decoder(std::span<const int> ids);

// Replaces each non-special id with UNK independently with probability p.
// BOS/EOS/PAD are never touched; length is preserved.
std::vector<int> word_dropout(std::span<const int> ids, double p, Rng& rng);

struct TokenizedSentence {
  std::vector<std::string> tokens;
  std::vector<int> ids;  // unframed token ids
};

// Whitespace split, lowercased.
std::vector<std::string> tokenize(const std::string& line);

// One sentence per line, UTF-8. Sentences longer than max_len are skipped
// and counted in *skipped.
std::vector<std::vector<std::string>> load_corpus_file(const std::string& path, int max_len,
                                                       int* skipped = nullptr);
void write_corpus_file(const std::vector<std::vector<std::string>>& sentences,
                       const std::string& path);

// ---------------------------------------------------------------------------
// Synthetic template grammar. Slots draw from word lists:
//   S - subject_nouns   Vt - verbs_transitive  Vi - verbs_intransitive
//   O - object_nouns    P  - prepositions      A  - adjectives
// Role spans are bracketed inline: "<subj the S > <verb Vt > <dobj the O >".
// Everything outside brackets is emitted literally.
struct SyntheticSpec {
  std::vector<std::string> subject_nouns;
  std::vector<std::string> verbs_transitive;
  std::vector<std::string> verbs_intransitive;
  std::vector<std::string> object_nouns;
  std::vector<std::string> prepositions;
  std::vector<std::string> adjectives;
  std::vector<std::string> templates;
  uint64_t seed = 1;
};

// Small built-in grammar (about 60 surface forms) with subject/verb/object
// slots in distinct positions.
SyntheticSpec default_synthetic_spec();

struct SyntheticSentence {
  std::vector<std::string> tokens;
  roles::RoleSpans spans;  // aligned with default_role_set()
};

// Deterministic under spec.seed. Throws a config error when a template
// references an empty or unknown word list.
std::vector<SyntheticSentence> gen_synthetic(const SyntheticSpec& spec, int n);

// Rule-based dependency annotation for any token sequence over the grammar's
// vocabulary: verb root, NP before the verb -> nsubj, NP after the verb ->
// dobj, NP after a preposition -> pobj. Total and deterministic, so decoder
// output from a model trained on the grammar can be evaluated without an
// external parser.
roles::ParsedSentence annotate_synthetic(const SyntheticSpec& spec,
                                         const std::vector<std::string>& tokens);

// ---------------------------------------------------------------------------
// Batching.
struct Batch {
  std::vector<int> sentence_index;        // into the corpus passed to make_batches
  std::vector<std::vector<int>> padded;   // right-padded with PAD, equal width
  std::vector<std::vector<uint8_t>> mask; // 1 = real token, 0 = pad
  int width = 0;
};

// Every sentence appears exactly once per epoch; order is shuffled with
// shuffle_seed.
std::vector<Batch> make_batches(const std::vector<std::vector<int>>& sentences, int batch_size,
                                uint64_t shuffle_seed);

}  // namespace advae::corpus
