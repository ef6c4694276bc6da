#include "advae/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace advae::corpus {

namespace {
const std::vector<std::string> kSpecials = {"<pad>", "<unk>", "<bos>", "<eos>"};
}

Vocab build_vocab(const std::vector<std::vector<std::string>>& sentences, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  std::map<std::string, int64_t> freq;
  for (const auto& s : sentences)
    for (const auto& t : s) ++freq[t];
  if (freq.empty()) throw std::runtime_error("empty corpus");

  std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.id_to_token = kSpecials;
  for (int i = 0; i < static_cast<int>(kSpecials.size()); ++i) v.token_to_id[kSpecials[static_cast<size_t>(i)]] = i;
  for (const auto& [tok, n] : items) {
    if (n < min_freq) continue;
    v.token_to_id[tok] = v.size();
    v.id_to_token.push_back(tok);
  }
  return v;
}

std::vector<int> encode(const Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(vocab.id(t));
  return out;
}

std::vector<std::string> decode(const Vocab& vocab, std::span<const int> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(vocab.token(id));
  return out;
}

std::vector<int> frame_for_decoder(std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size() + 2);
  out.push_back(Vocab::kBos);
  out.insert(out.end(), ids.begin(), ids.end());
  out.push_back(Vocab::kEos);
  return out;
}

std::vector<int> word_dropout(std::span<const int> ids, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("word dropout probability out of [0,1]");
  std::vector<int> out(ids.begin(), ids.end());
  if (p == 0.0) return out;
  for (auto& id : out) {
    if (id == Vocab::kPad || id == Vocab::kBos || id == Vocab::kEos) continue;
    if (rng.uniform() < p) id = Vocab::kUnk;
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> load_corpus_file(const std::string& path, int max_len,
                                                       int* skipped) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  int skip_count = 0;
  while (std::getline(in, line)) {
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (static_cast<int>(toks.size()) > max_len) {
      ++skip_count;
      continue;
    }
    out.push_back(std::move(toks));
  }
  if (skipped) *skipped = skip_count;
  return out;
}

void write_corpus_file(const std::vector<std::vector<std::string>>& sentences,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& s : sentences) {
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

SyntheticSpec default_synthetic_spec() {
  SyntheticSpec s;
  s.subject_nouns = {"man",  "woman", "dog",   "cat",    "boy",  "girl",
                     "bird", "child", "lady",  "farmer", "king", "nurse"};
  s.verbs_transitive = {"holds", "sees", "carries", "pulls", "pushes", "finds", "likes", "takes"};
  s.verbs_intransitive = {"sleeps", "runs", "sits", "stands", "waits", "jumps", "swims", "walks"};
  s.object_nouns = {"guitar", "ball", "rope", "book",  "stick", "hat",
                    "box",    "kite", "drum", "apple", "coin",  "lamp"};
  s.prepositions = {"on", "near", "under", "behind", "beside", "above"};
  s.adjectives = {"big", "small", "old", "young", "red", "green", "shiny", "quiet"};
  // subjects take "the" and objects take "a": each slot has a lexical anchor
  s.templates = {
      "<subj the S > <verb Vt > <dobj a O >",
      "<subj the S > <verb Vi > P <pobj a O >",
      "<subj the A S > <verb Vt > <dobj a O >",
      "<subj the S > <verb Vt > <dobj a A O >",
      "<subj the S > <verb Vi >",
      "<subj the A S > <verb Vi > P <pobj a O >",
  };
  s.seed = 1;
  return s;
}

namespace {

const std::vector<std::string>* slot_list(const SyntheticSpec& spec, const std::string& slot) {
  if (slot == "S") return &spec.subject_nouns;
  if (slot == "Vt") return &spec.verbs_transitive;
  if (slot == "Vi") return &spec.verbs_intransitive;
  if (slot == "O") return &spec.object_nouns;
  if (slot == "P") return &spec.prepositions;
  if (slot == "A") return &spec.adjectives;
  return nullptr;
}

bool is_slot_name(const std::string& tok) {
  return tok == "S" || tok == "Vt" || tok == "Vi" || tok == "O" || tok == "P" || tok == "A";
}

struct TemplateItem {
  std::string token;  // literal or slot name
  bool is_slot = false;
  int role = -1;  // index into default_role_set(), -1 outside any span
};

std::vector<TemplateItem> parse_template(const SyntheticSpec& spec, const std::string& tpl) {
  const auto& roles = roles::default_role_set();
  std::vector<TemplateItem> items;
  std::istringstream is(tpl);
  std::string tok;
  int open_role = -1;
  while (is >> tok) {
    if (tok[0] == '<') {
      const std::string name = tok.substr(1);
      open_role = -1;
      for (size_t r = 0; r < roles.size(); ++r)
        if (roles[r].name == name) open_role = static_cast<int>(r);
      if (open_role < 0)
        throw std::runtime_error("synthetic template: unknown role '" + name + "' in: " + tpl);
      continue;
    }
    if (tok == ">") {
      open_role = -1;
      continue;
    }
    TemplateItem item;
    item.token = tok;
    item.role = open_role;
    if (is_slot_name(tok)) {
      item.is_slot = true;
      const auto* list = slot_list(spec, tok);
      if (list == nullptr || list->empty())
        throw std::runtime_error("synthetic template references missing word list '" + tok +
                                 "' in: " + tpl);
    }
    items.push_back(std::move(item));
  }
  if (items.empty()) throw std::runtime_error("synthetic template is empty");
  return items;
}

}  // namespace

std::vector<SyntheticSentence> gen_synthetic(const SyntheticSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("gen_synthetic: n must be >= 1");
  if (spec.templates.empty()) throw std::runtime_error("synthetic spec has no templates");
  std::vector<std::vector<TemplateItem>> parsed;
  parsed.reserve(spec.templates.size());
  for (const auto& t : spec.templates) parsed.push_back(parse_template(spec, t));

  const auto& roles = roles::default_role_set();
  Rng rng(spec.seed);
  std::vector<SyntheticSentence> out;
  out.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto& tpl = parsed[static_cast<size_t>(rng.uniform_int(static_cast<int>(parsed.size())))];
    SyntheticSentence sent;
    sent.spans.assign(roles.size(), std::nullopt);
    std::vector<std::vector<int>> role_indices(roles.size());
    for (const auto& item : tpl) {
      std::string word = item.token;
      if (item.is_slot) {
        const auto& list = *slot_list(spec, item.token);
        word = list[static_cast<size_t>(rng.uniform_int(static_cast<int>(list.size())))];
      }
      if (item.role >= 0)
        role_indices[static_cast<size_t>(item.role)].push_back(static_cast<int>(sent.tokens.size()));
      sent.tokens.push_back(word);
    }
    for (size_t r = 0; r < roles.size(); ++r) {
      if (role_indices[r].empty()) continue;
      roles::RoleSpan span;
      span.indices = role_indices[r];
      for (size_t i = 0; i < span.indices.size(); ++i) {
        if (i) span.text += ' ';
        span.text += sent.tokens[static_cast<size_t>(span.indices[i])];
      }
      sent.spans[r] = std::move(span);
    }
    out.push_back(std::move(sent));
  }
  return out;
}

namespace {

enum class WordClass { det, adj, noun, verb, prep, other };

WordClass classify(const SyntheticSpec& spec, const std::string& tok) {
  auto in = [&](const std::vector<std::string>& list) {
    return std::find(list.begin(), list.end(), tok) != list.end();
  };
  if (tok == "the" || tok == "a" || tok == "an") return WordClass::det;
  if (in(spec.adjectives)) return WordClass::adj;
  if (in(spec.subject_nouns) || in(spec.object_nouns)) return WordClass::noun;
  if (in(spec.verbs_transitive) || in(spec.verbs_intransitive)) return WordClass::verb;
  if (in(spec.prepositions)) return WordClass::prep;
  return WordClass::other;
}

}  // namespace

roles::ParsedSentence annotate_synthetic(const SyntheticSpec& spec,
                                         const std::vector<std::string>& tokens) {
  const int n = static_cast<int>(tokens.size());
  roles::ParsedSentence parse;
  parse.tokens = tokens;
  parse.upos.assign(static_cast<size_t>(n), "X");
  parse.head.assign(static_cast<size_t>(n), -2);
  parse.deprel.assign(static_cast<size_t>(n), "dep");

  std::vector<WordClass> cls(static_cast<size_t>(n));
  int root = -1;
  for (int i = 0; i < n; ++i) {
    cls[static_cast<size_t>(i)] = classify(spec, tokens[static_cast<size_t>(i)]);
    switch (cls[static_cast<size_t>(i)]) {
      case WordClass::det: parse.upos[static_cast<size_t>(i)] = "DET"; break;
      case WordClass::adj: parse.upos[static_cast<size_t>(i)] = "ADJ"; break;
      case WordClass::noun: parse.upos[static_cast<size_t>(i)] = "NOUN"; break;
      case WordClass::verb: parse.upos[static_cast<size_t>(i)] = "VERB"; break;
      case WordClass::prep: parse.upos[static_cast<size_t>(i)] = "ADP"; break;
      case WordClass::other: parse.upos[static_cast<size_t>(i)] = "X"; break;
    }
    if (root < 0 && cls[static_cast<size_t>(i)] == WordClass::verb) root = i;
  }
  if (n == 0) return parse;
  if (root < 0) root = 0;
  parse.head[static_cast<size_t>(root)] = -1;
  parse.deprel[static_cast<size_t>(root)] = "root";

  // Greedy NP chunks: DET? ADJ* NOUN. The NP before the verb is nsubj; the
  // first NP directly after the verb is dobj; any NP after a preposition is
  // pobj hanging off that preposition.
  int last_prep = -1;
  bool saw_dobj = false;
  int i = 0;
  while (i < n) {
    if (i == root) {
      ++i;
      continue;
    }
    if (cls[static_cast<size_t>(i)] == WordClass::prep) {
      parse.deprel[static_cast<size_t>(i)] = "prep";
      parse.head[static_cast<size_t>(i)] = root;
      last_prep = i;
      ++i;
      continue;
    }
    const int start = i;
    while (i < n && i != root &&
           (cls[static_cast<size_t>(i)] == WordClass::det || cls[static_cast<size_t>(i)] == WordClass::adj))
      ++i;
    if (i < n && i != root && cls[static_cast<size_t>(i)] == WordClass::noun) {
      const int head_noun = i;
      for (int j = start; j < head_noun; ++j) {
        parse.head[static_cast<size_t>(j)] =
            head_noun;
        parse.deprel[static_cast<size_t>(j)] =
            cls[static_cast<size_t>(j)] == WordClass::det ? "det" : "amod";
      }
      if (head_noun < root) {
        parse.head[static_cast<size_t>(head_noun)] = root;
        parse.deprel[static_cast<size_t>(head_noun)] = "nsubj";
      } else if (last_prep >= 0 && last_prep > root && last_prep < head_noun) {
        parse.head[static_cast<size_t>(head_noun)] = last_prep;
        parse.deprel[static_cast<size_t>(head_noun)] = "pobj";
        last_prep = -1;
      } else if (!saw_dobj) {
        parse.head[static_cast<size_t>(head_noun)] = root;
        parse.deprel[static_cast<size_t>(head_noun)] = "dobj";
        saw_dobj = true;
      } else {
        parse.head[static_cast<size_t>(head_noun)] = root;
        parse.deprel[static_cast<size_t>(head_noun)] = "dep";
      }
      ++i;
      continue;
    }
    // Stray token (determiner with no noun, extra verb, unknown word):
    // attach to root so the structure stays a tree.
    for (int j = start; j <= std::min(i, n - 1); ++j) {
      if (j == root) continue;
      if (parse.head[static_cast<size_t>(j)] == -2) {
        parse.head[static_cast<size_t>(j)] = root;
        parse.deprel[static_cast<size_t>(j)] = "dep";
      }
    }
    if (i == start) ++i;
  }
  for (int j = 0; j < n; ++j)
    if (parse.head[static_cast<size_t>(j)] == -2) {
      parse.head[static_cast<size_t>(j)] = root;
      parse.deprel[static_cast<size_t>(j)] = "dep";
    }
  return parse;
}

std::vector<Batch> make_batches(const std::vector<std::vector<int>>& sentences, int batch_size,
                                uint64_t shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<int> order(sentences.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(shuffle_seed);
  rng.shuffle(order);

  std::vector<Batch> out;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
    Batch b;
    int width = 0;
    for (size_t k = start; k < end; ++k) {
      b.sentence_index.push_back(order[k]);
      width = std::max(width, static_cast<int>(sentences[static_cast<size_t>(order[k])].size()));
    }
    b.width = width;
    for (int idx : b.sentence_index) {
      const auto& s = sentences[static_cast<size_t>(idx)];
      std::vector<int> row(static_cast<size_t>(width), Vocab::kPad);
      std::vector<uint8_t> m(static_cast<size_t>(width), 0);
      for (size_t j = 0; j < s.size(); ++j) {
        row[j] = s[j];
        m[j] = 1;
      }
      b.padded.push_back(std::move(row));
      b.mask.push_back(std::move(m));
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace advae::corpus
