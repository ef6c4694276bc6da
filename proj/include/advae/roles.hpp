#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace advae::roles {

// One dependency-parsed sentence. head is a 0-based parent index with -1 for
// the root. Arrays are index-aligned with tokens.
struct ParsedSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> upos;
  std::vector<int> head;
  std::vector<std::string> deprel;
  std::map<std::string, std::string> comments;  // "# key = value" lines

  int size() const { return static_cast<int>(tokens.size()); }
};

struct RoleSpan {
  std::vector<int> indices;  // sorted, within sentence bounds
  std::string text;          // space-joined surface form
};

// A role is either the verbal root (root token iff UPOS == VERB) or the
// subtree of the first token carrying a dependency label.
struct RoleRule {
  std::string name;
  bool is_root_verb = false;
  std::string label;  // matched exactly or as "label:" prefix (UD subtypes)
};

using RoleSet = std::vector<RoleRule>;

// {verb, subj, dobj, pobj} with nsubj/dobj/pobj labels.
const RoleSet& default_role_set();

// Parses a role-set spec such as "verb subj dobj pobj" or extended entries
// "name=label" (e.g. "iobj=iobj amod=amod"); "verb" is the root-verb rule.
RoleSet parse_role_set(const std::string& spec);

// Per-role optional spans, index-aligned with the RoleSet in use.
using RoleSpans = std::vector<std::optional<RoleSpan>>;

struct ConlluError : std::runtime_error {
  int line;
  ConlluError(const std::string& msg, int line_no)
      : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

// Reads CoNLL-U, consuming columns ID, FORM, UPOS, HEAD, DEPREL. Multiword
// ranges (ID "i-j") and empty nodes (ID "i.k") are skipped. Sentences whose
// HEAD column does not form a single-rooted tree are dropped with a warning
// pushed to *warnings (when given) instead of failing the whole file.
std::vector<ParsedSentence> load_conllu(const std::string& path,
                                        std::vector<std::string>* warnings = nullptr);
std::vector<ParsedSentence> parse_conllu_text(const std::string& text,
                                              std::vector<std::string>* warnings = nullptr);
void write_conllu(const std::vector<ParsedSentence>& sentences, const std::string& path);

// Node plus all transitive dependents, ascending.
std::vector<int> subtree_span(const ParsedSentence& parse, int node);

RoleSpans extract_roles(const ParsedSentence& parse, const RoleSet& roles = default_role_set());

// arg_r: token indices of a role's realization (empty when absent).
std::vector<int> role_token_indices(const RoleSpans& spans, int role_idx);

enum class Realization { equal, different, incomparable };

// Pairs where the role is present on exactly one side, or absent on both,
// are incomparable; otherwise exact surface-token equality decides.
Realization realization_equal(const RoleSpans& a, const RoleSpans& b, int role_idx);

}  // namespace advae::roles
