#include "advae/roles.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace advae::roles {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Single root, every head in range, no cycles.
bool is_tree(const ParsedSentence& s) {
  const int n = s.size();
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (s.head[i] == -1) ++roots;
    else if (s.head[i] < 0 || s.head[i] >= n || s.head[i] == i) return false;
  }
  if (roots != 1) return false;
  for (int i = 0; i < n; ++i) {
    int hops = 0, cur = i;
    while (s.head[cur] != -1) {
      cur = s.head[cur];
      if (++hops > n) return false;  // cycle
    }
  }
  return true;
}

bool label_matches(const std::string& deprel, const std::string& label) {
  if (deprel == label) return true;
  return deprel.size() > label.size() && deprel.compare(0, label.size(), label) == 0 &&
         deprel[label.size()] == ':';
}

std::string join_tokens(const ParsedSentence& parse, const std::vector<int>& indices) {
  std::string out;
  for (size_t k = 0; k < indices.size(); ++k) {
    if (k) out += ' ';
    out += parse.tokens[static_cast<size_t>(indices[k])];
  }
  return out;
}

}  // namespace

const RoleSet& default_role_set() {
  static const RoleSet set = {
      {"verb", true, ""},
      {"subj", false, "nsubj"},
      {"dobj", false, "dobj"},
      {"pobj", false, "pobj"},
  };
  return set;
}

RoleSet parse_role_set(const std::string& spec) {
  RoleSet out;
  std::istringstream is(spec);
  std::string item;
  while (is >> item) {
    RoleRule rule;
    const size_t eq = item.find('=');
    if (eq == std::string::npos) {
      rule.name = item;
      if (item == "verb") {
        rule.is_root_verb = true;
      } else if (item == "subj") {
        rule.label = "nsubj";
      } else {
        rule.label = item;
      }
    } else {
      rule.name = item.substr(0, eq);
      rule.label = item.substr(eq + 1);
    }
    out.push_back(std::move(rule));
  }
  if (out.empty()) throw std::runtime_error("empty role set spec");
  return out;
}

std::vector<ParsedSentence> parse_conllu_text(const std::string& text,
                                              std::vector<std::string>* warnings) {
  std::vector<ParsedSentence> out;
  ParsedSentence cur;
  std::vector<int> head_1based;
  int line_no = 0;
  int sent_start_line = 0;

  auto flush = [&]() {
    if (cur.tokens.empty()) return;
    cur.head.clear();
    for (size_t i = 0; i < head_1based.size(); ++i)
      cur.head.push_back(head_1based[i] == 0 ? -1 : head_1based[i] - 1);
    if (!is_tree(cur)) {
      if (warnings)
        warnings->push_back("sentence at line " + std::to_string(sent_start_line) +
                            " rejected: HEAD column is not a tree");
    } else {
      out.push_back(cur);
    }
    cur = ParsedSentence{};
    head_1based.clear();
  };

  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      if (cur.tokens.empty()) sent_start_line = line_no;
      const size_t eq = line.find('=');
      if (eq != std::string::npos) {
        auto trim = [](std::string s) {
          const auto b = s.find_first_not_of(" \t#");
          const auto e = s.find_last_not_of(" \t");
          return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cur.comments[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
      }
      continue;
    }
    const auto cols = split_tabs(line);
    if (cols.size() != 10)
      throw ConlluError("expected 10 tab-separated columns, got " + std::to_string(cols.size()),
                        line_no);
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) continue;
    if (cur.tokens.empty()) sent_start_line = line_no;
    int id_val = 0, head_val = 0;
    try {
      id_val = std::stoi(id);
      head_val = std::stoi(cols[6]);
    } catch (const std::exception&) {
      throw ConlluError("non-numeric ID or HEAD field", line_no);
    }
    if (id_val != static_cast<int>(cur.tokens.size()) + 1)
      throw ConlluError("token ID " + id + " out of sequence", line_no);
    if (head_val < 0) throw ConlluError("negative HEAD", line_no);
    cur.tokens.push_back(cols[1]);
    cur.upos.push_back(cols[3]);
    head_1based.push_back(head_val);
    cur.deprel.push_back(cols[7]);
  }
  flush();
  return out;
}

std::vector<ParsedSentence> load_conllu(const std::string& path,
                                        std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CoNLL-U file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_conllu_text(buf.str(), warnings);
}

void write_conllu(const std::vector<ParsedSentence>& sentences, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CoNLL-U file: " + path);
  for (const auto& s : sentences) {
    for (const auto& [k, v] : s.comments) out << "# " << k << " = " << v << "\n";
    for (int i = 0; i < s.size(); ++i) {
      out << (i + 1) << '\t' << s.tokens[static_cast<size_t>(i)] << "\t_\t"
          << s.upos[static_cast<size_t>(i)] << "\t_\t_\t" << (s.head[static_cast<size_t>(i)] + 1)
          << '\t' << s.deprel[static_cast<size_t>(i)] << "\t_\t_\n";
    }
    out << "\n";
  }
}

std::vector<int> subtree_span(const ParsedSentence& parse, int node) {
  const int n = parse.size();
  std::vector<std::vector<int>> children(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    if (parse.head[static_cast<size_t>(i)] >= 0)
      children[static_cast<size_t>(parse.head[static_cast<size_t>(i)])].push_back(i);
  std::vector<int> out;
  std::vector<int> stack = {node};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (int c : children[static_cast<size_t>(cur)]) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

RoleSpans extract_roles(const ParsedSentence& parse, const RoleSet& roles) {
  RoleSpans out(roles.size());
  const int n = parse.size();
  int root = -1;
  for (int i = 0; i < n; ++i)
    if (parse.head[static_cast<size_t>(i)] == -1) {
      root = i;
      break;
    }
  for (size_t r = 0; r < roles.size(); ++r) {
    const RoleRule& rule = roles[r];
    if (rule.is_root_verb) {
      if (root >= 0 && parse.upos[static_cast<size_t>(root)] == "VERB") {
        RoleSpan span;
        span.indices = {root};
        span.text = parse.tokens[static_cast<size_t>(root)];
        out[r] = std::move(span);
      }
      continue;
    }
    // first matching token in linear order; later matches are usually
    // subordinate clauses
    for (int i = 0; i < n; ++i) {
      if (!label_matches(parse.deprel[static_cast<size_t>(i)], rule.label)) continue;
      RoleSpan span;
      span.indices = subtree_span(parse, i);
      span.text = join_tokens(parse, span.indices);
      out[r] = std::move(span);
      break;
    }
  }
  return out;
}

std::vector<int> role_token_indices(const RoleSpans& spans, int role_idx) {
  const auto& s = spans[static_cast<size_t>(role_idx)];
  return s ? s->indices : std::vector<int>{};
}

Realization realization_equal(const RoleSpans& a, const RoleSpans& b, int role_idx) {
  const auto& sa = a[static_cast<size_t>(role_idx)];
  const auto& sb = b[static_cast<size_t>(role_idx)];
  if (sa.has_value() != sb.has_value()) return Realization::incomparable;
  if (!sa.has_value()) return Realization::incomparable;  // absent on both sides
  return sa->text == sb->text ? Realization::equal : Realization::different;
}

}  // namespace advae::roles
