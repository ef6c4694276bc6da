#include "advae/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace advae::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const int parsed = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const unsigned long long parsed = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects an unsigned integer, got '" + v +
                             "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

// One assignment into the config; throws on unknown section.key.
void assign(RunConfig& cfg, const std::string& section, const std::string& key,
            const std::string& value) {
  const std::string full = section + "." + key;
  auto& m = cfg.model;
  auto& t = cfg.train;
  auto& e = cfg.eval;
  auto& s = cfg.synthetic;

  if (section == "model") {
    if (key == "variant") m.variant = model::variant_from_string(value);
    else if (key == "d_model") m.d_model = to_int(full, value);
    else if (key == "n_layers") m.n_layers = to_int(full, value);
    else if (key == "n_heads") m.n_heads = to_int(full, value);
    else if (key == "n_z") m.n_z = to_int(full, value);
    else if (key == "d_z") m.d_z = to_int(full, value);
    else if (key == "dropout") { m.dropout = to_double(full, value); t.dropout = m.dropout; }
    else if (key == "max_len") m.max_len = to_int(full, value);
    else if (key == "hier_levels") m.hier_levels = to_int(full, value);
    else throw std::runtime_error("config: unknown key '" + full + "'");
  } else if (section == "train") {
    if (key == "beta_final") t.beta_final = to_double(full, value);
    else if (key == "recon_steps") t.recon_steps = to_int(full, value);
    else if (key == "anneal_steps") t.anneal_steps = to_int(full, value);
    else if (key == "lr") t.lr = to_double(full, value);
    else if (key == "batch_size") t.batch_size = to_int(full, value);
    else if (key == "epochs") t.epochs = to_int(full, value);
    else if (key == "word_dropout") t.word_dropout_p = to_double(full, value);
    else if (key == "min_freq") t.min_freq = to_int(full, value);
    else throw std::runtime_error("config: unknown key '" + full + "'");
  } else if (section == "eval") {
    if (key == "t_dec") e.t_dec = to_int(full, value);
    else if (key == "k_importance") e.k_importance = to_int(full, value);
    else if (key == "layer_mode") e.layer_mode = value;
    else if (key == "roles") e.roles = value;
    else throw std::runtime_error("config: unknown key '" + full + "'");
  } else if (section == "synthetic") {
    if (key == "subject_nouns") s.subject_nouns = split_words(value);
    else if (key == "verbs_transitive") s.verbs_transitive = split_words(value);
    else if (key == "verbs_intransitive") s.verbs_intransitive = split_words(value);
    else if (key == "object_nouns") s.object_nouns = split_words(value);
    else if (key == "prepositions") s.prepositions = split_words(value);
    else if (key == "adjectives") s.adjectives = split_words(value);
    else if (key == "template") s.templates.push_back(value);  // repeatable
    else if (key == "templates_clear" && value == "true") s.templates.clear();
    else if (key == "seed") s.seed = to_u64(full, value);
    else if (key == "n_train") cfg.n_train = to_int(full, value);
    else if (key == "n_test") cfg.n_test = to_int(full, value);
    else throw std::runtime_error("config: unknown key '" + full + "'");
  } else if (section == "run") {
    if (key == "dir") cfg.run_dir = value;
    else if (key == "seed") cfg.seed = to_u64(full, value);
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& w : split_words(value)) cfg.seeds.push_back(to_u64(full, w));
    } else if (key == "threads") cfg.threads = to_int(full, value);
    else throw std::runtime_error("config: unknown key '" + full + "'");
  } else {
    throw std::runtime_error("config: unknown section '" + section + "'");
  }
}

}  // namespace

std::string RunConfig::resolved_run_dir() const {
  const char* root = std::getenv("ADVAE_RUN_ROOT");
  std::filesystem::path p(run_dir);
  if (root != nullptr && *root != '\0' && p.is_relative())
    return (std::filesystem::path(root) / p).string();
  return run_dir;
}

void RunConfig::validate() const {
  model::ModelConfig probe = model;
  probe.vocab_size = probe.vocab_size > 0 ? probe.vocab_size : 5;
  probe.validate();
  train.validate();
  if (eval.t_dec < 1) throw std::runtime_error("eval.t_dec must be >= 1");
  if (eval.k_importance < 1) throw std::runtime_error("eval.k_importance must be >= 1");
  eval::LayerMode::parse(eval.layer_mode);
  eval.role_set();
  if (n_train < 1 || n_test < 1) throw std::runtime_error("synthetic corpus sizes must be >= 1");
  if (threads < 1) throw std::runtime_error("run.threads must be >= 1");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  bool cleared_templates = false;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: bad section header at line " + std::to_string(line_no));
      section = t.substr(1, t.size() - 2);
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " + std::to_string(line_no));
    if (section.empty())
      throw std::runtime_error("config: key before any [section] at line " +
                               std::to_string(line_no));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    // user templates replace the built-in list rather than appending to it
    if (section == "synthetic" && key == "template" && !cleared_templates) {
      cfg.synthetic.templates.clear();
      cleared_templates = true;
    }
    assign(cfg, section, key, value);
  }
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must look like section.key=value: " + assignment);
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw std::runtime_error("override must look like section.key=value: " + assignment);
  assign(cfg, path.substr(0, dot), path.substr(dot + 1), value);
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  cfg.validate();
}

}  // namespace advae::config
