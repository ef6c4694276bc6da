#include "advae/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "advae/config.hpp"
#include "advae/kernels.hpp"
#include "advae/manip.hpp"
#include "advae/training.hpp"

namespace advae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void save_report_json(const eval::DisentanglementReport& report,
                      const std::string& checkpoint_id, const std::string& path) {
  json j;
  j["kind"] = report.kind;
  j["checkpoint_id"] = checkpoint_id;
  j["d_total"] = report.d_total;
  j["n_gamma"] = report.n_gamma;
  json roles = json::array();
  for (const auto& d : report.per_role) {
    json r;
    r["role"] = d.role;
    r["missing"] = d.missing;
    r["delta"] = d.delta;
    r["m1"] = d.m1;
    r["m2"] = d.m2;
    roles.push_back(std::move(r));
  }
  j["per_role"] = std::move(roles);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write report: " + path);
    os << j.dump(2) << "\n";
  }
  fs::rename(tmp, path);
}

eval::DisentanglementReport load_report_json(const std::string& path,
                                             std::string* checkpoint_id) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open report: " + path);
  json j;
  is >> j;
  eval::DisentanglementReport out;
  out.kind = j.value("kind", "");
  out.d_total = j.at("d_total").get<double>();
  out.n_gamma = j.at("n_gamma").get<int>();
  for (const auto& r : j.at("per_role")) {
    eval::RoleDelta d;
    d.role = r.at("role").get<std::string>();
    d.missing = r.at("missing").get<bool>();
    d.delta = r.at("delta").get<double>();
    d.m1 = r.at("m1").get<int>();
    d.m2 = r.at("m2").get<int>();
    out.per_role.push_back(std::move(d));
  }
  if (checkpoint_id) *checkpoint_id = j.value("checkpoint_id", "");
  return out;
}

namespace {

struct Paths {
  std::string base;      // shared corpus artifacts
  std::string seed_dir;  // per-seed artifacts: <base>/seed_<seed>
};

Paths resolve_paths(const config::RunConfig& cfg) {
  Paths p;
  p.base = cfg.resolved_run_dir();
  p.seed_dir = p.base + "/seed_" + std::to_string(cfg.seed);
  return p;
}

config::RunConfig load_run_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::string& run_dir_flag, int64_t seed_flag,
                                  int threads_flag) {
  config::RunConfig cfg =
      config_path.empty() ? config::RunConfig{} : config::load_config(config_path);
  for (const auto& o : overrides) config::apply_override(cfg, o);
  if (!run_dir_flag.empty()) cfg.run_dir = run_dir_flag;
  if (seed_flag >= 0) cfg.seed = static_cast<uint64_t>(seed_flag);
  if (threads_flag > 0) cfg.threads = threads_flag;
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  cfg.validate();
  kernels::set_max_threads(cfg.threads);
  return cfg;
}

void write_parses(const std::vector<corpus::SyntheticSentence>& sents,
                  const corpus::SyntheticSpec& spec, const std::string& path) {
  std::vector<roles::ParsedSentence> parses;
  parses.reserve(sents.size());
  for (size_t i = 0; i < sents.size(); ++i) {
    auto p = corpus::annotate_synthetic(spec, sents[i].tokens);
    p.comments["sent_id"] = std::to_string(i);
    parses.push_back(std::move(p));
  }
  roles::write_conllu(parses, path);
}

int cmd_gen_corpus(const config::RunConfig& cfg, std::ostream& out) {
  const Paths p = resolve_paths(cfg);
  fs::create_directories(p.base);
  const auto train_sents = corpus::gen_synthetic(cfg.synthetic, cfg.n_train);
  corpus::SyntheticSpec test_spec = cfg.synthetic;
  test_spec.seed = cfg.synthetic.seed + 0x9e3779b9ull;
  const auto test_sents = corpus::gen_synthetic(test_spec, cfg.n_test);

  std::vector<std::vector<std::string>> train_tokens, test_tokens;
  for (const auto& s : train_sents) train_tokens.push_back(s.tokens);
  for (const auto& s : test_sents) test_tokens.push_back(s.tokens);
  corpus::write_corpus_file(train_tokens, p.base + "/train.txt");
  corpus::write_corpus_file(test_tokens, p.base + "/test.txt");
  write_parses(train_sents, cfg.synthetic, p.base + "/train.conllu");
  write_parses(test_sents, test_spec, p.base + "/test.conllu");
  out << "wrote " << train_sents.size() << " train / " << test_sents.size()
      << " test sentences under " << p.base << "\n";
  return 0;
}

struct LoadedCorpus {
  corpus::Vocab vocab;
  std::vector<std::vector<int>> ids;
};

LoadedCorpus load_train_corpus(const config::RunConfig& cfg, const Paths& p, std::ostream& err) {
  int skipped = 0;
  const auto tokens = corpus::load_corpus_file(p.base + "/train.txt", cfg.model.max_len, &skipped);
  if (skipped > 0) err << "warning: skipped " << skipped << " sentences over max_len\n";
  LoadedCorpus out;
  out.vocab = corpus::build_vocab(tokens, cfg.train.min_freq);
  for (const auto& t : tokens) out.ids.push_back(corpus::encode(out.vocab, t));
  return out;
}

int cmd_train(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  const auto data = load_train_corpus(cfg, p, err);
  model::ModelConfig mcfg = cfg.model;
  mcfg.vocab_size = data.vocab.size();
  mcfg.validate();
  model::Model m(mcfg, cfg.seed);
  fs::create_directories(p.seed_dir);
  const auto result = train::train(data.ids, data.vocab, m, cfg.train, p.seed_dir);
  out << "trained " << result.final_step << " steps; teacher-forced accuracy after the"
      << " reconstruction phase: " << result.accuracy_after_recon_phase << "\n";
  out << "checkpoint: " << p.seed_dir << "/checkpoint.bin\n";
  return 0;
}

train::Checkpoint load_ck(const Paths& p) {
  return train::load_checkpoint(p.seed_dir + "/checkpoint.bin");
}

std::string checkpoint_id(const Paths& p, const train::Checkpoint& ck) {
  return p.seed_dir + "/checkpoint.bin@step" + std::to_string(ck.step);
}

int cmd_perturb(const config::RunConfig& cfg, std::ostream& out) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  const auto records =
      eval::generate_perturbation_pairs(m, ck.vocab, cfg.eval.t_dec, cfg.seed, cfg.threads);
  eval::write_pairs(records, p.seed_dir + "/pairs.tsv");
  out << "wrote " << records.size() << " pair records to " << p.seed_dir << "/pairs.tsv\n";
  return 0;
}

eval::SpanLookup make_span_lookup(const config::RunConfig& cfg, const Paths& p,
                                  const roles::RoleSet& role_set, std::ostream& err) {
  const std::string conllu = p.seed_dir + "/pairs.conllu";
  if (fs::exists(conllu)) {
    std::vector<std::string> warnings;
    const auto parses = roles::load_conllu(conllu, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    err << "using external parses from " << conllu << "\n";
    return eval::span_lookup_from_conllu(parses, role_set);
  }
  return eval::span_lookup_from_annotator(cfg.synthetic, role_set);
}

void print_report(const eval::DisentanglementReport& rep, std::ostream& out) {
  out << "kind=" << rep.kind << "\n";
  char buf[128];
  for (const auto& d : rep.per_role) {
    if (d.missing) {
      std::snprintf(buf, sizeof(buf), "  %-6s (missing)\n", d.role.c_str());
    } else {
      std::snprintf(buf, sizeof(buf), "  %-6s delta=%.4f m1=%d m2=%d\n", d.role.c_str(), d.delta,
                    d.m1, d.m2);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "  D=%.4f N=%d\n", rep.d_total, rep.n_gamma);
  out << buf;
}

int cmd_eval_dec(const config::RunConfig& cfg, bool structural, std::ostream& out,
                 std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto role_set = cfg.eval.role_set();
  const auto records = eval::read_pairs(p.seed_dir + "/pairs.tsv");
  const auto lookup = make_span_lookup(cfg, p, role_set, err);
  const auto result = structural
                          ? eval::struct_influence(records, lookup, role_set, ck.model_cfg.n_vars())
                          : eval::dec_influence(records, lookup, role_set, ck.model_cfg.n_vars());
  if (result.unparsed > 0)
    err << "warning: " << result.unparsed << " records had no parse and were excluded\n";
  const std::string stem = structural ? "gamma_struct" : "gamma_dec";
  eval::emit_heatmap(result.gamma, p.seed_dir + "/" + stem + ".csv");
  const auto rep = eval::totals_and_counts(result.gamma);
  save_report_json(rep, checkpoint_id(p, ck),
                   p.seed_dir + "/report_" + rep.kind + ".json");
  print_report(rep, out);
  return 0;
}

std::vector<roles::ParsedSentence> load_eval_parses(const config::RunConfig& cfg, const Paths& p,
                                                    const std::string& split, std::ostream& err) {
  const std::string conllu = p.base + "/" + split + ".conllu";
  if (fs::exists(conllu)) {
    std::vector<std::string> warnings;
    auto parses = roles::load_conllu(conllu, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    return parses;
  }
  int skipped = 0;
  const auto tokens =
      corpus::load_corpus_file(p.base + "/" + split + ".txt", cfg.model.max_len, &skipped);
  std::vector<roles::ParsedSentence> parses;
  parses.reserve(tokens.size());
  for (const auto& t : tokens) parses.push_back(corpus::annotate_synthetic(cfg.synthetic, t));
  return parses;
}

int cmd_eval_enc(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  const auto role_set = cfg.eval.role_set();
  const auto parses = load_eval_parses(cfg, p, "test", err);
  const auto mode = eval::LayerMode::parse(cfg.eval.layer_mode);
  const auto result = eval::enc_influence(parses, m, ck.vocab, mode, role_set, cfg.threads);
  if (result.skipped > 0)
    err << "warning: " << result.skipped << " sentences skipped (length/trace mismatch)\n";
  eval::emit_heatmap(result.gamma, p.seed_dir + "/gamma_enc.csv");
  const auto rep = eval::totals_and_counts(result.gamma);
  save_report_json(rep, checkpoint_id(p, ck), p.seed_dir + "/report_enc.json");
  out << "layer_mode=" << mode.to_string() << "\n";
  print_report(rep, out);
  return 0;
}

int cmd_pb(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  fs::create_directories(p.seed_dir);
  const auto role_set = cfg.eval.role_set();
  const auto parses = load_eval_parses(cfg, p, "train", err);
  const auto gamma = eval::position_baseline(parses, cfg.model.max_len, role_set);
  eval::emit_heatmap(gamma, p.seed_dir + "/gamma_pb.csv");
  const auto rep = eval::totals_and_counts(gamma);
  save_report_json(rep, "position-baseline", p.seed_dir + "/report_pb.json");
  print_report(rep, out);
  return 0;
}

int cmd_ppl(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  int skipped = 0;
  const auto tokens =
      corpus::load_corpus_file(p.base + "/test.txt", ck.model_cfg.max_len, &skipped);
  if (skipped > 0) err << "warning: skipped " << skipped << " overlong sentences\n";
  std::vector<std::vector<int>> ids;
  for (const auto& t : tokens) ids.push_back(corpus::encode(ck.vocab, t));
  const auto res =
      eval::ppl_upper_bound(m, ids, cfg.eval.k_importance, cfg.seed, cfg.threads);
  json j;
  j["k_importance"] = cfg.eval.k_importance;
  j["nll_total"] = res.nll_bound;
  j["nll_mean"] = res.nll_bound / res.n_sentences;
  j["ppl_upper_bound"] = res.ppl_bound;
  j["tokens"] = res.token_count;
  j["sentences"] = res.n_sentences;
  {
    const std::string tmp = p.seed_dir + "/ppl.json.tmp";
    std::ofstream os(tmp, std::ios::binary);
    os << j.dump(2) << "\n";
    os.close();
    fs::rename(tmp, p.seed_dir + "/ppl.json");
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "K=%d sentences=%d nll_mean=%.4f ppl_upper_bound=%.4f\n",
                cfg.eval.k_importance, res.n_sentences, res.nll_bound / res.n_sentences,
                res.ppl_bound);
  out << buf;
  return 0;
}

struct Aggregate {
  double mean = 0.0;
  double stdev = 0.0;
  int n = 0;
};

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.n = static_cast<int>(xs.size());
  if (a.n == 0) return a;
  for (double x : xs) a.mean += x;
  a.mean /= a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.stdev = std::sqrt(ss / (a.n - 1));
  }
  return a;
}

std::string cell(const Aggregate& a) {
  if (a.n == 0) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f(%.2f)", a.mean, a.stdev);
  return buf;
}

int cmd_report(const config::RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  std::vector<uint64_t> seeds = cfg.seeds.empty() ? std::vector<uint64_t>{cfg.seed} : cfg.seeds;
  std::vector<double> d_enc, n_enc, d_dec, n_dec;
  for (uint64_t s : seeds) {
    const std::string dir = p.base + "/seed_" + std::to_string(s);
    const std::string enc_path = dir + "/report_enc.json";
    const std::string dec_path = dir + "/report_dec.json";
    if (fs::exists(enc_path)) {
      const auto rep = load_report_json(enc_path);
      d_enc.push_back(rep.d_total);
      n_enc.push_back(rep.n_gamma);
    } else {
      err << "warning: missing " << enc_path << "\n";
    }
    if (fs::exists(dec_path)) {
      const auto rep = load_report_json(dec_path);
      d_dec.push_back(rep.d_total);
      n_dec.push_back(rep.n_gamma);
    } else {
      err << "warning: missing " << dec_path << "\n";
    }
  }
  const std::string label =
      model::variant_to_string(cfg.model.variant) + "-" + std::to_string(cfg.model.n_z);
  char beta[16];
  std::snprintf(beta, sizeof(beta), "%.2f", cfg.train.beta_final);

  std::ostringstream table;
  table << "model        beta   D_enc        N_enc        D_dec        N_dec\n";
  char row[256];
  std::snprintf(row, sizeof(row), "%-12s %-6s %-12s %-12s %-12s %-12s\n", label.c_str(), beta,
                cell(aggregate(d_enc)).c_str(), cell(aggregate(n_enc)).c_str(),
                cell(aggregate(d_dec)).c_str(), cell(aggregate(n_dec)).c_str());
  table << row;
  out << table.str();

  json j;
  j["model"] = label;
  j["beta"] = cfg.train.beta_final;
  j["seeds"] = seeds;
  auto put = [&](const char* key, const std::vector<double>& xs) {
    const auto a = aggregate(xs);
    j[key] = {{"mean", a.mean}, {"std", a.stdev}, {"n", a.n}, {"values", xs}};
  };
  put("d_enc", d_enc);
  put("n_enc", n_enc);
  put("d_dec", d_dec);
  put("n_dec", n_dec);
  {
    const std::string tmp = p.base + "/report.json.tmp";
    std::ofstream os(tmp, std::ios::binary);
    os << j.dump(2) << "\n";
    os.close();
    fs::rename(tmp, p.base + "/report.json");
  }
  {
    const std::string tmp = p.base + "/report.txt.tmp";
    std::ofstream os(tmp, std::ios::binary);
    os << table.str();
    os.close();
    fs::rename(tmp, p.base + "/report.txt");
  }
  return 0;
}

manip::RoleVariableMap load_map(const config::RunConfig& cfg, const Paths& p,
                                const std::string& map_kind) {
  const std::string path = p.seed_dir + "/report_" + map_kind + ".json";
  std::string ck_id;
  const auto rep = load_report_json(path, &ck_id);
  return manip::RoleVariableMap::from_report(rep, ck_id);
}

int cmd_resample(const config::RunConfig& cfg, const std::string& sentence,
                 const std::string& role, const std::string& map_kind, int64_t draw_seed,
                 std::ostream& out) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  const auto map = load_map(cfg, p, map_kind);
  const uint64_t seed = draw_seed >= 0 ? static_cast<uint64_t>(draw_seed) : cfg.seed;
  const auto res =
      manip::resample_role(m, ck.vocab, corpus::tokenize(sentence), role, map, seed);
  out << "variable: z" << map.variable_for(role) << " (from " << map.source_kind << ")\n";
  out << "result:";
  for (const auto& t : res.tokens) out << " " << t;
  out << "\n";
  return 0;
}

int cmd_swap(const config::RunConfig& cfg, const std::string& s1, const std::string& s2,
             const std::string& role, const std::string& map_kind, std::ostream& out) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  const auto map = load_map(cfg, p, map_kind);
  const auto [r1, r2] =
      manip::swap_role(m, ck.vocab, corpus::tokenize(s1), corpus::tokenize(s2), role, map);
  out << "variable: z" << map.variable_for(role) << " (from " << map.source_kind << ")\n";
  out << "result 1:";
  for (const auto& t : r1.tokens) out << " " << t;
  out << "\nresult 2:";
  for (const auto& t : r2.tokens) out << " " << t;
  out << "\n";
  return 0;
}

int cmd_repl(const config::RunConfig& cfg, const std::string& map_kind, std::istream& in,
             std::ostream& out, std::ostream& err) {
  const Paths p = resolve_paths(cfg);
  const auto ck = load_ck(p);
  const auto m = train::restore_model(ck);
  const auto map = load_map(cfg, p, map_kind);
  out << "commands: resample <role> <sentence> | swap <role> <s1> ||| <s2> | map | quit\n";
  std::string line;
  uint64_t draw = cfg.seed;
  while (out << "> " << std::flush, std::getline(in, line)) {
    std::istringstream ls(line);
    std::string cmd;
    ls >> cmd;
    try {
      if (cmd.empty()) continue;
      if (cmd == "quit" || cmd == "exit") break;
      if (cmd == "map") {
        for (const auto& [role, var] : map.role_to_var)
          out << "  " << role << " -> z" << var << "\n";
        continue;
      }
      std::string role;
      ls >> role;
      std::string rest;
      std::getline(ls, rest);
      if (cmd == "resample") {
        const auto res = manip::resample_role(m, ck.vocab, corpus::tokenize(rest), role, map,
                                              draw++);
        out << " ";
        for (const auto& t : res.tokens) out << " " << t;
        out << "\n";
      } else if (cmd == "swap") {
        const auto sep = rest.find("|||");
        if (sep == std::string::npos) {
          err << "swap needs: swap <role> <s1> ||| <s2>\n";
          continue;
        }
        const auto [r1, r2] =
            manip::swap_role(m, ck.vocab, corpus::tokenize(rest.substr(0, sep)),
                             corpus::tokenize(rest.substr(sep + 3)), role, map);
        out << " 1:";
        for (const auto& t : r1.tokens) out << " " << t;
        out << "\n 2:";
        for (const auto& t : r2.tokens) out << " " << t;
        out << "\n";
      } else {
        err << "unknown command: " << cmd << "\n";
      }
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"attention-driven VAE: training and syntactic-role disentanglement evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  std::string config_path;
  std::string run_dir_flag;
  std::vector<std::string> overrides;
  int64_t seed_flag = -1;
  int threads_flag = 0;
  app.add_option("--config", config_path, "flat key-value config file");
  app.add_option("--run-dir", run_dir_flag, "run directory (overrides [run] dir)");
  app.add_option("--seed", seed_flag, "seed (overrides [run] seed)");
  app.add_option("--threads", threads_flag, "thread budget; 1 = fully deterministic");
  app.add_option("--set", overrides, "override: section.key=value")->take_all();

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic corpus + oracle parses");
  auto* tr = app.add_subcommand("train", "train a model on <run>/train.txt");
  auto* pert = app.add_subcommand("perturb", "generate latent perturbation pairs");
  auto* edec = app.add_subcommand("eval-dec", "decoder influence matrix from pairs");
  auto* estr = app.add_subcommand("eval-struct", "structural-change matrix from pairs");
  auto* eenc = app.add_subcommand("eval-enc", "encoder attention influence matrix");
  auto* pb = app.add_subcommand("pb", "position baseline from the training parses");
  auto* ppl = app.add_subcommand("ppl", "importance-sampled perplexity upper bound");
  auto* rep = app.add_subcommand("report", "aggregate per-seed reports, mean(std) table");

  std::string sentence, s1, s2, role, map_kind = "enc";
  int64_t draw_seed = -1;
  auto* rs = app.add_subcommand("resample", "resample one role's latent variable");
  rs->add_option("--sentence", sentence, "input sentence")->required();
  rs->add_option("--role", role, "role to resample")->required();
  rs->add_option("--map-kind", map_kind, "influence matrix behind the role map (enc|dec)");
  rs->add_option("--draw-seed", draw_seed, "seed for the fresh prior draw");
  auto* sw = app.add_subcommand("swap", "swap one role's latent variable between two sentences");
  sw->add_option("--s1", s1, "first sentence")->required();
  sw->add_option("--s2", s2, "second sentence")->required();
  sw->add_option("--role", role, "role to swap")->required();
  sw->add_option("--map-kind", map_kind, "influence matrix behind the role map (enc|dec)");
  auto* repl = app.add_subcommand("repl", "interactive resample/swap loop on stdin");
  repl->add_option("--map-kind", map_kind, "influence matrix behind the role map (enc|dec)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const auto cfg =
        load_run_config(config_path, overrides, run_dir_flag, seed_flag, threads_flag);
    if (gen->parsed()) return cmd_gen_corpus(cfg, out);
    if (tr->parsed()) return cmd_train(cfg, out, err);
    if (pert->parsed()) return cmd_perturb(cfg, out);
    if (edec->parsed()) return cmd_eval_dec(cfg, false, out, err);
    if (estr->parsed()) return cmd_eval_dec(cfg, true, out, err);
    if (eenc->parsed()) return cmd_eval_enc(cfg, out, err);
    if (pb->parsed()) return cmd_pb(cfg, out, err);
    if (ppl->parsed()) return cmd_ppl(cfg, out, err);
    if (rep->parsed()) return cmd_report(cfg, out, err);
    if (rs->parsed()) return cmd_resample(cfg, sentence, role, map_kind, draw_seed, out);
    if (sw->parsed()) return cmd_swap(cfg, s1, s2, role, map_kind, out);
    if (repl->parsed()) return cmd_repl(cfg, map_kind, in, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "no subcommand selected\n";
  return 2;
}

}  // namespace advae::cli
