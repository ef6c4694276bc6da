// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exit status is nonzero when any
// criterion fails. Criterion 8 is stochastic (5 training seeds); its rerun
// policy is documented in the README.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "advae/cli.hpp"
#include "advae/corpus.hpp"
#include "advae/eval.hpp"
#include "advae/kernels.hpp"
#include "advae/roles.hpp"
#include "advae/training.hpp"
#include "fixtures.hpp"

using namespace advae;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

double secs(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct DeskRun {
  corpus::Vocab vocab;
  std::vector<std::vector<int>> train_ids;
  std::vector<std::vector<int>> test_ids;
  std::vector<roles::ParsedSentence> test_parses;
  corpus::SyntheticSpec spec;
};

DeskRun make_desk_corpus() {
  DeskRun out;
  out.spec = corpus::default_synthetic_spec();
  const auto train = corpus::gen_synthetic(out.spec, 2000);
  auto test_spec = out.spec;
  test_spec.seed = out.spec.seed + 999;
  const auto test = corpus::gen_synthetic(test_spec, 400);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : train) tokens.push_back(s.tokens);
  out.vocab = corpus::build_vocab(tokens, 1);
  for (const auto& t : tokens) out.train_ids.push_back(corpus::encode(out.vocab, t));
  for (const auto& s : test) {
    out.test_ids.push_back(corpus::encode(out.vocab, s.tokens));
    out.test_parses.push_back(corpus::annotate_synthetic(test_spec, s.tokens));
  }
  return out;
}

model::ModelConfig desk_model_config(int vocab_size) {
  model::ModelConfig mc;
  mc.variant = model::Variant::advae;
  mc.d_model = 64;
  mc.n_layers = 1;
  mc.n_heads = 4;
  mc.n_z = 4;
  mc.d_z = 16;
  mc.dropout = 0.1;
  mc.vocab_size = vocab_size;
  mc.max_len = 16;
  return mc;
}

train::TrainConfig desk_train_config(uint64_t seed, int threads) {
  train::TrainConfig tc;
  tc.beta_final = 0.3;
  tc.recon_steps = 4500;
  tc.anneal_steps = 1000;
  tc.lr = 2e-3;
  tc.batch_size = 32;
  tc.epochs = 200;  // the step cap below ends the run
  tc.dropout = 0.1;
  tc.word_dropout_p = 0.1;
  tc.seed = seed;
  tc.threads = threads;
  return tc;
}

// ---------------------------------------------------------------------------
// Criterion 1: influence matrices match an independent brute-force recount
// exactly on hand-built logs with >= 20 pairs/sentences per cell.

Outcome criterion_1() {
  Outcome oc{1, "metric-oracle equivalence (dec/enc/struct/pb recount, tolerance 0)"};
  const auto t0 = Clock::now();
  const auto& role_set = roles::default_role_set();
  const int n_roles = 4, n_vars = 4, t_dec = 25;
  Rng rng(2024);

  // synthetic role-span table over all pair records
  auto random_spans = [&rng](int /*l*/) {
    roles::RoleSpans sp(4);
    auto pick = [&rng](std::vector<std::string> opts) -> std::optional<roles::RoleSpan> {
      const int c = rng.uniform_int(static_cast<int>(opts.size()) + 1);
      if (c == static_cast<int>(opts.size())) return std::nullopt;  // absent
      roles::RoleSpan s;
      s.text = opts[static_cast<size_t>(c)];
      s.indices = {0};
      return s;
    };
    sp[0] = pick({"v1", "v2", "v3"});
    sp[1] = pick({"s1", "s2", "s3"});
    sp[2] = pick({"d1", "d2"});
    sp[3] = pick({"p1", "p2"});
    return sp;
  };

  std::vector<eval::PairRecord> records;
  std::map<std::string, roles::RoleSpans> table;
  for (int l = 0; l < t_dec; ++l) {
    for (int v = -1; v < n_vars; ++v) {
      eval::PairRecord rec;
      rec.l = l;
      rec.var = v;
      rec.pair_id = "c1_" + std::to_string(l) + "_" + std::to_string(v);
      rec.tokens = {"x"};
      table[rec.pair_id] = random_spans(l);
      records.push_back(std::move(rec));
    }
  }
  auto lookup = [&table](const eval::PairRecord& r) -> std::optional<roles::RoleSpans> {
    return table.at(r.pair_id);
  };
  const auto dec = eval::dec_influence(records, lookup, role_set, n_vars);
  const auto str = eval::struct_influence(records, lookup, role_set, n_vars);

  bool ok = true;
  std::ostringstream why;
  for (int r = 0; r < n_roles && ok; ++r) {
    for (int v = 0; v < n_vars && ok; ++v) {
      int comparable = 0, changed = 0, flips = 0;
      for (int l = 0; l < t_dec; ++l) {
        const auto& orig = table["c1_" + std::to_string(l) + "_-1"][static_cast<size_t>(r)];
        const auto& pert =
            table["c1_" + std::to_string(l) + "_" + std::to_string(v)][static_cast<size_t>(r)];
        if (orig.has_value() != pert.has_value()) ++flips;
        else if (orig.has_value()) {
          ++comparable;
          if (orig->text != pert->text) ++changed;
        }
      }
      if (dec.gamma.counts.at(r, v) != comparable) { ok = false; why << "dec count mismatch"; }
      if (comparable > 0 &&
          dec.gamma.values.at(r, v) != static_cast<double>(changed) / comparable) {
        ok = false;
        why << "dec value mismatch at (" << r << "," << v << ")";
      }
      if (str.gamma.values.at(r, v) != static_cast<double>(flips) / t_dec) {
        ok = false;
        why << "struct value mismatch at (" << r << "," << v << ")";
      }
    }
  }

  // encoder side: random row-stochastic traces over 30 sentences
  std::vector<Matrix> traces;
  std::vector<roles::RoleSpans> spans;
  for (int s = 0; s < 30; ++s) {
    const int len = 5 + rng.uniform_int(6);
    Matrix avg(n_vars, len);
    for (int i = 0; i < n_vars; ++i) {
      double sum = 0.0;
      for (int j = 0; j < len; ++j) {
        avg.at(i, j) = rng.uniform() + 1e-9;
        sum += avg.at(i, j);
      }
      for (int j = 0; j < len; ++j) avg.at(i, j) /= sum;
    }
    traces.push_back(std::move(avg));
    roles::RoleSpans sp(4);
    sp[0] = roles::RoleSpan{{2}, "v"};
    sp[1] = roles::RoleSpan{{0, 1}, "s"};
    if (s % 3 != 0) sp[2] = roles::RoleSpan{{3, 4}, "d"};
    spans.push_back(std::move(sp));
  }
  const auto enc = eval::enc_influence_core(traces, spans, role_set, n_vars);
  for (int r = 0; r < n_roles && ok; ++r) {
    for (int v = 0; v < n_vars && ok; ++v) {
      int present = 0, hits = 0;
      for (int s = 0; s < 30; ++s) {
        const auto idx = roles::role_token_indices(spans[static_cast<size_t>(s)], r);
        if (idx.empty()) continue;
        ++present;
        const Matrix& avg = traces[static_cast<size_t>(s)];
        int best = 0;
        for (int j = 1; j < avg.cols; ++j)
          if (avg.at(v, j) > avg.at(v, best)) best = j;
        for (int k : idx)
          if (k == best) {
            ++hits;
            break;
          }
      }
      if (present == 0) {
        if (!enc.missing(r, v)) { ok = false; why << "enc missing-cell mismatch"; }
      } else if (enc.values.at(r, v) != static_cast<double>(hits) / present) {
        ok = false;
        why << "enc value mismatch at (" << r << "," << v << ")";
      }
    }
  }

  // position baseline against direct counting on a fixed-template corpus
  corpus::SyntheticSpec spec = corpus::default_synthetic_spec();
  spec.templates = {"<subj the S > <verb Vt > <dobj a O >"};
  const auto sents = corpus::gen_synthetic(spec, 60);
  std::vector<roles::ParsedSentence> parses;
  for (const auto& s : sents) parses.push_back(corpus::annotate_synthetic(spec, s.tokens));
  const auto pb = eval::position_baseline(parses, 8, role_set);
  for (int r = 0; r < n_roles && ok; ++r) {
    int present = 0;
    std::vector<int> hits(8, 0);
    for (const auto& parse : parses) {
      const auto sp = roles::extract_roles(parse, role_set);
      const auto idx = roles::role_token_indices(sp, r);
      if (idx.empty()) continue;
      ++present;
      for (int j : idx)
        if (j < 8) ++hits[static_cast<size_t>(j)];
    }
    for (int p = 0; p < 8 && ok; ++p) {
      if (present == 0) {
        if (!pb.missing(r, p)) { ok = false; why << "pb missing-cell mismatch"; }
      } else if (pb.values.at(r, p) != static_cast<double>(hits[static_cast<size_t>(p)]) / present) {
        ok = false;
        why << "pb value mismatch";
      }
    }
  }

  oc.seconds = secs(t0);
  if (ok && oc.seconds >= 1.0) {
    ok = false;
    why << "recount exceeded 1 s";
  }
  oc.pass = ok;
  std::ostringstream d;
  d << "exact match on " << t_dec << " pairs/cell + 30 traces + 60 pb sentences, "
    << std::fixed;
  d.precision(3);
  d << oc.seconds << " s";
  oc.detail = ok ? d.str() : why.str();
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 2: aggregation of the reference per-role deltas.

Outcome criterion_2() {
  Outcome oc{2, "aggregation fidelity (D = 0.98, N = 3, tolerance 1e-9)"};
  const auto t0 = Clock::now();
  eval::InfluenceMatrix m;
  m.kind = eval::MatrixKind::pb;
  m.roles = {"verb", "subj", "dobj", "pobj"};
  m.vars = {"z0", "z1", "z2", "z3"};
  m.values = Matrix(4, 4);
  m.counts = Matrix::filled(4, 4, 100.0);
  // rows engineered so the per-role deltas are 0.12 / 0.70 / 0.12 / 0.04
  // with winners on three distinct variables
  m.values.at(0, 0) = 0.12;
  m.values.at(1, 1) = 0.70;
  m.values.at(2, 2) = 0.12;
  m.values.at(3, 2) = 0.04;
  const auto rep = eval::totals_and_counts(m);
  oc.pass = std::abs(rep.d_total - 0.98) <= 1e-9 && rep.n_gamma == 3;
  std::ostringstream d;
  d << "D = " << rep.d_total << ", N = " << rep.n_gamma;
  oc.detail = d.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 3: role extraction fixtures + oracle-corpus agreement.

Outcome criterion_3() {
  Outcome oc{3, "role extraction (fixture table exact, synthetic agreement 100%)"};
  const auto t0 = Clock::now();
  const auto sents = roles::parse_conllu_text(fixtures::conllu_fixture_text());
  const auto expected = fixtures::expected_extractions();
  bool ok = sents.size() == expected.size();
  std::ostringstream why;
  const auto& role_set = roles::default_role_set();
  for (size_t s = 0; ok && s < sents.size(); ++s) {
    const auto spans = roles::extract_roles(sents[s], role_set);
    const std::optional<std::string>* want[4] = {&expected[s].verb, &expected[s].subj,
                                                 &expected[s].dobj, &expected[s].pobj};
    for (int r = 0; r < 4; ++r) {
      const bool have = spans[static_cast<size_t>(r)].has_value();
      if (have != want[r]->has_value() ||
          (have && spans[static_cast<size_t>(r)]->text != **want[r])) {
        ok = false;
        why << "fixture '" << expected[s].sentence << "' role "
            << role_set[static_cast<size_t>(r)].name;
        break;
      }
    }
  }

  const auto spec = corpus::default_synthetic_spec();
  const auto corpus_sents = corpus::gen_synthetic(spec, 2000);
  int agree = 0;
  for (const auto& s : corpus_sents) {
    const auto parse = corpus::annotate_synthetic(spec, s.tokens);
    const auto extracted = roles::extract_roles(parse, role_set);
    bool same = true;
    for (size_t r = 0; r < extracted.size(); ++r) {
      if (extracted[r].has_value() != s.spans[r].has_value()) same = false;
      else if (extracted[r] && (extracted[r]->indices != s.spans[r]->indices ||
                                extracted[r]->text != s.spans[r]->text))
        same = false;
    }
    agree += same ? 1 : 0;
  }
  if (agree != 2000) {
    ok = false;
    why << "synthetic agreement " << agree << "/2000";
  }
  oc.pass = ok;
  oc.detail = ok ? "10 fixtures exact, 2000/2000 oracle agreement" : why.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 4: finite-difference gradient check on the micro configuration.

Outcome criterion_4() {
  Outcome oc{4, "gradient check (micro config, 60 params, rel err <= 1e-3)"};
  const auto t0 = Clock::now();
  model::ModelConfig mc;
  mc.d_model = 8;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.n_z = 2;
  mc.d_z = 4;
  mc.dropout = 0.0;
  mc.vocab_size = 11;
  mc.max_len = 12;
  model::Model m(mc, 99);
  const std::vector<int> ids = {4, 7, 5, 9, 4, 6};
  const double beta = 0.4;
  const uint64_t noise_seed = 4321;
  const double h = 1e-3;

  model::GradStore grads(m.params());
  {
    nn::Tape tape(true);
    Rng rng(noise_seed);
    model::ElboBuildOptions opts;
    opts.rng = &rng;
    const auto vars = m.build_elbo(tape, ids, beta, opts, &grads);
    tape.backward(vars.total);
  }
  auto eval_loss = [&]() {
    nn::Tape tape(false);
    Rng rng(noise_seed);
    model::ElboBuildOptions opts;
    opts.rng = &rng;
    return tape.scalar(m.build_elbo(tape, ids, beta, opts, nullptr).total);
  };

  Rng pick(7);
  int checked = 0;
  double worst = 0.0;
  bool ok = true;
  std::ostringstream why;
  while (checked < 60) {
    const int handle = pick.uniform_int(m.params().count());
    Matrix& tensor = m.params().value(handle);
    const int entry = pick.uniform_int(static_cast<int>(tensor.size()));
    const double keep = tensor.data[static_cast<size_t>(entry)];
    tensor.data[static_cast<size_t>(entry)] = keep + h;
    const double up = eval_loss();
    tensor.data[static_cast<size_t>(entry)] = keep - h;
    const double down = eval_loss();
    tensor.data[static_cast<size_t>(entry)] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double an = grads.grads[static_cast<size_t>(handle)].data[static_cast<size_t>(entry)];
    const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
    worst = std::max(worst, err);
    if (err > 1e-3) {
      ok = false;
      why << m.params().name(handle) << "[" << entry << "]: fd=" << fd << " grad=" << an;
      break;
    }
    ++checked;
  }
  oc.seconds = secs(t0);
  if (ok && oc.seconds >= 60.0) {
    ok = false;
    why << "check exceeded 60 s";
  }
  oc.pass = ok;
  std::ostringstream d;
  d << checked << " params, worst rel err " << worst << ", " << std::fixed;
  d.precision(1);
  d << oc.seconds << " s";
  oc.detail = ok ? d.str() : why.str();
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 5: closed-form KL against Monte-Carlo.

Outcome criterion_5() {
  Outcome oc{5, "KL correctness (MC within 2% on 20 states, KL(0,1) = 0)"};
  const auto t0 = Clock::now();
  model::LatentState unit;
  unit.mu = Matrix(2, 3);
  unit.sigma = Matrix::filled(2, 3, 1.0);
  bool ok = model::kl_to_std_normal(unit) == 0.0;
  std::ostringstream why;
  if (!ok) why << "KL(0,1) != 0";

  Rng rng(555);
  double worst = 0.0;
  for (int trial = 0; ok && trial < 20; ++trial) {
    model::LatentState st;
    st.mu = Matrix(2, 4);
    st.sigma = Matrix(2, 4);
    for (auto& v : st.mu.data) v = 2.0 * rng.uniform() - 1.0;
    for (auto& v : st.sigma.data) v = 0.3 + 1.2 * rng.uniform();
    const double closed = model::kl_to_std_normal(st);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      for (size_t k = 0; k < st.mu.size(); ++k) {
        const double eps = rng.normal();
        const double z = st.mu.data[k] + st.sigma.data[k] * eps;
        acc += (-0.5 * eps * eps - std::log(st.sigma.data[k])) - (-0.5 * z * z);
      }
    }
    const double mc = acc / n;
    const double rel = std::abs(mc - closed) / std::abs(closed);
    worst = std::max(worst, rel);
    if (rel > 0.02) {
      ok = false;
      why << "trial " << trial << ": closed=" << closed << " mc=" << mc;
    }
  }
  oc.pass = ok;
  std::ostringstream d;
  d << "worst MC deviation " << std::fixed;
  d.precision(4);
  d << worst;
  oc.detail = ok ? d.str() : why.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 6: the annealing schedule.

Outcome criterion_6() {
  Outcome oc{6, "annealing schedule (0 through 3000, final at 6000, exact midpoint)"};
  const auto t0 = Clock::now();
  train::TrainConfig tc;
  tc.beta_final = 0.4;
  bool ok = true;
  std::ostringstream why;
  for (int64_t s = 0; s <= 3000; s += 50)
    if (train::beta_at_step(s, tc) != 0.0) {
      ok = false;
      why << "beta(" << s << ") != 0";
      break;
    }
  if (ok && train::beta_at_step(6000, tc) != 0.4) {
    ok = false;
    why << "beta(6000) != beta_final";
  }
  if (ok && std::abs(train::beta_at_step(4500, tc) - 0.2) > 1e-12) {
    ok = false;
    why << "midpoint beta(4500) != beta_final/2";
  }
  if (ok && train::beta_at_step(1000000, tc) != 0.4) {
    ok = false;
    why << "saturation failed";
  }
  oc.pass = ok;
  oc.detail = ok ? "beta(0..3000)=0, beta(4500)=0.2, beta(6000)=0.4" : why.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 7: importance-sampled perplexity bound on a trained checkpoint.

Outcome criterion_7(const model::Model* trained, const DeskRun& desk) {
  Outcome oc{7, "perplexity bound (K=10 <= K=1 within 1 MC SE; uniform model exact)"};
  const auto t0 = Clock::now();
  bool ok = true;
  std::ostringstream why, d;

  // uniform-logit, unit-posterior model: ppl equals vocab size
  {
    model::ModelConfig mc = desk_model_config(desk.vocab.size());
    model::Model uni(mc, 3);
    auto zero = [&](const char* n) { uni.params().value(uni.params().find(n)).fill(0.0); };
    zero("out.w");
    zero("out.b");
    zero("head.mu_w");
    zero("head.mu_b");
    zero("head.sig_w");
    uni.params()
        .value(uni.params().find("head.sig_b"))
        .fill(std::log(std::exp(1.0) - 1.0));  // softplus -> sigma = 1
    std::vector<std::vector<int>> subset(desk.test_ids.begin(), desk.test_ids.begin() + 20);
    const auto res = eval::ppl_upper_bound(uni, subset, 10, 77, 2);
    const double rel = std::abs(res.ppl_bound - desk.vocab.size()) / desk.vocab.size();
    if (rel > 1e-9) {
      ok = false;
      why << "uniform model ppl " << res.ppl_bound << " != " << desk.vocab.size();
    }
  }

  if (ok && trained == nullptr) {
    ok = false;
    why << "no trained checkpoint available (criterion 8 must train first)";
  }
  if (ok) {
    const int n = 200;
    std::vector<std::vector<int>> held(desk.test_ids.begin(), desk.test_ids.begin() + n);
    const auto k10 = eval::ppl_upper_bound(*trained, held, 10, 31, 2);
    const auto k1 = eval::ppl_upper_bound(*trained, held, 1, 32, 2);
    double mean_diff = 0.0;
    for (int i = 0; i < n; ++i)
      mean_diff += k10.per_sentence_nll[static_cast<size_t>(i)] -
                   k1.per_sentence_nll[static_cast<size_t>(i)];
    mean_diff /= n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = k10.per_sentence_nll[static_cast<size_t>(i)] -
                       k1.per_sentence_nll[static_cast<size_t>(i)] - mean_diff;
      ss += x * x;
    }
    const double se = std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
    if (mean_diff > se) {
      ok = false;
      why << "mean(K10 - K1) = " << mean_diff << " exceeds 1 SE = " << se;
    } else {
      d << "mean(K10-K1) = " << std::fixed;
      d.precision(4);
      d << mean_diff << " (SE " << se << "), uniform ppl exact";
    }
  }
  oc.pass = ok;
  oc.detail = ok ? d.str() : why.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 8: end-to-end smoke over 5 seeds (stochastic).

Outcome criterion_8(const DeskRun& desk, std::unique_ptr<model::Model>& keep_model) {
  Outcome oc{8, "end-to-end smoke (5 seeds: accuracy >= 0.90, N_enc >= 2 in >= 3)"};
  const auto t0 = Clock::now();
  const int threads = 2;
  bool ok = true;
  std::ostringstream why;
  std::vector<double> accs, d_encs, n_encs;
  double worst_minutes = 0.0;

  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const auto seed_t0 = Clock::now();
    model::ModelConfig mc = desk_model_config(desk.vocab.size());
    const train::TrainConfig tc = desk_train_config(seed, threads);
    auto m = std::make_unique<model::Model>(mc, seed);
    train::TrainHooks hooks;
    hooks.on_step = [](const train::LogRecord& rec) { return rec.step < 6000; };
    const auto result = train::train(desk.train_ids, desk.vocab, *m, tc, "", hooks);
    accs.push_back(result.accuracy_after_recon_phase);

    const auto enc = eval::enc_influence(desk.test_parses, *m, desk.vocab, {-1},
                                         roles::default_role_set(), threads);
    const auto rep = eval::totals_and_counts(enc.gamma);
    d_encs.push_back(rep.d_total);
    n_encs.push_back(rep.n_gamma);

    const double minutes = secs(seed_t0) / 60.0;
    worst_minutes = std::max(worst_minutes, minutes);
    std::printf("  [smoke] seed %llu: accuracy %.4f, D_enc %.3f, N_enc %d, %.1f min\n",
                static_cast<unsigned long long>(seed), result.accuracy_after_recon_phase,
                rep.d_total, rep.n_gamma, minutes);
    std::fflush(stdout);
    if (seed == 1) keep_model = std::move(m);
  }

  int n_ok = 0;
  for (double n : n_encs) n_ok += n >= 2.0 ? 1 : 0;
  for (double a : accs)
    if (a < 0.90) {
      ok = false;
      why << "a seed's accuracy " << a << " < 0.90; ";
    }
  if (n_ok < 3) {
    ok = false;
    why << "N_enc >= 2 in only " << n_ok << "/5 seeds; ";
  }
  if (worst_minutes > 15.0) {
    ok = false;
    why << "slowest seed took " << worst_minutes << " min; ";
  }

  double d_mean = 0.0, n_mean = 0.0;
  for (double v : d_encs) d_mean += v;
  for (double v : n_encs) n_mean += v;
  d_mean /= 5.0;
  n_mean /= 5.0;
  double d_ss = 0.0, n_ss = 0.0;
  for (double v : d_encs) d_ss += (v - d_mean) * (v - d_mean);
  for (double v : n_encs) n_ss += (v - n_mean) * (v - n_mean);
  const double d_std = std::sqrt(d_ss / 4.0);
  const double n_std = std::sqrt(n_ss / 4.0);

  std::printf("  [smoke] table-1 format over 5 seeds:\n");
  std::printf("  model        beta   D_enc        N_enc\n");
  std::printf("  advae-4      0.30   %.2f(%.2f)   %.2f(%.2f)\n", d_mean, d_std, n_mean, n_std);
  std::fflush(stdout);

  oc.pass = ok;
  std::ostringstream d;
  d << "D_enc " << std::fixed;
  d.precision(2);
  d << d_mean << "(" << d_std << "), N_enc " << n_mean << "(" << n_std << "), worst seed ";
  d.precision(1);
  d << worst_minutes << " min";
  oc.detail = ok ? d.str() : why.str();
  oc.seconds = secs(t0);
  return oc;
}

// ---------------------------------------------------------------------------
// Criterion 9: single-thread determinism.

Outcome criterion_9() {
  Outcome oc{9, "determinism (bit-identical loss traces, byte-identical pair files)"};
  const auto t0 = Clock::now();
  const auto spec = corpus::default_synthetic_spec();
  const auto sents = corpus::gen_synthetic(spec, 320);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : sents) tokens.push_back(s.tokens);
  const auto vocab = corpus::build_vocab(tokens, 1);
  std::vector<std::vector<int>> ids;
  for (const auto& t : tokens) ids.push_back(corpus::encode(vocab, t));

  model::ModelConfig mc;
  mc.d_model = 32;
  mc.n_layers = 1;
  mc.n_heads = 2;
  mc.n_z = 2;
  mc.d_z = 8;
  mc.dropout = 0.1;
  mc.vocab_size = vocab.size();
  mc.max_len = 16;
  train::TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 5;
  tc.recon_steps = 40;
  tc.anneal_steps = 40;
  tc.beta_final = 0.3;
  tc.lr = 1e-3;
  tc.seed = 7;
  tc.threads = 1;  // the single-threaded determinism flag
  train::TrainHooks hooks;
  hooks.on_step = [](const train::LogRecord& rec) { return rec.step < 100; };

  bool ok = true;
  std::ostringstream why;
  std::vector<train::LogRecord> first_log;
  std::unique_ptr<model::Model> first_model;
  for (int runix = 0; runix < 2; ++runix) {
    auto m = std::make_unique<model::Model>(mc, tc.seed);
    const auto result = train::train(ids, vocab, *m, tc, "", hooks);
    if (result.log.size() != 100) {
      ok = false;
      why << "expected 100 steps, got " << result.log.size();
      break;
    }
    if (runix == 0) {
      first_log = result.log;
      first_model = std::move(m);
      continue;
    }
    for (size_t i = 0; i < result.log.size(); ++i) {
      if (result.log[i].total != first_log[i].total || result.log[i].recon != first_log[i].recon ||
          result.log[i].kl != first_log[i].kl) {
        ok = false;
        why << "loss trace diverged at step " << (i + 1);
        break;
      }
    }
    if (ok) {
      const auto pairs_a = eval::generate_perturbation_pairs(*first_model, vocab, 40, 99, 1);
      const auto pairs_b = eval::generate_perturbation_pairs(*m, vocab, 40, 99, 1);
      namespace fs = std::filesystem;
      const std::string pa = (fs::temp_directory_path() / "advae_acc_pairs_a.tsv").string();
      const std::string pb = (fs::temp_directory_path() / "advae_acc_pairs_b.tsv").string();
      eval::write_pairs(pairs_a, pa);
      eval::write_pairs(pairs_b, pb);
      std::ifstream fa(pa, std::ios::binary), fb(pb, std::ios::binary);
      const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
      const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
      if (sa != sb || sa.empty()) {
        ok = false;
        why << "perturbation pair files differ";
      }
      fs::remove(pa);
      fs::remove(pb);
    }
  }
  oc.pass = ok;
  oc.detail = ok ? "100-step traces bitwise equal, pair files byte-identical" : why.str();
  oc.seconds = secs(t0);
  return oc;
}

}  // namespace

int main() {
  kernels::set_max_threads(2);
  std::printf("building desk-scale corpus...\n");
  const DeskRun desk = make_desk_corpus();
  std::printf("vocab size %d, %zu train / %zu test sentences\n\n", desk.vocab.size(),
              desk.train_ids.size(), desk.test_ids.size());

  std::vector<Outcome> results;
  results.push_back(criterion_1());
  results.push_back(criterion_2());
  results.push_back(criterion_3());
  results.push_back(criterion_4());
  results.push_back(criterion_5());
  results.push_back(criterion_6());
  results.push_back(criterion_9());

  std::unique_ptr<model::Model> trained;
  results.push_back(criterion_8(desk, trained));
  results.push_back(criterion_7(trained.get(), desk));

  std::sort(results.begin(), results.end(),
            [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::printf("\n");
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("CRITERION %d: %s - %s (%s)\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    all_pass &= r.pass;
  }
  std::printf("\n%s\n", all_pass ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED");
  return all_pass ? 0 : 1;
}
