// Times the serial reference kernels against their OpenMP builds and checks
// that both produce bit-identical output. Usage: kernels_bench [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "advae/corpus.hpp"
#include "advae/kernels.hpp"
#include "advae/rng.hpp"
#include "advae/training.hpp"

using namespace advae;
using Clock = std::chrono::steady_clock;

namespace {

double ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.data) v = 2.0 * rng.uniform() - 1.0;
  return m;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

void bench_matmul(int n, int reps, int threads) {
  Rng rng(7);
  const Matrix a = random_matrix(n, n, rng);
  const Matrix b = random_matrix(n, n, rng);
  Matrix c_serial(n, n), c_omp(n, n);

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kernels::matmul_serial(a, b, c_serial);
  const double t_serial = ms(t0) / reps;

  kernels::set_max_threads(threads);
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) kernels::matmul_omp(a, b, c_omp);
  const double t_omp = ms(t0) / reps;
  kernels::set_max_threads(1);

  const double mflop = 2.0 * n * n * static_cast<double>(n) / 1e6;
  std::printf("matmul %4dx%-4d  serial %8.2f ms (%6.2f GF/s)  omp %8.2f ms (%6.2f GF/s)"
              "  speedup %.2fx  %s\n",
              n, n, t_serial, mflop / t_serial, t_omp, mflop / t_omp, t_serial / t_omp,
              bitwise_equal(c_serial, c_omp) ? "bit-identical" : "MISMATCH");
}

void bench_softmax(int rows, int cols, int reps, int threads) {
  Rng rng(9);
  const Matrix base = random_matrix(rows, cols, rng);

  Matrix m = base;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    m = base;
    kernels::softmax_rows_serial(m);
  }
  const double t_serial = ms(t0) / reps;
  Matrix serial_out = m;

  kernels::set_max_threads(threads);
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) {
    m = base;
    kernels::softmax_rows_omp(m);
  }
  const double t_omp = ms(t0) / reps;
  kernels::set_max_threads(1);

  std::printf("softmax %4dx%-4d serial %8.2f ms                 omp %8.2f ms"
              "                  speedup %.2fx  %s\n",
              rows, cols, t_serial, t_omp, t_serial / t_omp,
              bitwise_equal(serial_out, m) ? "bit-identical" : "MISMATCH");
}

// End-to-end: one optimizer step of the desk-scale model, serial vs threaded
// batch fold.
void bench_train_step(int threads) {
  const auto spec = corpus::default_synthetic_spec();
  const auto sents = corpus::gen_synthetic(spec, 256);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : sents) tokens.push_back(s.tokens);
  const auto vocab = corpus::build_vocab(tokens, 1);
  std::vector<std::vector<int>> ids;
  for (const auto& t : tokens) ids.push_back(corpus::encode(vocab, t));

  model::ModelConfig mc;
  mc.d_model = 64;
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.n_z = 4;
  mc.d_z = 16;
  mc.vocab_size = vocab.size();
  mc.max_len = 16;
  mc.dropout = 0.1;
  model::Model m(mc, 1);
  model::GradStore grads(m.params());
  std::vector<int> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(i);

  for (int nt : {1, threads}) {
    kernels::set_max_threads(nt);
    train::TrainConfig tc;
    tc.threads = nt;
    Rng rng(1);
    auto t0 = Clock::now();
    const int reps = 10;
    for (int r = 0; r < reps; ++r) {
      grads.zero();
      train::elbo_terms(m, ids, batch, 0.3, rng, tc, true, &grads);
    }
    std::printf("train step (batch 32, d_model 64)  threads=%d  %8.2f ms\n", nt,
                ms(t0) / reps);
  }
  kernels::set_max_threads(1);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : 2;
  std::printf("thread budget for omp runs: %d\n\n", threads);
  bench_matmul(128, 20, threads);
  bench_matmul(256, 10, threads);
  bench_matmul(512, 3, threads);
  std::printf("\n");
  bench_softmax(512, 512, 50, threads);
  bench_softmax(2048, 256, 50, threads);
  std::printf("\n");
  bench_train_step(threads);
  return 0;
}
