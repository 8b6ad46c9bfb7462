// Times the serial and OpenMP kernel backends on the shapes the encoder
// actually uses, and cross-checks that both produce identical bits.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "ctxempath/kernels.hpp"

using namespace ctxempath;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<float> randn(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(d(rng));
  return v;
}

template <class F>
double time_ms(F&& fn, int reps) {
  fn();  // warm up
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const std::string& name, double serial_ms, double omp_ms, bool identical) {
  std::printf("%-28s serial %8.3f ms   openmp %8.3f ms   speedup %5.2fx   %s\n", name.c_str(),
              serial_ms, omp_ms, serial_ms / omp_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1) reps = std::atoi(argv[1]);
  if (reps < 1) reps = 1;

  std::printf("openmp compiled: %s, thread cap: %d, reps: %d\n",
              kernels::openmp_compiled() ? "yes" : "no", kernels::thread_cap(), reps);

  bool all_identical = true;
  auto compare = [&](const char* name, auto&& fn, std::vector<float>& out) {
    kernels::set_backend(kernels::Backend::Serial);
    double serial_ms = time_ms(fn, reps);
    std::vector<float> serial_out = out;
    kernels::set_backend(kernels::Backend::OpenMP);
    double omp_ms = time_ms(fn, reps);
    const bool same =
        std::memcmp(serial_out.data(), out.data(), out.size() * sizeof(float)) == 0;
    all_identical = all_identical && same;
    report(name, serial_ms, omp_ms, same);
  };

  {
    // Attention-sized projection: (B*S, C) x (C, C)
    const int m = 16 * 128, k = 64, n = 64;
    auto a = randn(static_cast<size_t>(m) * k, 1);
    auto b = randn(static_cast<size_t>(k) * n, 2);
    std::vector<float> c(static_cast<size_t>(m) * n);
    compare("gemm 2048x64x64", [&] { kernels::gemm(false, false, m, n, k, a.data(), b.data(), c.data()); }, c);
  }
  {
    // Feed-forward expansion: (B*S, C) x (C, F)
    const int m = 16 * 128, k = 64, n = 256;
    auto a = randn(static_cast<size_t>(m) * k, 3);
    auto b = randn(static_cast<size_t>(k) * n, 4);
    std::vector<float> c(static_cast<size_t>(m) * n);
    compare("gemm 2048x64x256", [&] { kernels::gemm(false, false, m, n, k, a.data(), b.data(), c.data()); }, c);
  }
  {
    // Attention scores: batched (S, dh) x (dh, S) per (batch, head)
    const int batch = 16 * 4, m = 128, k = 16, n = 128;
    auto a = randn(static_cast<size_t>(batch) * m * k, 5);
    auto b = randn(static_cast<size_t>(batch) * k * n, 6);
    std::vector<float> c(static_cast<size_t>(batch) * m * n);
    compare("gemm_batched 64x128x16x128",
            [&] {
              kernels::gemm_batched(false, false, batch, m, n, k, a.data(),
                                    static_cast<long>(m) * k, b.data(), static_cast<long>(k) * n,
                                    c.data(), static_cast<long>(m) * n);
            },
            c);
  }
  {
    const int rows = 16 * 4 * 128, cols = 128;
    auto x = randn(static_cast<size_t>(rows) * cols, 7);
    std::vector<uint8_t> mask(static_cast<size_t>(16) * cols, 1);
    for (size_t i = 0; i < mask.size(); i += 5) mask[i] = 0;
    std::vector<float> y(x.size());
    compare("masked softmax 8192x128",
            [&] { kernels::softmax_rows(rows, cols, x.data(), mask.data(), 4 * 128, y.data()); },
            y);
  }
  {
    const int rows = 16 * 128, cols = 64;
    auto x = randn(static_cast<size_t>(rows) * cols, 8);
    auto g = randn(cols, 9);
    auto b = randn(cols, 10);
    std::vector<float> y(x.size()), mu(rows), rs(rows);
    compare("layer_norm 2048x64",
            [&] {
              kernels::layer_norm_rows(rows, cols, x.data(), g.data(), b.data(), 1e-5f, y.data(),
                                       mu.data(), rs.data());
            },
            y);
  }
  {
    const long n = 16L * 128 * 256;
    auto x = randn(n, 11);
    std::vector<float> y(n);
    compare("gelu 512k", [&] { kernels::gelu(n, x.data(), y.data()); }, y);
  }

  kernels::set_backend(kernels::openmp_compiled() ? kernels::Backend::OpenMP
                                                  : kernels::Backend::Serial);
  if (!all_identical) {
    std::printf("backend outputs diverged\n");
    return 1;
  }
  return 0;
}
