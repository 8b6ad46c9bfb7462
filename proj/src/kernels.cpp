#include "ctxempath/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace ctxempath::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::OpenMP
#else
    Backend::Serial
#endif
};

int read_thread_cap_env() {
  const char* env = std::getenv("CTX_EMPATH_THREADS");
  if (env) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::atomic<int> g_thread_cap{0};  // 0 = not yet initialized

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int thread_cap() {
  int n = g_thread_cap.load(std::memory_order_relaxed);
  if (n == 0) {
    n = read_thread_cap_env();
    g_thread_cap.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_thread_cap(int n) {
  g_thread_cap.store(n >= 1 ? n : 1, std::memory_order_relaxed);
}

}  // namespace ctxempath::kernels
