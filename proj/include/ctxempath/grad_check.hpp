#pragma once

// Finite-difference verification of analytic gradients. The loss function is
// evaluated as a black box; analytic grads are compared against central
// differences coordinate by coordinate (or on a random coordinate sample for
// large tensors). Run this with double tensors; float round-off drowns the
// h^2 truncation term.

#include <random>
#include <string>
#include <vector>

#include "ctxempath/tensor.hpp"

namespace ctxempath {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  long coords_checked = 0;
  long worst_coord = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool pass(double tol) const { return max_rel_err < tol; }
};

inline double rel_err(double a, double n) {
  const double denom = std::max({std::fabs(a), std::fabs(n), 1e-8});
  return std::fabs(a - n) / denom;
}

// loss_fn(with_grad): evaluate the scalar loss over the current parameter
// values; when with_grad, also run backward so analytic grads land in the
// parameters' grad buffers. Must be deterministic.
template <class T, class LossFn>
GradCheckReport grad_check(LossFn&& loss_fn,
                           const std::vector<std::pair<std::string, TensorPtr<T>>>& params,
                           double h, long max_coords_per_tensor = 64,
                           uint64_t sample_seed = 17) {
  GradCheckReport report;
  for (auto& [name, p] : params) p->zero_grad();
  loss_fn(true);

  std::mt19937_64 rng(sample_seed);
  for (auto& [name, p] : params) {
    GradCheckEntry entry;
    entry.name = name;
    const long n = p->numel();
    std::vector<long> coords;
    if (n <= max_coords_per_tensor) {
      coords.resize(n);
      for (long i = 0; i < n; ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<long> dist(0, n - 1);
      for (long i = 0; i < max_coords_per_tensor; ++i) coords.push_back(dist(rng));
    }
    for (long c : coords) {
      const T saved = p->values[c];
      p->values[c] = saved + static_cast<T>(h);
      const double up = static_cast<double>(scalar_value(loss_fn(false)));
      p->values[c] = saved - static_cast<T>(h);
      const double down = static_cast<double>(scalar_value(loss_fn(false)));
      p->values[c] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = static_cast<double>(p->grad[c]);
      const double e = rel_err(analytic, numeric);
      if (e > entry.max_rel_err) {
        entry.max_rel_err = e;
        entry.worst_coord = c;
        entry.analytic_at_worst = analytic;
        entry.numeric_at_worst = numeric;
      }
      ++entry.coords_checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ctxempath
