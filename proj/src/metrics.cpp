#include "ctxempath/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ctxempath {

namespace {
void check_pair(const std::vector<double>& pred, const std::vector<double>& gold,
                size_t min_n, const char* what) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch, " +
                                std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(gold.size()) + " targets");
  }
  if (pred.size() < min_n) {
    throw std::invalid_argument(std::string(what) + ": needs at least " + std::to_string(min_n) +
                                " points, got " + std::to_string(pred.size()));
  }
}
}  // namespace

PearsonResult pearson(const std::vector<double>& pred, const std::vector<double>& gold) {
  check_pair(pred, gold, 2, "pearson");
  const size_t n = pred.size();
  double mp = 0.0, mg = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mp += pred[i];
    mg += gold[i];
  }
  mp /= static_cast<double>(n);
  mg /= static_cast<double>(n);
  double spg = 0.0, spp = 0.0, sgg = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dp = pred[i] - mp;
    const double dg = gold[i] - mg;
    spg += dp * dg;
    spp += dp * dp;
    sgg += dg * dg;
  }
  if (spp == 0.0 || sgg == 0.0) return {0.0, true};
  return {spg / std::sqrt(spp * sgg), false};
}

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& gold) {
  check_pair(pred, gold, 1, "mean_squared_error");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

EvalReport evaluate_predictions(const std::vector<double>& pred, const std::vector<double>& gold) {
  EvalReport r;
  r.n = static_cast<long>(pred.size());
  r.mse = mean_squared_error(pred, gold);
  auto p = pearson(pred, gold);
  r.pearson_r = p.r;
  r.pearson_degenerate = p.degenerate;
  return r;
}

SweepTable finish_sweep(std::vector<SweepRow> rows) {
  if (rows.empty()) throw std::invalid_argument("sweep needs at least one row");
  SweepTable t;
  t.rows = std::move(rows);
  size_t best = 0;
  for (size_t i = 1; i < t.rows.size(); ++i) {
    if (t.rows[i].val_pearson > t.rows[best].val_pearson) best = i;
  }
  t.best_context_turns = t.rows[best].context_turns;
  return t;
}

std::string format_sweep(const SweepTable& table) {
  std::string out = "context_turns  val_pearson  val_mse   best_epoch\n";
  char line[96];
  for (const auto& r : table.rows) {
    std::snprintf(line, sizeof(line), "%-13d  %11.4f  %8.4f  %d%s\n", r.context_turns,
                  r.val_pearson, r.val_mse, r.best_epoch,
                  r.context_turns == table.best_context_turns ? "  <- best" : "");
    out += line;
  }
  return out;
}

}  // namespace ctxempath
