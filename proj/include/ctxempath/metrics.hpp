#pragma once

// Evaluation metrics and the small report structs the trainer and sweep
// emit.

#include <string>
#include <vector>

namespace ctxempath {

struct PearsonResult {
  double r = 0.0;
  // Either side had zero variance; r is reported as 0 and flagged.
  bool degenerate = false;
};

// Two-pass centered correlation in double precision. Throws
// std::invalid_argument on length mismatch or fewer than two points.
PearsonResult pearson(const std::vector<double>& pred, const std::vector<double>& gold);

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& gold);

struct EvalReport {
  double mse = 0.0;
  double pearson_r = 0.0;
  bool pearson_degenerate = false;
  long n = 0;
};

EvalReport evaluate_predictions(const std::vector<double>& pred, const std::vector<double>& gold);

struct SweepRow {
  int context_turns = 0;
  double val_mse = 0.0;
  double val_pearson = 0.0;
  int best_epoch = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  // Highest validation correlation; ties go to the smaller window.
  int best_context_turns = 0;
};

SweepTable finish_sweep(std::vector<SweepRow> rows);
std::string format_sweep(const SweepTable& table);

}  // namespace ctxempath
