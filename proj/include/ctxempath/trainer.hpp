#pragma once

// Training loop: shuffled mini-batches, MSE loss, global-norm clipping,
// Adam with a frozen encoder for the first epoch and per-epoch encoder
// rate decay, validation after every epoch, early stopping on validation
// MSE, and a snapshot of the best epoch's parameters.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxempath/checkpoint.hpp"
#include "ctxempath/corpus.hpp"
#include "ctxempath/metrics.hpp"

namespace ctxempath {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  Trait trait = Trait::EmotionIntensity;
  Profile profile = Profile::Desk;
  AssemblyConfig assembly;
  int batch_size = 4;
  int max_epochs = 40;
  int patience = 5;
  uint64_t shuffle_seed = 1234;
  bool early_stopping = true;
  bool per_depth_decay = false;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double val_pearson = 0.0;
  double lr_encoder = 0.0;  // rate in effect during the epoch
  bool encoder_frozen = false;
};

// Stops after `patience` consecutive epochs without a strictly lower
// validation MSE; a tie with the best value counts as no improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  bool observe(double val_mse);  // true = stop now
  bool improved() const { return improved_; }
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  double best_;
  int stale_ = 0;
  bool improved_ = false;
};

struct TrainResult {
  TrainedModel best;
  std::vector<EpochRecord> history;
  EvalReport val_report;  // best parameters re-evaluated on validation
  bool stopped_early = false;
};

TrainResult train_model(const CorpusSplit& split, const Vocabulary& vocab,
                        const EncoderConfig& enc_cfg, const TrainConfig& cfg);

// Deterministic eval-mode predictions in example order.
std::vector<double> predict_examples(const EncoderModelT<float>& model,
                                     const std::vector<ModelInput>& examples, int batch_size);

EvalReport evaluate_model(const EncoderModelT<float>& model,
                          const std::vector<ModelInput>& examples, int batch_size);

// Retrains from scratch per window size on the same split; rows keep the
// order of context_values.
SweepTable sweep_context(const CorpusSplit& split, const Vocabulary& vocab,
                         const EncoderConfig& enc_cfg, const TrainConfig& base,
                         const std::vector<int>& context_values);

// epoch,train_mse,val_mse,val_pearson,lr_enc,frozen
std::string format_history_csv(const std::vector<EpochRecord>& history);

}  // namespace ctxempath
