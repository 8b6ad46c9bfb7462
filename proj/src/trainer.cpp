#include "ctxempath/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>

namespace ctxempath {

namespace {

std::vector<double> gold_targets(const std::vector<ModelInput>& examples, const char* what) {
  std::vector<double> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) {
    if (std::isnan(ex.target)) {
      throw TrainError(std::string(what) + ": example from conversation \"" +
                       ex.conversation_id + "\" has no target");
    }
    gold.push_back(ex.target);
  }
  return gold;
}

void validate_train_config(const TrainConfig& cfg, const EncoderConfig& enc_cfg) {
  if (cfg.batch_size < 1) throw TrainError("batch_size must be at least 1");
  if (cfg.max_epochs < 1) throw TrainError("max_epochs must be at least 1");
  if (cfg.patience < 1) throw TrainError("patience must be at least 1");
  if (cfg.early_stopping && cfg.patience >= cfg.max_epochs) {
    throw TrainError("patience " + std::to_string(cfg.patience) +
                     " must be below max_epochs " + std::to_string(cfg.max_epochs));
  }
  if (cfg.assembly.max_len > enc_cfg.max_len) {
    throw TrainError("assembly max_len " + std::to_string(cfg.assembly.max_len) +
                     " exceeds encoder max_len " + std::to_string(enc_cfg.max_len));
  }
}

}  // namespace

EarlyStopper::EarlyStopper(int patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
}

bool EarlyStopper::observe(double val_mse) {
  improved_ = val_mse < best_;
  if (improved_) {
    best_ = val_mse;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

std::vector<double> predict_examples(const EncoderModelT<float>& model,
                                     const std::vector<ModelInput>& examples, int batch_size) {
  if (batch_size < 1) throw TrainError("batch_size must be at least 1");
  std::vector<double> preds;
  preds.reserve(examples.size());
  for (size_t begin = 0; begin < examples.size(); begin += batch_size) {
    const size_t end = std::min(examples.size(), begin + batch_size);
    std::vector<const ModelInput*> ptrs;
    for (size_t i = begin; i < end; ++i) ptrs.push_back(&examples[i]);
    Tape<float> tape(/*grad_enabled=*/false, /*train_mode=*/false);
    auto out = predict_batch(tape, model, make_batch(ptrs));
    for (float v : out->values) preds.push_back(static_cast<double>(v));
  }
  return preds;
}

EvalReport evaluate_model(const EncoderModelT<float>& model,
                          const std::vector<ModelInput>& examples, int batch_size) {
  if (examples.empty()) throw TrainError("evaluation set is empty");
  auto gold = gold_targets(examples, "evaluate");
  return evaluate_predictions(predict_examples(model, examples, batch_size), gold);
}

TrainResult train_model(const CorpusSplit& split, const Vocabulary& vocab,
                        const EncoderConfig& enc_cfg_in, const TrainConfig& cfg) {
  validate_train_config(cfg, enc_cfg_in);
  EncoderConfig enc_cfg = enc_cfg_in;
  enc_cfg.vocab_size = vocab.size();

  auto train_ex = build_trait_examples(split.train, cfg.trait, cfg.assembly, vocab);
  auto val_ex = build_trait_examples(split.validation, cfg.trait, cfg.assembly, vocab);
  if (train_ex.empty()) {
    throw TrainError(std::string("no training examples carry the ") + trait_name(cfg.trait) +
                     " trait");
  }
  if (val_ex.empty()) {
    throw TrainError(std::string("no validation examples carry the ") + trait_name(cfg.trait) +
                     " trait");
  }
  auto train_gold = gold_targets(train_ex, "train");
  (void)gold_targets(val_ex, "validate");

  auto model = init_encoder<float>(enc_cfg);
  OptimConfig ocfg = profile_optim(cfg.profile);
  ocfg.per_depth_decay = cfg.per_depth_decay;
  AdamOptimizer<float> opt(model.named_params(), ocfg, enc_cfg.n_layers);

  EarlyStopper stopper(cfg.patience);
  TrainResult result;
  EncoderModelT<float> best_model;
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();

  const long n_train = static_cast<long>(train_ex.size());
  std::vector<long> order(n_train);
  std::iota(order.begin(), order.end(), 0L);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const bool frozen = epoch == 1;
    const double lr_in_effect = opt.lr_encoder();

    std::mt19937_64 rng(detail::mix64(cfg.shuffle_seed ^ detail::mix64(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    long step = 0;
    for (long begin = 0; begin < n_train; begin += cfg.batch_size, ++step) {
      const long end = std::min(n_train, begin + cfg.batch_size);
      std::vector<const ModelInput*> ptrs;
      for (long i = begin; i < end; ++i) ptrs.push_back(&train_ex[order[i]]);
      Batch batch = make_batch(ptrs);

      Tape<float> tape(/*grad_enabled=*/true, /*train_mode=*/true);
      tape.set_dropout_salt(
          detail::mix64(cfg.shuffle_seed + detail::mix64(epoch) + detail::mix64(step << 20)));
      auto preds = predict_batch(tape, model, batch);
      std::vector<float> tv(batch.targets.begin(), batch.targets.end());
      auto targets = tensor_from<float>({batch.batch, 1}, std::move(tv));
      auto loss = tape.mse(preds, targets);
      tape.backward(loss);
      opt.clip_global_norm(ocfg.clip_norm);
      opt.step(frozen);
      opt.zero_grads();
      loss_sum += static_cast<double>(scalar_value(loss)) * static_cast<double>(end - begin);
    }

    EvalReport val = evaluate_model(model, val_ex, cfg.batch_size);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = loss_sum / static_cast<double>(n_train);
    rec.val_mse = val.mse;
    rec.val_pearson = val.pearson_r;
    rec.lr_encoder = lr_in_effect;
    rec.encoder_frozen = frozen;
    result.history.push_back(rec);

    const bool stop = stopper.observe(val.mse);
    if (stopper.improved()) {
      best_model = clone_model(model);
      best_epoch = epoch;
      best_val = val.mse;
    }
    opt.on_epoch_completed(epoch);
    if (cfg.early_stopping && stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.best.model = std::move(best_model);
  result.best.assembly = cfg.assembly;
  result.best.trait = cfg.trait;
  result.best.profile = cfg.profile;
  result.best.best_epoch = best_epoch;
  result.best.val_mse = best_val;
  result.best.vocab_sha256 = sha256_hex(vocab.serialize());
  result.val_report = evaluate_model(result.best.model, val_ex, cfg.batch_size);
  return result;
}

SweepTable sweep_context(const CorpusSplit& split, const Vocabulary& vocab,
                         const EncoderConfig& enc_cfg, const TrainConfig& base,
                         const std::vector<int>& context_values) {
  if (context_values.empty()) throw TrainError("sweep needs at least one window size");
  if (trait_track(base.trait) != Track::Turn) {
    throw TrainError("the context sweep applies to per-turn traits only");
  }
  std::vector<SweepRow> rows;
  for (int c : context_values) {
    if (c < 0) throw TrainError("context_turns must be non-negative");
    TrainConfig cfg = base;
    cfg.assembly.context_turns = c;
    TrainResult r = train_model(split, vocab, enc_cfg, cfg);
    SweepRow row;
    row.context_turns = c;
    row.val_mse = r.val_report.mse;
    row.val_pearson = r.val_report.pearson_r;
    row.best_epoch = r.best.best_epoch;
    rows.push_back(row);
  }
  return finish_sweep(std::move(rows));
}

std::string format_history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_mse,val_mse,val_pearson,lr_enc,frozen\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%d\n", r.epoch, r.train_mse,
                  r.val_mse, r.val_pearson, r.lr_encoder, r.encoder_frozen ? 1 : 0);
    out += line;
  }
  return out;
}

}  // namespace ctxempath
