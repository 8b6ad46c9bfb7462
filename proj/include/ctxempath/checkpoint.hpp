#pragma once

// Trained-model snapshot and its on-disk form:
//
//   [u64 LE manifest length][UTF-8 JSON manifest][float32 LE parameter blob]
//
// The manifest carries the configs, trait, epoch/metric info, SHA-256
// digests of the vocabulary file form and of the blob, and an ordered
// parameter table (name, shape, byte offset) matching the blob layout.

#include <cstddef>
#include <string>

#include "ctxempath/encoder.hpp"
#include "ctxempath/optim.hpp"

namespace ctxempath {

std::string sha256_hex(const void* data, size_t n);
std::string sha256_hex(const std::string& s);

struct TrainedModel {
  EncoderModelT<float> model;
  AssemblyConfig assembly;
  Trait trait = Trait::EmotionIntensity;
  Profile profile = Profile::Desk;
  int best_epoch = 0;
  double val_mse = 0.0;
  std::string vocab_sha256;
};

void save_checkpoint(const TrainedModel& tm, const std::string& path);

// Restores parameters bit-exactly. Throws CorpusError on a truncated or
// corrupt file, a manifest that does not match the rebuilt model layout, or
// a vocabulary digest mismatch.
TrainedModel load_checkpoint(const std::string& path, const Vocabulary& vocab);

}  // namespace ctxempath
