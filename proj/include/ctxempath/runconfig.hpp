#pragma once

// Flat `key = value` run configuration (dotted keys, # comments, quoted or
// bare values). Unknown keys are rejected so typos fail loudly. Command-line
// flags are applied on top of a parsed file by the CLI.

#include <stdexcept>
#include <string>

#include "ctxempath/corpus.hpp"
#include "ctxempath/trainer.hpp"

namespace ctxempath {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string corpus_path;
  CorpusFormat corpus_format = CorpusFormat::Jsonl;
  double split_ratio = 0.9;
  uint64_t split_seed = 7;
  std::string vocab_path;
  int vocab_max_size = 8192;
  int vocab_min_freq = 1;
  EncoderConfig encoder;  // vocab_size is filled from the vocabulary
  TrainConfig train;
  std::string output_dir = ".";
};

// Applies one key to cfg; throws ConfigError on unknown keys or bad values.
void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_runconfig(const std::string& text, const std::string& origin);
RunConfig load_runconfig(const std::string& path);

// Range and consistency checks. With require_corpus, corpus.path must be set
// and exist on disk.
void validate_runconfig(const RunConfig& cfg, bool require_corpus);

}  // namespace ctxempath
