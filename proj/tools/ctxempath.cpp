// Command-line front end: synthetic corpus generation, vocabulary building,
// training, the context-window sweep, and batch prediction.
//
// Exit codes: 0 success, 2 configuration/input error, 3 training error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "ctxempath/checkpoint.hpp"
#include "ctxempath/runconfig.hpp"

namespace fs = std::filesystem;
using namespace ctxempath;

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> corpus;
  std::optional<std::string> format;
  std::optional<std::string> vocab;
  std::optional<std::string> out_dir;
  std::optional<std::string> trait;
  std::optional<std::string> profile;
  std::optional<int> context;
  std::optional<int> batch_size;
  std::optional<int> max_epochs;
  std::optional<int> patience;
  std::optional<uint64_t> seed;
  std::optional<double> split_ratio;
  std::optional<uint64_t> split_seed;
  std::optional<int> vocab_max_size;
  std::optional<int> vocab_min_freq;
  bool no_early_stopping = false;
  bool no_speaker_prefix = false;
  bool per_depth_decay = false;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "run configuration file (key = value lines)");
  cmd->add_option("--corpus", o.corpus, "corpus file (overrides corpus.path)");
  cmd->add_option("--format", o.format, "corpus format")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  cmd->add_option("--vocab", o.vocab, "vocabulary file (overrides vocab.path)");
}

void add_train_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--trait", o.trait, "target trait")
      ->check(CLI::IsMember({"polarity", "intensity", "empathy", "dialog-empathy"}));
  cmd->add_option("--profile", o.profile, "learning-rate profile")
      ->check(CLI::IsMember({"desk", "paper-faithful"}));
  cmd->add_option("--context-turns", o.context, "prior turns in the window (turn track)");
  cmd->add_option("--batch-size", o.batch_size, "examples per step");
  cmd->add_option("--max-epochs", o.max_epochs, "epoch cap");
  cmd->add_option("--patience", o.patience, "early-stopping patience");
  cmd->add_option("--seed", o.seed, "shuffle/dropout seed");
  cmd->add_option("--split-ratio", o.split_ratio, "train share of conversations");
  cmd->add_option("--split-seed", o.split_seed, "split shuffle seed");
  cmd->add_option("--out-dir", o.out_dir, "directory for run artifacts");
  cmd->add_flag("--no-early-stopping", o.no_early_stopping, "always run to max-epochs");
  cmd->add_flag("--no-speaker-prefix", o.no_speaker_prefix,
                "drop the rated-speaker marker (dialog track ablation)");
  cmd->add_flag("--per-depth-decay", o.per_depth_decay,
                "scale encoder rates down per block depth");
}

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg;
  if (o.config) cfg = load_runconfig(*o.config);
  if (o.corpus) cfg.corpus_path = *o.corpus;
  if (o.format) cfg.corpus_format = *o.format == "csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl;
  if (o.vocab) cfg.vocab_path = *o.vocab;
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  if (o.trait) cfg.train.trait = *trait_from_name(*o.trait);
  if (o.profile) cfg.train.profile = *profile_from_name(*o.profile);
  if (o.context) cfg.train.assembly.context_turns = *o.context;
  if (o.batch_size) cfg.train.batch_size = *o.batch_size;
  if (o.max_epochs) cfg.train.max_epochs = *o.max_epochs;
  if (o.patience) cfg.train.patience = *o.patience;
  if (o.seed) cfg.train.shuffle_seed = *o.seed;
  if (o.split_ratio) cfg.split_ratio = *o.split_ratio;
  if (o.split_seed) cfg.split_seed = *o.split_seed;
  if (o.vocab_max_size) cfg.vocab_max_size = *o.vocab_max_size;
  if (o.vocab_min_freq) cfg.vocab_min_freq = *o.vocab_min_freq;
  if (o.no_early_stopping) cfg.train.early_stopping = false;
  if (o.no_speaker_prefix) cfg.train.assembly.speaker_prefix = false;
  if (o.per_depth_decay) cfg.train.per_depth_decay = true;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
  if (!out) throw ConfigError("failed while writing file: " + path);
}

// Loads vocab.path when set, otherwise builds one from the training side
// and saves it under output_dir.
Vocabulary obtain_vocab(const RunConfig& cfg, const CorpusSplit& split) {
  if (!cfg.vocab_path.empty()) {
    if (!fs::exists(cfg.vocab_path)) {
      throw ConfigError("vocabulary file does not exist: " + cfg.vocab_path);
    }
    return load_vocab(cfg.vocab_path);
  }
  Vocabulary vocab = build_vocab(split.train, cfg.vocab_max_size, cfg.vocab_min_freq);
  save_vocab(vocab, (fs::path(cfg.output_dir) / "vocab.txt").string());
  return vocab;
}

int run_gen_corpus(const std::string& out, int conversations, int turns, uint64_t seed) {
  auto corpus = generate_synthetic(conversations, turns, seed);
  save_corpus(corpus, out);
  std::cout << "wrote " << corpus.size() << " conversations to " << out << "\n";
  return 0;
}

int run_build_vocab(const Overrides& o) {
  RunConfig cfg = resolve_config(o);
  validate_runconfig(cfg, /*require_corpus=*/true);
  if (cfg.vocab_path.empty()) throw ConfigError("--vocab (or vocab.path) is required");
  auto corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
  Vocabulary vocab = build_vocab(corpus, cfg.vocab_max_size, cfg.vocab_min_freq);
  save_vocab(vocab, cfg.vocab_path);
  std::cout << "vocabulary of " << vocab.size() << " tokens written to " << cfg.vocab_path
            << "\n";
  return 0;
}

int run_train(const Overrides& o) {
  RunConfig cfg = resolve_config(o);
  validate_runconfig(cfg, /*require_corpus=*/true);
  fs::create_directories(cfg.output_dir);

  auto corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
  auto split = split_corpus(corpus, cfg.split_ratio, cfg.split_seed);
  Vocabulary vocab = obtain_vocab(cfg, split);

  TrainResult result = train_model(split, vocab, cfg.encoder, cfg.train);

  const fs::path dir(cfg.output_dir);
  save_checkpoint(result.best, (dir / "checkpoint.bin").string());
  write_text((dir / "history.csv").string(), format_history_csv(result.history));

  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  const bool turn_track = trait_track(cfg.train.trait) == Track::Turn;
  std::string context_note = turn_track ? std::to_string(cfg.train.assembly.context_turns)
                                        : "(dialog track: full conversation)";
  if (turn_track && cfg.train.assembly.context_turns == 0) context_note += " (no-context baseline)";
  std::vector<std::pair<std::string, std::string>> report{
      {"trait", trait_name(cfg.train.trait)},
      {"profile", profile_name(cfg.train.profile)},
      {"context turns", context_note},
      {"conversations", std::to_string(split.train.size()) + " train / " +
                            std::to_string(split.validation.size()) + " validation"},
      {"epochs run", std::to_string(result.history.size()) +
                         (result.stopped_early ? " (stopped early)" : "")},
      {"best epoch", std::to_string(result.best.best_epoch)},
      {"val mse", fmt(result.val_report.mse)},
      {"val pearson",
       fmt(result.val_report.pearson_r) + (result.val_report.pearson_degenerate ? " (degenerate)" : "")},
      {"checkpoint", (dir / "checkpoint.bin").string()},
      {"history", (dir / "history.csv").string()},
  };
  size_t width = 0;
  for (const auto& [k, v] : report) width = std::max(width, k.size());
  for (const auto& [k, v] : report) {
    std::cout << "  " << k << std::string(width - k.size() + 2, ' ') << v << "\n";
  }
  return 0;
}

int run_sweep(const Overrides& o, int c_min, int c_max) {
  RunConfig cfg = resolve_config(o);
  validate_runconfig(cfg, /*require_corpus=*/true);
  fs::create_directories(cfg.output_dir);

  if (c_min < 0) throw ConfigError("--c-min must be non-negative");
  if (c_min > c_max) {
    throw ConfigError("--c-min (" + std::to_string(c_min) + ") exceeds --c-max (" +
                      std::to_string(c_max) + ")");
  }
  std::vector<int> cs;
  for (int c = c_min; c <= c_max; ++c) cs.push_back(c);

  auto corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
  auto split = split_corpus(corpus, cfg.split_ratio, cfg.split_seed);
  Vocabulary vocab = obtain_vocab(cfg, split);

  SweepTable table = sweep_context(split, vocab, cfg.encoder, cfg.train, cs);
  std::cout << format_sweep(table);

  std::string csv = "context_turns,val_pearson,val_mse,best_epoch\n";
  for (const auto& r : table.rows) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%d\n", r.context_turns, r.val_pearson,
                  r.val_mse, r.best_epoch);
    csv += line;
  }
  write_text((fs::path(cfg.output_dir) / "sweep.csv").string(), csv);
  return 0;
}

int run_predict(const std::string& ckpt_path, std::string vocab_path,
                const std::string& corpus_path, const std::string& track_name,
                const std::string& format_name, const std::string& out_path,
                bool include_unlabeled) {
  auto require_file = [](const char* label, const std::string& p) {
    if (!fs::exists(p)) throw ConfigError(std::string(label) + " file does not exist: " + p);
  };
  require_file("checkpoint", ckpt_path);
  require_file("corpus", corpus_path);
  if (vocab_path.empty()) {
    vocab_path = (fs::path(ckpt_path).parent_path() / "vocab.txt").string();
    if (!fs::exists(vocab_path)) {
      throw ConfigError("no vocabulary next to the checkpoint (" + vocab_path +
                        "); pass --vocab");
    }
  }
  require_file("vocabulary", vocab_path);
  Vocabulary vocab = load_vocab(vocab_path);
  TrainedModel tm = load_checkpoint(ckpt_path, vocab);
  const Track track = track_name == "dialog" ? Track::Dialog : Track::Turn;
  if (trait_track(tm.trait) != track) {
    throw ConfigError(std::string("checkpoint predicts ") + trait_name(tm.trait) +
                      ", which belongs to the " +
                      (trait_track(tm.trait) == Track::Turn ? "turn" : "dialog") + " track");
  }
  auto corpus = load_corpus(
      corpus_path, format_name == "csv" ? CorpusFormat::Csv : CorpusFormat::Jsonl);

  auto examples =
      build_trait_examples(corpus, tm.trait, tm.assembly, vocab, include_unlabeled);
  if (examples.empty()) {
    throw ConfigError(std::string("no examples carry the ") + trait_name(tm.trait) +
                      " trait (use --all to score unlabeled turns)");
  }
  auto preds = predict_examples(tm.model, examples, 8);

  std::ostringstream csv;
  csv << "conversation_id,turn_index_or_speaker,trait,prediction\n";
  std::vector<double> labeled_preds, labeled_gold;
  for (size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    csv << ex.conversation_id << ",";
    if (track == Track::Turn) {
      csv << ex.turn_index;
    } else {
      csv << speaker_name(ex.speaker);
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), ",%s,%.9g\n", trait_name(tm.trait), preds[i]);
    csv << buf;
    if (!std::isnan(ex.target)) {
      labeled_preds.push_back(preds[i]);
      labeled_gold.push_back(ex.target);
    }
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << csv.str();
  } else {
    write_text(out_path, csv.str());
    std::cout << "wrote " << examples.size() << " predictions to " << out_path << "\n";
  }
  if (labeled_gold.size() >= 2) {
    EvalReport rep = evaluate_predictions(labeled_preds, labeled_gold);
    std::cerr << "labeled subset: n " << rep.n << ", mse " << rep.mse << ", pearson "
              << rep.pearson_r << (rep.pearson_degenerate ? " (degenerate)" : "") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"history-aware utterance regression toolkit"};
  app.require_subcommand(1);

  int threads = 0;
  std::string backend;
  app.add_option("--threads", threads, "cap worker threads (0 = library default)");
  app.add_option("--backend", backend, "kernel backend")
      ->check(CLI::IsMember({"serial", "openmp"}));

  auto* gen = app.add_subcommand("gen-corpus", "write a synthetic labeled corpus");
  std::string gen_out;
  int gen_convs = 120, gen_turns = 8;
  uint64_t gen_seed = 2024;
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--conversations", gen_convs, "number of conversations");
  gen->add_option("--turns", gen_turns, "turns per conversation");
  gen->add_option("--seed", gen_seed, "generator seed");

  Overrides vocab_o, train_o, sweep_o;
  auto* bv = app.add_subcommand("build-vocab", "build a vocabulary file from a corpus");
  add_common_flags(bv, vocab_o);
  bv->add_option("--out", vocab_o.vocab, "output vocabulary path (alias for --vocab)");
  bv->add_option("--max-size", vocab_o.vocab_max_size, "vocabulary size cap");
  bv->add_option("--min-freq", vocab_o.vocab_min_freq, "minimum token count");

  auto* tr = app.add_subcommand("train", "train one model and save the best checkpoint");
  add_common_flags(tr, train_o);
  add_train_flags(tr, train_o);

  auto* sw = app.add_subcommand("sweep", "retrain across context window sizes");
  add_common_flags(sw, sweep_o);
  add_train_flags(sw, sweep_o);
  int c_min = 0, c_max = 2;
  sw->add_option("--c-min", c_min, "smallest context window");
  sw->add_option("--c-max", c_max, "largest context window");

  auto* pr = app.add_subcommand("predict", "score a corpus with a saved checkpoint");
  std::string pr_ckpt, pr_vocab, pr_corpus, pr_track = "turn", pr_format = "jsonl", pr_out;
  bool pr_all = false;
  pr->add_option("--checkpoint", pr_ckpt, "checkpoint file")->required();
  pr->add_option("--corpus", pr_corpus, "corpus to score")->required();
  pr->add_option("--track", pr_track, "prediction track")
      ->required()
      ->check(CLI::IsMember({"turn", "dialog"}));
  pr->add_option("--vocab", pr_vocab, "vocabulary file (default: vocab.txt beside the checkpoint)");
  pr->add_option("--format", pr_format, "corpus format")
      ->check(CLI::IsMember({"jsonl", "csv"}));
  pr->add_option("--out", pr_out, "output CSV path (default stdout)");
  pr->add_flag("--all", pr_all, "also score turns without the target trait");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads == 0) {
      if (const char* env = std::getenv("CTX_EMPATH_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) {
          throw ConfigError(std::string("CTX_EMPATH_THREADS must be a positive integer, got \"") +
                            env + "\"");
        }
        threads = static_cast<int>(v);
      }
    }
    if (threads > 0) kernels::set_thread_cap(threads);
    if (backend == "serial") kernels::set_backend(kernels::Backend::Serial);
    if (backend == "openmp") kernels::set_backend(kernels::Backend::OpenMP);

    if (gen->parsed()) return run_gen_corpus(gen_out, gen_convs, gen_turns, gen_seed);
    if (bv->parsed()) return run_build_vocab(vocab_o);
    if (tr->parsed()) return run_train(train_o);
    if (sw->parsed()) return run_sweep(sweep_o, c_min, c_max);
    if (pr->parsed())
      return run_predict(pr_ckpt, pr_vocab, pr_corpus, pr_track, pr_format, pr_out, pr_all);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
