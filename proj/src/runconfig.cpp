#include "ctxempath/runconfig.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ctxempath {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

long to_long(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  long out = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') fail(key + " must be an integer, got \"" + v + "\"");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  return static_cast<int>(to_long(key, v));
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  unsigned long long out = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') fail(key + " must be an unsigned integer, got \"" + v + "\"");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  double out = std::strtod(begin, &end);
  if (end == begin || *end != '\0') fail(key + " must be a number, got \"" + v + "\"");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(key + " must be true or false, got \"" + v + "\"");
}

std::string strip(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "corpus.path") {
    cfg.corpus_path = value;
  } else if (key == "corpus.format") {
    if (value == "jsonl") cfg.corpus_format = CorpusFormat::Jsonl;
    else if (value == "csv") cfg.corpus_format = CorpusFormat::Csv;
    else fail("corpus.format must be jsonl or csv, got \"" + value + "\"");
  } else if (key == "split.ratio") {
    cfg.split_ratio = to_double(key, value);
  } else if (key == "split.seed") {
    cfg.split_seed = to_u64(key, value);
  } else if (key == "vocab.path") {
    cfg.vocab_path = value;
  } else if (key == "vocab.max_size") {
    cfg.vocab_max_size = to_int(key, value);
  } else if (key == "vocab.min_freq") {
    cfg.vocab_min_freq = to_int(key, value);
  } else if (key == "assembly.context_turns") {
    cfg.train.assembly.context_turns = to_int(key, value);
  } else if (key == "assembly.max_len") {
    cfg.train.assembly.max_len = to_int(key, value);
  } else if (key == "assembly.speaker_prefix") {
    cfg.train.assembly.speaker_prefix = to_bool(key, value);
  } else if (key == "encoder.d_model") {
    cfg.encoder.d_model = to_int(key, value);
  } else if (key == "encoder.n_layers") {
    cfg.encoder.n_layers = to_int(key, value);
  } else if (key == "encoder.n_heads") {
    cfg.encoder.n_heads = to_int(key, value);
  } else if (key == "encoder.d_ff") {
    cfg.encoder.d_ff = to_int(key, value);
  } else if (key == "encoder.max_len") {
    cfg.encoder.max_len = to_int(key, value);
  } else if (key == "encoder.dropout") {
    cfg.encoder.dropout = to_double(key, value);
  } else if (key == "encoder.init_seed") {
    cfg.encoder.init_seed = to_u64(key, value);
  } else if (key == "encoder.pool_cls_slot") {
    cfg.encoder.pool_cls_slot = to_bool(key, value);
  } else if (key == "train.trait") {
    auto t = trait_from_name(value);
    if (!t) fail("train.trait must be polarity, intensity, empathy, or dialog-empathy, got \"" +
                 value + "\"");
    cfg.train.trait = *t;
  } else if (key == "train.profile") {
    auto p = profile_from_name(value);
    if (!p) fail("train.profile must be desk or paper-faithful, got \"" + value + "\"");
    cfg.train.profile = *p;
  } else if (key == "train.batch_size") {
    cfg.train.batch_size = to_int(key, value);
  } else if (key == "train.max_epochs") {
    cfg.train.max_epochs = to_int(key, value);
  } else if (key == "train.patience") {
    cfg.train.patience = to_int(key, value);
  } else if (key == "train.seed") {
    cfg.train.shuffle_seed = to_u64(key, value);
  } else if (key == "train.early_stopping") {
    cfg.train.early_stopping = to_bool(key, value);
  } else if (key == "train.per_depth_decay") {
    cfg.train.per_depth_decay = to_bool(key, value);
  } else if (key == "output.dir") {
    cfg.output_dir = value;
  } else {
    fail("unknown key \"" + key + "\"");
  }
}

RunConfig parse_runconfig(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    // Find the value first so '#' inside quotes survives.
    std::string stripped = strip(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = strip(line.substr(0, eq));
    std::string rest = strip(line.substr(eq + 1));
    if (key.empty()) fail(origin + ":" + std::to_string(line_no) + ": missing key");

    std::string value;
    if (!rest.empty() && rest[0] == '"') {
      size_t close = rest.find('"', 1);
      if (close == std::string::npos) {
        fail(origin + ":" + std::to_string(line_no) + ": unterminated quoted value");
      }
      value = rest.substr(1, close - 1);
      std::string tail = strip(rest.substr(close + 1));
      if (!tail.empty() && tail[0] != '#') {
        fail(origin + ":" + std::to_string(line_no) + ": unexpected text after quoted value");
      }
    } else {
      size_t hash = rest.find('#');
      if (hash != std::string::npos) rest = strip(rest.substr(0, hash));
      if (rest.empty()) fail(origin + ":" + std::to_string(line_no) + ": missing value");
      if (rest.find(' ') != std::string::npos || rest.find('\t') != std::string::npos) {
        fail(origin + ":" + std::to_string(line_no) +
             ": bare values cannot contain spaces (quote the value)");
      }
      value = rest;
    }

    try {
      apply_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      fail(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig load_runconfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_runconfig(buf.str(), path);
}

void validate_runconfig(const RunConfig& cfg, bool require_corpus) {
  if (require_corpus) {
    if (cfg.corpus_path.empty()) fail("corpus.path is required");
    if (!std::filesystem::exists(cfg.corpus_path)) {
      fail("corpus file does not exist: " + cfg.corpus_path);
    }
  }
  if (!(cfg.split_ratio > 0.0 && cfg.split_ratio < 1.0)) {
    std::ostringstream os;
    os << "split.ratio must be in (0, 1), got " << cfg.split_ratio;
    fail(os.str());
  }
  if (cfg.vocab_max_size <= kReservedIds) {
    fail("vocab.max_size must exceed the " + std::to_string(kReservedIds) + " reserved ids");
  }
  if (cfg.vocab_min_freq < 1) fail("vocab.min_freq must be at least 1");
  if (cfg.train.assembly.context_turns < 0) fail("assembly.context_turns must be non-negative");
  if (cfg.train.assembly.max_len < 8) fail("assembly.max_len must be at least 8");
  if (cfg.train.assembly.max_len > cfg.encoder.max_len) {
    fail("assembly.max_len " + std::to_string(cfg.train.assembly.max_len) +
         " exceeds encoder.max_len " + std::to_string(cfg.encoder.max_len));
  }
  if (cfg.encoder.d_model < 1 || cfg.encoder.n_layers < 1 || cfg.encoder.n_heads < 1 ||
      cfg.encoder.d_ff < 1) {
    fail("encoder dimensions must be positive");
  }
  if (cfg.encoder.d_model % cfg.encoder.n_heads != 0) {
    fail("encoder.d_model " + std::to_string(cfg.encoder.d_model) +
         " is not divisible by encoder.n_heads " + std::to_string(cfg.encoder.n_heads));
  }
  if (!(cfg.encoder.dropout >= 0.0 && cfg.encoder.dropout < 1.0)) {
    fail("encoder.dropout must be in [0, 1)");
  }
  if (cfg.train.batch_size < 1) fail("train.batch_size must be at least 1");
  if (cfg.train.max_epochs < 1) fail("train.max_epochs must be at least 1");
  if (cfg.train.patience < 1) fail("train.patience must be at least 1");
  if (cfg.train.early_stopping && cfg.train.patience >= cfg.train.max_epochs) {
    fail("train.patience " + std::to_string(cfg.train.patience) +
         " must be below train.max_epochs " + std::to_string(cfg.train.max_epochs));
  }
}

}  // namespace ctxempath
