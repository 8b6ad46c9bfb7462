#include "ctxempath/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ctxempath {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& msg) { throw CorpusError(msg); }

[[noreturn]] void fail_at(const std::string& path, long line, const std::string& msg) {
  fail(path + ":" + std::to_string(line) + ": " + msg);
}

void check_turn_label(const std::string& name, double v, const Conversation& conv, int turn) {
  if (!(v >= 0.0 && v <= 5.0)) {
    std::ostringstream os;
    os << "label " << name << " = " << v << " out of range [0, 5] (conversation \""
       << conv.conversation_id << "\", turn " << turn << ")";
    fail(os.str());
  }
}

void check_dialog_label(const std::string& who, int v, const Conversation& conv) {
  if (v < 1 || v > 7) {
    std::ostringstream os;
    os << "dialog empathy for " << who << " = " << v << " out of range [1, 7] (conversation \""
       << conv.conversation_id << "\")";
    fail(os.str());
  }
}

Speaker parse_speaker(const std::string& s) {
  if (s == "P1") return Speaker::P1;
  if (s == "P2") return Speaker::P2;
  fail("speaker must be \"P1\" or \"P2\", got \"" + s + "\"");
}

std::optional<double> opt_number(const ordered_json& turn, const char* key) {
  auto it = turn.find(key);
  if (it == turn.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) fail(std::string(key) + " must be a number");
  return it->get<double>();
}

std::optional<int> opt_integer(const ordered_json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<int>();
  if (it->is_number_float()) {
    double v = it->get<double>();
    if (v == std::floor(v)) return static_cast<int>(v);
  }
  fail(std::string(key) + " must be an integer");
}

Conversation conversation_from_json(const ordered_json& j) {
  Conversation conv;
  if (!j.is_object()) fail("each line must be a JSON object");
  auto id = j.find("conversation_id");
  if (id == j.end() || !id->is_string()) fail("conversation_id must be a string");
  conv.conversation_id = id->get<std::string>();

  auto turns = j.find("turns");
  if (turns == j.end() || !turns->is_array()) fail("turns must be an array");
  int index = 0;
  for (const auto& t : *turns) {
    if (!t.is_object()) fail("each turn must be a JSON object");
    Utterance u;
    u.index = index++;
    auto sp = t.find("speaker");
    if (sp == t.end() || !sp->is_string()) fail("turn speaker must be a string");
    u.speaker = parse_speaker(sp->get<std::string>());
    auto tx = t.find("text");
    if (tx == t.end() || !tx->is_string()) fail("turn text must be a string");
    u.text = tx->get<std::string>();
    u.emotion_polarity = opt_number(t, "emotion_polarity");
    u.emotion_intensity = opt_number(t, "emotion_intensity");
    u.empathy = opt_number(t, "empathy");
    conv.turns.push_back(std::move(u));
  }

  auto dl = j.find("dialog_perceived_empathy");
  if (dl != j.end() && !dl->is_null()) {
    if (!dl->is_object()) fail("dialog_perceived_empathy must be an object");
    conv.dialog_empathy_p1 = opt_integer(*dl, "P1");
    conv.dialog_empathy_p2 = opt_integer(*dl, "P2");
  }
  return conv;
}

ordered_json conversation_to_json(const Conversation& conv) {
  ordered_json j;
  j["conversation_id"] = conv.conversation_id;
  j["turns"] = ordered_json::array();
  for (const auto& u : conv.turns) {
    ordered_json t;
    t["speaker"] = speaker_name(u.speaker);
    t["text"] = u.text;
    if (u.emotion_polarity) t["emotion_polarity"] = *u.emotion_polarity;
    if (u.emotion_intensity) t["emotion_intensity"] = *u.emotion_intensity;
    if (u.empathy) t["empathy"] = *u.empathy;
    j["turns"].push_back(std::move(t));
  }
  if (conv.dialog_empathy_p1 || conv.dialog_empathy_p2) {
    ordered_json d = ordered_json::object();
    if (conv.dialog_empathy_p1) d["P1"] = *conv.dialog_empathy_p1;
    if (conv.dialog_empathy_p2) d["P2"] = *conv.dialog_empathy_p2;
    j["dialog_perceived_empathy"] = std::move(d);
  }
  return j;
}

std::vector<Conversation> load_jsonl(const std::string& path, std::istream& in) {
  std::vector<Conversation> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      fail_at(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    try {
      Conversation conv = conversation_from_json(j);
      validate_conversation(conv);
      out.push_back(std::move(conv));
    } catch (const CorpusError& e) {
      fail_at(path, line_no, e.what());
    }
  }
  return out;
}

// One CSV record per turn; quoted fields may contain commas and doubled
// quotes, but not raw newlines.
std::vector<std::string> split_csv_record(const std::string& path, long line_no,
                                          const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) fail_at(path, line_no, "unterminated quoted field");
  fields.push_back(cur);
  return fields;
}

double parse_csv_number(const std::string& path, long line_no, const std::string& col,
                        const std::string& cell) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    fail_at(path, line_no, col + " must be a number, got \"" + cell + "\"");
  }
  return v;
}

int parse_csv_integer(const std::string& path, long line_no, const std::string& col,
                      const std::string& cell) {
  double v = parse_csv_number(path, line_no, col, cell);
  if (v != std::floor(v)) fail_at(path, line_no, col + " must be an integer, got \"" + cell + "\"");
  return static_cast<int>(v);
}

const std::vector<std::string> kCsvHeader = {
    "conversation_id", "turn_index",        "speaker",
    "text",            "emotion_polarity",  "emotion_intensity",
    "empathy",         "dialog_empathy_P1", "dialog_empathy_P2"};

std::vector<Conversation> load_csv(const std::string& path, std::istream& in) {
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) fail(path + ": empty file");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_record(path, line_no, line);
  if (header != kCsvHeader) {
    std::string want;
    for (const auto& h : kCsvHeader) want += (want.empty() ? "" : ",") + h;
    fail_at(path, line_no, "header must be exactly: " + want);
  }

  std::vector<Conversation> out;
  std::vector<std::string> order;
  std::vector<long> first_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto f = split_csv_record(path, line_no, line);
    if (f.size() != kCsvHeader.size()) {
      fail_at(path, line_no,
              "expected " + std::to_string(kCsvHeader.size()) + " fields, got " +
                  std::to_string(f.size()));
    }
    const std::string& id = f[0];
    if (id.empty()) fail_at(path, line_no, "conversation_id must be non-empty");
    size_t ci = 0;
    for (; ci < order.size(); ++ci)
      if (order[ci] == id) break;
    if (ci == order.size()) {
      order.push_back(id);
      first_line.push_back(line_no);
      out.emplace_back();
      out.back().conversation_id = id;
    }
    Conversation& conv = out[ci];

    Utterance u;
    u.index = parse_csv_integer(path, line_no, "turn_index", f[1]);
    if (u.index != static_cast<int>(conv.turns.size())) {
      fail_at(path, line_no,
              "turn_index " + std::to_string(u.index) + " out of order for conversation \"" + id +
                  "\" (expected " + std::to_string(conv.turns.size()) + ")");
    }
    try {
      u.speaker = parse_speaker(f[2]);
    } catch (const CorpusError& e) {
      fail_at(path, line_no, e.what());
    }
    u.text = f[3];
    if (!f[4].empty()) u.emotion_polarity = parse_csv_number(path, line_no, "emotion_polarity", f[4]);
    if (!f[5].empty()) u.emotion_intensity = parse_csv_number(path, line_no, "emotion_intensity", f[5]);
    if (!f[6].empty()) u.empathy = parse_csv_number(path, line_no, "empathy", f[6]);
    conv.turns.push_back(std::move(u));

    for (int side = 0; side < 2; ++side) {
      const std::string& cell = f[7 + side];
      if (cell.empty()) continue;
      int v = parse_csv_integer(path, line_no, kCsvHeader[7 + side], cell);
      auto& slot = side == 0 ? conv.dialog_empathy_p1 : conv.dialog_empathy_p2;
      if (slot && *slot != v) {
        fail_at(path, line_no, "conflicting " + kCsvHeader[7 + side] + " for conversation \"" + id +
                                   "\" (" + std::to_string(*slot) + " vs " + std::to_string(v) + ")");
      }
      slot = v;
    }
  }

  for (size_t i = 0; i < out.size(); ++i) {
    try {
      validate_conversation(out[i]);
    } catch (const CorpusError& e) {
      fail_at(path, first_line[i], e.what());
    }
  }
  return out;
}

}  // namespace

void validate_conversation(const Conversation& conv) {
  if (conv.conversation_id.empty()) fail("conversation_id must be non-empty");
  if (conv.turns.empty()) fail("conversation \"" + conv.conversation_id + "\" has no turns");
  bool saw_p1 = false, saw_p2 = false;
  for (size_t i = 0; i < conv.turns.size(); ++i) {
    const Utterance& u = conv.turns[i];
    if (u.index != static_cast<int>(i)) {
      fail("conversation \"" + conv.conversation_id + "\": turn indices must be contiguous from 0");
    }
    if (trim(u.text).empty()) {
      fail("conversation \"" + conv.conversation_id + "\": turn " + std::to_string(i) +
           " has empty text");
    }
    (u.speaker == Speaker::P1 ? saw_p1 : saw_p2) = true;
    if (u.emotion_polarity) check_turn_label("emotion_polarity", *u.emotion_polarity, conv, u.index);
    if (u.emotion_intensity)
      check_turn_label("emotion_intensity", *u.emotion_intensity, conv, u.index);
    if (u.empathy) check_turn_label("empathy", *u.empathy, conv, u.index);
  }
  if (!saw_p1 || !saw_p2) {
    fail("conversation \"" + conv.conversation_id + "\" is not dyadic: both P1 and P2 must speak");
  }
  if (conv.dialog_empathy_p1) check_dialog_label("P1", *conv.dialog_empathy_p1, conv);
  if (conv.dialog_empathy_p2) check_dialog_label("P2", *conv.dialog_empathy_p2, conv);
}

std::vector<Conversation> load_corpus(const std::string& path, CorpusFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open corpus file: " + path);
  return format == CorpusFormat::Jsonl ? load_jsonl(path, in) : load_csv(path, in);
}

void save_corpus(const std::vector<Conversation>& conversations, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write corpus file: " + path);
  for (const auto& conv : conversations) out << conversation_to_json(conv).dump() << "\n";
  if (!out) fail("failed while writing corpus file: " + path);
}

CorpusSplit split_corpus(const std::vector<Conversation>& conversations, double ratio,
                         uint64_t seed) {
  const long n = static_cast<long>(conversations.size());
  if (n < 2) fail("need at least two conversations to split, got " + std::to_string(n));
  if (!(ratio > 0.0 && ratio < 1.0)) {
    std::ostringstream os;
    os << "split ratio must be in (0, 1), got " << ratio;
    fail(os.str());
  }
  long n_train = std::llround(ratio * static_cast<double>(n));
  n_train = std::clamp(n_train, 1L, n - 1);

  std::vector<long> idx(n);
  std::iota(idx.begin(), idx.end(), 0L);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<bool> in_train(n, false);
  for (long i = 0; i < n_train; ++i) in_train[idx[i]] = true;

  CorpusSplit split;
  split.seed = seed;
  split.ratio = ratio;
  for (long i = 0; i < n; ++i) {
    (in_train[i] ? split.train : split.validation).push_back(conversations[i]);
  }
  return split;
}

double synthetic_turn_score(int k_now, int k_prev) { return 0.5 * k_now + 0.5 * k_prev; }

int synthetic_dialog_rating(double mean_counterparty_k) {
  long r = std::llround(1.0 + 1.2 * mean_counterparty_k);
  return static_cast<int>(std::clamp(r, 1L, 7L));
}

namespace {

const char* kFiller[] = {
    "the",    "a",      "and",   "so",     "well",   "right",  "today",  "maybe",
    "really", "just",   "quite", "still",  "then",   "here",   "there",  "again",
    "about",  "around", "over",  "under",  "near",   "far",    "soon",   "later",
    "always", "often",  "never", "mostly", "partly", "fully",  "calmly", "slowly",
    "quickly", "gently", "house", "garden", "river",  "road",   "train",  "window",
    "table",  "chair",  "paper", "letter", "story",  "moment", "morning", "evening",
    "summer", "winter", "coffee", "dinner", "music",  "picture", "friend", "family",
    "walk",   "talk",   "think", "feel",   "see",    "hear",   "day",     "night"};
constexpr int kFillerCount = static_cast<int>(sizeof(kFiller) / sizeof(kFiller[0]));

}  // namespace

std::vector<Conversation> generate_synthetic(int n_conversations, int turns_per_conversation,
                                             uint64_t seed) {
  if (n_conversations < 1) throw std::invalid_argument("need at least one conversation");
  if (turns_per_conversation < 2) {
    throw std::invalid_argument("need at least two turns per conversation");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> level(0, 5);
  std::uniform_int_distribution<int> filler_len(2, 5);
  std::uniform_int_distribution<int> filler_word(0, kFillerCount - 1);

  std::vector<Conversation> out;
  out.reserve(n_conversations);
  for (int c = 0; c < n_conversations; ++c) {
    Conversation conv;
    {
      char id[32];
      std::snprintf(id, sizeof(id), "syn-%06d", c + 1);
      conv.conversation_id = id;
    }
    std::vector<int> levels(turns_per_conversation);
    double sum_k_p1 = 0.0, sum_k_p2 = 0.0;
    long n_p1 = 0, n_p2 = 0;
    for (int i = 0; i < turns_per_conversation; ++i) {
      int k = level(rng);
      levels[i] = k;
      Utterance u;
      u.index = i;
      u.speaker = i % 2 == 0 ? Speaker::P1 : Speaker::P2;
      std::string text;
      int n_pre = filler_len(rng);
      for (int w = 0; w < n_pre; ++w) {
        text += kFiller[filler_word(rng)];
        text += ' ';
      }
      text += "lvl" + std::to_string(k);
      int n_post = filler_len(rng);
      for (int w = 0; w < n_post; ++w) {
        text += ' ';
        text += kFiller[filler_word(rng)];
      }
      u.text = std::move(text);
      int k_prev = i == 0 ? k : levels[i - 1];
      double score = synthetic_turn_score(k, k_prev);
      u.emotion_intensity = score;
      u.empathy = score;
      u.emotion_polarity = static_cast<double>(k);
      conv.turns.push_back(std::move(u));
      if (i % 2 == 0) {
        sum_k_p1 += k;
        ++n_p1;
      } else {
        sum_k_p2 += k;
        ++n_p2;
      }
    }
    // Rating about a speaker comes from the counterparty's marker levels.
    conv.dialog_empathy_p1 = synthetic_dialog_rating(sum_k_p2 / static_cast<double>(n_p2));
    conv.dialog_empathy_p2 = synthetic_dialog_rating(sum_k_p1 / static_cast<double>(n_p1));
    validate_conversation(conv);
    out.push_back(std::move(conv));
  }
  return out;
}

}  // namespace ctxempath
