#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "ctxempath/corpus.hpp"

using namespace ctxempath;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "ctxempath-corpus-tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool same_utterance(const Utterance& a, const Utterance& b) {
  return a.index == b.index && a.speaker == b.speaker && a.text == b.text &&
         a.emotion_polarity == b.emotion_polarity && a.emotion_intensity == b.emotion_intensity &&
         a.empathy == b.empathy;
}

bool same_conversation(const Conversation& a, const Conversation& b) {
  if (a.conversation_id != b.conversation_id || a.turns.size() != b.turns.size()) return false;
  for (size_t i = 0; i < a.turns.size(); ++i) {
    if (!same_utterance(a.turns[i], b.turns[i])) return false;
  }
  return a.dialog_empathy_p1 == b.dialog_empathy_p1 && a.dialog_empathy_p2 == b.dialog_empathy_p2;
}

// Pulls the single "lvl<k>" marker out of a synthetic turn's text.
int marker_level(const std::string& text) {
  size_t pos = text.find("lvl");
  REQUIRE(pos != std::string::npos);
  REQUIRE(text.find("lvl", pos + 1) == std::string::npos);
  int k = text[pos + 3] - '0';
  REQUIRE(k >= 0);
  REQUIRE(k <= 5);
  return k;
}

}  // namespace

TEST_CASE("drought fixture loads with all annotated fields") {
  auto corpus = load_corpus(std::string(TEST_DATA_DIR) + "/table1.jsonl", CorpusFormat::Jsonl);
  REQUIRE(corpus.size() == 1);
  const Conversation& conv = corpus[0];
  CHECK(conv.conversation_id == "drought-1");
  REQUIRE(conv.turns.size() == 7);
  for (size_t i = 0; i < conv.turns.size(); ++i) {
    CHECK(conv.turns[i].index == static_cast<int>(i));
    CHECK(conv.turns[i].speaker == (i % 2 == 0 ? Speaker::P1 : Speaker::P2));
  }
  CHECK(conv.turns[0].text == "its a shame with the drought");
  CHECK(conv.turns[3].text == "Do you think it is human caused?");
  CHECK(conv.turns[6].text == "probably nothing humans don't really care");
  for (size_t i = 0; i < conv.turns.size(); ++i) {
    const bool labeled = i == 3;
    CHECK(conv.turns[i].emotion_polarity.has_value() == labeled);
    CHECK(conv.turns[i].emotion_intensity.has_value() == labeled);
    CHECK(conv.turns[i].empathy.has_value() == labeled);
  }
  CHECK(conv.turns[3].emotion_polarity == 1.0);
  CHECK(conv.turns[3].emotion_intensity == doctest::Approx(1.3333).epsilon(1e-12));
  CHECK(conv.turns[3].empathy == 1.0);
  REQUIRE(conv.dialog_empathy_p1.has_value());
  CHECK(*conv.dialog_empathy_p1 == 1);
  CHECK(!conv.dialog_empathy_p2.has_value());
}

TEST_CASE("empty file yields an empty corpus") {
  auto path = write_temp("empty.jsonl", "");
  CHECK(load_corpus(path, CorpusFormat::Jsonl).empty());
}

TEST_CASE("blank lines between records are skipped") {
  std::string line = read_file(std::string(TEST_DATA_DIR) + "/table1.jsonl");
  auto path = write_temp("blank.jsonl", "\n" + line + "\n\n");
  CHECK(load_corpus(path, CorpusFormat::Jsonl).size() == 1);
}

TEST_CASE("labels outside [0,5] are rejected with file location") {
  auto path = write_temp(
      "range.jsonl",
      R"({"conversation_id":"c","turns":[{"speaker":"P1","text":"hi","empathy":6.2},{"speaker":"P2","text":"yo"}]})"
      "\n");
  try {
    load_corpus(path, CorpusFormat::Jsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":1:") != std::string::npos);
    CHECK(msg.find("empathy") != std::string::npos);
    CHECK(msg.find("6.2") != std::string::npos);
  }
}

TEST_CASE("dialog ratings outside [1,7] are rejected") {
  auto path = write_temp(
      "dialog-range.jsonl",
      R"({"conversation_id":"c","turns":[{"speaker":"P1","text":"hi"},{"speaker":"P2","text":"yo"}],"dialog_perceived_empathy":{"P2":8}})"
      "\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::Jsonl), CorpusError);
}

TEST_CASE("single-speaker conversations are rejected as non-dyadic") {
  auto path = write_temp(
      "mono.jsonl",
      R"({"conversation_id":"c","turns":[{"speaker":"P1","text":"hi"},{"speaker":"P1","text":"me again"}]})"
      "\n");
  try {
    load_corpus(path, CorpusFormat::Jsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("dyadic") != std::string::npos);
  }
}

TEST_CASE("malformed JSON is reported with its line number") {
  std::string ok = read_file(std::string(TEST_DATA_DIR) + "/table1.jsonl");
  auto path = write_temp("bad.jsonl", ok + "{not json\n");
  try {
    load_corpus(path, CorpusFormat::Jsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("empty turn text is rejected") {
  auto path = write_temp(
      "blank-text.jsonl",
      R"({"conversation_id":"c","turns":[{"speaker":"P1","text":"  "},{"speaker":"P2","text":"yo"}]})"
      "\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::Jsonl), CorpusError);
}

TEST_CASE("JSONL round trip preserves every field") {
  auto original = generate_synthetic(5, 6, 99);
  {
    auto fixture =
        load_corpus(std::string(TEST_DATA_DIR) + "/table1.jsonl", CorpusFormat::Jsonl);
    original.push_back(fixture[0]);
  }
  auto path = write_temp("roundtrip.jsonl", "");
  save_corpus(original, path);
  auto reloaded = load_corpus(path, CorpusFormat::Jsonl);
  REQUIRE(reloaded.size() == original.size());
  for (size_t i = 0; i < original.size(); ++i) {
    CHECK(same_conversation(original[i], reloaded[i]));
  }
}

TEST_CASE("CSV adapter parses quoted text and per-row dialog columns") {
  std::string csv =
      "conversation_id,turn_index,speaker,text,emotion_polarity,emotion_intensity,empathy,"
      "dialog_empathy_P1,dialog_empathy_P2\n"
      "c1,0,P1,\"hello, there\",1,2,3,4,\n"
      "c1,1,P2,\"she said \"\"hi\"\"\",,,,4,\n"
      "c2,0,P2,plain,,,0.5,,7\n"
      "c2,1,P1,also plain,,,,,7\n";
  auto path = write_temp("adapter.csv", csv);
  auto corpus = load_corpus(path, CorpusFormat::Csv);
  REQUIRE(corpus.size() == 2);
  CHECK(corpus[0].conversation_id == "c1");
  CHECK(corpus[0].turns[0].text == "hello, there");
  CHECK(corpus[0].turns[1].text == "she said \"hi\"");
  CHECK(corpus[0].turns[0].emotion_polarity == 1.0);
  CHECK(corpus[0].turns[0].emotion_intensity == 2.0);
  CHECK(corpus[0].turns[0].empathy == 3.0);
  CHECK(!corpus[0].turns[1].empathy.has_value());
  CHECK(corpus[0].dialog_empathy_p1 == 4);
  CHECK(!corpus[0].dialog_empathy_p2.has_value());
  CHECK(corpus[1].turns[0].empathy == 0.5);
  CHECK(corpus[1].dialog_empathy_p2 == 7);
}

TEST_CASE("CSV rejects a wrong header") {
  auto path = write_temp("badhead.csv", "conversation,turn\nc,0\n");
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::Csv), CorpusError);
}

TEST_CASE("CSV rejects out-of-order turn indices") {
  std::string csv =
      "conversation_id,turn_index,speaker,text,emotion_polarity,emotion_intensity,empathy,"
      "dialog_empathy_P1,dialog_empathy_P2\n"
      "c1,0,P1,a,,,,,\n"
      "c1,2,P2,b,,,,,\n";
  auto path = write_temp("gap.csv", csv);
  try {
    load_corpus(path, CorpusFormat::Csv);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("CSV rejects conflicting dialog ratings within one conversation") {
  std::string csv =
      "conversation_id,turn_index,speaker,text,emotion_polarity,emotion_intensity,empathy,"
      "dialog_empathy_P1,dialog_empathy_P2\n"
      "c1,0,P1,a,,,,3,\n"
      "c1,1,P2,b,,,,4,\n";
  auto path = write_temp("conflict.csv", csv);
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::Csv), CorpusError);
}

TEST_CASE("missing corpus file raises an error naming the path") {
  try {
    load_corpus("/no/such/file.jsonl", CorpusFormat::Jsonl);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("/no/such/file.jsonl") != std::string::npos);
  }
}

TEST_CASE("split of 10 conversations at 0.9 gives 9 train and 1 validation") {
  auto corpus = generate_synthetic(10, 4, 21);
  auto split = split_corpus(corpus, 0.9, 7);
  CHECK(split.train.size() == 9);
  CHECK(split.validation.size() == 1);
}

TEST_CASE("split partitions without overlap and preserves input order") {
  auto corpus = generate_synthetic(20, 4, 22);
  auto split = split_corpus(corpus, 0.7, 5);
  CHECK(split.train.size() + split.validation.size() == corpus.size());
  std::set<std::string> train_ids, val_ids;
  for (const auto& c : split.train) train_ids.insert(c.conversation_id);
  for (const auto& c : split.validation) val_ids.insert(c.conversation_id);
  for (const auto& id : val_ids) CHECK(train_ids.count(id) == 0);
  // Order within each side follows the input corpus (ids are syn-%06d).
  for (size_t i = 1; i < split.train.size(); ++i) {
    CHECK(split.train[i - 1].conversation_id < split.train[i].conversation_id);
  }
}

TEST_CASE("split is deterministic in its arguments") {
  auto corpus = generate_synthetic(30, 4, 23);
  auto a = split_corpus(corpus, 0.9, 3);
  auto b = split_corpus(corpus, 0.9, 3);
  REQUIRE(a.validation.size() == b.validation.size());
  for (size_t i = 0; i < a.validation.size(); ++i) {
    CHECK(a.validation[i].conversation_id == b.validation[i].conversation_id);
  }
}

TEST_CASE("different split seeds move at least one conversation") {
  auto corpus = generate_synthetic(100, 4, 24);
  auto a = split_corpus(corpus, 0.9, 3);
  auto b = split_corpus(corpus, 0.9, 4);
  std::set<std::string> av, bv;
  for (const auto& c : a.validation) av.insert(c.conversation_id);
  for (const auto& c : b.validation) bv.insert(c.conversation_id);
  CHECK(av != bv);
}

TEST_CASE("split rejects degenerate inputs") {
  auto corpus = generate_synthetic(2, 4, 25);
  CHECK_THROWS_AS(split_corpus({corpus[0]}, 0.9, 1), CorpusError);
  CHECK_THROWS_AS(split_corpus(corpus, 0.0, 1), CorpusError);
  CHECK_THROWS_AS(split_corpus(corpus, 1.0, 1), CorpusError);
}

TEST_CASE("turn score blends current and previous marker levels") {
  // Levels (3, 1): second turn scores 0.5*1 + 0.5*3 = 2.0.
  CHECK(synthetic_turn_score(1, 3) == 2.0);
  CHECK(synthetic_turn_score(0, 0) == 0.0);
  CHECK(synthetic_turn_score(5, 5) == 5.0);
}

TEST_CASE("dialog rating maps mean levels onto the 1..7 scale") {
  CHECK(synthetic_dialog_rating(0.0) == 1);
  CHECK(synthetic_dialog_rating(2.5) == 4);  // 1 + 1.2*2.5 = 4
  CHECK(synthetic_dialog_rating(5.0) == 7);  // 1 + 1.2*5 = 7
  CHECK(synthetic_dialog_rating(100.0) == 7);
}

TEST_CASE("synthetic corpus is deterministic in its seed") {
  auto a = generate_synthetic(8, 5, 77);
  auto b = generate_synthetic(8, 5, 77);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(same_conversation(a[i], b[i]));
  auto c = generate_synthetic(8, 5, 78);
  bool all_same = true;
  for (size_t i = 0; i < a.size(); ++i) all_same = all_same && same_conversation(a[i], c[i]);
  CHECK(!all_same);
}

TEST_CASE("synthetic labels follow the marker formulas exactly") {
  auto corpus = generate_synthetic(12, 7, 31);
  for (const auto& conv : corpus) {
    double sum_p1 = 0.0, sum_p2 = 0.0;
    int n_p1 = 0, n_p2 = 0;
    int prev = -1;
    for (size_t i = 0; i < conv.turns.size(); ++i) {
      const auto& u = conv.turns[i];
      CHECK(u.speaker == (i % 2 == 0 ? Speaker::P1 : Speaker::P2));
      int k = marker_level(u.text);
      int k_prev = i == 0 ? k : prev;
      REQUIRE(u.emotion_intensity.has_value());
      REQUIRE(u.empathy.has_value());
      REQUIRE(u.emotion_polarity.has_value());
      CHECK(*u.emotion_intensity == 0.5 * k + 0.5 * k_prev);
      CHECK(*u.empathy == *u.emotion_intensity);
      CHECK(*u.emotion_polarity == static_cast<double>(k));
      CHECK(*u.emotion_intensity >= 0.0);
      CHECK(*u.emotion_intensity <= 5.0);
      (u.speaker == Speaker::P1 ? sum_p1 : sum_p2) += k;
      (u.speaker == Speaker::P1 ? n_p1 : n_p2) += 1;
      prev = k;
    }
    REQUIRE(conv.dialog_empathy_p1.has_value());
    REQUIRE(conv.dialog_empathy_p2.has_value());
    CHECK(*conv.dialog_empathy_p1 == synthetic_dialog_rating(sum_p2 / n_p2));
    CHECK(*conv.dialog_empathy_p2 == synthetic_dialog_rating(sum_p1 / n_p1));
  }
}

TEST_CASE("synthetic generator rejects degenerate sizes") {
  CHECK_THROWS_AS(generate_synthetic(0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic(3, 1, 1), std::invalid_argument);
}
