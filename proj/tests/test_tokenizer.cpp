#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ctxempath/tokenizer.hpp"

using namespace ctxempath;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "ctxempath-tokenizer-tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

Conversation make_conv(const std::string& id, const std::vector<std::string>& texts) {
  Conversation conv;
  conv.conversation_id = id;
  for (size_t i = 0; i < texts.size(); ++i) {
    Utterance u;
    u.index = static_cast<int>(i);
    u.speaker = i % 2 == 0 ? Speaker::P1 : Speaker::P2;
    u.text = texts[i];
    conv.turns.push_back(std::move(u));
  }
  return conv;
}

}  // namespace

TEST_CASE("tokenizing lowercases and splits on whitespace") {
  CHECK(word_tokenize("Hello World") == std::vector<std::string>{"hello", "world"});
  CHECK(word_tokenize("  spaced\tout \n lines ") ==
        std::vector<std::string>{"spaced", "out", "lines"});
  CHECK(word_tokenize("") == std::vector<std::string>{});
  CHECK(word_tokenize("   ") == std::vector<std::string>{});
}

TEST_CASE("leading and trailing punctuation peel off as single tokens") {
  CHECK(word_tokenize("caused?") == std::vector<std::string>{"caused", "?"});
  CHECK(word_tokenize("today!") == std::vector<std::string>{"today", "!"});
  CHECK(word_tokenize("(yes)") == std::vector<std::string>{"(", "yes", ")"});
  CHECK(word_tokenize("well...") == std::vector<std::string>{"well", ".", ".", "."});
  CHECK(word_tokenize("?!") == std::vector<std::string>{"?", "!"});
}

TEST_CASE("interior apostrophes start a new token") {
  CHECK(word_tokenize("It's") == std::vector<std::string>{"it", "'s"});
  CHECK(word_tokenize("don't") == std::vector<std::string>{"don", "'t"});
  CHECK(word_tokenize("o'clock") == std::vector<std::string>{"o", "'clock"});
}

TEST_CASE("interior non-apostrophe punctuation stays inside the token") {
  CHECK(word_tokenize("well-known") == std::vector<std::string>{"well-known"});
  CHECK(word_tokenize("1.5") == std::vector<std::string>{"1.5"});
}

TEST_CASE("the drought example sentence tokenizes as printed") {
  CHECK(word_tokenize("It's terrible what is happening to the world today!") ==
        std::vector<std::string>{"it", "'s", "terrible", "what", "is", "happening", "to", "the",
                                 "world", "today", "!"});
  CHECK(word_tokenize("Do you think it is human caused?") ==
        std::vector<std::string>{"do", "you", "think", "it", "is", "human", "caused", "?"});
}

TEST_CASE("a fresh vocabulary holds exactly the reserved block") {
  Vocabulary v;
  CHECK(v.size() == kReservedIds);
  CHECK(v.token_of(kPadId) == "[PAD]");
  CHECK(v.token_of(kClsId) == "[CLS]");
  CHECK(v.token_of(kSepId) == "[SEP]");
  CHECK(v.token_of(kUnkId) == "[UNK]");
  CHECK(v.token_of(kSpkP1Id) == "[P1]");
  CHECK(v.token_of(kSpkP2Id) == "[P2]");
  CHECK(v.id_of("[CLS]") == kClsId);
  CHECK(v.id_of("anything") == kUnkId);
  CHECK_THROWS_AS(v.token_of(6), std::out_of_range);
  CHECK_THROWS_AS(v.token_of(-1), std::out_of_range);
}

TEST_CASE("speaker ids map P1 and P2 onto their reserved slots") {
  CHECK(speaker_id(Speaker::P1) == kSpkP1Id);
  CHECK(speaker_id(Speaker::P2) == kSpkP2Id);
}

TEST_CASE("vocabulary ranks by frequency then lexicographically") {
  // Counts: a:2, b:1 -> ids 6, 7.
  auto v = build_vocab({make_conv("c", {"a b", "a"})}, 10, 1);
  CHECK(v.size() == 8);
  CHECK(v.id_of("a") == 6);
  CHECK(v.id_of("b") == 7);

  // Tie at count 1 breaks lexicographically.
  auto tie = build_vocab({make_conv("c", {"zebra apple", "mango kiwi"})}, 16, 1);
  CHECK(tie.id_of("apple") == 6);
  CHECK(tie.id_of("kiwi") == 7);
  CHECK(tie.id_of("mango") == 8);
  CHECK(tie.id_of("zebra") == 9);
}

TEST_CASE("case folding merges counts before ranking") {
  auto v = build_vocab({make_conv("c", {"X x", "y z"})}, 16, 2);
  CHECK(v.size() == 7);  // only "x" survives min_freq 2
  CHECK(v.id_of("x") == 6);
  CHECK(v.id_of("y") == kUnkId);
}

TEST_CASE("max_size caps the vocabulary including the reserved block") {
  auto v = build_vocab({make_conv("c", {"a a a", "b b c"})}, 8, 1);
  CHECK(v.size() == 8);
  CHECK(v.id_of("a") == 6);
  CHECK(v.id_of("b") == 7);
  CHECK(v.id_of("c") == kUnkId);
}

TEST_CASE("vocabulary builds are deterministic") {
  auto corpus = generate_synthetic(10, 6, 5);
  auto a = build_vocab(corpus, 512, 1);
  auto b = build_vocab(corpus, 512, 1);
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("build_vocab rejects empty corpora and tiny caps") {
  CHECK_THROWS_AS(build_vocab({}, 100, 1), CorpusError);
  CHECK_THROWS_AS(build_vocab({make_conv("c", {"a", "b"})}, kReservedIds, 1),
                  std::invalid_argument);
}

TEST_CASE("encode maps known words to their ids and unknown ones to UNK") {
  auto v = build_vocab({make_conv("c", {"a b", "a"})}, 10, 1);
  CHECK(encode("a b", v) == std::vector<int32_t>{6, 7});
  CHECK(encode("A b!", v) == std::vector<int32_t>{6, 7, kUnkId});
  CHECK(encode("zzz", v) == std::vector<int32_t>{kUnkId});
  CHECK(encode("", v) == std::vector<int32_t>{});
}

TEST_CASE("encode never emits reserved ids for corpus text") {
  auto v = build_vocab({make_conv("c", {"[CLS] hello", "[PAD] there"})}, 32, 1);
  // Brackets split off as punctuation, so the literal strings cannot map onto
  // the control ids; unseen pieces fall back to UNK.
  for (int32_t id : encode("[CLS] [PAD] [P1]", v)) {
    CHECK(id != kPadId);
    CHECK(id != kClsId);
    CHECK(id != kSepId);
    CHECK(id != kSpkP1Id);
    CHECK(id != kSpkP2Id);
  }
  CHECK(v.id_of("[CLS]") == kClsId);  // reserved surface stays reserved
}

TEST_CASE("decode joins surface forms and renders control ids by name") {
  auto v = build_vocab({make_conv("c", {"a b", "a"})}, 10, 1);
  CHECK(decode({kClsId, 6, 7, kSepId}, v) == "[CLS] a b [SEP]");
  CHECK(decode({}, v) == "");
}

TEST_CASE("decode of encode recovers the split token stream") {
  std::string text = "Do you think it is human caused?";
  auto v = build_vocab({make_conv("c", {text, "filler words"})}, 64, 1);
  CHECK(decode(encode(text, v), v) == "do you think it is human caused ?");
}

TEST_CASE("vocabulary files round trip byte for byte") {
  auto corpus = generate_synthetic(6, 5, 41);
  auto v = build_vocab(corpus, 256, 1);
  auto path = write_temp("vocab.txt", "");
  save_vocab(v, path);
  auto reloaded = load_vocab(path);
  CHECK(reloaded.serialize() == v.serialize());
  auto path2 = write_temp("vocab2.txt", "");
  save_vocab(reloaded, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("serialized form is one token per line with ids as line numbers") {
  Vocabulary v;
  v.append("hello");
  CHECK(v.serialize() == "[PAD]\n[CLS]\n[SEP]\n[UNK]\n[P1]\n[P2]\nhello\n");
  CHECK(v.id_of("hello") == 6);
}

TEST_CASE("append rejects duplicates and blank tokens") {
  Vocabulary v;
  v.append("hello");
  CHECK_THROWS_AS(v.append("hello"), CorpusError);
  CHECK_THROWS_AS(v.append(""), CorpusError);
  CHECK_THROWS_AS(v.append("two words"), CorpusError);
}

TEST_CASE("loading a vocabulary with a corrupted reserved block fails") {
  auto path = write_temp("bad-vocab.txt", "[PAD]\n[CLS]\n[SEP]\n[UNK]\nhello\n[P2]\n");
  CHECK_THROWS_AS(load_vocab(path), CorpusError);
  auto short_path = write_temp("short-vocab.txt", "[PAD]\n[CLS]\n");
  CHECK_THROWS_AS(load_vocab(short_path), CorpusError);
}
