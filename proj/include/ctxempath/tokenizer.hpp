#pragma once

// Word-level tokenizer and frequency-ranked vocabulary with a fixed block of
// reserved control ids at the bottom of the id space.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxempath/corpus.hpp"

namespace ctxempath {

// Reserved ids. The bracketed surface forms below can never collide with
// corpus tokens because tokenization splits brackets off as punctuation.
inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kClsId = 1;
inline constexpr int32_t kSepId = 2;
inline constexpr int32_t kUnkId = 3;
inline constexpr int32_t kSpkP1Id = 4;
inline constexpr int32_t kSpkP2Id = 5;
inline constexpr int32_t kReservedIds = 6;

inline constexpr int32_t speaker_id(Speaker s) { return s == Speaker::P1 ? kSpkP1Id : kSpkP2Id; }

// Lowercases, splits on whitespace, then peels leading and trailing ASCII
// punctuation off each piece as standalone single-character tokens. Inside a
// piece, an apostrophe starts a new token that keeps the apostrophe
// ("it's" -> "it", "'s"); other interior punctuation stays put ("1.5",
// "well-known").
std::vector<std::string> word_tokenize(const std::string& text);

class Vocabulary {
 public:
  // Reserved entries only; corpus tokens are added by build_vocab/load_vocab.
  Vocabulary();

  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }
  int32_t id_of(const std::string& token) const;  // kUnkId when absent
  const std::string& token_of(int32_t id) const;  // throws std::out_of_range

  // Canonical file form: one token per line, line number = id.
  std::string serialize() const;

  void append(const std::string& token);  // throws CorpusError on duplicates

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int32_t> token_to_id_;
};

// Frequency-ranked vocabulary over every turn text: higher count first, ties
// broken lexicographically, capped at max_size entries including the
// reserved block. Tokens seen fewer than min_freq times are dropped.
Vocabulary build_vocab(const std::vector<Conversation>& conversations, int max_size = 8192,
                       int min_freq = 1);

std::vector<int32_t> encode(const std::string& text, const Vocabulary& vocab);

// Space-joined surface forms; reserved ids render as their bracketed names.
std::string decode(const std::vector<int32_t>& ids, const Vocabulary& vocab);

void save_vocab(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(const std::string& path);

}  // namespace ctxempath
