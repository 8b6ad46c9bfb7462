#include "ctxempath/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace ctxempath {

namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void emit_core(const std::string& core, std::vector<std::string>& out) {
  size_t start = 0;
  for (size_t p = 1; p < core.size(); ++p) {
    if (core[p] == '\'' && p > start) {
      out.push_back(core.substr(start, p - start));
      start = p;
    }
  }
  out.push_back(core.substr(start));
}

void tokenize_piece(const std::string& piece, std::vector<std::string>& out) {
  size_t b = 0;
  while (b < piece.size() && is_punct(piece[b])) out.push_back(std::string(1, piece[b++]));
  if (b == piece.size()) return;
  size_t e = piece.size();
  while (e > b && is_punct(piece[e - 1])) --e;
  emit_core(piece.substr(b, e - b), out);
  for (size_t i = e; i < piece.size(); ++i) out.push_back(std::string(1, piece[i]));
}

const char* kReservedSurface[kReservedIds] = {"[PAD]", "[CLS]", "[SEP]",
                                              "[UNK]", "[P1]",  "[P2]"};

}  // namespace

std::vector<std::string> word_tokenize(const std::string& text) {
  std::string lower = text;
  for (char& c : lower) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  std::vector<std::string> out;
  size_t i = 0;
  while (i < lower.size()) {
    while (i < lower.size() && is_space(lower[i])) ++i;
    size_t j = i;
    while (j < lower.size() && !is_space(lower[j])) ++j;
    if (j > i) tokenize_piece(lower.substr(i, j - i), out);
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* s : kReservedSurface) append(s);
}

int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(size()));
  }
  return id_to_token_[id];
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : id_to_token_) {
    out += t;
    out += '\n';
  }
  return out;
}

void Vocabulary::append(const std::string& token) {
  if (token.empty()) throw CorpusError("vocabulary token must be non-empty");
  for (char c : token) {
    if (is_space(c)) throw CorpusError("vocabulary token contains whitespace: \"" + token + "\"");
  }
  if (token_to_id_.count(token)) throw CorpusError("duplicate vocabulary token: \"" + token + "\"");
  token_to_id_.emplace(token, size());
  id_to_token_.push_back(token);
}

Vocabulary build_vocab(const std::vector<Conversation>& conversations, int max_size,
                       int min_freq) {
  if (conversations.empty()) throw CorpusError("cannot build a vocabulary from an empty corpus");
  if (max_size <= kReservedIds) {
    throw std::invalid_argument("vocab max_size must exceed the " + std::to_string(kReservedIds) +
                                " reserved ids");
  }
  if (min_freq < 1) throw std::invalid_argument("vocab min_freq must be at least 1");

  std::unordered_map<std::string, long> counts;
  for (const auto& conv : conversations) {
    for (const auto& u : conv.turns) {
      for (auto& tok : word_tokenize(u.text)) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, long>> ranked;
  ranked.reserve(counts.size());
  for (auto& kv : counts) {
    if (kv.second >= min_freq) ranked.emplace_back(kv.first, kv.second);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  for (const auto& [tok, cnt] : ranked) {
    (void)cnt;
    if (vocab.size() >= max_size) break;
    vocab.append(tok);
  }
  return vocab;
}

std::vector<int32_t> encode(const std::string& text, const Vocabulary& vocab) {
  std::vector<int32_t> ids;
  for (const auto& tok : word_tokenize(text)) ids.push_back(vocab.id_of(tok));
  return ids;
}

std::string decode(const std::vector<int32_t>& ids, const Vocabulary& vocab) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token_of(ids[i]);
  }
  return out;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write vocabulary file: " + path);
  out << vocab.serialize();
  if (!out) throw CorpusError("failed while writing vocabulary file: " + path);
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open vocabulary file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < kReservedIds) {
    throw CorpusError(path + ": vocabulary file must start with the " +
                      std::to_string(kReservedIds) + " reserved tokens");
  }
  for (int i = 0; i < kReservedIds; ++i) {
    if (lines[i] != kReservedSurface[i]) {
      throw CorpusError(path + ":" + std::to_string(i + 1) + ": expected reserved token " +
                        kReservedSurface[i] + ", got \"" + lines[i] + "\"");
    }
  }
  Vocabulary vocab;
  for (size_t i = kReservedIds; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      throw CorpusError(path + ":" + std::to_string(i + 1) + ": empty token line");
    }
    try {
      vocab.append(lines[i]);
    } catch (const CorpusError& e) {
      throw CorpusError(path + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return vocab;
}

}  // namespace ctxempath
