#pragma once

// Data model for annotated dyadic conversations: file ingestion (JSONL and
// CSV), deterministic conversation-level splitting, and a synthetic
// context-sensitive corpus generator used by the experiment harnesses.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxempath {

enum class Speaker { P1, P2 };

inline const char* speaker_name(Speaker s) { return s == Speaker::P1 ? "P1" : "P2"; }
inline Speaker other_speaker(Speaker s) { return s == Speaker::P1 ? Speaker::P2 : Speaker::P1; }

struct Utterance {
  int index = 0;
  Speaker speaker = Speaker::P1;
  std::string text;
  // Per-turn traits on [0, 5]; absent traits are skipped when building
  // examples for them.
  std::optional<double> emotion_polarity;
  std::optional<double> emotion_intensity;
  std::optional<double> empathy;
};

struct Conversation {
  std::string conversation_id;
  std::vector<Utterance> turns;
  // Dialog-level perceived-empathy ratings, integers in [1, 7], keyed by the
  // interlocutor the rating is about.
  std::optional<int> dialog_empathy_p1;
  std::optional<int> dialog_empathy_p2;

  std::optional<int> dialog_label(Speaker s) const {
    return s == Speaker::P1 ? dialog_empathy_p1 : dialog_empathy_p2;
  }
};

struct CorpusSplit {
  std::vector<Conversation> train;
  std::vector<Conversation> validation;
  uint64_t seed = 0;
  double ratio = 0.9;
};

enum class CorpusFormat { Jsonl, Csv };

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws CorpusError when an invariant is broken: empty text, labels out of
// range, non-contiguous turn indices, or a non-dyadic speaker set.
void validate_conversation(const Conversation& conv);

std::vector<Conversation> load_corpus(const std::string& path, CorpusFormat format);
void save_corpus(const std::vector<Conversation>& conversations, const std::string& path);

// Deterministic conversation-level partition. |train| is round(ratio * n),
// clamped so both sides are non-empty; original order is preserved within
// each side.
CorpusSplit split_corpus(const std::vector<Conversation>& conversations, double ratio,
                         uint64_t seed);

// Synthetic corpus whose labels depend on the previous turn: each turn's
// text carries exactly one marker token "lvl<k>" (k in 0..5) among filler
// words, and the turn score blends the current and previous markers.
std::vector<Conversation> generate_synthetic(int n_conversations, int turns_per_conversation,
                                             uint64_t seed);

// Label formulas behind generate_synthetic, exposed for direct checks.
double synthetic_turn_score(int k_now, int k_prev);
int synthetic_dialog_rating(double mean_counterparty_k);

}  // namespace ctxempath
