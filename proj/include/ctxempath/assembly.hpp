#pragma once

// Builds model input id streams from conversations. Two layouts:
//
// turn track   [CLS] u_i [SEP] u_{i-1} [SEP] ... u_{i-c} [SEP]
//              current turn first, then up to c prior turns in reverse
//              chronological order; paired with one per-turn trait value.
//
// dialog track [P*] [CLS] u_0 [SEP] u_1 [SEP] ... u_last [SEP]
//              whole conversation in order behind the rated speaker's
//              marker; paired with that speaker's dialog rating.
//
// Streams longer than max_len keep their head and end in [SEP].

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ctxempath/corpus.hpp"
#include "ctxempath/tokenizer.hpp"

namespace ctxempath {

enum class Track { Turn, Dialog };

enum class Trait { EmotionPolarity, EmotionIntensity, Empathy, DialogEmpathy };

const char* trait_name(Trait t);
std::optional<Trait> trait_from_name(const std::string& name);
inline Track trait_track(Trait t) {
  return t == Trait::DialogEmpathy ? Track::Dialog : Track::Turn;
}

struct AssemblyConfig {
  int context_turns = 2;  // prior turns appended on the turn track
  int max_len = 512;
  bool speaker_prefix = true;  // dialog track only; off = ablation
};

struct ModelInput {
  std::vector<int32_t> ids;
  double target = std::numeric_limits<double>::quiet_NaN();
  std::string conversation_id;
  int turn_index = -1;            // -1 on the dialog track
  Speaker speaker = Speaker::P1;  // rated speaker on the dialog track
};

std::vector<int32_t> truncate_ids(std::vector<int32_t> ids, int max_len);

std::optional<double> trait_value(const Utterance& u, Trait t);

// nullopt when the turn lacks the trait (unless allow_missing_label, which
// leaves target NaN). Throws std::out_of_range for a bad turn index and
// std::invalid_argument when the trait belongs to the other track.
std::optional<ModelInput> build_turn_input(const Conversation& conv, int turn_index, Trait trait,
                                           const AssemblyConfig& cfg, const Vocabulary& vocab,
                                           bool allow_missing_label = false);

std::optional<ModelInput> build_dialog_input(const Conversation& conv, Speaker rated,
                                             const AssemblyConfig& cfg, const Vocabulary& vocab,
                                             bool allow_missing_label = false);

// Every buildable example for the trait across the corpus: one per turn
// carrying the trait, or one per rated speaker for the dialog trait.
std::vector<ModelInput> build_trait_examples(const std::vector<Conversation>& conversations,
                                             Trait trait, const AssemblyConfig& cfg,
                                             const Vocabulary& vocab,
                                             bool allow_missing_label = false);

}  // namespace ctxempath
