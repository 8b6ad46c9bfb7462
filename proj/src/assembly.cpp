#include "ctxempath/assembly.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxempath {

const char* trait_name(Trait t) {
  switch (t) {
    case Trait::EmotionPolarity: return "polarity";
    case Trait::EmotionIntensity: return "intensity";
    case Trait::Empathy: return "empathy";
    case Trait::DialogEmpathy: return "dialog-empathy";
  }
  return "?";
}

std::optional<Trait> trait_from_name(const std::string& name) {
  if (name == "polarity") return Trait::EmotionPolarity;
  if (name == "intensity") return Trait::EmotionIntensity;
  if (name == "empathy") return Trait::Empathy;
  if (name == "dialog-empathy") return Trait::DialogEmpathy;
  return std::nullopt;
}

std::optional<double> trait_value(const Utterance& u, Trait t) {
  switch (t) {
    case Trait::EmotionPolarity: return u.emotion_polarity;
    case Trait::EmotionIntensity: return u.emotion_intensity;
    case Trait::Empathy: return u.empathy;
    case Trait::DialogEmpathy: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<int32_t> truncate_ids(std::vector<int32_t> ids, int max_len) {
  if (max_len < 8) throw std::invalid_argument("max_len must be at least 8");
  if (static_cast<int>(ids.size()) > max_len) {
    ids.resize(max_len);
    ids.back() = kSepId;
  }
  return ids;
}

std::optional<ModelInput> build_turn_input(const Conversation& conv, int turn_index, Trait trait,
                                           const AssemblyConfig& cfg, const Vocabulary& vocab,
                                           bool allow_missing_label) {
  if (trait_track(trait) != Track::Turn) {
    throw std::invalid_argument(std::string("trait ") + trait_name(trait) +
                                " is not a per-turn trait");
  }
  if (turn_index < 0 || turn_index >= static_cast<int>(conv.turns.size())) {
    throw std::out_of_range("turn index " + std::to_string(turn_index) +
                            " outside conversation \"" + conv.conversation_id + "\" with " +
                            std::to_string(conv.turns.size()) + " turns");
  }
  if (cfg.context_turns < 0) throw std::invalid_argument("context_turns must be non-negative");

  auto label = trait_value(conv.turns[turn_index], trait);
  if (!label && !allow_missing_label) return std::nullopt;

  ModelInput ex;
  ex.conversation_id = conv.conversation_id;
  ex.turn_index = turn_index;
  ex.speaker = conv.turns[turn_index].speaker;
  if (label) ex.target = *label;

  ex.ids.push_back(kClsId);
  int oldest = std::max(0, turn_index - cfg.context_turns);
  for (int j = turn_index; j >= oldest; --j) {
    auto enc = encode(conv.turns[j].text, vocab);
    ex.ids.insert(ex.ids.end(), enc.begin(), enc.end());
    ex.ids.push_back(kSepId);
  }
  ex.ids = truncate_ids(std::move(ex.ids), cfg.max_len);
  return ex;
}

std::optional<ModelInput> build_dialog_input(const Conversation& conv, Speaker rated,
                                             const AssemblyConfig& cfg, const Vocabulary& vocab,
                                             bool allow_missing_label) {
  auto label = conv.dialog_label(rated);
  if (!label && !allow_missing_label) return std::nullopt;

  ModelInput ex;
  ex.conversation_id = conv.conversation_id;
  ex.turn_index = -1;
  ex.speaker = rated;
  if (label) ex.target = static_cast<double>(*label);

  if (cfg.speaker_prefix) ex.ids.push_back(speaker_id(rated));
  ex.ids.push_back(kClsId);
  for (const auto& u : conv.turns) {
    auto enc = encode(u.text, vocab);
    ex.ids.insert(ex.ids.end(), enc.begin(), enc.end());
    ex.ids.push_back(kSepId);
  }
  ex.ids = truncate_ids(std::move(ex.ids), cfg.max_len);
  return ex;
}

std::vector<ModelInput> build_trait_examples(const std::vector<Conversation>& conversations,
                                             Trait trait, const AssemblyConfig& cfg,
                                             const Vocabulary& vocab, bool allow_missing_label) {
  std::vector<ModelInput> out;
  for (const auto& conv : conversations) {
    if (trait_track(trait) == Track::Turn) {
      for (int i = 0; i < static_cast<int>(conv.turns.size()); ++i) {
        if (auto ex = build_turn_input(conv, i, trait, cfg, vocab, allow_missing_label)) {
          out.push_back(std::move(*ex));
        }
      }
    } else {
      for (Speaker s : {Speaker::P1, Speaker::P2}) {
        if (auto ex = build_dialog_input(conv, s, cfg, vocab, allow_missing_label)) {
          out.push_back(std::move(*ex));
        }
      }
    }
  }
  return out;
}

}  // namespace ctxempath
