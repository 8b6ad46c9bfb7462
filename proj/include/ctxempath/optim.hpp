#pragma once

// Adam over the model's named parameters, split into two learning-rate
// groups: the encoder stack and the regression head. The encoder group can
// be frozen (its step counter and moments do not advance) and its rate
// decays by a fixed factor after every completed epoch, optionally scaled
// further per block depth.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxempath/encoder.hpp"

namespace ctxempath {

struct OptimConfig {
  double lr_encoder = 3e-4;
  double lr_head = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double epoch_decay = 0.95;
  double clip_norm = 1.0;
  // Deeper blocks keep more of the rate: block l of L uses
  // lr_encoder * decay^(L - l), embeddings count as block 0.
  bool per_depth_decay = false;
};

double decayed_lr(double initial, double decay, int epochs_completed);

// Learning-rate recipes. Desk is sized for small corpora on a laptop;
// paper-faithful keeps the original fine-tuning rates.
enum class Profile { Desk, PaperFaithful };

const char* profile_name(Profile p);
std::optional<Profile> profile_from_name(const std::string& name);
OptimConfig profile_optim(Profile p);

template <class T>
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<NamedParamT<T>> params, OptimConfig cfg, int n_layers);

  // Scales every gradient by min(1, max_norm / ||g||) over the joint
  // parameter vector; returns the factor applied.
  double clip_global_norm(double max_norm);

  void step(bool encoder_frozen);
  void zero_grads();
  void on_epoch_completed(int epochs_completed);

  double lr_encoder() const { return lr_encoder_now_; }
  double lr_head() const { return cfg_.lr_head; }
  long encoder_steps() const { return t_encoder_; }
  long head_steps() const { return t_head_; }

 private:
  struct Slot {
    NamedParamT<T> param;
    std::vector<T> m, v;
    double depth_scale = 1.0;
  };
  std::vector<Slot> slots_;
  OptimConfig cfg_;
  double lr_encoder_now_;
  long t_encoder_ = 0;
  long t_head_ = 0;
};

}  // namespace ctxempath
