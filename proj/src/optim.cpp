#include "ctxempath/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxempath {

double decayed_lr(double initial, double decay, int epochs_completed) {
  return initial * std::pow(decay, epochs_completed);
}

const char* profile_name(Profile p) {
  return p == Profile::Desk ? "desk" : "paper-faithful";
}

std::optional<Profile> profile_from_name(const std::string& name) {
  if (name == "desk") return Profile::Desk;
  if (name == "paper-faithful") return Profile::PaperFaithful;
  return std::nullopt;
}

OptimConfig profile_optim(Profile p) {
  OptimConfig cfg;
  if (p == Profile::Desk) {
    cfg.lr_encoder = 3e-4;
    cfg.lr_head = 1e-3;
  } else {
    cfg.lr_encoder = 1e-5;
    cfg.lr_head = 5e-5;
  }
  return cfg;
}

template <class T>
AdamOptimizer<T>::AdamOptimizer(std::vector<NamedParamT<T>> params, OptimConfig cfg, int n_layers)
    : cfg_(cfg), lr_encoder_now_(cfg.lr_encoder) {
  if (params.empty()) throw std::invalid_argument("optimizer needs at least one parameter");
  for (auto& p : params) {
    Slot s;
    s.param = std::move(p);
    const size_t n = s.param.tensor->values.size();
    s.m.assign(n, T(0));
    s.v.assign(n, T(0));
    if (cfg_.per_depth_decay && s.param.encoder_group) {
      s.depth_scale = std::pow(cfg_.epoch_decay, n_layers - s.param.depth);
    }
    slots_.push_back(std::move(s));
  }
}

template <class T>
double AdamOptimizer<T>::clip_global_norm(double max_norm) {
  double sq = 0.0;
  for (auto& s : slots_) {
    auto& t = *s.param.tensor;
    t.ensure_grad();
    sq += kernels::sum_sq(static_cast<long>(t.grad.size()), t.grad.data());
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return 1.0;
  const double factor = max_norm / norm;
  const T f = static_cast<T>(factor);
  for (auto& s : slots_) {
    T* g = s.param.tensor->grad.data();
    kernels::elementwise<T>(static_cast<long>(s.param.tensor->grad.size()),
                            [=](long i) { g[i] *= f; });
  }
  return factor;
}

template <class T>
void AdamOptimizer<T>::step(bool encoder_frozen) {
  bool stepped_encoder = false, stepped_head = false;
  for (auto& s : slots_) {
    if (s.param.encoder_group && encoder_frozen) continue;
    (s.param.encoder_group ? stepped_encoder : stepped_head) = true;
  }
  if (stepped_encoder) ++t_encoder_;
  if (stepped_head) ++t_head_;

  for (auto& s : slots_) {
    if (s.param.encoder_group && encoder_frozen) continue;
    auto& t = *s.param.tensor;
    t.ensure_grad();
    const long steps = s.param.encoder_group ? t_encoder_ : t_head_;
    const double lr =
        s.param.encoder_group ? lr_encoder_now_ * s.depth_scale : cfg_.lr_head;
    const T bc1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, steps));
    const T bc2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, steps));
    kernels::adam_update(static_cast<long>(t.values.size()), t.values.data(), t.grad.data(),
                         s.m.data(), s.v.data(), static_cast<T>(lr),
                         static_cast<T>(cfg_.beta1), static_cast<T>(cfg_.beta2),
                         static_cast<T>(cfg_.eps), bc1, bc2);
  }
}

template <class T>
void AdamOptimizer<T>::zero_grads() {
  for (auto& s : slots_) s.param.tensor->zero_grad();
}

template <class T>
void AdamOptimizer<T>::on_epoch_completed(int epochs_completed) {
  lr_encoder_now_ = decayed_lr(cfg_.lr_encoder, cfg_.epoch_decay, epochs_completed);
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace ctxempath
