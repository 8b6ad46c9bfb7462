#pragma once

// Dense tensors with reverse-mode autodiff on a tape. Ops are recorded in
// execution order, so replaying the tape backwards is a valid reverse
// topological order. Gradients accumulate (+=) into grad buffers; callers
// zero them between steps.
//
// The scalar type is a template parameter: float for training, double for
// the finite-difference verification path.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxempath/kernels.hpp"

namespace ctxempath {

template <class T>
struct TensorT {
  std::vector<int> shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until ensure_grad()
  bool requires_grad = false;

  long numel() const {
    long n = 1;
    for (int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

template <class T>
using TensorPtr = std::shared_ptr<TensorT<T>>;

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

template <class T>
TensorPtr<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<TensorT<T>>();
  t->shape = std::move(shape);
  t->values.assign(t->numel(), T(0));
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

template <class T>
TensorPtr<T> tensor_from(std::vector<int> shape, std::vector<T> values,
                         bool requires_grad = false) {
  auto t = std::make_shared<TensorT<T>>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  if (t->numel() != static_cast<long>(t->values.size()))
    throw std::invalid_argument("tensor_from: " + shape_str(t->shape) + " does not hold " +
                                std::to_string(t->values.size()) + " values");
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

template <class T>
T scalar_value(const TensorPtr<T>& t) {
  if (t->numel() != 1)
    throw std::invalid_argument("scalar_value: tensor has shape " + shape_str(t->shape));
  return t->values[0];
}

namespace detail {

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// uniform in [0,1) from a hash; good enough for dropout masks
inline double hash_uniform(uint64_t key) {
  return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53;
}

template <class T>
std::vector<T> permute_swap(const std::vector<T>& in, const std::vector<int>& shape,
                            int ax0, int ax1, std::vector<int>& out_shape) {
  const int rank = static_cast<int>(shape.size());
  out_shape = shape;
  std::swap(out_shape[ax0], out_shape[ax1]);
  std::vector<long> in_strides(rank, 1), out_strides(rank, 1);
  for (int i = rank - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * shape[i + 1];
  for (int i = rank - 2; i >= 0; --i) out_strides[i] = out_strides[i + 1] * out_shape[i + 1];
  long n = 1;
  for (int d : shape) n *= d;
  std::vector<T> out(n);
  const T* src = in.data();
  T* dst = out.data();
  const auto os = out_strides;
  kernels::elementwise<T>(n, [&, src, dst](long o) {
    long rem = o, in_idx = 0;
    for (int ax = 0; ax < rank; ++ax) {
      const long digit = rem / os[ax];
      rem -= digit * os[ax];
      int src_ax = ax;
      if (ax == ax0) src_ax = ax1;
      else if (ax == ax1) src_ax = ax0;
      in_idx += digit * in_strides[src_ax];
    }
    dst[o] = src[in_idx];
  });
  return out;
}

}  // namespace detail

// Records forward ops and replays them in reverse for backward().
template <class T>
class Tape {
 public:
  explicit Tape(bool grad_enabled = true, bool train_mode = false)
      : grad_enabled_(grad_enabled), train_mode_(train_mode) {}

  bool grad_enabled() const { return grad_enabled_; }
  bool train_mode() const { return train_mode_; }
  void set_dropout_salt(uint64_t salt) { dropout_salt_ = salt; }

  // ---- ops ----

  TensorPtr<T> matmul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    const auto& as = a->shape;
    const auto& bs = b->shape;
    if (as.size() < 2 || bs.size() < 2)
      throw std::invalid_argument("matmul: ranks too small " + shape_str(as) + " x " + shape_str(bs));

    if (bs.size() == 2) {
      const int k = as.back();
      if (k != bs[0])
        throw std::invalid_argument("matmul: inner dims differ " + shape_str(as) + " x " + shape_str(bs));
      const int n = bs[1];
      long m = 1;
      for (size_t i = 0; i + 1 < as.size(); ++i) m *= as[i];
      std::vector<int> out_shape(as.begin(), as.end() - 1);
      out_shape.push_back(n);
      auto out = alloc(out_shape, a->requires_grad || b->requires_grad);
      kernels::gemm(false, false, static_cast<int>(m), n, k, a->values.data(),
                    b->values.data(), out->values.data());
      if (out->requires_grad) {
        record([a, b, out, m, n, k]() {
          if (a->requires_grad)
            kernels::gemm(false, true, static_cast<int>(m), k, n, out->grad.data(),
                          b->values.data(), a->grad.data(), true);
          if (b->requires_grad)
            kernels::gemm(true, false, k, n, static_cast<int>(m), a->values.data(),
                          out->grad.data(), b->grad.data(), true);
        });
      }
      return out;
    }

    if (as.size() != bs.size())
      throw std::invalid_argument("matmul: rank mismatch " + shape_str(as) + " x " + shape_str(bs));
    for (size_t i = 0; i + 2 < as.size(); ++i)
      if (as[i] != bs[i])
        throw std::invalid_argument("matmul: batch dims differ " + shape_str(as) + " x " + shape_str(bs));
    const int m = as[as.size() - 2];
    const int k = as.back();
    if (k != bs[bs.size() - 2])
      throw std::invalid_argument("matmul: inner dims differ " + shape_str(as) + " x " + shape_str(bs));
    const int n = bs.back();
    long batch = 1;
    for (size_t i = 0; i + 2 < as.size(); ++i) batch *= as[i];
    std::vector<int> out_shape(as.begin(), as.end() - 2);
    out_shape.push_back(m);
    out_shape.push_back(n);
    auto out = alloc(out_shape, a->requires_grad || b->requires_grad);
    const long sa = static_cast<long>(m) * k, sb = static_cast<long>(k) * n,
               sc = static_cast<long>(m) * n;
    kernels::gemm_batched(false, false, static_cast<int>(batch), m, n, k, a->values.data(),
                          sa, b->values.data(), sb, out->values.data(), sc);
    if (out->requires_grad) {
      record([a, b, out, batch, m, n, k, sa, sb, sc]() {
        if (a->requires_grad)
          kernels::gemm_batched(false, true, static_cast<int>(batch), m, k, n,
                                out->grad.data(), sc, b->values.data(), sb,
                                a->grad.data(), sa, true);
        if (b->requires_grad)
          kernels::gemm_batched(true, false, static_cast<int>(batch), k, n, m,
                                a->values.data(), sa, out->grad.data(), sc,
                                b->grad.data(), sb, true);
      });
    }
    return out;
  }

  // b's shape must equal a suffix of a's shape (bias adds, same-shape adds).
  TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    check_suffix(a->shape, b->shape, "add");
    const long cols = b->numel();
    const long rows = a->numel() / cols;
    auto out = alloc(a->shape, a->requires_grad || b->requires_grad);
    kernels::add_rows_bcast(rows, cols, a->values.data(), b->values.data(),
                            out->values.data());
    if (out->requires_grad) {
      record([a, b, out, rows, cols]() {
        if (a->requires_grad) {
          T* da = a->grad.data();
          const T* g = out->grad.data();
          kernels::elementwise<T>(a->numel(), [=](long i) { da[i] += g[i]; });
        }
        if (b->requires_grad)
          kernels::reduce_rows_sum(rows, cols, out->grad.data(), b->grad.data());
      });
    }
    return out;
  }

  TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
      throw std::invalid_argument("mul: shape mismatch " + shape_str(a->shape) + " vs " +
                                  shape_str(b->shape));
    auto out = alloc(a->shape, a->requires_grad || b->requires_grad);
    const T* av = a->values.data();
    const T* bv = b->values.data();
    T* ov = out->values.data();
    kernels::elementwise<T>(a->numel(), [=](long i) { ov[i] = av[i] * bv[i]; });
    if (out->requires_grad) {
      record([a, b, out]() {
        const T* g = out->grad.data();
        if (a->requires_grad) {
          T* da = a->grad.data();
          const T* bv2 = b->values.data();
          kernels::elementwise<T>(a->numel(), [=](long i) { da[i] += g[i] * bv2[i]; });
        }
        if (b->requires_grad) {
          T* db = b->grad.data();
          const T* av2 = a->values.data();
          kernels::elementwise<T>(b->numel(), [=](long i) { db[i] += g[i] * av2[i]; });
        }
      });
    }
    return out;
  }

  TensorPtr<T> scale(const TensorPtr<T>& a, T c) {
    auto out = alloc(a->shape, a->requires_grad);
    const T* av = a->values.data();
    T* ov = out->values.data();
    kernels::elementwise<T>(a->numel(), [=](long i) { ov[i] = av[i] * c; });
    if (out->requires_grad) {
      record([a, out, c]() {
        T* da = a->grad.data();
        const T* g = out->grad.data();
        kernels::elementwise<T>(a->numel(), [=](long i) { da[i] += g[i] * c; });
      });
    }
    return out;
  }

  TensorPtr<T> softmax(const TensorPtr<T>& a) { return softmax_impl(a, nullptr, 1); }

  // mask: one byte per key column, one mask row per `rows_per_mask`
  // consecutive softmax rows. Masked keys get probability exactly 0.
  TensorPtr<T> masked_softmax(const TensorPtr<T>& a, std::shared_ptr<std::vector<uint8_t>> mask,
                              long rows_per_mask) {
    return softmax_impl(a, std::move(mask), rows_per_mask);
  }

  TensorPtr<T> gelu(const TensorPtr<T>& a) {
    auto out = alloc(a->shape, a->requires_grad);
    kernels::gelu(a->numel(), a->values.data(), out->values.data());
    if (out->requires_grad) {
      record([a, out]() {
        kernels::gelu_backward(a->numel(), a->values.data(), out->grad.data(),
                               a->grad.data());
      });
    }
    return out;
  }

  TensorPtr<T> layer_norm(const TensorPtr<T>& a, const TensorPtr<T>& gamma,
                          const TensorPtr<T>& beta, T eps) {
    const int cols = a->shape.back();
    if (gamma->numel() != cols || beta->numel() != cols)
      throw std::invalid_argument("layer_norm: affine params " + shape_str(gamma->shape) +
                                  "/" + shape_str(beta->shape) + " do not match last axis of " +
                                  shape_str(a->shape));
    const long rows = a->numel() / cols;
    auto out = alloc(a->shape, a->requires_grad || gamma->requires_grad || beta->requires_grad);
    auto mean = std::make_shared<std::vector<T>>(rows);
    auto rstd = std::make_shared<std::vector<T>>(rows);
    kernels::layer_norm_rows(static_cast<int>(rows), cols, a->values.data(),
                             gamma->values.data(), beta->values.data(), eps,
                             out->values.data(), mean->data(), rstd->data());
    if (out->requires_grad) {
      record([a, gamma, beta, out, mean, rstd, rows, cols]() {
        a->ensure_grad();
        gamma->ensure_grad();
        beta->ensure_grad();
        kernels::layer_norm_backward_rows(static_cast<int>(rows), cols, a->values.data(),
                                          gamma->values.data(), mean->data(), rstd->data(),
                                          out->grad.data(), a->grad.data(),
                                          gamma->grad.data(), beta->grad.data());
      });
    }
    return out;
  }

  TensorPtr<T> embedding_lookup(const TensorPtr<T>& table,
                                std::shared_ptr<std::vector<int32_t>> ids,
                                std::vector<int> out_lead_shape) {
    const int cols = table->shape.back();
    const int vocab = table->shape[0];
    long n_ids = 1;
    for (int d : out_lead_shape) n_ids *= d;
    if (n_ids != static_cast<long>(ids->size()))
      throw std::invalid_argument("embedding_lookup: " + std::to_string(ids->size()) +
                                  " ids vs lead shape " + shape_str(out_lead_shape));
    for (int32_t id : *ids)
      if (id < 0 || id >= vocab)
        throw std::out_of_range("embedding_lookup: id " + std::to_string(id) +
                                " outside table " + shape_str(table->shape));
    out_lead_shape.push_back(cols);
    auto out = alloc(out_lead_shape, table->requires_grad);
    kernels::gather_rows(n_ids, cols, table->values.data(), ids->data(), out->values.data());
    if (out->requires_grad) {
      record([table, ids, out, n_ids, cols]() {
        kernels::scatter_add_rows(n_ids, static_cast<long>(cols), table->grad.data(),
                                  ids->data(), out->grad.data());
      });
    }
    return out;
  }

  TensorPtr<T> reshape(const TensorPtr<T>& a, std::vector<int> new_shape) {
    long n = 1;
    for (int d : new_shape) n *= d;
    if (n != a->numel())
      throw std::invalid_argument("reshape: " + shape_str(a->shape) + " to " +
                                  shape_str(new_shape));
    auto out = alloc(new_shape, a->requires_grad);
    out->values = a->values;
    if (out->requires_grad) {
      record([a, out]() {
        T* da = a->grad.data();
        const T* g = out->grad.data();
        kernels::elementwise<T>(a->numel(), [=](long i) { da[i] += g[i]; });
      });
    }
    return out;
  }

  TensorPtr<T> transpose(const TensorPtr<T>& a, int ax0, int ax1) {
    const int rank = static_cast<int>(a->shape.size());
    if (ax0 < 0 || ax1 < 0 || ax0 >= rank || ax1 >= rank)
      throw std::invalid_argument("transpose: axes out of range for " + shape_str(a->shape));
    std::vector<int> out_shape;
    auto swapped = detail::permute_swap(a->values, a->shape, ax0, ax1, out_shape);
    auto out = alloc(out_shape, a->requires_grad);
    out->values = std::move(swapped);
    if (out->requires_grad) {
      record([a, out, ax0, ax1]() {
        std::vector<int> back_shape;
        auto g = detail::permute_swap(out->grad, out->shape, ax0, ax1, back_shape);
        T* da = a->grad.data();
        const T* gp = g.data();
        kernels::elementwise<T>(a->numel(), [=](long i) { da[i] += gp[i]; });
      });
    }
    return out;
  }

  // (B, S, C) -> (B, C), picking sequence position `pos`.
  TensorPtr<T> select_position(const TensorPtr<T>& a, int pos) {
    if (a->shape.size() != 3)
      throw std::invalid_argument("select_position: want rank 3, got " + shape_str(a->shape));
    const int B = a->shape[0], S = a->shape[1], C = a->shape[2];
    if (pos < 0 || pos >= S)
      throw std::out_of_range("select_position: position " + std::to_string(pos) +
                              " outside " + shape_str(a->shape));
    auto out = alloc({B, C}, a->requires_grad);
    const T* av = a->values.data();
    T* ov = out->values.data();
    kernels::elementwise<T>(static_cast<long>(B) * C, [=](long i) {
      const long b = i / C, j = i % C;
      ov[i] = av[(b * S + pos) * C + j];
    });
    if (out->requires_grad) {
      record([a, out, B, S, C, pos]() {
        T* da = a->grad.data();
        const T* g = out->grad.data();
        kernels::elementwise<T>(static_cast<long>(B) * C, [=](long i) {
          const long b = i / C, j = i % C;
          da[(b * S + pos) * C + j] += g[i];
        });
      });
    }
    return out;
  }

  TensorPtr<T> mean(const TensorPtr<T>& a) {
    const long n = a->numel();
    auto out = alloc({1}, a->requires_grad);
    out->values[0] = static_cast<T>(kernels::sum_all(n, a->values.data()) / double(n));
    if (out->requires_grad) {
      record([a, out, n]() {
        const T g = out->grad[0] / T(n);
        T* da = a->grad.data();
        kernels::elementwise<T>(n, [=](long i) { da[i] += g; });
      });
    }
    return out;
  }

  TensorPtr<T> mse(const TensorPtr<T>& pred, const TensorPtr<T>& target) {
    if (pred->shape != target->shape)
      throw std::invalid_argument("mse: shape mismatch " + shape_str(pred->shape) + " vs " +
                                  shape_str(target->shape));
    const long n = pred->numel();
    auto out = alloc({1}, pred->requires_grad || target->requires_grad);
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      const double d = double(pred->values[i]) - double(target->values[i]);
      s += d * d;
    }
    out->values[0] = static_cast<T>(s / double(n));
    if (out->requires_grad) {
      record([pred, target, out, n]() {
        const T g = out->grad[0] * T(2) / T(n);
        const T* pv = pred->values.data();
        const T* tv = target->values.data();
        if (pred->requires_grad) {
          T* dp = pred->grad.data();
          kernels::elementwise<T>(n, [=](long i) { dp[i] += g * (pv[i] - tv[i]); });
        }
        if (target->requires_grad) {
          T* dt = target->grad.data();
          kernels::elementwise<T>(n, [=](long i) { dt[i] -= g * (pv[i] - tv[i]); });
        }
      });
    }
    return out;
  }

  // Inverted dropout; identity unless the tape is in train mode. The mask is
  // a pure function of (salt, op index, element index), so a run is
  // reproducible for a fixed salt regardless of thread count.
  TensorPtr<T> dropout(const TensorPtr<T>& a, double rate) {
    if (!train_mode_ || rate <= 0.0) return a;
    if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
    const long n = a->numel();
    auto mask = std::make_shared<std::vector<uint8_t>>(n);
    const uint64_t key = detail::mix64(dropout_salt_ + 0xD50FULL * ++dropout_ops_);
    uint8_t* mp = mask->data();
    kernels::elementwise<T>(n, [=](long i) {
      mp[i] = detail::hash_uniform(detail::mix64(key ^ static_cast<uint64_t>(i))) >= rate;
    });
    const T keep_scale = T(1.0 / (1.0 - rate));
    auto out = alloc(a->shape, a->requires_grad);
    const T* av = a->values.data();
    T* ov = out->values.data();
    kernels::elementwise<T>(n, [=](long i) { ov[i] = mp[i] ? av[i] * keep_scale : T(0); });
    if (out->requires_grad) {
      record([a, out, mask, keep_scale]() {
        T* da = a->grad.data();
        const T* g = out->grad.data();
        const uint8_t* mp2 = mask->data();
        kernels::elementwise<T>(a->numel(),
                                [=](long i) { da[i] += mp2[i] ? g[i] * keep_scale : T(0); });
      });
    }
    return out;
  }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Grads
  // accumulate (+=) into existing buffers, so leaf grads add up across
  // forward/backward passes. One backward per tape: intermediate buffers
  // are not reset, so a second replay would compound them.
  void backward(const TensorPtr<T>& loss) {
    if (loss->numel() != 1)
      throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape));
    if (!grad_enabled_)
      throw std::logic_error("backward: tape was created with grads disabled");
    if (replayed_)
      throw std::logic_error("backward: tape already replayed; build a fresh tape per pass");
    replayed_ = true;
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

  size_t recorded_ops() const { return records_.size(); }

 private:
  TensorPtr<T> alloc(const std::vector<int>& shape, bool needs_grad) {
    auto t = make_tensor<T>(shape, false);
    t->requires_grad = grad_enabled_ && needs_grad;
    if (t->requires_grad) t->ensure_grad();
    return t;
  }

  void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }

  static void check_suffix(const std::vector<int>& big, const std::vector<int>& small,
                           const char* op) {
    if (small.size() > big.size())
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(big) +
                                  " vs " + shape_str(small));
    for (size_t i = 0; i < small.size(); ++i)
      if (small[small.size() - 1 - i] != big[big.size() - 1 - i])
        throw std::invalid_argument(std::string(op) + ": " + shape_str(small) +
                                    " is not a suffix of " + shape_str(big));
  }

  TensorPtr<T> softmax_impl(const TensorPtr<T>& a, std::shared_ptr<std::vector<uint8_t>> mask,
                            long rows_per_mask) {
    const int cols = a->shape.back();
    const long rows = a->numel() / cols;
    if (mask && static_cast<long>(mask->size()) != (rows / rows_per_mask) * cols)
      throw std::invalid_argument("masked_softmax: mask size " + std::to_string(mask->size()) +
                                  " does not cover " + shape_str(a->shape));
    auto out = alloc(a->shape, a->requires_grad);
    kernels::softmax_rows(static_cast<int>(rows), cols, a->values.data(),
                          mask ? mask->data() : nullptr, static_cast<int>(rows_per_mask),
                          out->values.data());
    if (out->requires_grad) {
      record([a, out, rows, cols]() {
        kernels::softmax_backward_rows(static_cast<int>(rows), cols, out->values.data(),
                                       out->grad.data(), a->grad.data());
      });
    }
    return out;
  }

  bool grad_enabled_;
  bool train_mode_;
  bool replayed_ = false;
  uint64_t dropout_salt_ = 0;
  uint64_t dropout_ops_ = 0;
  std::vector<std::function<void()>> records_;
};

}  // namespace ctxempath
