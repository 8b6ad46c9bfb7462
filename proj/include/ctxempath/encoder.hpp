#pragma once

// Small bidirectional transformer encoder over id streams, pooled at one
// position and projected to a scalar by a linear head. Post-norm blocks:
//
//   x   = LN(tok_emb + pos_emb); dropout
//   a   = LN(x + dropout(proj(attention(x))))
//   out = LN(a + dropout(ffn(a)))
//
// Attention uses the batch key mask, so padded positions carry exactly zero
// weight and pooled outputs do not depend on the amount of padding.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ctxempath/assembly.hpp"
#include "ctxempath/tensor.hpp"

namespace ctxempath {

struct EncoderConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 512;
  double dropout = 0.1;
  uint64_t init_seed = 42;
  // Pool the [CLS] slot rather than stream position 0. They differ only when
  // a speaker prefix occupies position 0.
  bool pool_cls_slot = false;
};

void validate_encoder_config(const EncoderConfig& cfg);

template <class T>
struct TransformerLayerT {
  TensorPtr<T> wq, bq, wk, bk, wv, bv, wo, bo;
  TensorPtr<T> ln1_g, ln1_b;
  TensorPtr<T> w1, b1, w2, b2;
  TensorPtr<T> ln2_g, ln2_b;
};

template <class T>
struct NamedParamT {
  std::string name;
  TensorPtr<T> tensor;
  bool encoder_group = true;  // false = regression head
  int depth = 0;              // 0 embeddings, 1..n_layers blocks
};

template <class T>
struct EncoderModelT {
  EncoderConfig cfg;
  TensorPtr<T> tok_emb, pos_emb;
  TensorPtr<T> emb_ln_g, emb_ln_b;
  std::vector<TransformerLayerT<T>> layers;
  TensorPtr<T> head_w;  // (d_model, 1)
  TensorPtr<T> head_b;  // (1)

  // Stable registry: declaration order above, layer by layer. Checkpoints
  // and the optimizer both follow this order.
  std::vector<NamedParamT<T>> named_params();
  std::vector<NamedParamT<T>> named_params() const;
};

// Fresh parameters: weights and embeddings N(0, 0.02) from init_seed, biases
// and norm shifts zero, norm gains one.
template <class T>
EncoderModelT<T> init_encoder(const EncoderConfig& cfg);

template <class T>
EncoderModelT<T> clone_model(const EncoderModelT<T>& model);

struct Batch {
  int batch = 0;
  int seq = 0;
  std::shared_ptr<std::vector<int32_t>> ids;   // batch*seq, padded with kPadId
  std::shared_ptr<std::vector<uint8_t>> mask;  // batch*seq, 1 = real token
  std::vector<double> targets;                 // per row; NaN when unlabeled
};

Batch make_batch(const std::vector<const ModelInput*>& examples);

// Pooled hidden states, shape (batch, d_model).
template <class T>
TensorPtr<T> encode_pooled(Tape<T>& tape, const EncoderModelT<T>& model, const Batch& batch);

// Scalar predictions, shape (batch, 1).
template <class T>
TensorPtr<T> predict_batch(Tape<T>& tape, const EncoderModelT<T>& model, const Batch& batch);

// Head applied to one pooled row outside any tape.
template <class T>
double head_predict(const EncoderModelT<T>& model, const T* pooled_row);

}  // namespace ctxempath
