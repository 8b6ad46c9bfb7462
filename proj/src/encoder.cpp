#include "ctxempath/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ctxempath {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;
}  // namespace

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.vocab_size < kReservedIds)
    throw std::invalid_argument("encoder vocab_size must cover the reserved ids");
  if (cfg.d_model < 1 || cfg.n_layers < 1 || cfg.n_heads < 1 || cfg.d_ff < 1)
    throw std::invalid_argument("encoder dimensions must be positive");
  if (cfg.d_model % cfg.n_heads != 0)
    throw std::invalid_argument("d_model " + std::to_string(cfg.d_model) +
                                " is not divisible by n_heads " + std::to_string(cfg.n_heads));
  if (cfg.max_len < 2) throw std::invalid_argument("encoder max_len must be at least 2");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("encoder dropout must be in [0, 1)");
}

template <class T>
std::vector<NamedParamT<T>> EncoderModelT<T>::named_params() {
  std::vector<NamedParamT<T>> out;
  auto push = [&](const std::string& name, const TensorPtr<T>& t, bool enc, int depth) {
    out.push_back({name, t, enc, depth});
  };
  push("tok_emb", tok_emb, true, 0);
  push("pos_emb", pos_emb, true, 0);
  push("emb_ln_g", emb_ln_g, true, 0);
  push("emb_ln_b", emb_ln_b, true, 0);
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    const int depth = static_cast<int>(i) + 1;
    auto& L = layers[i];
    push(p + "wq", L.wq, true, depth);
    push(p + "bq", L.bq, true, depth);
    push(p + "wk", L.wk, true, depth);
    push(p + "bk", L.bk, true, depth);
    push(p + "wv", L.wv, true, depth);
    push(p + "bv", L.bv, true, depth);
    push(p + "wo", L.wo, true, depth);
    push(p + "bo", L.bo, true, depth);
    push(p + "ln1_g", L.ln1_g, true, depth);
    push(p + "ln1_b", L.ln1_b, true, depth);
    push(p + "w1", L.w1, true, depth);
    push(p + "b1", L.b1, true, depth);
    push(p + "w2", L.w2, true, depth);
    push(p + "b2", L.b2, true, depth);
    push(p + "ln2_g", L.ln2_g, true, depth);
    push(p + "ln2_b", L.ln2_b, true, depth);
  }
  const int head_depth = static_cast<int>(layers.size()) + 1;
  push("head_w", head_w, false, head_depth);
  push("head_b", head_b, false, head_depth);
  return out;
}

template <class T>
std::vector<NamedParamT<T>> EncoderModelT<T>::named_params() const {
  return const_cast<EncoderModelT<T>*>(this)->named_params();
}

template <class T>
EncoderModelT<T> init_encoder(const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  std::mt19937_64 rng(cfg.init_seed);
  std::normal_distribution<double> dist(0.0, kInitStd);

  auto randn = [&](std::vector<int> shape) {
    auto t = make_tensor<T>(std::move(shape), true);
    for (auto& v : t->values) v = static_cast<T>(dist(rng));
    return t;
  };
  auto zeros = [&](std::vector<int> shape) { return make_tensor<T>(std::move(shape), true); };
  auto ones = [&](std::vector<int> shape) {
    auto t = make_tensor<T>(std::move(shape), true);
    std::fill(t->values.begin(), t->values.end(), T(1));
    return t;
  };

  EncoderModelT<T> model;
  model.cfg = cfg;
  const int C = cfg.d_model, F = cfg.d_ff;
  model.tok_emb = randn({cfg.vocab_size, C});
  model.pos_emb = randn({cfg.max_len, C});
  model.emb_ln_g = ones({C});
  model.emb_ln_b = zeros({C});
  for (int i = 0; i < cfg.n_layers; ++i) {
    TransformerLayerT<T> L;
    L.wq = randn({C, C});
    L.bq = zeros({C});
    L.wk = randn({C, C});
    L.bk = zeros({C});
    L.wv = randn({C, C});
    L.bv = zeros({C});
    L.wo = randn({C, C});
    L.bo = zeros({C});
    L.ln1_g = ones({C});
    L.ln1_b = zeros({C});
    L.w1 = randn({C, F});
    L.b1 = zeros({F});
    L.w2 = randn({F, C});
    L.b2 = zeros({C});
    L.ln2_g = ones({C});
    L.ln2_b = zeros({C});
    model.layers.push_back(std::move(L));
  }
  model.head_w = randn({C, 1});
  model.head_b = zeros({1});
  return model;
}

template <class T>
EncoderModelT<T> clone_model(const EncoderModelT<T>& model) {
  EncoderModelT<T> out;
  out.cfg = model.cfg;
  auto copy = [](const TensorPtr<T>& t) {
    auto c = make_tensor<T>(t->shape, true);
    c->values = t->values;
    return c;
  };
  out.tok_emb = copy(model.tok_emb);
  out.pos_emb = copy(model.pos_emb);
  out.emb_ln_g = copy(model.emb_ln_g);
  out.emb_ln_b = copy(model.emb_ln_b);
  for (const auto& L : model.layers) {
    TransformerLayerT<T> c{copy(L.wq), copy(L.bq), copy(L.wk), copy(L.bk), copy(L.wv),
                           copy(L.bv), copy(L.wo), copy(L.bo), copy(L.ln1_g), copy(L.ln1_b),
                           copy(L.w1), copy(L.b1), copy(L.w2), copy(L.b2), copy(L.ln2_g),
                           copy(L.ln2_b)};
    out.layers.push_back(std::move(c));
  }
  out.head_w = copy(model.head_w);
  out.head_b = copy(model.head_b);
  return out;
}

Batch make_batch(const std::vector<const ModelInput*>& examples) {
  if (examples.empty()) throw std::invalid_argument("make_batch: no examples");
  Batch b;
  b.batch = static_cast<int>(examples.size());
  size_t seq = 0;
  for (const auto* ex : examples) seq = std::max(seq, ex->ids.size());
  b.seq = static_cast<int>(seq);
  b.ids = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(b.batch) * seq, kPadId);
  b.mask = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(b.batch) * seq, 0);
  for (int r = 0; r < b.batch; ++r) {
    const auto& ids = examples[r]->ids;
    std::copy(ids.begin(), ids.end(), b.ids->begin() + static_cast<size_t>(r) * seq);
    std::fill_n(b.mask->begin() + static_cast<size_t>(r) * seq, ids.size(), uint8_t(1));
    b.targets.push_back(examples[r]->target);
  }
  return b;
}

template <class T>
TensorPtr<T> encode_pooled(Tape<T>& tape, const EncoderModelT<T>& model, const Batch& batch) {
  const EncoderConfig& cfg = model.cfg;
  const int B = batch.batch, S = batch.seq;
  if (S < 1 || B < 1) throw std::invalid_argument("encode_pooled: empty batch");
  if (S > cfg.max_len)
    throw std::invalid_argument("sequence length " + std::to_string(S) + " exceeds max_len " +
                                std::to_string(cfg.max_len));
  const int C = cfg.d_model, H = cfg.n_heads, dh = C / H;
  const T eps = static_cast<T>(kLnEps);

  auto pos_ids = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(B) * S);
  for (int r = 0; r < B; ++r)
    for (int s = 0; s < S; ++s) (*pos_ids)[static_cast<size_t>(r) * S + s] = s;

  auto x = tape.add(tape.embedding_lookup(model.tok_emb, batch.ids, {B, S}),
                    tape.embedding_lookup(model.pos_emb, pos_ids, {B, S}));
  x = tape.layer_norm(x, model.emb_ln_g, model.emb_ln_b, eps);
  x = tape.dropout(x, cfg.dropout);

  const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  for (const auto& L : model.layers) {
    auto heads = [&](const TensorPtr<T>& w, const TensorPtr<T>& bias) {
      auto y = tape.add(tape.matmul(x, w), bias);
      return tape.transpose(tape.reshape(y, {B, S, H, dh}), 1, 2);  // (B,H,S,dh)
    };
    auto q = heads(L.wq, L.bq);
    auto k = heads(L.wk, L.bk);
    auto v = heads(L.wv, L.bv);
    auto scores = tape.scale(tape.matmul(q, tape.transpose(k, 2, 3)), inv_sqrt_dh);
    auto att = tape.masked_softmax(scores, batch.mask, static_cast<long>(H) * S);
    att = tape.dropout(att, cfg.dropout);
    auto ctx = tape.reshape(tape.transpose(tape.matmul(att, v), 1, 2), {B, S, C});
    auto proj = tape.dropout(tape.add(tape.matmul(ctx, L.wo), L.bo), cfg.dropout);
    x = tape.layer_norm(tape.add(x, proj), L.ln1_g, L.ln1_b, eps);
    auto h = tape.gelu(tape.add(tape.matmul(x, L.w1), L.b1));
    auto o = tape.dropout(tape.add(tape.matmul(h, L.w2), L.b2), cfg.dropout);
    x = tape.layer_norm(tape.add(x, o), L.ln2_g, L.ln2_b, eps);
  }

  int pool_pos = 0;
  if (cfg.pool_cls_slot) {
    const int32_t first = (*batch.ids)[0];
    if (first == kSpkP1Id || first == kSpkP2Id) pool_pos = 1;
  }
  return tape.select_position(x, pool_pos);
}

template <class T>
TensorPtr<T> predict_batch(Tape<T>& tape, const EncoderModelT<T>& model, const Batch& batch) {
  auto pooled = encode_pooled(tape, model, batch);
  return tape.add(tape.matmul(pooled, model.head_w), model.head_b);
}

template <class T>
double head_predict(const EncoderModelT<T>& model, const T* pooled_row) {
  double s = static_cast<double>(model.head_b->values[0]);
  for (int j = 0; j < model.cfg.d_model; ++j)
    s += static_cast<double>(pooled_row[j]) * static_cast<double>(model.head_w->values[j]);
  return s;
}

template struct EncoderModelT<float>;
template struct EncoderModelT<double>;
template EncoderModelT<float> init_encoder<float>(const EncoderConfig&);
template EncoderModelT<double> init_encoder<double>(const EncoderConfig&);
template EncoderModelT<float> clone_model<float>(const EncoderModelT<float>&);
template EncoderModelT<double> clone_model<double>(const EncoderModelT<double>&);
template TensorPtr<float> encode_pooled<float>(Tape<float>&, const EncoderModelT<float>&,
                                               const Batch&);
template TensorPtr<double> encode_pooled<double>(Tape<double>&, const EncoderModelT<double>&,
                                                 const Batch&);
template TensorPtr<float> predict_batch<float>(Tape<float>&, const EncoderModelT<float>&,
                                               const Batch&);
template TensorPtr<double> predict_batch<double>(Tape<double>&, const EncoderModelT<double>&,
                                                 const Batch&);
template double head_predict<float>(const EncoderModelT<float>&, const float*);
template double head_predict<double>(const EncoderModelT<double>&, const double*);

}  // namespace ctxempath
