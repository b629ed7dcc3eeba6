#pragma once

// First channel: BiLSTM over the sentence embedding matrix, dot-product
// self-attention against the final merged state, dense head, softmax.
//
// Standard LSTM cell with four independent gates:
//   i,f,o = sigmoid(W x + U h_prev + b);  g = tanh(W x + U h_prev + b)
//   c = f.c_prev + i.g;  h = o.tanh(c)
// Merged state k_i concatenates forward and backward hidden states; the
// attention score of position i is k_i . k_n against the last merged state,
// softmax-normalized, and the context is the weighted sum of the k_i.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "domid/embedding.hpp"
#include "domid/tensor.hpp"

namespace domid {

// One direction's gate weights, already wrapped as tape tensors.
struct LstmGateWeights {
  Tensor W_i, W_f, W_o, W_g;  // d_h x d
  Tensor U_i, U_f, U_o, U_g;  // d_h x d_h
  Tensor b_i, b_f, b_o, b_g;  // d_h
};

struct LstmStepState {
  Tensor h, c;
};

inline LstmStepState lstm_step(Tape& t, const LstmGateWeights& w, const Tensor& x,
                               const Tensor& h_prev, const Tensor& c_prev) {
  auto gate = [&](const Tensor& W, const Tensor& U, const Tensor& b) {
    return t.add(t.add(t.matmul(W, x), t.matmul(U, h_prev)), b);
  };
  const Tensor i = t.sigmoid(gate(w.W_i, w.U_i, w.b_i));
  const Tensor f = t.sigmoid(gate(w.W_f, w.U_f, w.b_f));
  const Tensor o = t.sigmoid(gate(w.W_o, w.U_o, w.b_o));
  const Tensor g = t.tanh(gate(w.W_g, w.U_g, w.b_g));
  const Tensor c = t.add(t.mul(f, c_prev), t.mul(i, g));
  const Tensor h = t.mul(o, t.tanh(c));
  return {h, c};
}

// Forward/backward merged states k_1..k_n over the first true_len columns of
// the [d x S] matrix. Padding columns are never read.
struct MergedStates {
  std::vector<Tensor> k;  // each of length 2*d_h
  std::size_t n() const { return k.size(); }
};

inline MergedStates bilstm_forward(Tape& t, const LstmGateWeights& fwd,
                                   const LstmGateWeights& bwd, const Tensor& matrix,
                                   std::size_t true_len) {
  if (true_len == 0) throw std::invalid_argument("bilstm_forward: empty sequence");
  if (matrix.rank() != 2 || true_len > matrix.shape()[1])
    throw std::invalid_argument("bilstm_forward: true length " + std::to_string(true_len) +
                                " exceeds matrix columns");
  const std::size_t d_h = fwd.b_i.size();
  std::vector<Tensor> xs(true_len);
  for (std::size_t i = 0; i < true_len; ++i) xs[i] = t.column(matrix, i);

  std::vector<Tensor> h_fwd(true_len), h_bwd(true_len);
  Tensor h = t.zeros({d_h}), c = t.zeros({d_h});
  for (std::size_t i = 0; i < true_len; ++i) {
    auto s = lstm_step(t, fwd, xs[i], h, c);
    h = s.h;
    c = s.c;
    h_fwd[i] = s.h;
  }
  h = t.zeros({d_h});
  c = t.zeros({d_h});
  for (std::size_t i = true_len; i-- > 0;) {
    auto s = lstm_step(t, bwd, xs[i], h, c);
    h = s.h;
    c = s.c;
    h_bwd[i] = s.h;
  }

  MergedStates merged;
  merged.k.resize(true_len);
  for (std::size_t i = 0; i < true_len; ++i) merged.k[i] = t.concat({h_fwd[i], h_bwd[i]});
  return merged;
}

struct AttentionOutput {
  Tensor scores;   // e, length n
  Tensor weights;  // a = softmax(e)
  Tensor context;  // h = sum a_i k_i
};

inline AttentionOutput attention(Tape& t, const MergedStates& merged) {
  if (merged.n() == 0) throw std::invalid_argument("attention: empty merged states");
  const Tensor& k_last = merged.k.back();
  std::vector<Tensor> scores(merged.n());
  for (std::size_t i = 0; i < merged.n(); ++i) scores[i] = t.dot(merged.k[i], k_last);
  AttentionOutput out;
  out.scores = t.concat(std::span<const Tensor>(scores));
  out.weights = t.softmax(out.scores);
  out.context = t.weighted_sum(std::span<const Tensor>(merged.k), out.weights);
  return out;
}

inline Tensor channel_head(Tape& t, const Tensor& W, const Tensor& b, const Tensor& h) {
  return t.softmax(t.add(t.matmul(W, h), b));
}

struct LstmChannelConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 128;
  std::size_t num_classes = 0;
  double dropout = 0.3;
};

// Persistent weights for one direction.
struct LstmDirectionParams {
  Parameter W_i, W_f, W_o, W_g, U_i, U_f, U_o, U_g, b_i, b_f, b_o, b_g;

  LstmDirectionParams() = default;
  LstmDirectionParams(const std::string& prefix, std::size_t d_h, std::size_t d)
      : W_i(prefix + "/W_i", {d_h, d}),
        W_f(prefix + "/W_f", {d_h, d}),
        W_o(prefix + "/W_o", {d_h, d}),
        W_g(prefix + "/W_g", {d_h, d}),
        U_i(prefix + "/U_i", {d_h, d_h}),
        U_f(prefix + "/U_f", {d_h, d_h}),
        U_o(prefix + "/U_o", {d_h, d_h}),
        U_g(prefix + "/U_g", {d_h, d_h}),
        b_i(prefix + "/b_i", {d_h}),
        b_f(prefix + "/b_f", {d_h}, 1.0),  // forget gate starts open
        b_o(prefix + "/b_o", {d_h}),
        b_g(prefix + "/b_g", {d_h}) {}

  std::vector<Parameter*> all() {
    return {&W_i, &W_f, &W_o, &W_g, &U_i, &U_f, &U_o, &U_g, &b_i, &b_f, &b_o, &b_g};
  }

  void init(std::mt19937_64& rng, std::size_t d, std::size_t d_h) {
    const double wl = 1.0 / std::sqrt(static_cast<double>(d));
    const double ul = 1.0 / std::sqrt(static_cast<double>(d_h));
    for (Parameter* p : {&W_i, &W_f, &W_o, &W_g}) p->fill_uniform(rng, wl);
    for (Parameter* p : {&U_i, &U_f, &U_o, &U_g}) p->fill_uniform(rng, ul);
  }

  template <typename Wrap>
  LstmGateWeights wrap(Wrap&& w) {
    return {w(W_i), w(W_f), w(W_o), w(W_g), w(U_i), w(U_f), w(U_o), w(U_g),
            w(b_i), w(b_f), w(b_o), w(b_g)};
  }
};

class LstmAttentionChannel {
 public:
  LstmAttentionChannel() = default;
  explicit LstmAttentionChannel(LstmChannelConfig cfg)
      : cfg_(cfg),
        fwd_("lstm/fwd", cfg.hidden_dim, cfg.input_dim),
        bwd_("lstm/bwd", cfg.hidden_dim, cfg.input_dim),
        head_w_("lstm/head/W", {cfg.num_classes, 2 * cfg.hidden_dim}),
        head_b_("lstm/head/b", {cfg.num_classes}) {
    if (cfg.num_classes < 2)
      throw std::invalid_argument("LstmAttentionChannel: need at least 2 classes");
  }

  const LstmChannelConfig& config() const { return cfg_; }

  void init_params(std::mt19937_64& rng) {
    fwd_.init(rng, cfg_.input_dim, cfg_.hidden_dim);
    bwd_.init(rng, cfg_.input_dim, cfg_.hidden_dim);
    head_w_.fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(2 * cfg_.hidden_dim)));
  }

  std::vector<Parameter*> parameters() {
    auto ps = fwd_.all();
    auto bs = bwd_.all();
    ps.insert(ps.end(), bs.begin(), bs.end());
    ps.push_back(&head_w_);
    ps.push_back(&head_b_);
    return ps;
  }

  // Inference: parameters enter the tape as constants; no dropout.
  Tensor forward(Tape& t, const Tensor& matrix, std::size_t true_len) const {
    auto* self = const_cast<LstmAttentionChannel*>(this);
    auto wrap = [&t](Parameter& p) { return t.input(p.shape, p.value, false); };
    return self->forward_impl(t, matrix, true_len, wrap, nullptr);
  }

  Tensor forward(Tape& t, const SentenceMatrix& m) const {
    return forward(t, t.input({m.dim, m.max_len}, m.values, false), m.true_len);
  }

  // Training: parameters enter as gradient leaves; dropout before the head.
  Tensor forward_train(Tape& t, const Tensor& matrix, std::size_t true_len,
                       std::mt19937_64& dropout_rng) {
    auto wrap = [&t](Parameter& p) { return t.param(p); };
    return forward_impl(t, matrix, true_len, wrap, &dropout_rng);
  }

 private:
  template <typename Wrap>
  Tensor forward_impl(Tape& t, const Tensor& matrix, std::size_t true_len, Wrap&& wrap,
                      std::mt19937_64* dropout_rng) {
    LstmGateWeights fw = fwd_.wrap(wrap);
    LstmGateWeights bw = bwd_.wrap(wrap);
    MergedStates merged = bilstm_forward(t, fw, bw, matrix, true_len);
    AttentionOutput attn = attention(t, merged);
    Tensor h = attn.context;
    if (dropout_rng && cfg_.dropout > 0.0) h = t.dropout(h, cfg_.dropout, *dropout_rng);
    return channel_head(t, wrap(head_w_), wrap(head_b_), h);
  }

  LstmChannelConfig cfg_;
  LstmDirectionParams fwd_, bwd_;
  Parameter head_w_, head_b_;
};

}  // namespace domid
