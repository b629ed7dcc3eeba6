#pragma once

// Second channel: parallel 1-D convolutions (kernel widths 2, 4, 6 by
// default) over the sentence embedding matrix, ReLU, order-preserving k-max
// pooling per feature map, concatenation, dense head, softmax.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "domid/embedding.hpp"
#include "domid/tensor.hpp"

namespace domid {

struct CnnChannelConfig {
  std::size_t input_dim = 0;
  std::size_t filters = 8;                    // per kernel size
  std::vector<std::size_t> kernel_sizes = {2, 4, 6};
  std::size_t kmax = 3;
  std::size_t num_classes = 0;
  double dropout = 0.3;
};

class CnnChannel {
 public:
  CnnChannel() = default;
  explicit CnnChannel(CnnChannelConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.num_classes < 2) throw std::invalid_argument("CnnChannel: need at least 2 classes");
    if (cfg_.kernel_sizes.empty() || cfg_.filters == 0 || cfg_.kmax == 0)
      throw std::invalid_argument("CnnChannel: kernel sizes, filters, k must be positive");
    for (std::size_t s : cfg_.kernel_sizes) {
      const std::string tag = "cnn/conv" + std::to_string(s);
      kernels_.emplace_back(tag + "/K", Shape{cfg_.filters, cfg_.input_dim * s});
      biases_.emplace_back(tag + "/b", Shape{cfg_.filters});
    }
    head_w_ = Parameter("cnn/head/W", {cfg_.num_classes, feature_dim()});
    head_b_ = Parameter("cnn/head/b", {cfg_.num_classes});
  }

  const CnnChannelConfig& config() const { return cfg_; }

  // 3*F*k with the default bank
  std::size_t feature_dim() const { return cfg_.kernel_sizes.size() * cfg_.filters * cfg_.kmax; }

  void init_params(std::mt19937_64& rng) {
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
      const double limit =
          1.0 / std::sqrt(static_cast<double>(cfg_.input_dim * cfg_.kernel_sizes[i]));
      kernels_[i].fill_uniform(rng, limit);
    }
    head_w_.fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(feature_dim())));
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    for (std::size_t i = 0; i < kernels_.size(); ++i) {
      ps.push_back(&kernels_[i]);
      ps.push_back(&biases_[i]);
    }
    ps.push_back(&head_w_);
    ps.push_back(&head_b_);
    return ps;
  }

  // Inference path; degenerate_windows counts banks whose kernel did not fit
  // inside the true length (the single-window rule applied).
  Tensor forward(Tape& t, const Tensor& matrix, std::size_t true_len,
                 std::size_t* degenerate_windows = nullptr) const {
    auto* self = const_cast<CnnChannel*>(this);
    auto wrap = [&t](Parameter& p) { return t.input(p.shape, p.value, false); };
    return self->forward_impl(t, matrix, true_len, wrap, nullptr, degenerate_windows);
  }

  Tensor forward(Tape& t, const SentenceMatrix& m, std::size_t* degenerate_windows = nullptr) const {
    return forward(t, t.input({m.dim, m.max_len}, m.values, false), m.true_len,
                   degenerate_windows);
  }

  Tensor forward_train(Tape& t, const Tensor& matrix, std::size_t true_len,
                       std::mt19937_64& dropout_rng, std::size_t* degenerate_windows = nullptr) {
    auto wrap = [&t](Parameter& p) { return t.param(p); };
    return forward_impl(t, matrix, true_len, wrap, &dropout_rng, degenerate_windows);
  }

 private:
  template <typename Wrap>
  Tensor forward_impl(Tape& t, const Tensor& matrix, std::size_t true_len, Wrap&& wrap,
                      std::mt19937_64* dropout_rng, std::size_t* degenerate_windows) {
    if (true_len == 0) throw std::invalid_argument("CnnChannel: empty sequence");
    std::vector<Tensor> pooled;
    pooled.reserve(cfg_.kernel_sizes.size());
    for (std::size_t i = 0; i < cfg_.kernel_sizes.size(); ++i) {
      const std::size_t width = cfg_.kernel_sizes[i];
      if (width > true_len && degenerate_windows) ++*degenerate_windows;
      Tensor map = t.relu(
          t.conv1d_valid(matrix, wrap(kernels_[i]), wrap(biases_[i]), width, true_len));
      pooled.push_back(t.kmax_rows(map, cfg_.kmax));
    }
    Tensor features = t.concat(std::span<const Tensor>(pooled));
    if (dropout_rng && cfg_.dropout > 0.0)
      features = t.dropout(features, cfg_.dropout, *dropout_rng);
    return t.softmax(t.add(t.matmul(wrap(head_w_), features), wrap(head_b_)));
  }

  CnnChannelConfig cfg_;
  std::vector<Parameter> kernels_;  // one [F x d*s] bank per kernel size
  std::vector<Parameter> biases_;
  Parameter head_w_, head_b_;
};

}  // namespace domid
