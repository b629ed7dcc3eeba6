#pragma once

// Supervised baselines over TF-IDF features: linear SVM (one-vs-rest hinge),
// multinomial logistic regression, a one-hidden-layer MLP trained on the
// autodiff substrate, and SMOTE oversampling for imbalanced classes.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "domid/optimizer.hpp"
#include "domid/tensor.hpp"
#include "domid/unicode.hpp"

namespace domid {

enum class TfidfMode { Word, WordNgram, CharNgram };

inline std::string to_string(TfidfMode m) {
  switch (m) {
    case TfidfMode::Word: return "word";
    case TfidfMode::WordNgram: return "word-ngram";
    case TfidfMode::CharNgram: return "char-ngram";
  }
  return "?";
}

inline TfidfMode tfidf_mode_from_string(const std::string& s) {
  if (s == "word") return TfidfMode::Word;
  if (s == "word-ngram") return TfidfMode::WordNgram;
  if (s == "char-ngram") return TfidfMode::CharNgram;
  throw std::invalid_argument("unknown tfidf mode '" + s + "' (want word|word-ngram|char-ngram)");
}

struct TfidfConfig {
  TfidfMode mode = TfidfMode::Word;
  std::size_t ngram_min = 1;  // word-ngram default (1,2); char-ngram default (2,5)
  std::size_t ngram_max = 2;
  std::size_t min_df = 1;          // document-frequency floor
  double max_df_ratio = 1.0;       // cap as a fraction of the corpus
};

// Sorted (column, value) pairs.
using SparseVec = std::vector<std::pair<std::size_t, double>>;

inline std::vector<double> densify(const SparseVec& v, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  for (const auto& [i, x] : v) out[i] = x;
  return out;
}

class TfidfVectorizer {
 public:
  TfidfVectorizer() = default;
  explicit TfidfVectorizer(TfidfConfig cfg) : cfg_(cfg) {
    if (cfg.ngram_min < 1 || cfg.ngram_min > cfg.ngram_max)
      throw std::invalid_argument("TfidfVectorizer: need 1 <= ngram_min <= ngram_max");
  }

  const TfidfConfig& config() const { return cfg_; }
  bool fitted() const { return fitted_; }
  std::size_t vocabulary_size() const { return idf_.size(); }

  // Terms a document contributes under the configured mode.
  static std::vector<std::string> extract_terms(const std::vector<std::string>& tokens,
                                                const TfidfConfig& cfg) {
    switch (cfg.mode) {
      case TfidfMode::Word:
        return tokens;
      case TfidfMode::WordNgram: {
        std::vector<std::string> terms;
        for (std::size_t n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
          if (n > tokens.size()) break;
          for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string t = tokens[i];
            for (std::size_t j = 1; j < n; ++j) t += " " + tokens[i + j];
            terms.push_back(std::move(t));
          }
        }
        return terms;
      }
      case TfidfMode::CharNgram: {
        const std::u32string text = uni::decode_utf8(uni::join_tokens(tokens));
        std::vector<std::string> terms;
        for (std::size_t n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
          if (n > text.size()) break;
          for (std::size_t i = 0; i + n <= text.size(); ++i)
            terms.push_back(uni::encode_utf8(std::u32string_view(text).substr(i, n)));
        }
        return terms;
      }
    }
    return {};
  }

  void fit(const std::vector<std::vector<std::string>>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("TfidfVectorizer::fit: empty corpus");
    std::map<std::string, std::size_t> df;  // ordered: deterministic vocabulary
    for (const auto& tokens : corpus) {
      auto terms = extract_terms(tokens, cfg_);
      std::sort(terms.begin(), terms.end());
      terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
      for (const auto& t : terms) ++df[t];
    }
    const double n_docs = static_cast<double>(corpus.size());
    const double df_cap = cfg_.max_df_ratio * n_docs;
    vocab_.clear();
    idf_.clear();
    for (const auto& [term, count] : df) {
      if (count < cfg_.min_df || static_cast<double>(count) > df_cap) continue;
      vocab_.emplace(term, idf_.size());
      idf_.push_back(std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
    }
    fitted_ = true;
  }

  std::optional<double> idf_of(const std::string& term) const {
    auto it = vocab_.find(term);
    if (it == vocab_.end()) return std::nullopt;
    return idf_[it->second];
  }

  // tf * idf, L2-normalized; unseen terms ignored.
  SparseVec transform(const std::vector<std::string>& tokens) const {
    if (!fitted_) throw std::logic_error("TfidfVectorizer::transform: fit() has not run");
    std::map<std::size_t, double> tf;
    for (const auto& t : extract_terms(tokens, cfg_)) {
      auto it = vocab_.find(t);
      if (it != vocab_.end()) tf[it->second] += 1.0;
    }
    SparseVec out;
    out.reserve(tf.size());
    double norm_sq = 0.0;
    for (const auto& [col, count] : tf) {
      const double v = count * idf_[col];
      norm_sq += v * v;
      out.emplace_back(col, v);
    }
    if (norm_sq > 0.0) {
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (auto& [col, v] : out) v *= inv;
    }
    return out;
  }

 private:
  TfidfConfig cfg_;
  bool fitted_ = false;
  std::map<std::string, std::size_t> vocab_;
  std::vector<double> idf_;
};

// ---- linear classifiers ----

enum class LinearLoss { Hinge, Logistic };

struct LinearTrainConfig {
  LinearLoss loss = LinearLoss::Logistic;
  std::size_t epochs = 10;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::uint64_t seed = 42;
};

class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(std::size_t num_classes, std::size_t dim)
      : C_(num_classes), V_(dim), W_(num_classes * dim, 0.0), b_(num_classes, 0.0) {}

  std::size_t num_classes() const { return C_; }
  double weight_norm() const {
    double s = 0.0;
    for (double w : W_) s += w * w;
    return std::sqrt(s);
  }

  void train(const std::vector<SparseVec>& xs, const std::vector<std::size_t>& ys,
             const LinearTrainConfig& cfg) {
    if (xs.empty()) throw std::invalid_argument("LinearModel::train: empty training set");
    if (xs.size() != ys.size())
      throw std::invalid_argument("LinearModel::train: feature/label count mismatch");
    if (!(cfg.learning_rate > 0.0))
      throw std::invalid_argument("LinearModel::train: learning rate must be positive");
    loss_ = cfg.loss;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t idx : order) {
        const SparseVec& x = xs[idx];
        const std::size_t y = ys[idx];
        if (y >= C_)
          throw std::invalid_argument("LinearModel::train: label " + std::to_string(y) +
                                      " out of range");
        // weight decay, then the loss gradient
        if (cfg.l2 > 0.0) {
          const double decay = 1.0 - cfg.learning_rate * cfg.l2;
          for (double& w : W_) w *= decay;
        }
        if (cfg.loss == LinearLoss::Logistic) {
          std::vector<double> p = probabilities(x);
          for (std::size_t c = 0; c < C_; ++c) {
            const double g = p[c] - (c == y ? 1.0 : 0.0);
            if (g == 0.0) continue;
            for (const auto& [col, v] : x) W_[c * V_ + col] -= cfg.learning_rate * g * v;
            b_[c] -= cfg.learning_rate * g;
          }
        } else {
          for (std::size_t c = 0; c < C_; ++c) {
            const double target = (c == y) ? 1.0 : -1.0;
            if (target * margin(x, c) < 1.0) {
              for (const auto& [col, v] : x) W_[c * V_ + col] += cfg.learning_rate * target * v;
              b_[c] += cfg.learning_rate * target;
            }
          }
        }
      }
    }
  }

  double margin(const SparseVec& x, std::size_t c) const {
    double m = b_[c];
    for (const auto& [col, v] : x) m += W_[c * V_ + col] * v;
    return m;
  }

  // Softmax over margins; the calibrated route for the logistic loss.
  std::vector<double> probabilities(const SparseVec& x) const {
    std::vector<double> m(C_);
    for (std::size_t c = 0; c < C_; ++c) m[c] = margin(x, c);
    const double mx = *std::max_element(m.begin(), m.end());
    double denom = 0.0;
    for (double& v : m) denom += (v = std::exp(v - mx));
    for (double& v : m) v /= denom;
    return m;
  }

  std::size_t predict(const SparseVec& x) const {
    std::vector<double> m(C_);
    for (std::size_t c = 0; c < C_; ++c) m[c] = margin(x, c);
    return static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  }

  LinearLoss loss_kind() const { return loss_; }

 private:
  std::size_t C_ = 0, V_ = 0;
  std::vector<double> W_;
  std::vector<double> b_;
  LinearLoss loss_ = LinearLoss::Logistic;
};

// ---- MLP ----

struct MlpConfig {
  std::size_t hidden = 16;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  std::uint64_t seed = 42;
};

// One ReLU hidden layer + softmax head, trained with the tape engine, so the
// gradient-correctness property of the substrate carries over.
class MlpModel {
 public:
  MlpModel() = default;
  MlpModel(std::size_t num_classes, std::size_t dim, const MlpConfig& cfg)
      : C_(num_classes),
        V_(dim),
        cfg_(cfg),
        w1_("mlp/W1", {cfg.hidden, dim}),
        b1_("mlp/b1", {cfg.hidden}),
        w2_("mlp/W2", {num_classes, cfg.hidden}),
        b2_("mlp/b2", {num_classes}) {
    if (cfg.hidden < 1) throw std::invalid_argument("MlpModel: hidden size must be >= 1");
    std::mt19937_64 rng(cfg.seed);
    w1_.fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(dim)));
    w2_.fill_uniform(rng, 1.0 / std::sqrt(static_cast<double>(cfg.hidden)));
  }

  void train(const std::vector<SparseVec>& xs, const std::vector<std::size_t>& ys) {
    if (xs.empty()) throw std::invalid_argument("MlpModel::train: empty training set");
    std::mt19937_64 rng(cfg_.seed + 1);
    std::vector<Parameter*> params{&w1_, &b1_, &w2_, &b2_};
    Optimizer opt = Optimizer::adam(cfg_.learning_rate);
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        for (Parameter* p : params) p->zero_grad();
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t i = start; i < end; ++i) {
          Tape t;
          Tensor probs = forward(t, xs[order[i]], true);
          t.backward(t.scale(t.cross_entropy(probs, ys[order[i]]), inv));
        }
        opt.step(params);
      }
    }
  }

  std::vector<double> probabilities(const SparseVec& x) const {
    Tape t;
    return const_cast<MlpModel*>(this)->forward(t, x, false).values();
  }

  std::size_t predict(const SparseVec& x) const {
    const auto p = probabilities(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

 private:
  Tensor forward(Tape& t, const SparseVec& x, bool training) {
    auto wrap = [&t, training](Parameter& p) {
      return training ? t.param(p) : t.input(p.shape, p.value, false);
    };
    Tensor in = t.input({V_}, densify(x, V_), false);
    Tensor hidden = t.relu(t.add(t.matmul(wrap(w1_), in), wrap(b1_)));
    return t.softmax(t.add(t.matmul(wrap(w2_), hidden), wrap(b2_)));
  }

  std::size_t C_ = 0, V_ = 0;
  MlpConfig cfg_;
  Parameter w1_, b1_, w2_, b2_;
};

// ---- SMOTE ----

// Synthetic minority points x_i + lambda * (x_nn - x_i) with lambda ~ U[0,1]
// and x_nn one of x_i's k nearest minority neighbors (Euclidean). The lambda
// override pins the interpolation factor, mainly for testing the endpoints.
inline std::vector<std::vector<double>> smote_oversample(
    const std::vector<std::vector<double>>& minority, std::size_t target_count, std::size_t k,
    std::uint64_t seed, std::optional<double> lambda_override = std::nullopt) {
  if (minority.size() < 2)
    throw std::invalid_argument("smote_oversample: need at least 2 minority samples");
  if (k < 1) throw std::invalid_argument("smote_oversample: k must be >= 1");
  const std::size_t m = minority.size();
  const std::size_t dim = minority.front().size();
  for (const auto& v : minority)
    if (v.size() != dim) throw std::invalid_argument("smote_oversample: ragged vectors");

  const std::size_t kk = std::min(k, m - 1);
  // k nearest neighbors per point, self excluded, ties by index
  std::vector<std::vector<std::size_t>> nn(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t f = 0; f < dim; ++f) {
        const double diff = minority[i][f] - minority[j][f];
        d2 += diff * diff;
      }
      dist.emplace_back(d2, j);
    }
    std::sort(dist.begin(), dist.end());
    for (std::size_t j = 0; j < kk; ++j) nn[i].push_back(dist[j].second);
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, kk - 1);
  std::vector<std::vector<double>> synthetic;
  synthetic.reserve(target_count);
  for (std::size_t j = 0; j < target_count; ++j) {
    const std::size_t i = j % m;
    const std::size_t neighbor = nn[i][pick(rng)];
    const double lambda = lambda_override ? *lambda_override : unif(rng);
    std::vector<double> x(dim);
    for (std::size_t f = 0; f < dim; ++f)
      x[f] = minority[i][f] + lambda * (minority[neighbor][f] - minority[i][f]);
    synthetic.push_back(std::move(x));
  }
  return synthetic;
}

}  // namespace domid
