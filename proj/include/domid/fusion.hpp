#pragma once

// The assembled multichannel model: both channels, probability fusion
// (element-wise product by default, plus the four comparison aggregators),
// training, prediction, and the binary model container.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "domid/cnn_channel.hpp"
#include "domid/detail/binio.hpp"
#include "domid/detail/sha256.hpp"
#include "domid/lstm_channel.hpp"
#include "domid/metrics.hpp"
#include "domid/optimizer.hpp"
#include "domid/tensor.hpp"

namespace domid {

enum class FusionRule : std::uint8_t {
  Product = 0,
  Average = 1,
  Maximum = 2,
  Minimum = 3,
  Addition = 4,
};

inline std::string to_string(FusionRule r) {
  switch (r) {
    case FusionRule::Product: return "product";
    case FusionRule::Average: return "average";
    case FusionRule::Maximum: return "maximum";
    case FusionRule::Minimum: return "minimum";
    case FusionRule::Addition: return "addition";
  }
  return "?";
}

inline FusionRule fusion_rule_from_string(const std::string& s) {
  if (s == "product") return FusionRule::Product;
  if (s == "average") return FusionRule::Average;
  if (s == "maximum") return FusionRule::Maximum;
  if (s == "minimum") return FusionRule::Minimum;
  if (s == "addition") return FusionRule::Addition;
  throw std::invalid_argument("unknown fusion rule '" + s +
                              "' (want product|average|maximum|minimum|addition)");
}

struct FusedResult {
  std::vector<double> probs;
  bool degenerate = false;  // all-zero combination replaced by uniform
};

// Combine two probability vectors under the rule, then renormalize. All
// combiners are nonnegative, so renormalization never moves the argmax.
inline FusedResult fuse(std::span<const double> p, std::span<const double> q, FusionRule rule) {
  if (p.size() != q.size())
    throw std::invalid_argument("fuse: length mismatch: " + std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()));
  auto check_sum = [](std::span<const double> v, const char* name) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-6)
      throw std::invalid_argument(std::string("fuse: ") + name + " does not sum to 1 (sum=" +
                                  std::to_string(s) + ")");
  };
  check_sum(p, "first input");
  check_sum(q, "second input");

  FusedResult out;
  out.probs.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    switch (rule) {
      case FusionRule::Product: out.probs[i] = p[i] * q[i]; break;
      case FusionRule::Average: out.probs[i] = 0.5 * (p[i] + q[i]); break;
      case FusionRule::Maximum: out.probs[i] = std::max(p[i], q[i]); break;
      case FusionRule::Minimum: out.probs[i] = std::min(p[i], q[i]); break;
      case FusionRule::Addition: out.probs[i] = p[i] + q[i]; break;
    }
  }
  const double s = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  if (s <= 0.0) {
    std::fill(out.probs.begin(), out.probs.end(), 1.0 / static_cast<double>(p.size()));
    out.degenerate = true;
    return out;
  }
  for (double& v : out.probs) v /= s;
  return out;
}

enum class ChannelKind : std::uint8_t { Lstm = 0, Cnn = 1, Multichannel = 2 };

inline std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::Lstm: return "lstm";
    case ChannelKind::Cnn: return "cnn";
    case ChannelKind::Multichannel: return "multichannel";
  }
  return "?";
}

inline ChannelKind channel_kind_from_string(const std::string& s) {
  if (s == "lstm") return ChannelKind::Lstm;
  if (s == "cnn") return ChannelKind::Cnn;
  if (s == "multichannel") return ChannelKind::Multichannel;
  throw std::invalid_argument("unknown channel '" + s + "' (want lstm|cnn|multichannel)");
}

using Fingerprint = std::array<std::uint8_t, 32>;

struct ModelConfig {
  std::vector<std::string> class_list;
  ChannelKind channel = ChannelKind::Multichannel;
  FusionRule fusion = FusionRule::Product;
  std::size_t embedding_dim = 0;
  std::size_t max_len = 128;
  std::size_t hidden_dim = 128;
  std::size_t filters = 8;
  std::vector<std::size_t> kernel_sizes = {2, 4, 6};
  std::size_t kmax = 3;
  double dropout = 0.3;
  Fingerprint fingerprint{};  // preprocessing + embedding configuration hash
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 5;  // 0 disables early stopping / best-epoch selection
  std::uint64_t seed = 42;
  bool class_weighting = false;
  bool joint = false;  // backprop through the fused product instead of per-channel losses
};

struct TrainExample {
  SentenceMatrix matrix;
  std::size_t label = 0;
};

struct EpochRecord {
  std::string channel;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_weighted_f1 = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::string to_key_values() const {
    std::ostringstream os;
    for (const auto& e : epochs)
      os << "channel=" << e.channel << " epoch=" << e.epoch << " train_loss=" << e.train_loss
         << " val_accuracy=" << e.val_accuracy << " val_weighted_f1=" << e.val_weighted_f1
         << '\n';
    return os.str();
  }
};

struct Prediction {
  std::size_t class_index = 0;
  std::string class_name;
  std::vector<double> p_final;
  std::vector<double> p_lstm;  // empty when the model has no such channel
  std::vector<double> p_cnn;
  bool degenerate_fusion = false;
};

struct FingerprintMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class MultichannelModel {
 public:
  static constexpr char kMagic[5] = {'D', 'O', 'M', 'I', 'D'};
  static constexpr std::uint16_t kFormatVersion = 1;

  MultichannelModel() = default;

  explicit MultichannelModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    validate_config(cfg_);
    const std::size_t C = cfg_.class_list.size();
    if (cfg_.channel != ChannelKind::Cnn)
      lstm_ = LstmAttentionChannel(
          {cfg_.embedding_dim, cfg_.hidden_dim, C, cfg_.dropout});
    if (cfg_.channel != ChannelKind::Lstm) {
      CnnChannelConfig cc;
      cc.input_dim = cfg_.embedding_dim;
      cc.filters = cfg_.filters;
      cc.kernel_sizes = cfg_.kernel_sizes;
      cc.kmax = cfg_.kmax;
      cc.num_classes = C;
      cc.dropout = cfg_.dropout;
      cnn_ = CnnChannel(cc);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& class_list() const { return cfg_.class_list; }
  bool has_lstm() const { return lstm_.has_value(); }
  bool has_cnn() const { return cnn_.has_value(); }

  void init_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    if (lstm_) lstm_->init_params(rng);
    if (cnn_) cnn_->init_params(rng);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> ps;
    if (lstm_) {
      auto l = lstm_->parameters();
      ps.insert(ps.end(), l.begin(), l.end());
    }
    if (cnn_) {
      auto c = cnn_->parameters();
      ps.insert(ps.end(), c.begin(), c.end());
    }
    return ps;
  }

  void require_fingerprint(const Fingerprint& fp) const {
    if (fp != cfg_.fingerprint)
      throw FingerprintMismatch(
          "preprocessing fingerprint mismatch: model was trained under a different "
          "preprocessing/embedding configuration");
  }

  // ---- prediction ----

  Prediction predict(const SentenceMatrix& m) const {
    if (m.true_len == 0)
      throw std::invalid_argument("predict: empty document after preprocessing");
    Prediction out;
    if (lstm_) {
      Tape t;
      out.p_lstm = lstm_->forward(t, m).values();
    }
    if (cnn_) {
      Tape t;
      out.p_cnn = cnn_->forward(t, m).values();
    }
    if (lstm_ && cnn_) {
      FusedResult fr = fuse(out.p_lstm, out.p_cnn, cfg_.fusion);
      out.p_final = std::move(fr.probs);
      out.degenerate_fusion = fr.degenerate;
    } else {
      out.p_final = lstm_ ? out.p_lstm : out.p_cnn;
    }
    out.class_index = static_cast<std::size_t>(
        std::max_element(out.p_final.begin(), out.p_final.end()) - out.p_final.begin());
    out.class_name = cfg_.class_list[out.class_index];
    return out;
  }

  // ---- training ----

  TrainHistory train(const std::vector<TrainExample>& train_set,
                     const std::vector<TrainExample>& val_set, const TrainConfig& tc) {
    if (tc.epochs == 0) return {};
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (val_set.empty() && tc.patience > 0)
      throw std::invalid_argument("train: validation set empty while early stopping enabled");
    for (const TrainExample& ex : train_set)
      if (ex.label >= cfg_.class_list.size())
        throw std::invalid_argument("train: label index " + std::to_string(ex.label) +
                                    " outside class list");

    const std::optional<std::vector<double>> weights =
        tc.class_weighting ? std::optional(class_weights(train_set)) : std::nullopt;

    TrainHistory history;
    if (tc.joint && lstm_ && cnn_) {
      train_loop(history, "joint", train_set, val_set, tc, weights, JointMode{});
    } else {
      if (lstm_) train_loop(history, "lstm", train_set, val_set, tc, weights, LstmMode{});
      if (cnn_) train_loop(history, "cnn", train_set, val_set, tc, weights, CnnMode{});
    }
    return history;
  }

  // ---- persistence ----
  //
  // Container layout (all integers little-endian):
  //   magic "DOMID" | u16 version
  //   u32 class count | per class: u32 byte length + UTF-8 name
  //   u8 fusion rule | 32-byte preprocessing fingerprint
  //   u32 parameter count | per parameter:
  //     u32 name length + UTF-8 name | u32 rank | rank x u64 extents |
  //     row-major IEEE-754 f64 values
  // Model dimensions travel as the reserved "meta/config" parameter.

  void save(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save: cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    detail::write_le<std::uint16_t>(os, kFormatVersion);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg_.class_list.size()));
    for (const std::string& c : cfg_.class_list) detail::write_string(os, c);
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(cfg_.fusion));
    detail::write_bytes(os, cfg_.fingerprint.data(), cfg_.fingerprint.size());

    Parameter meta = meta_param();
    std::vector<Parameter*> ps = parameters();
    ps.insert(ps.begin(), &meta);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ps.size()));
    for (const Parameter* p : ps) {
      detail::write_string(os, p->name);
      detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->shape.size()));
      for (std::size_t e : p->shape) detail::write_le<std::uint64_t>(os, e);
      for (double v : p->value) detail::write_f64_le(os, v);
    }
    if (!os) throw std::runtime_error("save: write failed for " + path);
  }

  static MultichannelModel load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load: cannot open " + path);
    char magic[sizeof(kMagic)];
    detail::read_bytes(is, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
      throw std::runtime_error("load: bad magic bytes, not a model container");
    const auto version = detail::read_le<std::uint16_t>(is, "version");
    if (version != kFormatVersion)
      throw std::runtime_error("load: unsupported format version " + std::to_string(version) +
                               ", this build reads version " + std::to_string(kFormatVersion));

    ModelConfig cfg;
    const auto n_classes = detail::read_le<std::uint32_t>(is, "class count");
    for (std::uint32_t i = 0; i < n_classes; ++i)
      cfg.class_list.push_back(detail::read_string(is, "class name"));
    const auto rule = detail::read_le<std::uint8_t>(is, "fusion rule");
    if (rule > static_cast<std::uint8_t>(FusionRule::Addition))
      throw std::runtime_error("load: unknown fusion rule id " + std::to_string(rule));
    cfg.fusion = static_cast<FusionRule>(rule);
    detail::read_bytes(is, cfg.fingerprint.data(), cfg.fingerprint.size(), "fingerprint");

    const auto n_params = detail::read_le<std::uint32_t>(is, "parameter count");
    std::map<std::string, Parameter> loaded;
    for (std::uint32_t i = 0; i < n_params; ++i) {
      Parameter p;
      p.name = detail::read_string(is, "parameter name");
      const auto rank = detail::read_le<std::uint32_t>(is, "parameter rank");
      if (rank > 8) throw std::runtime_error("load: implausible rank for " + p.name);
      for (std::uint32_t r = 0; r < rank; ++r)
        p.shape.push_back(static_cast<std::size_t>(
            detail::read_le<std::uint64_t>(is, "parameter extent")));
      const std::size_t n = shape_size(p.shape);
      p.value.resize(n);
      for (std::size_t j = 0; j < n; ++j) p.value[j] = detail::read_f64_le(is, p.name.c_str());
      p.grad.assign(n, 0.0);
      loaded.emplace(p.name, std::move(p));
    }

    auto meta_it = loaded.find(kMetaName);
    if (meta_it == loaded.end())
      throw std::runtime_error("load: missing " + std::string(kMetaName) + " entry");
    apply_meta(cfg, meta_it->second.value);

    MultichannelModel model(cfg);
    for (Parameter* p : model.parameters()) {
      auto it = loaded.find(p->name);
      if (it == loaded.end()) throw std::runtime_error("load: missing parameter " + p->name);
      if (it->second.shape != p->shape)
        throw std::runtime_error("load: shape mismatch for " + p->name + ": file has " +
                                 shape_str(it->second.shape) + ", model expects " +
                                 shape_str(p->shape));
      p->value = std::move(it->second.value);
    }
    return model;
  }

 private:
  static constexpr const char* kMetaName = "meta/config";

  struct LstmMode {};
  struct CnnMode {};
  struct JointMode {};

  static void validate_config(const ModelConfig& cfg) {
    if (cfg.class_list.size() < 2)
      throw std::invalid_argument("MultichannelModel: need at least 2 classes");
    std::set<std::string> uniq(cfg.class_list.begin(), cfg.class_list.end());
    if (uniq.size() != cfg.class_list.size())
      throw std::invalid_argument("MultichannelModel: duplicate class names");
    if (cfg.embedding_dim == 0 || cfg.max_len == 0)
      throw std::invalid_argument("MultichannelModel: embedding_dim and max_len must be positive");
  }

  std::vector<double> class_weights(const std::vector<TrainExample>& train_set) const {
    const std::size_t C = cfg_.class_list.size();
    std::vector<double> counts(C, 0.0);
    for (const TrainExample& ex : train_set) counts[ex.label] += 1.0;
    std::vector<double> w(C, 0.0);
    const double n = static_cast<double>(train_set.size());
    for (std::size_t c = 0; c < C; ++c)
      w[c] = counts[c] > 0.0 ? n / (static_cast<double>(C) * counts[c]) : 0.0;
    return w;
  }

  template <typename Mode>
  Tensor mode_forward(Mode, Tape& t, const Tensor& X, std::size_t true_len,
                      std::mt19937_64& drop_rng) {
    if constexpr (std::is_same_v<Mode, LstmMode>) {
      return lstm_->forward_train(t, X, true_len, drop_rng);
    } else if constexpr (std::is_same_v<Mode, CnnMode>) {
      return cnn_->forward_train(t, X, true_len, drop_rng);
    } else {
      Tensor pl = lstm_->forward_train(t, X, true_len, drop_rng);
      Tensor pc = cnn_->forward_train(t, X, true_len, drop_rng);
      return t.renormalize(t.mul(pl, pc));
    }
  }

  template <typename Mode>
  std::vector<Parameter*> mode_params(Mode) {
    if constexpr (std::is_same_v<Mode, LstmMode>) return lstm_->parameters();
    else if constexpr (std::is_same_v<Mode, CnnMode>) return cnn_->parameters();
    else return parameters();
  }

  template <typename Mode>
  std::vector<double> mode_probs(Mode, const SentenceMatrix& m) const {
    if constexpr (std::is_same_v<Mode, LstmMode>) {
      Tape t;
      return lstm_->forward(t, m).values();
    } else if constexpr (std::is_same_v<Mode, CnnMode>) {
      Tape t;
      return cnn_->forward(t, m).values();
    } else {
      return predict(m).p_final;
    }
  }

  template <typename Mode>
  void train_loop(TrainHistory& history, const std::string& tag,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set, const TrainConfig& tc,
                  const std::optional<std::vector<double>>& weights, Mode mode) {
    std::vector<Parameter*> params = mode_params(mode);
    // distinct, deterministic streams per channel
    std::seed_seq seq{tc.seed, static_cast<std::uint64_t>(std::hash<std::string>{}(tag))};
    std::mt19937_64 shuffle_rng(0), dropout_rng(0);
    {
      std::vector<std::uint64_t> seeds(2);
      seq.generate(seeds.begin(), seeds.end());
      shuffle_rng.seed(seeds[0]);
      dropout_rng.seed(seeds[1]);
    }
    Optimizer opt = Optimizer::adam(tc.learning_rate);

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_f1 = -1.0;
    std::vector<std::vector<double>> best_values;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      double epoch_loss = 0.0;
      for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
        const std::size_t end = std::min(order.size(), start + tc.batch_size);
        const double inv_batch = 1.0 / static_cast<double>(end - start);
        for (Parameter* p : params) p->zero_grad();
        for (std::size_t i = start; i < end; ++i) {
          const TrainExample& ex = train_set[order[i]];
          Tape t;
          Tensor X = t.input({ex.matrix.dim, ex.matrix.max_len}, ex.matrix.values, false);
          Tensor probs = mode_forward(mode, t, X, ex.matrix.true_len, dropout_rng);
          Tensor loss = t.cross_entropy(probs, ex.label, weights ? &*weights : nullptr);
          epoch_loss += loss.scalar();
          t.backward(t.scale(loss, inv_batch));
        }
        opt.step(params);
      }

      EpochRecord rec;
      rec.channel = tag;
      rec.epoch = epoch;
      rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
      if (!val_set.empty()) {
        std::vector<std::size_t> gold, pred;
        gold.reserve(val_set.size());
        pred.reserve(val_set.size());
        for (const TrainExample& ex : val_set) {
          const std::vector<double> probs = mode_probs(mode, ex.matrix);
          gold.push_back(ex.label);
          pred.push_back(static_cast<std::size_t>(
              std::max_element(probs.begin(), probs.end()) - probs.begin()));
        }
        EvalReport rep = evaluate(gold, pred, cfg_.class_list);
        rec.val_accuracy = rep.accuracy;
        rec.val_weighted_f1 = rep.weighted_f1;
        if (tc.patience > 0) {
          if (rep.weighted_f1 > best_f1) {
            best_f1 = rep.weighted_f1;
            best_values.clear();
            for (Parameter* p : params) best_values.push_back(p->value);
            since_best = 0;
          } else if (++since_best >= tc.patience) {
            history.epochs.push_back(rec);
            break;
          }
        }
      }
      history.epochs.push_back(rec);
    }

    if (tc.patience > 0 && !best_values.empty())
      for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  }

  Parameter meta_param() const {
    std::vector<double> v{
        static_cast<double>(static_cast<std::uint8_t>(cfg_.channel)),
        static_cast<double>(cfg_.embedding_dim),
        static_cast<double>(cfg_.max_len),
        static_cast<double>(cfg_.hidden_dim),
        static_cast<double>(cfg_.filters),
        static_cast<double>(cfg_.kmax),
        cfg_.dropout,
        static_cast<double>(cfg_.kernel_sizes.size()),
    };
    for (std::size_t s : cfg_.kernel_sizes) v.push_back(static_cast<double>(s));
    Parameter p(kMetaName, {v.size()});
    p.value = std::move(v);
    return p;
  }

  static void apply_meta(ModelConfig& cfg, const std::vector<double>& v) {
    if (v.size() < 8) throw std::runtime_error("load: malformed meta/config entry");
    const auto kind = static_cast<std::uint8_t>(v[0]);
    if (kind > static_cast<std::uint8_t>(ChannelKind::Multichannel))
      throw std::runtime_error("load: unknown channel kind in meta/config");
    cfg.channel = static_cast<ChannelKind>(kind);
    cfg.embedding_dim = static_cast<std::size_t>(v[1]);
    cfg.max_len = static_cast<std::size_t>(v[2]);
    cfg.hidden_dim = static_cast<std::size_t>(v[3]);
    cfg.filters = static_cast<std::size_t>(v[4]);
    cfg.kmax = static_cast<std::size_t>(v[5]);
    cfg.dropout = v[6];
    const auto n_sizes = static_cast<std::size_t>(v[7]);
    if (v.size() != 8 + n_sizes) throw std::runtime_error("load: malformed meta/config entry");
    cfg.kernel_sizes.clear();
    for (std::size_t i = 0; i < n_sizes; ++i)
      cfg.kernel_sizes.push_back(static_cast<std::size_t>(v[8 + i]));
  }

  ModelConfig cfg_;
  std::optional<LstmAttentionChannel> lstm_;
  std::optional<CnnChannel> cnn_;
};

}  // namespace domid
