#pragma once

// Reverse-mode autodiff substrate. A Tape records every operation in
// topological order; backward() replays the tape in exact reverse order.
// Tensors are immutable handles onto tape nodes; values are always double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace domid {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// Persistent trainable array. Lives outside any tape; gradients accumulate
// here across backward passes until zero_grad().
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string name_, Shape shape_, double fill = 0.0)
      : name(std::move(name_)),
        shape(std::move(shape_)),
        value(shape_size(shape), fill),
        grad(shape_size(shape), 0.0) {}

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

  void fill_uniform(std::mt19937_64& rng, double limit) {
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : value) v = dist(rng);
  }
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;            // allocated iff requires_grad
  std::function<void()> backprop;      // empty for leaves
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }
  const std::vector<double>& values() const { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }

  // Populated by Tape::backward(); zero before that.
  const std::vector<double>& grad() const {
    if (!node_->requires_grad)
      throw std::logic_error("Tensor::grad: tensor does not require gradients");
    return node_->grad;
  }

  double scalar() const {
    if (node_->values.size() != 1)
      throw std::logic_error("Tensor::scalar: size is " +
                             std::to_string(node_->values.size()) + ", not 1");
    return node_->values[0];
  }

  double at(std::size_t i) const { return node_->values.at(i); }

 private:
  friend class Tape;
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}
  detail::NodePtr node_;
};

// Records a forward computation and differentiates it once.
// Confined to a single thread; build a fresh tape per training example.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t node_count() const { return nodes_.size(); }

  // ---- leaves ----

  Tensor input(Shape shape, std::vector<double> values, bool requires_grad = false) {
    if (shape_size(shape) != values.size())
      throw std::invalid_argument("Tape::input: shape " + shape_str(shape) +
                                  " does not match " + std::to_string(values.size()) +
                                  " values");
    return wrap(make_node(std::move(shape), std::move(values), requires_grad));
  }

  Tensor constant(Shape shape, std::vector<double> values) {
    return input(std::move(shape), std::move(values), false);
  }

  Tensor zeros(Shape shape) {
    std::vector<double> v(shape_size(shape), 0.0);
    return input(std::move(shape), std::move(v), false);
  }

  // Leaf bound to a Parameter: after backward(), the node's gradient is
  // added into p.grad.
  Tensor param(Parameter& p) {
    auto node = make_node(p.shape, p.value, true);
    param_leaves_.emplace_back(node.get(), &p);
    return wrap(std::move(node));
  }

  // ---- elementwise ----

  Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, Ew::Add); }
  Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, Ew::Sub); }
  Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise(a, b, Ew::Mul); }

  Tensor scale(const Tensor& x, double c) {
    auto out = make_node(x.shape(), {}, x.requires_grad());
    out->values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out->values[i] = c * x.at(i);
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o, c] {
        for (std::size_t i = 0; i < o->grad.size(); ++i)
          xn->grad[i] += c * o->grad[i];
      };
    }
    return wrap(std::move(out));
  }

  // ---- activations ----

  Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
  }

  Tensor sigmoid(const Tensor& x) {
    return unary(x, [](double v) { return stable_sigmoid(v); },
                 [](double, double y) { return y * (1.0 - y); });
  }

  Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
  }

  // ---- reductions / vector ops ----

  Tensor sum(const Tensor& x) {
    auto out = make_node({1}, {std::accumulate(x.values().begin(), x.values().end(), 0.0)},
                         x.requires_grad());
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o] {
        for (double& g : xn->grad) g += o->grad[0];
      };
    }
    return wrap(std::move(out));
  }

  Tensor dot(const Tensor& a, const Tensor& b) {
    require(a.rank() == 1 && b.rank() == 1 && a.size() == b.size(),
            "Tape::dot: need equal-length vectors, got " + shape_str(a.shape()) +
                " and " + shape_str(b.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.at(i) * b.at(i);
    auto out = make_node({1}, {acc}, a.requires_grad() || b.requires_grad());
    if (out->requires_grad) {
      auto an = a.node_, bn = b.node_;
      auto* o = out.get();
      out->backprop = [an, bn, o] {
        const double g = o->grad[0];
        if (an->requires_grad)
          for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g * bn->values[i];
        if (bn->requires_grad)
          for (std::size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] += g * an->values[i];
      };
    }
    return wrap(std::move(out));
  }

  // Flattens every argument and joins them into one vector.
  Tensor concat(std::span<const Tensor> parts) {
    require(!parts.empty(), "Tape::concat: no inputs");
    std::size_t total = 0;
    bool needs_grad = false;
    for (const Tensor& t : parts) {
      total += t.size();
      needs_grad = needs_grad || t.requires_grad();
    }
    auto out = make_node({total}, {}, needs_grad);
    out->values.reserve(total);
    for (const Tensor& t : parts)
      out->values.insert(out->values.end(), t.values().begin(), t.values().end());
    if (needs_grad) {
      std::vector<detail::NodePtr> srcs;
      srcs.reserve(parts.size());
      for (const Tensor& t : parts) srcs.push_back(t.node_);
      auto* o = out.get();
      out->backprop = [srcs = std::move(srcs), o] {
        std::size_t off = 0;
        for (const auto& s : srcs) {
          if (s->requires_grad)
            for (std::size_t i = 0; i < s->grad.size(); ++i) s->grad[i] += o->grad[off + i];
          off += s->values.size();
        }
      };
    }
    return wrap(std::move(out));
  }

  Tensor concat(std::initializer_list<Tensor> parts) {
    std::vector<Tensor> v(parts);
    return concat(std::span<const Tensor>(v));
  }

  // Column j of a row-major [r x c] matrix.
  Tensor column(const Tensor& m, std::size_t j) {
    require(m.rank() == 2, "Tape::column: need a rank-2 tensor, got " + shape_str(m.shape()));
    const std::size_t rows = m.shape()[0], cols = m.shape()[1];
    require(j < cols, "Tape::column: column " + std::to_string(j) + " out of range " +
                          std::to_string(cols));
    auto out = make_node({rows}, {}, m.requires_grad());
    out->values.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) out->values[i] = m.at(i * cols + j);
    if (out->requires_grad) {
      auto mn = m.node_;
      auto* o = out.get();
      out->backprop = [mn, o, cols, j] {
        for (std::size_t i = 0; i < o->grad.size(); ++i) mn->grad[i * cols + j] += o->grad[i];
      };
    }
    return wrap(std::move(out));
  }

  // out = sum_i weights[i] * vecs[i]
  Tensor weighted_sum(std::span<const Tensor> vecs, const Tensor& weights) {
    require(weights.rank() == 1 && weights.size() == vecs.size(),
            "Tape::weighted_sum: need one weight per vector");
    require(!vecs.empty(), "Tape::weighted_sum: no vectors");
    const std::size_t dim = vecs.front().size();
    bool needs_grad = weights.requires_grad();
    for (const Tensor& v : vecs) {
      require(v.rank() == 1 && v.size() == dim, "Tape::weighted_sum: ragged vectors");
      needs_grad = needs_grad || v.requires_grad();
    }
    auto out = make_node({dim}, std::vector<double>(dim, 0.0), needs_grad);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      const double w = weights.at(i);
      for (std::size_t jj = 0; jj < dim; ++jj) out->values[jj] += w * vecs[i].at(jj);
    }
    if (needs_grad) {
      std::vector<detail::NodePtr> vs;
      vs.reserve(vecs.size());
      for (const Tensor& v : vecs) vs.push_back(v.node_);
      auto wn = weights.node_;
      auto* o = out.get();
      out->backprop = [vs = std::move(vs), wn, o] {
        for (std::size_t i = 0; i < vs.size(); ++i) {
          const auto& vn = vs[i];
          if (wn->requires_grad) {
            double acc = 0.0;
            for (std::size_t jj = 0; jj < o->grad.size(); ++jj)
              acc += o->grad[jj] * vn->values[jj];
            wn->grad[i] += acc;
          }
          if (vn->requires_grad) {
            const double w = wn->values[i];
            for (std::size_t jj = 0; jj < o->grad.size(); ++jj)
              vn->grad[jj] += w * o->grad[jj];
          }
        }
      };
    }
    return wrap(std::move(out));
  }

  // ---- matmul ----

  // [m x k] * [k x n] -> [m x n]; a rank-1 right operand is treated as [k].
  Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2, "Tape::matmul: left operand must be rank 2, got " +
                               shape_str(a.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    if (b.rank() == 1) {
      require(b.size() == k, "Tape::matmul: inner dimensions differ: " +
                                 shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      return matvec(a, b, m, k);
    }
    require(b.rank() == 2 && b.shape()[0] == k,
            "Tape::matmul: inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                shape_str(b.shape()));
    const std::size_t n = b.shape()[1];
    auto out = make_node({m, n}, std::vector<double>(m * n, 0.0),
                         a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = a.at(i * k + p);
        for (std::size_t jj = 0; jj < n; ++jj)
          out->values[i * n + jj] += av * b.at(p * n + jj);
      }
    if (out->requires_grad) {
      auto an = a.node_, bn = b.node_;
      auto* o = out.get();
      out->backprop = [an, bn, o, m, k, n] {
        // dA = dC * B^T, dB = A^T * dC
        if (an->requires_grad)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t jj = 0; jj < n; ++jj)
                acc += o->grad[i * n + jj] * bn->values[p * n + jj];
              an->grad[i * k + p] += acc;
            }
        if (bn->requires_grad)
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t jj = 0; jj < n; ++jj) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i)
                acc += an->values[i * k + p] * o->grad[i * n + jj];
              bn->grad[p * n + jj] += acc;
            }
      };
    }
    return wrap(std::move(out));
  }

  // ---- probability ops ----

  // Overflow-guarded softmax over a vector.
  Tensor softmax(const Tensor& x) {
    require(x.rank() == 1 && x.size() >= 1, "Tape::softmax: need a nonempty vector");
    const double mx = *std::max_element(x.values().begin(), x.values().end());
    std::vector<double> ex(x.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex[i] = std::exp(x.at(i) - mx);
      denom += ex[i];
    }
    for (double& e : ex) e /= denom;
    auto out = make_node(x.shape(), std::move(ex), x.requires_grad());
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o] {
        double dotgy = 0.0;
        for (std::size_t i = 0; i < o->grad.size(); ++i) dotgy += o->grad[i] * o->values[i];
        for (std::size_t i = 0; i < xn->grad.size(); ++i)
          xn->grad[i] += o->values[i] * (o->grad[i] - dotgy);
      };
    }
    return wrap(std::move(out));
  }

  // -w[gold] * log(pred[gold] + eps). pred must already be a probability
  // vector (sum within 1e-6 of 1).
  Tensor cross_entropy(const Tensor& pred, std::size_t gold,
                       const std::vector<double>* class_weights = nullptr) {
    require(pred.rank() == 1 && pred.size() >= 1, "Tape::cross_entropy: need a vector");
    require(gold < pred.size(), "Tape::cross_entropy: gold index " + std::to_string(gold) +
                                    " out of range " + std::to_string(pred.size()));
    const double total = std::accumulate(pred.values().begin(), pred.values().end(), 0.0);
    require(std::abs(total - 1.0) <= 1e-6,
            "Tape::cross_entropy: input does not sum to 1 (sum=" + std::to_string(total) + ")");
    if (class_weights)
      require(class_weights->size() == pred.size(),
              "Tape::cross_entropy: class weight count mismatch");
    const double w = class_weights ? (*class_weights)[gold] : 1.0;
    const double p = pred.at(gold) + kLogEps;
    auto out = make_node({1}, {-w * std::log(p)}, pred.requires_grad());
    if (out->requires_grad) {
      auto pn = pred.node_;
      auto* o = out.get();
      out->backprop = [pn, o, gold, w, p] { pn->grad[gold] += o->grad[0] * (-w / p); };
    }
    return wrap(std::move(out));
  }

  // x / sum(x); caller guarantees sum(x) > 0.
  Tensor renormalize(const Tensor& x) {
    require(x.rank() == 1 && x.size() >= 1, "Tape::renormalize: need a vector");
    const double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
    require(s > 0.0, "Tape::renormalize: nonpositive sum");
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x.at(i) / s;
    auto out = make_node(x.shape(), std::move(y), x.requires_grad());
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o, s] {
        double dotgy = 0.0;
        for (std::size_t i = 0; i < o->grad.size(); ++i) dotgy += o->grad[i] * o->values[i];
        for (std::size_t i = 0; i < xn->grad.size(); ++i)
          xn->grad[i] += (o->grad[i] - dotgy) / s;
      };
    }
    return wrap(std::move(out));
  }

  // ---- convolution / pooling ----

  // Valid 1-D convolution over the first true_len columns of a [d x S]
  // matrix. kernels is [F x (d*width)], one flattened d-by-width kernel per
  // row. Output is the pre-activation map [F x L]. When true_len < width the
  // single window over the zero-padded prefix is produced (degenerate rule).
  Tensor conv1d_valid(const Tensor& matrix, const Tensor& kernels, const Tensor& bias,
                      std::size_t width, std::size_t true_len) {
    require(matrix.rank() == 2, "Tape::conv1d_valid: matrix must be rank 2");
    require(kernels.rank() == 2, "Tape::conv1d_valid: kernels must be rank 2");
    const std::size_t d = matrix.shape()[0], S = matrix.shape()[1];
    const std::size_t F = kernels.shape()[0];
    require(width >= 1 && kernels.shape()[1] == d * width,
            "Tape::conv1d_valid: kernel row length " + std::to_string(kernels.shape()[1]) +
                " does not match d*width = " + std::to_string(d * width));
    require(bias.rank() == 1 && bias.size() == F, "Tape::conv1d_valid: bias length mismatch");
    require(true_len >= 1 && true_len <= S,
            "Tape::conv1d_valid: true length " + std::to_string(true_len) +
                " outside 1.." + std::to_string(S));
    const std::size_t L = true_len >= width ? true_len - width + 1 : 1;
    auto out = make_node({F, L}, std::vector<double>(F * L, 0.0),
                         matrix.requires_grad() || kernels.requires_grad() || bias.requires_grad());
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < L; ++t) {
        double acc = bias.at(f);
        for (std::size_t r = 0; r < d; ++r)
          for (std::size_t j = 0; j < width; ++j) {
            if (t + j >= true_len) continue;  // zero-padded region
            acc += kernels.at(f * d * width + r * width + j) * matrix.at(r * S + t + j);
          }
        out->values[f * L + t] = acc;
      }
    if (out->requires_grad) {
      auto mn = matrix.node_, kn = kernels.node_, bn = bias.node_;
      auto* o = out.get();
      out->backprop = [mn, kn, bn, o, d, S, F, L, width, true_len] {
        for (std::size_t f = 0; f < F; ++f)
          for (std::size_t t = 0; t < L; ++t) {
            const double g = o->grad[f * L + t];
            if (g == 0.0) continue;
            if (bn->requires_grad) bn->grad[f] += g;
            for (std::size_t r = 0; r < d; ++r)
              for (std::size_t j = 0; j < width; ++j) {
                if (t + j >= true_len) continue;
                if (kn->requires_grad)
                  kn->grad[f * d * width + r * width + j] += g * mn->values[r * S + t + j];
                if (mn->requires_grad)
                  mn->grad[r * S + t + j] += g * kn->values[f * d * width + r * width + j];
              }
          }
      };
    }
    return wrap(std::move(out));
  }

  // Order-preserving k-max over a vector: the k largest values emitted in
  // their original index order, ties to the lower index, zero-padded to k.
  Tensor kmax(const Tensor& row, std::size_t k) {
    require(row.rank() == 1 && row.size() >= 1, "Tape::kmax: need a nonempty vector");
    require(k >= 1, "Tape::kmax: k must be >= 1");
    auto idx = kmax_indices(row.values(), k);
    std::vector<double> vals(k, 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) vals[i] = row.at(idx[i]);
    auto out = make_node({k}, std::move(vals), row.requires_grad());
    if (out->requires_grad) {
      auto rn = row.node_;
      auto* o = out.get();
      out->backprop = [rn, o, idx = std::move(idx)] {
        for (std::size_t i = 0; i < idx.size(); ++i) rn->grad[idx[i]] += o->grad[i];
      };
    }
    return wrap(std::move(out));
  }

  // Row-wise k-max over a [F x L] map -> [F x k].
  Tensor kmax_rows(const Tensor& map, std::size_t k) {
    require(map.rank() == 2, "Tape::kmax_rows: need a rank-2 map");
    require(k >= 1, "Tape::kmax_rows: k must be >= 1");
    const std::size_t F = map.shape()[0], L = map.shape()[1];
    std::vector<std::vector<std::size_t>> sel(F);
    auto out = make_node({F, k}, std::vector<double>(F * k, 0.0), map.requires_grad());
    for (std::size_t f = 0; f < F; ++f) {
      std::span<const double> rowv(map.values().data() + f * L, L);
      sel[f] = kmax_indices(rowv, k);
      for (std::size_t i = 0; i < sel[f].size(); ++i)
        out->values[f * k + i] = rowv[sel[f][i]];
    }
    if (out->requires_grad) {
      auto mn = map.node_;
      auto* o = out.get();
      out->backprop = [mn, o, sel = std::move(sel), L, k] {
        for (std::size_t f = 0; f < sel.size(); ++f)
          for (std::size_t i = 0; i < sel[f].size(); ++i)
            mn->grad[f * L + sel[f][i]] += o->grad[f * k + i];
      };
    }
    return wrap(std::move(out));
  }

  // Inverted dropout; identity when rate == 0. Deterministic under the rng.
  Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
    require(rate >= 0.0 && rate < 1.0, "Tape::dropout: rate must be in [0, 1)");
    if (rate == 0.0) return x;
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> mask(x.size());
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask) m = dist(rng) < rate ? 0.0 : keep_scale;
    auto out = make_node(x.shape(), {}, x.requires_grad());
    out->values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out->values[i] = x.at(i) * mask[i];
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o, mask = std::move(mask)] {
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += o->grad[i] * mask[i];
      };
    }
    return wrap(std::move(out));
  }

  // ---- backward ----

  // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse recording order.
  // A second call without reset() is an error.
  void backward(const Tensor& loss) {
    if (backward_done_)
      throw std::logic_error("Tape::backward: already run; reset() the tape first");
    if (loss.size() != 1)
      throw std::invalid_argument("Tape::backward: loss must be scalar, got shape " +
                                  shape_str(loss.shape()));
    if (nodes_.empty()) throw std::logic_error("Tape::backward: empty tape");
    if (!loss.requires_grad())
      throw std::invalid_argument("Tape::backward: loss does not depend on any gradient leaf");
    backward_done_ = true;
    loss.node_->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      detail::Node& n = **it;
      if (n.requires_grad && n.backprop) n.backprop();
    }
    for (auto& [node, p] : param_leaves_)
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += node->grad[i];
  }

  void reset() {
    nodes_.clear();
    param_leaves_.clear();
    backward_done_ = false;
  }

  // Selection helper shared with tests: indices of the k largest values in
  // ascending index order (at most min(k, len) of them).
  static std::vector<std::size_t> kmax_indices(std::span<const double> row, std::size_t k) {
    std::vector<std::size_t> idx(row.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t take = std::min(k, row.size());
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(),
                      [&row](std::size_t a, std::size_t b) {
                        if (row[a] != row[b]) return row[a] > row[b];
                        return a < b;
                      });
    idx.resize(take);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

  static constexpr double kLogEps = 1e-12;

 private:
  enum class Ew { Add, Sub, Mul };

  static double stable_sigmoid(double v) {
    if (v >= 0.0) {
      const double e = std::exp(-v);
      return 1.0 / (1.0 + e);
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
  }

  static void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  detail::NodePtr make_node(Shape shape, std::vector<double> values, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(shape_size(n->shape), 0.0);
    nodes_.push_back(n);
    return n;
  }

  Tensor wrap(detail::NodePtr n) { return Tensor(std::move(n)); }

  Tensor binary_elementwise(const Tensor& a, const Tensor& b, Ew op) {
    require(a.shape() == b.shape(), "elementwise: shape mismatch: " + shape_str(a.shape()) +
                                        " vs " + shape_str(b.shape()));
    auto out = make_node(a.shape(), {}, a.requires_grad() || b.requires_grad());
    out->values.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      switch (op) {
        case Ew::Add: out->values[i] = a.at(i) + b.at(i); break;
        case Ew::Sub: out->values[i] = a.at(i) - b.at(i); break;
        case Ew::Mul: out->values[i] = a.at(i) * b.at(i); break;
      }
    }
    if (out->requires_grad) {
      auto an = a.node_, bn = b.node_;
      auto* o = out.get();
      out->backprop = [an, bn, o, op] {
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
          const double g = o->grad[i];
          switch (op) {
            case Ew::Add:
              if (an->requires_grad) an->grad[i] += g;
              if (bn->requires_grad) bn->grad[i] += g;
              break;
            case Ew::Sub:
              if (an->requires_grad) an->grad[i] += g;
              if (bn->requires_grad) bn->grad[i] -= g;
              break;
            case Ew::Mul:
              if (an->requires_grad) an->grad[i] += g * bn->values[i];
              if (bn->requires_grad) bn->grad[i] += g * an->values[i];
              break;
          }
        }
      };
    }
    return wrap(std::move(out));
  }

  template <typename Fwd, typename Bwd>
  Tensor unary(const Tensor& x, Fwd fwd, Bwd dydx) {
    auto out = make_node(x.shape(), {}, x.requires_grad());
    out->values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out->values[i] = fwd(x.at(i));
    if (out->requires_grad) {
      auto xn = x.node_;
      auto* o = out.get();
      out->backprop = [xn, o, dydx] {
        for (std::size_t i = 0; i < xn->grad.size(); ++i)
          xn->grad[i] += o->grad[i] * dydx(xn->values[i], o->values[i]);
      };
    }
    return wrap(std::move(out));
  }

  Tensor matvec(const Tensor& a, const Tensor& b, std::size_t m, std::size_t k) {
    auto out = make_node({m}, std::vector<double>(m, 0.0),
                         a.requires_grad() || b.requires_grad());
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a.at(i * k + p) * b.at(p);
      out->values[i] = acc;
    }
    if (out->requires_grad) {
      auto an = a.node_, bn = b.node_;
      auto* o = out.get();
      out->backprop = [an, bn, o, m, k] {
        for (std::size_t i = 0; i < m; ++i) {
          const double g = o->grad[i];
          if (g == 0.0) continue;
          if (an->requires_grad)
            for (std::size_t p = 0; p < k; ++p) an->grad[i * k + p] += g * bn->values[p];
          if (bn->requires_grad)
            for (std::size_t p = 0; p < k; ++p) bn->grad[p] += g * an->values[i * k + p];
        }
      };
    }
    return wrap(std::move(out));
  }

  std::vector<detail::NodePtr> nodes_;
  std::vector<std::pair<detail::Node*, Parameter*>> param_leaves_;
  bool backward_done_ = false;
};

}  // namespace domid
