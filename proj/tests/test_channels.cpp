#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "domid/cnn_channel.hpp"
#include "domid/lstm_channel.hpp"
#include "testutil.hpp"

using namespace domid;

namespace {

struct DirValues {
  std::size_t d_h, d;
  std::vector<double> W_i, W_f, W_o, W_g, U_i, U_f, U_o, U_g, b_i, b_f, b_o, b_g;
};

DirValues random_dir(std::mt19937_64& rng, std::size_t d_h, std::size_t d) {
  auto rv = [&rng](std::size_t n) { return testutil::random_vector(rng, n); };
  return {d_h, d,     rv(d_h * d),   rv(d_h * d),   rv(d_h * d), rv(d_h * d),
          rv(d_h * d_h), rv(d_h * d_h), rv(d_h * d_h), rv(d_h * d_h),
          rv(d_h),       rv(d_h),       rv(d_h),       rv(d_h)};
}

LstmGateWeights to_tape(Tape& t, const DirValues& v) {
  auto m = [&](const std::vector<double>& x) { return t.input({v.d_h, v.d}, x); };
  auto u = [&](const std::vector<double>& x) { return t.input({v.d_h, v.d_h}, x); };
  auto b = [&](const std::vector<double>& x) { return t.input({v.d_h}, x); };
  return {m(v.W_i), m(v.W_f), m(v.W_o), m(v.W_g), u(v.U_i), u(v.U_f),
          u(v.U_o), u(v.U_g), b(v.b_i), b(v.b_f), b(v.b_o), b(v.b_g)};
}

// Independent scalar-loop reimplementation of the five cell equations.
void oracle_lstm_step(const DirValues& v, const std::vector<double>& x,
                      const std::vector<double>& h_prev, const std::vector<double>& c_prev,
                      std::vector<double>& h_out, std::vector<double>& c_out) {
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  h_out.resize(v.d_h);
  c_out.resize(v.d_h);
  for (std::size_t r = 0; r < v.d_h; ++r) {
    auto pre = [&](const std::vector<double>& W, const std::vector<double>& U,
                   const std::vector<double>& b) {
      double acc = b[r];
      for (std::size_t j = 0; j < v.d; ++j) acc += W[r * v.d + j] * x[j];
      for (std::size_t j = 0; j < v.d_h; ++j) acc += U[r * v.d_h + j] * h_prev[j];
      return acc;
    };
    const double i = sig(pre(v.W_i, v.U_i, v.b_i));
    const double f = sig(pre(v.W_f, v.U_f, v.b_f));
    const double o = sig(pre(v.W_o, v.U_o, v.b_o));
    const double g = std::tanh(pre(v.W_g, v.U_g, v.b_g));
    c_out[r] = f * c_prev[r] + i * g;
    h_out[r] = o * std::tanh(c_out[r]);
  }
}

}  // namespace

TEST_CASE("lstm_step zero parameters give zero hidden state") {
  const std::size_t d_h = 3, d = 2;
  DirValues v{d_h, d,
              std::vector<double>(d_h * d, 0.0),   std::vector<double>(d_h * d, 0.0),
              std::vector<double>(d_h * d, 0.0),   std::vector<double>(d_h * d, 0.0),
              std::vector<double>(d_h * d_h, 0.0), std::vector<double>(d_h * d_h, 0.0),
              std::vector<double>(d_h * d_h, 0.0), std::vector<double>(d_h * d_h, 0.0),
              std::vector<double>(d_h, 0.0),       std::vector<double>(d_h, 0.0),
              std::vector<double>(d_h, 0.0),       std::vector<double>(d_h, 0.0)};
  Tape t;
  auto s = lstm_step(t, to_tape(t, v), t.zeros({d}), t.zeros({d_h}), t.zeros({d_h}));
  for (double h : s.h.values()) REQUIRE(h == 0.0);
}

TEST_CASE("lstm_step gate semantics: open forget, closed input") {
  const std::size_t d_h = 2, d = 2;
  std::mt19937_64 rng(5);
  DirValues v = random_dir(rng, d_h, d);
  // saturate: f -> 1 exactly in double precision, i -> ~1e-22
  std::fill(v.W_f.begin(), v.W_f.end(), 0.0);
  std::fill(v.U_f.begin(), v.U_f.end(), 0.0);
  std::fill(v.b_f.begin(), v.b_f.end(), 50.0);
  std::fill(v.W_i.begin(), v.W_i.end(), 0.0);
  std::fill(v.U_i.begin(), v.U_i.end(), 0.0);
  std::fill(v.b_i.begin(), v.b_i.end(), -50.0);

  Tape t;
  auto c_prev = t.input({d_h}, {0.7, -0.4});
  auto s = lstm_step(t, to_tape(t, v), t.input({d}, {0.3, 0.9}), t.input({d_h}, {0.1, 0.2}),
                     c_prev);
  REQUIRE(s.c.values()[0] == c_prev.values()[0]);
  REQUIRE(s.c.values()[1] == c_prev.values()[1]);
}

TEST_CASE("lstm_step matches the scalar oracle within 1e-12") {
  std::mt19937_64 rng(31);
  for (int it = 0; it < 100; ++it) {
    const std::size_t d_h = 1 + it % 4, d = 1 + (it / 3) % 5;
    DirValues v = random_dir(rng, d_h, d);
    auto x = testutil::random_vector(rng, d);
    auto h_prev = testutil::random_vector(rng, d_h);
    auto c_prev = testutil::random_vector(rng, d_h);

    Tape t;
    auto s = lstm_step(t, to_tape(t, v), t.input({d}, x), t.input({d_h}, h_prev),
                       t.input({d_h}, c_prev));
    std::vector<double> h_exp, c_exp;
    oracle_lstm_step(v, x, h_prev, c_prev, h_exp, c_exp);
    for (std::size_t r = 0; r < d_h; ++r) {
      REQUIRE(s.h.values()[r] == Catch::Approx(h_exp[r]).margin(1e-12));
      REQUIRE(s.c.values()[r] == Catch::Approx(c_exp[r]).margin(1e-12));
    }
  }
}

TEST_CASE("bilstm merged states: concatenation width and masking") {
  std::mt19937_64 rng(8);
  const std::size_t d = 3, d_h = 2, S = 6, n = 4;
  DirValues fv = random_dir(rng, d_h, d), bv = random_dir(rng, d_h, d);
  auto mat = testutil::random_vector(rng, d * S);

  auto run = [&](const std::vector<double>& m) {
    Tape t;
    auto merged = bilstm_forward(t, to_tape(t, fv), to_tape(t, bv), t.input({d, S}, m), n);
    std::vector<std::vector<double>> ks;
    for (const auto& k : merged.k) ks.push_back(k.values());
    return ks;
  };

  auto ks = run(mat);
  REQUIRE(ks.size() == n);
  for (const auto& k : ks) REQUIRE(k.size() == 2 * d_h);

  // perturbing a padding column changes nothing, bitwise
  auto perturbed = mat;
  for (std::size_t r = 0; r < d; ++r) perturbed[r * S + 5] += 17.0;
  REQUIRE(run(perturbed) == ks);

  // forward causality: position j > i cannot influence the forward half of k_i
  auto later = mat;
  for (std::size_t r = 0; r < d; ++r) later[r * S + 2] += 3.0;  // perturb position 2
  auto ks2 = run(later);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t r = 0; r < d_h; ++r) REQUIRE(ks2[i][r] == ks[i][r]);

  Tape t;
  REQUIRE_THROWS_AS(
      bilstm_forward(t, to_tape(t, fv), to_tape(t, bv), t.input({d, S}, mat), 0),
      std::invalid_argument);
}

TEST_CASE("attention fixtures") {
  Tape t;
  // single element: weight 1, context equals k_1
  MergedStates one;
  one.k = {t.input({2}, {0.3, -0.7})};
  auto a1 = attention(t, one);
  REQUIRE(a1.weights.values() == std::vector<double>{1.0});
  REQUIRE(a1.context.values() == one.k[0].values());

  // hand-computed two-state case
  MergedStates two;
  two.k = {t.input({2}, {1.0, 0.0}), t.input({2}, {0.0, 1.0})};
  auto a2 = attention(t, two);
  REQUIRE(a2.scores.values()[0] == 0.0);
  REQUIRE(a2.scores.values()[1] == 1.0);
  const double e = std::exp(1.0);
  const double w0 = 1.0 / (1.0 + e), w1 = e / (1.0 + e);
  REQUIRE(a2.weights.values()[0] == Catch::Approx(0.26894).margin(1e-5));
  REQUIRE(a2.weights.values()[1] == Catch::Approx(0.73106).margin(1e-5));
  REQUIRE(a2.context.values()[0] == Catch::Approx(w0).margin(1e-9));
  REQUIRE(a2.context.values()[1] == Catch::Approx(w1).margin(1e-9));

  // identical states: uniform weights
  MergedStates same;
  same.k = {t.input({2}, {0.5, 0.5}), t.input({2}, {0.5, 0.5}), t.input({2}, {0.5, 0.5})};
  auto a3 = attention(t, same);
  for (double w : a3.weights.values()) REQUIRE(w == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("attention invariants on random merged states") {
  std::mt19937_64 rng(23);
  for (int it = 0; it < 50; ++it) {
    std::uniform_int_distribution<std::size_t> nd(1, 8);
    const std::size_t n = nd(rng), width = 4;
    Tape t;
    MergedStates merged;
    for (std::size_t i = 0; i < n; ++i)
      merged.k.push_back(t.input({width}, testutil::random_vector(rng, width)));
    auto out = attention(t, merged);
    double sum = 0.0;
    for (double w : out.weights.values()) {
      REQUIRE(w > 0.0);
      REQUIRE(w < 1.0 + 1e-12);
      sum += w;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-9);
    const auto& e = out.scores.values();
    const auto& a = out.weights.values();
    const auto argmax = [](const std::vector<double>& v) {
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    REQUIRE(argmax(e) == argmax(a));
  }
}

TEST_CASE("channel_head fixtures") {
  Tape t;
  const std::size_t C = 4, H = 3;
  auto h = t.input({H}, {0.2, -0.5, 0.9});
  auto zeroW = t.zeros({C, H});
  auto p = channel_head(t, zeroW, t.zeros({C}), h);
  for (double v : p.values()) REQUIRE(v == Catch::Approx(0.25).margin(1e-12));

  auto big = channel_head(t, zeroW, t.input({C}, {40.0, 0.0, 0.0, 0.0}), h);
  REQUIRE(big.values()[0] > 1.0 - 1e-12);

  std::mt19937_64 rng(3);
  auto Wv = testutil::random_vector(rng, C * H);
  auto bv = testutil::random_vector(rng, C);
  auto hp = channel_head(t, t.input({C, H}, Wv), t.input({C}, bv), h);
  // scalar softmax recomputation
  std::vector<double> logits(C);
  for (std::size_t c = 0; c < C; ++c) {
    logits[c] = bv[c];
    for (std::size_t j = 0; j < H; ++j) logits[c] += Wv[c * H + j] * h.values()[j];
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& l : logits) denom += std::exp(l - mx);
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    REQUIRE(hp.values()[c] == Catch::Approx(std::exp(logits[c] - mx) / denom).margin(1e-12));
    sum += hp.values()[c];
  }
  REQUIRE(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("lstm channel: padding invariance end to end") {
  std::mt19937_64 rng(77);
  LstmChannelConfig cfg{3, 2, 3, 0.0};
  LstmAttentionChannel chan(cfg);
  chan.init_params(rng);
  const std::size_t S = 5, n = 3;
  auto mat = testutil::random_vector(rng, 3 * S);

  auto run = [&](const std::vector<double>& m) {
    Tape t;
    return chan.forward(t, t.input({3, S}, m), n).values();
  };
  auto base = run(mat);
  auto junk = mat;
  for (std::size_t r = 0; r < 3; ++r) {
    junk[r * S + 3] = 1e6;
    junk[r * S + 4] = -42.0;
  }
  REQUIRE(run(junk) == base);
}

TEST_CASE("lstm channel gradient check vs finite differences") {
  const std::size_t d = 3, d_h = 2, C = 3, S = 5, n = 4;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed * 101 + 7);
    LstmChannelConfig cfg{d, d_h, C, 0.0};
    LstmAttentionChannel chan(cfg);
    chan.init_params(rng);
    auto mat = testutil::random_vector(rng, d * S);
    std::mt19937_64 dummy(0);

    // gradient w.r.t. the embedding matrix input
    Tape t;
    auto X = t.input({d, S}, mat, true);
    auto loss = t.cross_entropy(chan.forward_train(t, X, n, dummy), 1);
    t.backward(loss);
    auto analytic = X.grad();

    auto f = [&](const std::vector<double>& m) {
      Tape t2;
      std::mt19937_64 dd(0);
      return chan.forward_train(t2, t2.input({d, S}, m, false), n, dd)
          .values()[1];
    };
    auto f_loss = [&](const std::vector<double>& m) { return -std::log(f(m) + 1e-12); };
    REQUIRE(testutil::max_grad_err(f_loss, mat, analytic, rng, 20) < 1e-4);

    // gradient w.r.t. every parameter tensor, spot-checked
    for (Parameter* p : chan.parameters()) {
      auto fp = [&](const std::vector<double>& v) {
        std::vector<double> saved = p->value;
        p->value = v;
        Tape t3;
        std::mt19937_64 dd(0);
        double out =
            -std::log(chan.forward_train(t3, t3.input({d, S}, mat), n, dd).values()[1] + 1e-12);
        p->value = saved;
        return out;
      };
      p->zero_grad();
      Tape t4;
      std::mt19937_64 dd(0);
      t4.backward(t4.cross_entropy(chan.forward_train(t4, t4.input({d, S}, mat), n, dd), 1));
      const std::size_t coords = std::min<std::size_t>(4, p->size());
      INFO("param " << p->name);
      REQUIRE(testutil::max_grad_err(fp, p->value, p->grad, rng, coords) < 1e-4);
    }
  }
}

TEST_CASE("conv1d fixtures") {
  Tape t;
  // all-ones 1x2 kernel, bias 0, row [1,2,3] -> pre-activation [3,5]
  auto m = t.input({1, 3}, {1.0, 2.0, 3.0});
  auto k = t.input({1, 2}, {1.0, 1.0});
  auto map = t.conv1d_valid(m, k, t.zeros({1}), 2, 3);
  REQUIRE(map.values() == std::vector<double>{3.0, 5.0});

  // zero kernels and biases -> all-zero maps
  auto z = t.conv1d_valid(m, t.zeros({2, 2}), t.zeros({2}), 2, 3);
  for (double v : z.values()) REQUIRE(v == 0.0);
}

TEST_CASE("conv1d shift equivariance") {
  std::mt19937_64 rng(13);
  const std::size_t d = 2, S = 8, n = 6, width = 2, F = 3;
  auto kv = testutil::random_vector(rng, F * d * width);
  auto bv = testutil::random_vector(rng, F);
  auto base = testutil::random_vector(rng, d * S);
  // shift content one column right within the true length
  auto shifted = std::vector<double>(d * S, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c + 1 < S; ++c) shifted[r * S + c + 1] = base[r * S + c];

  Tape t;
  auto run = [&](const std::vector<double>& m, std::size_t len) {
    return t
        .conv1d_valid(t.input({d, S}, m), t.input({F, d * width}, kv), t.input({F}, bv), width,
                      len)
        .values();
  };
  auto out0 = run(base, n);
  auto out1 = run(shifted, n + 1);
  const std::size_t L0 = n - width + 1, L1 = n + 1 - width + 1;
  for (std::size_t f = 0; f < F; ++f)
    for (std::size_t c = 0; c < L0; ++c)
      REQUIRE(out1[f * L1 + c + 1] == Catch::Approx(out0[f * L0 + c]).margin(1e-12));
}

TEST_CASE("conv1d degenerate short sentence rule") {
  Tape t;
  // width 4 kernel, true length 2: one window over the zero-padded prefix
  auto m = t.input({1, 6}, {1.0, 2.0, 9.0, 9.0, 9.0, 9.0});  // junk past true length
  auto k = t.input({1, 4}, {1.0, 1.0, 1.0, 1.0});
  auto map = t.conv1d_valid(m, k, t.zeros({1}), 4, 2);
  REQUIRE(map.shape() == domid::Shape{1, 1});
  REQUIRE(map.values()[0] == 3.0);  // junk columns read as zero
}

TEST_CASE("cnn channel: feature width, degenerate warning, padding invariance") {
  std::mt19937_64 rng(19);
  CnnChannelConfig cfg;
  cfg.input_dim = 3;
  cfg.filters = 8;
  cfg.kmax = 3;
  cfg.num_classes = 4;
  cfg.dropout = 0.0;
  CnnChannel chan(cfg);
  REQUIRE(chan.feature_dim() == 72);  // 3 sizes * 8 filters * k=3
  chan.init_params(rng);

  const std::size_t S = 10;
  auto mat = testutil::random_vector(rng, 3 * S);
  auto run = [&](const std::vector<double>& m, std::size_t n, std::size_t* warn = nullptr) {
    Tape t;
    return chan.forward(t, t.input({3, S}, m), n, warn).values();
  };

  std::size_t warn = 0;
  auto p = run(mat, 7, &warn);
  REQUIRE(warn == 0);
  double sum = 0.0;
  for (double v : p) sum += v;
  REQUIRE(std::abs(sum - 1.0) <= 1e-9);

  // n=3 < kernel sizes 4 and 6: two degenerate banks
  warn = 0;
  run(mat, 3, &warn);
  REQUIRE(warn == 2);

  // padding contents cannot leak into the probabilities
  auto junk = mat;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 7; c < S; ++c) junk[r * S + c] = 1e9;
  REQUIRE(run(junk, 7) == p);
}

TEST_CASE("cnn channel zero head gives uniform probabilities") {
  std::mt19937_64 rng(2);
  CnnChannelConfig cfg;
  cfg.input_dim = 2;
  cfg.filters = 2;
  cfg.num_classes = 5;
  cfg.dropout = 0.0;
  CnnChannel chan(cfg);  // params default to zero
  Tape t;
  auto p = chan.forward(t, t.input({2, 8}, testutil::random_vector(rng, 16)), 8);
  for (double v : p.values()) REQUIRE(v == Catch::Approx(0.2).margin(1e-12));
}

TEST_CASE("cnn channel gradient check vs finite differences") {
  const std::size_t d = 3, C = 3, S = 8, n = 7;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed * 313 + 11);
    CnnChannelConfig cfg;
    cfg.input_dim = d;
    cfg.filters = 2;
    cfg.kmax = 2;
    cfg.num_classes = C;
    cfg.dropout = 0.0;
    CnnChannel chan(cfg);
    chan.init_params(rng);
    auto mat = testutil::random_vector(rng, d * S);
    std::mt19937_64 dummy(0);

    Tape t;
    auto X = t.input({d, S}, mat, true);
    t.backward(t.cross_entropy(chan.forward_train(t, X, n, dummy), 2));
    auto analytic = X.grad();

    auto f = [&](const std::vector<double>& m) {
      Tape t2;
      std::mt19937_64 dd(0);
      return -std::log(chan.forward_train(t2, t2.input({d, S}, m), n, dd).values()[2] + 1e-12);
    };
    REQUIRE(testutil::max_grad_err(f, mat, analytic, rng, 20) < 1e-4);

    for (Parameter* p : chan.parameters()) {
      auto fp = [&](const std::vector<double>& v) {
        std::vector<double> saved = p->value;
        p->value = v;
        Tape t3;
        std::mt19937_64 dd(0);
        double out =
            -std::log(chan.forward_train(t3, t3.input({d, S}, mat), n, dd).values()[2] + 1e-12);
        p->value = saved;
        return out;
      };
      p->zero_grad();
      Tape t4;
      std::mt19937_64 dd(0);
      t4.backward(t4.cross_entropy(chan.forward_train(t4, t4.input({d, S}, mat), n, dd), 2));
      INFO("param " << p->name);
      REQUIRE(testutil::max_grad_err(fp, p->value, p->grad, rng,
                                     std::min<std::size_t>(4, p->size())) < 1e-4);
    }
  }
}

TEST_CASE("kmax pooling order preservation and top-k multiset vs oracle") {
  std::mt19937_64 rng(41);
  for (int it = 0; it < 500; ++it) {
    std::uniform_int_distribution<std::size_t> ld(1, 12), kd(1, 6);
    const std::size_t L = ld(rng), k = kd(rng);
    auto row = testutil::random_vector(rng, L);
    Tape t;
    auto out = t.kmax(t.input({L}, row), k).values();

    // order preservation: the non-padded prefix is a subsequence of the input
    const std::size_t take = std::min(k, L);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < take; ++i) {
      while (pos < L && row[pos] != out[i]) ++pos;
      REQUIRE(pos < L);
      ++pos;
    }
    for (std::size_t i = take; i < k; ++i) REQUIRE(out[i] == 0.0);

    // multiset equality against a sort-based oracle
    auto sorted = row;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.resize(take);
    auto got = std::vector<double>(out.begin(), out.begin() + take);
    std::sort(got.begin(), got.end(), std::greater<>());
    REQUIRE(got == sorted);
  }
}
