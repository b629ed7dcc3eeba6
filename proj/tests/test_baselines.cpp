#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "domid/baselines.hpp"
#include "testutil.hpp"

using namespace domid;

TEST_CASE("tfidf idf formula on the two-document fixture") {
  TfidfVectorizer vec(TfidfConfig{TfidfMode::Word, 1, 1});
  vec.fit({{"a", "b"}, {"a", "c"}});
  // idf(a) = ln(3/3)+1 = 1, idf(b) = ln(3/2)+1
  REQUIRE(*vec.idf_of("a") == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(*vec.idf_of("b") == Catch::Approx(std::log(1.5) + 1.0).margin(1e-12));
  REQUIRE_FALSE(vec.idf_of("z").has_value());

  // unseen-only document transforms to the zero vector
  REQUIRE(vec.transform({"z", "q"}).empty());

  // every nonzero transform is unit length
  auto t = vec.transform({"a", "b", "b"});
  double norm = 0.0;
  for (const auto& [col, v] : t) norm += v * v;
  REQUIRE(std::sqrt(norm) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("tfidf transform before fit throws") {
  TfidfVectorizer vec(TfidfConfig{});
  REQUIRE_THROWS_AS(vec.transform({"a"}), std::logic_error);
  TfidfVectorizer unfit;
  REQUIRE_THROWS_AS(unfit.fit({}), std::invalid_argument);
}

TEST_CASE("tfidf word-ngram and char-ngram term extraction") {
  TfidfConfig wn{TfidfMode::WordNgram, 1, 2};
  auto terms = TfidfVectorizer::extract_terms({"a", "b", "c"}, wn);
  REQUIRE(terms == std::vector<std::string>{"a", "b", "c", "a b", "b c"});

  TfidfConfig cn{TfidfMode::CharNgram, 2, 3};
  auto grams = TfidfVectorizer::extract_terms({"ab"}, cn);
  REQUIRE(grams == std::vector<std::string>{"ab"});

  auto grams2 = TfidfVectorizer::extract_terms({"ab", "cd"}, cn);
  // text "ab cd": 2-grams ab, "b ", " c", cd; 3-grams "ab ", "b c", " cd"
  REQUIRE(grams2.size() == 7);
}

namespace {

// Brute-force oracle: explicit count loops + the formula, no shared code.
std::map<std::string, double> oracle_tfidf(const std::vector<std::vector<std::string>>& corpus,
                                           const std::vector<std::string>& doc) {
  std::set<std::string> vocabulary;
  for (const auto& d : corpus)
    for (const auto& t : d) vocabulary.insert(t);
  std::map<std::string, double> out;
  double norm_sq = 0.0;
  for (const auto& term : vocabulary) {
    double tf = 0.0;
    for (const auto& t : doc)
      if (t == term) tf += 1.0;
    if (tf == 0.0) continue;
    double df = 0.0;
    for (const auto& d : corpus) {
      bool hit = false;
      for (const auto& t : d) hit = hit || (t == term);
      if (hit) df += 1.0;
    }
    const double idf =
        std::log((1.0 + static_cast<double>(corpus.size())) / (1.0 + df)) + 1.0;
    out[term] = tf * idf;
    norm_sq += out[term] * out[term];
  }
  if (norm_sq > 0.0)
    for (auto& [term, v] : out) v /= std::sqrt(norm_sq);
  return out;
}

std::vector<std::vector<std::string>> random_corpus(std::mt19937_64& rng, std::size_t max_docs,
                                                    std::size_t max_terms) {
  std::uniform_int_distribution<std::size_t> nd(1, max_docs), ld(1, 12), td(0, max_terms - 1);
  std::vector<std::vector<std::string>> corpus(nd(rng));
  for (auto& doc : corpus) {
    doc.resize(ld(rng));
    for (auto& t : doc) t = "t" + std::to_string(td(rng));
  }
  return corpus;
}

}  // namespace

TEST_CASE("tfidf matches the brute-force oracle exactly") {
  std::mt19937_64 rng(55);
  for (int it = 0; it < 60; ++it) {
    auto corpus = random_corpus(rng, 20, 50);
    TfidfVectorizer vec(TfidfConfig{TfidfMode::Word, 1, 1});
    vec.fit(corpus);
    for (const auto& doc : corpus) {
      auto got = vec.transform(doc);
      auto expect = oracle_tfidf(corpus, doc);
      REQUIRE(got.size() == expect.size());
      for (const auto& [col, v] : got) {
        // map column back to its term through idf bookkeeping: recompute via
        // the term list sorted order used by the vectorizer
        (void)col;
      }
      // compare values through a term-keyed rebuild
      std::map<std::string, double> got_by_term;
      std::set<std::string> vocabulary;
      for (const auto& d : corpus)
        for (const auto& t : d) vocabulary.insert(t);
      std::vector<std::string> sorted_terms(vocabulary.begin(), vocabulary.end());
      for (const auto& [col, v] : got) got_by_term[sorted_terms[col]] = v;
      for (const auto& [term, v] : expect) {
        REQUIRE(got_by_term.count(term) == 1);
        REQUIRE(got_by_term[term] == Catch::Approx(v).margin(1e-12));
      }
    }
  }
}

namespace {

// 20 hand-placed separable points in 2-D
void separable_points(std::vector<SparseVec>& xs, std::vector<std::size_t>& ys) {
  for (int i = 0; i < 10; ++i) {
    xs.push_back({{0, 1.0 + 0.1 * i}, {1, 0.5}});
    ys.push_back(0);
    xs.push_back({{0, -1.0 - 0.1 * i}, {1, -0.5}});
    ys.push_back(1);
  }
}

}  // namespace

TEST_CASE("linear models separate a separable set") {
  std::vector<SparseVec> xs;
  std::vector<std::size_t> ys;
  separable_points(xs, ys);

  for (LinearLoss loss : {LinearLoss::Hinge, LinearLoss::Logistic}) {
    LinearModel model(2, 2);
    LinearTrainConfig cfg;
    cfg.loss = loss;
    cfg.epochs = 50;
    cfg.learning_rate = 0.1;
    cfg.l2 = 1e-4;
    model.train(xs, ys, cfg);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (model.predict(xs[i]) == ys[i]) ++hit;
    REQUIRE(hit == xs.size());
  }
}

TEST_CASE("zero-epoch linear model predicts uniformly") {
  LinearModel model(3, 2);
  SparseVec x{{0, 1.0}};
  auto p = model.probabilities(x);
  for (double v : p) REQUIRE(v == Catch::Approx(1.0 / 3.0).margin(1e-12));
  REQUIRE(model.predict(x) == 0);  // margins all zero: first class
}

TEST_CASE("larger l2 shrinks the weights") {
  std::vector<SparseVec> xs;
  std::vector<std::size_t> ys;
  separable_points(xs, ys);
  std::vector<double> norms;
  for (double l2 : {0.0, 0.01, 0.1, 0.5}) {
    LinearModel model(2, 2);
    LinearTrainConfig cfg;
    cfg.loss = LinearLoss::Logistic;
    cfg.epochs = 30;
    cfg.learning_rate = 0.1;
    cfg.l2 = l2;
    model.train(xs, ys, cfg);
    norms.push_back(model.weight_norm());
  }
  for (std::size_t i = 1; i < norms.size(); ++i) REQUIRE(norms[i] < norms[i - 1]);
}

TEST_CASE("linear model one-step size sanity as lr shrinks") {
  std::vector<SparseVec> xs{{{0, 1.0}}};
  std::vector<std::size_t> ys{0};
  for (double lr : {1e-2, 1e-4}) {
    LinearModel model(2, 1);
    LinearTrainConfig cfg;
    cfg.loss = LinearLoss::Logistic;
    cfg.epochs = 1;
    cfg.learning_rate = lr;
    cfg.l2 = 0.0;
    model.train(xs, ys, cfg);
    // one logistic step on one example: |dW| <= lr * max gradient norm (<= 1 here)
    REQUIRE(model.weight_norm() <= lr * 1.0 + 1e-15);
    REQUIRE(model.weight_norm() > 0.0);
  }
}

TEST_CASE("mlp reaches high accuracy and is deterministic") {
  std::vector<SparseVec> xs;
  std::vector<std::size_t> ys;
  separable_points(xs, ys);

  auto run = [&](std::size_t hidden) {
    MlpConfig cfg;
    cfg.hidden = hidden;
    cfg.epochs = 40;
    cfg.learning_rate = 0.05;
    cfg.seed = 9;
    MlpModel model(2, 2, cfg);
    model.train(xs, ys);
    return model;
  };

  auto model = run(1);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (model.predict(xs[i]) == ys[i]) ++hit;
  REQUIRE(static_cast<double>(hit) / static_cast<double>(xs.size()) >= 0.9);

  auto p = model.probabilities(xs[0]);
  double sum = 0.0;
  for (double v : p) sum += v;
  REQUIRE(std::abs(sum - 1.0) <= 1e-9);

  auto model2 = run(1);
  auto p2 = model2.probabilities(xs[0]);
  REQUIRE(p == p2);  // bitwise: same seed, same data
}

TEST_CASE("smote geometry and determinism") {
  std::vector<std::vector<double>> two{{0.0, 0.0, 1.0}, {2.0, 4.0, 1.0}};
  auto synth = smote_oversample(two, 50, 3, 7);
  REQUIRE(synth.size() == 50);
  for (const auto& x : synth) {
    // distance from the segment p0 + t(p1-p0)
    std::vector<double> d{2.0, 4.0, 0.0};
    double t_num = 0.0, t_den = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      t_num += (x[f] - two[0][f]) * d[f];
      t_den += d[f] * d[f];
    }
    const double t = t_num / t_den;
    REQUIRE(t >= -1e-12);
    REQUIRE(t <= 1.0 + 1e-12);
    double resid = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      const double proj = two[0][f] + t * d[f];
      resid += (x[f] - proj) * (x[f] - proj);
    }
    REQUIRE(std::sqrt(resid) < 1e-9);
  }

  // lambda forced to zero duplicates the originals
  auto dup = smote_oversample(two, 4, 1, 7, 0.0);
  REQUIRE(dup[0] == two[0]);
  REQUIRE(dup[1] == two[1]);
  REQUIRE(dup[2] == two[0]);

  REQUIRE(smote_oversample(two, 0, 1, 7).empty());
  REQUIRE(smote_oversample(two, 10, 5, 123) == smote_oversample(two, 10, 5, 123));
  REQUIRE_THROWS_AS(smote_oversample({{1.0}}, 5, 1, 7), std::invalid_argument);
  REQUIRE_THROWS_AS(smote_oversample(two, 5, 0, 7), std::invalid_argument);
}

TEST_CASE("smote synthetic points stay within minority-pair segments") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<std::vector<double>> minority(8, std::vector<double>(4));
  for (auto& v : minority)
    for (double& x : v) x = d(rng);
  auto synth = smote_oversample(minority, 100, 3, 99);
  for (const auto& x : synth) {
    double best = 1e9;
    for (std::size_t i = 0; i < minority.size(); ++i)
      for (std::size_t j = 0; j < minority.size(); ++j) {
        if (i == j) continue;
        // distance to segment (i, j)
        double t_num = 0.0, t_den = 0.0;
        for (std::size_t f = 0; f < 4; ++f) {
          const double seg = minority[j][f] - minority[i][f];
          t_num += (x[f] - minority[i][f]) * seg;
          t_den += seg * seg;
        }
        double t = t_den > 0.0 ? t_num / t_den : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        double resid = 0.0;
        for (std::size_t f = 0; f < 4; ++f) {
          const double proj = minority[i][f] + t * (minority[j][f] - minority[i][f]);
          resid += (x[f] - proj) * (x[f] - proj);
        }
        best = std::min(best, std::sqrt(resid));
      }
    REQUIRE(best < 1e-9);
  }
}
