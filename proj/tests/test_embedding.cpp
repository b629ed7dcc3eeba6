#include <catch2/catch_amalgamated.hpp>

#include "domid/embedding.hpp"
#include "testutil.hpp"

using namespace domid;

TEST_CASE("load_vec_file parses the header and rows") {
  testutil::TempDir tmp("vec");
  auto path = tmp.write("small.vec", "2 3\na 1 0 0\nb 0 1 0\n");
  auto table = EmbeddingTable::load_vec_file(path);
  REQUIRE(table.size() == 2);
  REQUIRE(table.dimension() == 3);
  REQUIRE(table.lookup("a") == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("load_vec_file short file keeps what is there") {
  testutil::TempDir tmp("vec");
  auto path = tmp.write("short.vec", "5 2\na 1 2\nb 3 4\nc 5 6\n");
  VecLoadStats stats;
  auto table = EmbeddingTable::load_vec_file(path, OovPolicy::Zero, &stats);
  REQUIRE(table.size() == 3);
  REQUIRE(stats.declared_count == 5);
  REQUIRE(stats.loaded == 3);
}

TEST_CASE("load_vec_file reports bad arity with the row number") {
  testutil::TempDir tmp("vec");
  auto path = tmp.write("bad.vec", "2 3\na 1 0 0\nb 0 1\n");
  REQUIRE_THROWS_WITH(EmbeddingTable::load_vec_file(path),
                      Catch::Matchers::ContainsSubstring("row 3"));

  auto badhdr = tmp.write("badhdr.vec", "x y\n");
  REQUIRE_THROWS_WITH(EmbeddingTable::load_vec_file(badhdr),
                      Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("duplicate tokens: last row wins, counted") {
  testutil::TempDir tmp("vec");
  auto path = tmp.write("dup.vec", "3 2\na 1 1\na 2 2\nb 0 1\n");
  VecLoadStats stats;
  auto table = EmbeddingTable::load_vec_file(path, OovPolicy::Zero, &stats);
  REQUIRE(table.size() == 2);
  REQUIRE(stats.duplicates == 1);
  REQUIRE(table.lookup("a") == std::vector<double>{2.0, 2.0});
}

TEST_CASE("lookup OOV policies") {
  EmbeddingTable zero(2, OovPolicy::Zero);
  zero.insert("known", {3.0, 4.0});
  REQUIRE(zero.lookup("known") == std::vector<double>{3.0, 4.0});
  REQUIRE(zero.lookup("unknown") == std::vector<double>{0.0, 0.0});

  EmbeddingTable sub(2, OovPolicy::SubwordAverage);
  // n-grams of "ab": <ab, ab>, <ab> over lengths 3..6
  sub.insert("<ab", {1.0, 0.0});
  sub.insert("ab>", {0.0, 1.0});
  auto v = sub.lookup("ab");
  REQUIRE(v[0] == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(v[1] == Catch::Approx(0.5).margin(1e-15));

  // OOV with no known n-grams degrades to zero
  REQUIRE(sub.lookup("zz") == std::vector<double>{0.0, 0.0});

  // vectors always come back with length d
  REQUIRE(sub.lookup("completely-unseen-token").size() == 2);
}

TEST_CASE("sentence_matrix padding, truncation, column mapping") {
  EmbeddingTable table(2, OovPolicy::Zero);
  table.insert("t1", {1.0, 2.0});
  table.insert("t2", {3.0, 4.0});

  TokenizedDocument doc{{"t1", "t2"}, std::nullopt};
  auto m = sentence_matrix(table, doc, 4);
  REQUIRE(m.true_len == 2);
  REQUIRE(m.at(0, 0) == 1.0);
  REQUIRE(m.at(1, 0) == 2.0);
  REQUIRE(m.at(0, 1) == 3.0);
  for (std::size_t c = 2; c < 4; ++c) {
    REQUIRE(m.at(0, c) == 0.0);
    REQUIRE(m.at(1, c) == 0.0);
  }

  TokenizedDocument long_doc{{"t1", "t2", "t1", "t2", "t1", "t2"}, std::nullopt};
  auto t = sentence_matrix(table, long_doc, 4);
  REQUIRE(t.true_len == 4);

  // permuting two tokens permutes the corresponding columns
  TokenizedDocument swapped{{"t2", "t1"}, std::nullopt};
  auto s = sentence_matrix(table, swapped, 4);
  REQUIRE(s.at(0, 0) == m.at(0, 1));
  REQUIRE(s.at(0, 1) == m.at(0, 0));

  bool warned = false;
  auto empty = sentence_matrix(table, TokenizedDocument{{}, std::nullopt}, 4, &warned);
  REQUIRE(warned);
  REQUIRE(empty.true_len == 0);
  for (double v : empty.values) REQUIRE(v == 0.0);
}

TEST_CASE("reloading the same file is bit-exact") {
  testutil::TempDir tmp("vec");
  auto path = tmp.write("r.vec", "2 3\na 0.12345678901234567 -3.5e-7 9\nb 1e300 -2 0.5\n");
  auto t1 = EmbeddingTable::load_vec_file(path);
  auto t2 = EmbeddingTable::load_vec_file(path);
  for (const char* tok : {"a", "b"}) {
    auto v1 = t1.lookup(tok), v2 = t2.lookup(tok);
    REQUIRE(std::memcmp(v1.data(), v2.data(), v1.size() * sizeof(double)) == 0);
  }
}
