#pragma once

// Pretrained word-vector table (.vec text format) plus the d x S sentence
// embedding matrix both channels consume. Out-of-vocabulary tokens compose
// from character n-gram vectors when the policy asks for it.

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "domid/text_pipeline.hpp"

namespace domid {

enum class OovPolicy { Zero, SubwordAverage };

inline std::string to_string(OovPolicy p) {
  return p == OovPolicy::Zero ? "zero" : "subword-average";
}

inline OovPolicy oov_policy_from_string(const std::string& s) {
  if (s == "zero") return OovPolicy::Zero;
  if (s == "subword-average") return OovPolicy::SubwordAverage;
  throw std::invalid_argument("unknown OOV policy '" + s + "' (want zero|subword-average)");
}

struct VecLoadStats {
  std::size_t declared_count = 0;
  std::size_t loaded = 0;
  std::size_t duplicates = 0;  // later row won
};

class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, OovPolicy policy)
      : dim_(dimension), policy_(policy) {
    if (dimension == 0) throw std::invalid_argument("EmbeddingTable: dimension must be positive");
  }

  std::size_t dimension() const { return dim_; }
  OovPolicy policy() const { return policy_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& token) const { return vectors_.count(token) != 0; }

  void insert(const std::string& token, std::vector<double> vec) {
    if (vec.size() != dim_)
      throw std::invalid_argument("EmbeddingTable: vector for '" + token + "' has length " +
                                  std::to_string(vec.size()) + ", expected " +
                                  std::to_string(dim_));
    vectors_[token] = std::move(vec);
  }

  // First line `<count> <dim>`, then one token + dim reals per line. Short
  // files load what is there; duplicate tokens keep the last row.
  static EmbeddingTable load_vec_file(const std::string& path,
                                      OovPolicy policy = OovPolicy::SubwordAverage,
                                      VecLoadStats* stats = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_vec_file: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
      throw std::runtime_error("load_vec_file: " + path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream header(line);
    long long count = -1, dim = -1;
    if (!(header >> count >> dim) || count < 0 || dim <= 0)
      throw std::runtime_error("load_vec_file: " + path + ": malformed header '" + line + "'");

    EmbeddingTable table(static_cast<std::size_t>(dim), policy);
    VecLoadStats local;
    local.declared_count = static_cast<std::size_t>(count);
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string token;
      ls >> token;
      std::vector<double> vec;
      vec.reserve(static_cast<std::size_t>(dim));
      double x;
      while (ls >> x) vec.push_back(x);
      if (vec.size() != static_cast<std::size_t>(dim))
        throw std::runtime_error("load_vec_file: " + path + ": row " + std::to_string(row) +
                                 ": expected " + std::to_string(dim) + " values, found " +
                                 std::to_string(vec.size()));
      if (table.contains(token)) ++local.duplicates;
      table.insert(token, std::move(vec));
    }
    local.loaded = table.size();
    if (stats) *stats = local;
    return table;
  }

  // Total lookup: exact hit, else the OOV policy. Subword averaging uses the
  // 3-6 char n-grams (with boundary markers) that exist in the table; no
  // known n-grams degrades to the zero vector.
  std::vector<double> lookup(const std::string& token) const {
    auto it = vectors_.find(token);
    if (it != vectors_.end()) return it->second;
    std::vector<double> out(dim_, 0.0);
    if (policy_ == OovPolicy::Zero) return out;
    std::size_t hits = 0;
    for (const std::string& gram : char_ngrams(token, 3, 6)) {
      auto git = vectors_.find(gram);
      if (git == vectors_.end()) continue;
      ++hits;
      for (std::size_t i = 0; i < dim_; ++i) out[i] += git->second[i];
    }
    if (hits > 0)
      for (double& v : out) v /= static_cast<double>(hits);
    return out;
  }

 private:
  std::size_t dim_;
  OovPolicy policy_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Row-major d x S matrix: column i holds the embedding of token i, columns
// past the true length stay zero. Longer documents truncate to S.
struct SentenceMatrix {
  std::size_t dim = 0;
  std::size_t max_len = 0;
  std::size_t true_len = 0;  // pre-padding length, for masking
  std::vector<double> values;

  double at(std::size_t row, std::size_t col) const { return values[row * max_len + col]; }
};

inline SentenceMatrix sentence_matrix(const EmbeddingTable& table, const TokenizedDocument& doc,
                                      std::size_t max_len, bool* empty_warning = nullptr) {
  if (max_len == 0) throw std::invalid_argument("sentence_matrix: max_len must be >= 1");
  SentenceMatrix m;
  m.dim = table.dimension();
  m.max_len = max_len;
  m.true_len = std::min(doc.tokens.size(), max_len);
  m.values.assign(m.dim * max_len, 0.0);
  if (doc.tokens.empty() && empty_warning) *empty_warning = true;
  for (std::size_t i = 0; i < m.true_len; ++i) {
    const std::vector<double> v = table.lookup(doc.tokens[i]);
    for (std::size_t r = 0; r < m.dim; ++r) m.values[r * max_len + i] = v[r];
  }
  return m;
}

}  // namespace domid
