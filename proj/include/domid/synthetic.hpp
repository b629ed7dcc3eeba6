#pragma once

// Deterministic keyword-corpus generator. Stands in for the shared-task
// corpus at desk scale: each class plants its own keyword set inside shared
// filler vocabulary, a noise fraction scrambles tokens, and embeddings are
// random vectors keyed by the same seed.

#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "domid/embedding.hpp"
#include "domid/fusion.hpp"
#include "domid/metrics.hpp"

namespace domid {

struct SyntheticCorpusConfig {
  std::vector<std::string> class_names = {"cse", "phy", "com_tech", "bio_tech", "mgnt", "other"};
  std::size_t train_docs = 600;
  std::size_t val_docs = 120;
  std::size_t vocab_size = 500;
  std::size_t keywords_per_class = 15;
  std::size_t min_len = 8;
  std::size_t max_len = 20;
  double keyword_fraction = 0.5;  // chance a slot draws from the class keyword set
  double noise_fraction = 0.2;    // chance the slot is then scrambled over the whole vocabulary
  std::size_t embedding_dim = 32;
  std::uint64_t seed = 1;
};

struct SyntheticCorpus {
  LabeledDataset train;
  LabeledDataset val;
  std::vector<std::string> vocabulary;
  EmbeddingTable embeddings{1, OovPolicy::Zero};
};

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
  const std::size_t C = cfg.class_names.size();
  if (C < 2) throw std::invalid_argument("generate_synthetic_corpus: need >= 2 classes");
  if (cfg.vocab_size < C * cfg.keywords_per_class + 1)
    throw std::invalid_argument("generate_synthetic_corpus: vocabulary too small for keywords");

  std::mt19937_64 rng(cfg.seed);
  SyntheticCorpus corpus;
  corpus.vocabulary.reserve(cfg.vocab_size);
  for (std::size_t i = 0; i < cfg.vocab_size; ++i)
    corpus.vocabulary.push_back("tok" + std::to_string(i));

  corpus.embeddings = EmbeddingTable(cfg.embedding_dim, OovPolicy::Zero);
  std::uniform_real_distribution<double> ed(-0.5, 0.5);
  for (const std::string& tok : corpus.vocabulary) {
    std::vector<double> v(cfg.embedding_dim);
    for (double& x : v) x = ed(rng);
    corpus.embeddings.insert(tok, std::move(v));
  }

  const std::size_t keyword_block = C * cfg.keywords_per_class;
  std::uniform_int_distribution<std::size_t> len_d(cfg.min_len, cfg.max_len);
  std::uniform_int_distribution<std::size_t> kw_d(0, cfg.keywords_per_class - 1);
  std::uniform_int_distribution<std::size_t> filler_d(keyword_block, cfg.vocab_size - 1);
  std::uniform_int_distribution<std::size_t> any_d(0, cfg.vocab_size - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  auto make_split = [&](std::size_t docs, LabeledDataset& out) {
    out.class_list = cfg.class_names;
    for (std::size_t i = 0; i < docs; ++i) {
      const std::size_t cls = i % C;  // balanced splits
      const std::size_t len = len_d(rng);
      std::string text;
      for (std::size_t p = 0; p < len; ++p) {
        std::size_t tok_idx;
        if (coin(rng) < cfg.keyword_fraction)
          tok_idx = cls * cfg.keywords_per_class + kw_d(rng);
        else
          tok_idx = filler_d(rng);
        if (coin(rng) < cfg.noise_fraction) tok_idx = any_d(rng);
        if (p) text.push_back(' ');
        text += corpus.vocabulary[tok_idx];
      }
      out.documents.emplace_back(std::move(text), cfg.class_names[cls]);
    }
  };
  make_split(cfg.train_docs, corpus.train);
  make_split(cfg.val_docs, corpus.val);
  return corpus;
}

inline void write_dataset_tsv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_dataset_tsv: cannot open " + path);
  for (const auto& [text, label] : ds.documents) os << label << '\t' << text << '\n';
}

// %.17g round-trips doubles exactly, so a written table reloads bit-for-bit.
inline void write_vec_file(const EmbeddingTable& table, const std::vector<std::string>& tokens,
                           const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_vec_file: cannot open " + path);
  os << tokens.size() << ' ' << table.dimension() << '\n';
  char buf[64];
  for (const std::string& tok : tokens) {
    os << tok;
    for (double v : table.lookup(tok)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << ' ' << buf;
    }
    os << '\n';
  }
}

// Shared helper: preprocessed+tokenized dataset to channel-ready examples.
inline std::vector<TrainExample> to_examples(const LabeledDataset& ds,
                                             const EmbeddingTable& table, std::size_t max_len) {
  std::vector<TrainExample> out;
  out.reserve(ds.size());
  for (const auto& [text, label] : ds.documents) {
    TrainExample ex;
    ex.matrix = sentence_matrix(table, tokenize({text, std::nullopt}), max_len);
    const auto idx = ds.class_index(label);
    if (!idx) throw std::logic_error("to_examples: label missing from class list");
    ex.label = *idx;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace domid
