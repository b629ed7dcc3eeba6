#pragma once

// Flat key=value run configuration. One key per line, '#' comments, unknown
// keys rejected by name. Command-line flags override file values; the
// canonical snapshot below feeds both the run manifest and the preprocessing
// fingerprint.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "domid/detail/sha256.hpp"
#include "domid/fusion.hpp"

namespace domid {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // paths
  std::string train_tsv;
  std::string val_tsv;
  std::string test_tsv;
  std::string embeddings;
  std::string acronym_dict;
  std::string translation_dict;
  std::string model_path = "model.dmod";

  // preprocessing / embeddings
  std::string translation = "identity";  // identity|dictionary|http
  std::string http_host;
  int http_port = 0;
  std::string http_path = "/translate";
  std::string oov_policy = "subword-average";  // zero|subword-average
  std::size_t max_len = 128;

  // channels
  std::string channel = "multichannel";  // lstm|cnn|multichannel
  std::string fusion = "product";        // product|average|maximum|minimum|addition
  std::size_t hidden_dim = 128;
  std::size_t filters = 8;
  std::vector<std::size_t> kernel_sizes = {2, 4, 6};
  std::size_t kmax = 3;
  double dropout = 0.3;

  // training
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t patience = 5;
  std::uint64_t seed = 42;
  bool class_weighting = false;
  bool joint = false;

  // baselines
  std::string baseline_model = "logreg";  // svm|logreg|mlp
  std::string tfidf_mode = "word";        // word|word-ngram|char-ngram
  std::size_t ngram_min = 0;              // 0 = mode default: word-ngram (1,2), char-ngram (2,5)
  std::size_t ngram_max = 0;
  double l2 = 1e-4;
  std::size_t baseline_epochs = 10;
  std::size_t mlp_hidden = 64;
  bool smote = false;
  std::size_t smote_k = 5;
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: key '" + key + "' wants a boolean, got '" + v + "'");
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream is(v);
  T out;
  if (!(is >> out) || !is.eof())
    throw ConfigError("config: key '" + key + "' has malformed value '" + v + "'");
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  std::istringstream is(v);
  std::string part;
  while (std::getline(is, part, ','))
    out.push_back(parse_num<std::size_t>(part, key));
  if (out.empty()) throw ConfigError("config: key '" + key + "' wants a comma list");
  return out;
}

}  // namespace detail

// Applies a single assignment; unknown keys throw naming the key.
inline void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_num;
  if (key == "train") cfg.train_tsv = value;
  else if (key == "val") cfg.val_tsv = value;
  else if (key == "test") cfg.test_tsv = value;
  else if (key == "embeddings") cfg.embeddings = value;
  else if (key == "acronym_dict") cfg.acronym_dict = value;
  else if (key == "translation_dict") cfg.translation_dict = value;
  else if (key == "model") cfg.model_path = value;
  else if (key == "translation") cfg.translation = value;
  else if (key == "http_host") cfg.http_host = value;
  else if (key == "http_port") cfg.http_port = parse_num<int>(value, key);
  else if (key == "http_path") cfg.http_path = value;
  else if (key == "oov_policy") cfg.oov_policy = value;
  else if (key == "max_len") cfg.max_len = parse_num<std::size_t>(value, key);
  else if (key == "channel") cfg.channel = value;
  else if (key == "fusion") cfg.fusion = value;
  else if (key == "hidden_dim") cfg.hidden_dim = parse_num<std::size_t>(value, key);
  else if (key == "filters") cfg.filters = parse_num<std::size_t>(value, key);
  else if (key == "kernel_sizes") cfg.kernel_sizes = detail::parse_size_list(value, key);
  else if (key == "kmax") cfg.kmax = parse_num<std::size_t>(value, key);
  else if (key == "dropout") cfg.dropout = parse_num<double>(value, key);
  else if (key == "epochs") cfg.epochs = parse_num<std::size_t>(value, key);
  else if (key == "batch_size") cfg.batch_size = parse_num<std::size_t>(value, key);
  else if (key == "learning_rate") cfg.learning_rate = parse_num<double>(value, key);
  else if (key == "patience") cfg.patience = parse_num<std::size_t>(value, key);
  else if (key == "seed") cfg.seed = parse_num<std::uint64_t>(value, key);
  else if (key == "class_weighting") cfg.class_weighting = parse_bool(value, key);
  else if (key == "joint") cfg.joint = parse_bool(value, key);
  else if (key == "baseline_model") cfg.baseline_model = value;
  else if (key == "tfidf_mode") cfg.tfidf_mode = value;
  else if (key == "ngram_min") cfg.ngram_min = parse_num<std::size_t>(value, key);
  else if (key == "ngram_max") cfg.ngram_max = parse_num<std::size_t>(value, key);
  else if (key == "l2") cfg.l2 = parse_num<double>(value, key);
  else if (key == "baseline_epochs") cfg.baseline_epochs = parse_num<std::size_t>(value, key);
  else if (key == "mlp_hidden") cfg.mlp_hidden = parse_num<std::size_t>(value, key);
  else if (key == "smote") cfg.smote = parse_bool(value, key);
  else if (key == "smote_k") cfg.smote_k = parse_num<std::size_t>(value, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    // trim
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    line = line.substr(first, last - first + 1);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value");
    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    config_set(cfg, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
  }
  return cfg;
}

// Canonical dump: stable ordering, every effective value (defaults included).
inline std::string config_snapshot(const RunConfig& c) {
  std::ostringstream os;
  os << "acronym_dict=" << c.acronym_dict << '\n'
     << "baseline_epochs=" << c.baseline_epochs << '\n'
     << "baseline_model=" << c.baseline_model << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "channel=" << c.channel << '\n'
     << "class_weighting=" << (c.class_weighting ? "true" : "false") << '\n'
     << "dropout=" << c.dropout << '\n'
     << "embeddings=" << c.embeddings << '\n'
     << "epochs=" << c.epochs << '\n'
     << "filters=" << c.filters << '\n'
     << "fusion=" << c.fusion << '\n'
     << "hidden_dim=" << c.hidden_dim << '\n'
     << "http_host=" << c.http_host << '\n'
     << "http_path=" << c.http_path << '\n'
     << "http_port=" << c.http_port << '\n'
     << "joint=" << (c.joint ? "true" : "false") << '\n'
     << "kernel_sizes=";
  for (std::size_t i = 0; i < c.kernel_sizes.size(); ++i)
    os << (i ? "," : "") << c.kernel_sizes[i];
  os << '\n'
     << "kmax=" << c.kmax << '\n'
     << "l2=" << c.l2 << '\n'
     << "learning_rate=" << c.learning_rate << '\n'
     << "max_len=" << c.max_len << '\n'
     << "mlp_hidden=" << c.mlp_hidden << '\n'
     << "model=" << c.model_path << '\n'
     << "ngram_max=" << c.ngram_max << '\n'
     << "ngram_min=" << c.ngram_min << '\n'
     << "oov_policy=" << c.oov_policy << '\n'
     << "patience=" << c.patience << '\n'
     << "seed=" << c.seed << '\n'
     << "smote=" << (c.smote ? "true" : "false") << '\n'
     << "smote_k=" << c.smote_k << '\n'
     << "test=" << c.test_tsv << '\n'
     << "tfidf_mode=" << c.tfidf_mode << '\n'
     << "train=" << c.train_tsv << '\n'
     << "translation=" << c.translation << '\n'
     << "translation_dict=" << c.translation_dict << '\n'
     << "val=" << c.val_tsv << '\n';
  return os.str();
}

// Hash of everything that must agree between training and serving: the
// preprocessing setup and the embedding source. Trained models carry it; a
// mismatch at predict/eval time is refused.
inline Fingerprint preprocessing_fingerprint(const RunConfig& c) {
  std::ostringstream os;
  os << "acronym_dict=" << c.acronym_dict << '\n'
     << "embeddings=" << c.embeddings << '\n'
     << "http_host=" << c.http_host << '\n'
     << "http_path=" << c.http_path << '\n'
     << "http_port=" << c.http_port << '\n'
     << "max_len=" << c.max_len << '\n'
     << "oov_policy=" << c.oov_policy << '\n'
     << "translation=" << c.translation << '\n'
     << "translation_dict=" << c.translation_dict << '\n';
  return detail::sha256(os.str());
}

}  // namespace domid
