// domid: technical domain identification toolkit.
// Subcommands: preprocess | train | eval | predict | baseline | stats.
// Exit codes: 0 success, 1 usage, 2 data error, 3 model/config mismatch.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "domid/baselines.hpp"
#include "domid/config.hpp"
#include "domid/fusion.hpp"
#include "domid/http_translator.hpp"
#include "domid/metrics.hpp"
#include "domid/synthetic.hpp"
#include "domid/text_pipeline.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitMismatch = 3;

struct Exit {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw Exit{code, message}; }

struct FlagOverrides {
  std::optional<std::string> channel, fusion;
  std::optional<std::uint64_t> seed;
};

domid::RunConfig load_config(const std::string& config_path, const FlagOverrides& flags) {
  domid::RunConfig cfg;
  if (!config_path.empty()) {
    try {
      cfg = domid::load_config_file(config_path);
    } catch (const domid::ConfigError& e) {
      fail(kExitMismatch, e.what());
    }
  }
  try {
    if (flags.channel) domid::config_set(cfg, "channel", *flags.channel);
    if (flags.fusion) domid::config_set(cfg, "fusion", *flags.fusion);
    if (flags.seed) domid::config_set(cfg, "seed", std::to_string(*flags.seed));
  } catch (const domid::ConfigError& e) {
    fail(kExitMismatch, e.what());
  }
  return cfg;
}

domid::TextPipeline build_pipeline(const domid::RunConfig& cfg) {
  domid::TextPipeline pipeline;
  if (!cfg.acronym_dict.empty()) {
    try {
      pipeline.with_acronyms(std::make_shared<domid::AcronymDictionary>(
          domid::AcronymDictionary::load_tsv(cfg.acronym_dict)));
    } catch (const std::exception& e) {
      fail(kExitData, e.what());
    }
  }
  if (cfg.translation == "identity") {
    // default client
  } else if (cfg.translation == "dictionary") {
    if (cfg.translation_dict.empty())
      fail(kExitMismatch, "config: translation=dictionary needs translation_dict");
    try {
      pipeline.with_translator(std::make_shared<domid::DictionaryTranslator>(
          domid::DictionaryTranslator::load_tsv(cfg.translation_dict)));
    } catch (const std::exception& e) {
      fail(kExitData, e.what());
    }
  } else if (cfg.translation == "http") {
    if (cfg.http_host.empty() || cfg.http_port <= 0)
      fail(kExitMismatch, "config: translation=http needs http_host and http_port");
    pipeline.with_translator(
        std::make_shared<domid::HttpTranslator>(cfg.http_host, cfg.http_port, cfg.http_path));
  } else {
    fail(kExitMismatch, "config: unknown translation mode '" + cfg.translation + "'");
  }
  return pipeline;
}

domid::LabeledDataset load_dataset(const std::string& path, const char* what) {
  if (path.empty()) fail(kExitMismatch, std::string("config: missing ") + what + " path");
  try {
    return domid::load_tsv(path);
  } catch (const std::exception& e) {
    fail(kExitData, e.what());
  }
}

domid::EmbeddingTable load_embeddings(const domid::RunConfig& cfg) {
  if (cfg.embeddings.empty()) fail(kExitMismatch, "config: missing embeddings path");
  domid::OovPolicy policy;
  try {
    policy = domid::oov_policy_from_string(cfg.oov_policy);
  } catch (const std::exception& e) {
    fail(kExitMismatch, e.what());
  }
  try {
    return domid::EmbeddingTable::load_vec_file(cfg.embeddings, policy);
  } catch (const std::exception& e) {
    fail(kExitData, e.what());
  }
}

domid::MultichannelModel load_model(const std::string& path) {
  try {
    return domid::MultichannelModel::load(path);
  } catch (const domid::detail::TruncatedFile& e) {
    fail(kExitData, e.what());
  } catch (const std::exception& e) {
    fail(kExitMismatch, e.what());
  }
}

// Preprocessed, tokenized, label-resolved view of a dataset. Documents that
// come out empty are dropped with a counted warning.
struct PreparedDataset {
  std::vector<domid::TokenizedDocument> docs;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_list;
  domid::PipelineReport report;
};

PreparedDataset prepare(const domid::LabeledDataset& ds, const domid::TextPipeline& pipeline) {
  PreparedDataset out;
  out.class_list = ds.class_list;
  out.report.blank_lines_skipped = ds.blank_lines_skipped;
  for (const auto& [text, label] : ds.documents) {
    domid::RawDocument cleaned = pipeline.run({text, label}, out.report);
    domid::TokenizedDocument tok = domid::tokenize(cleaned);
    if (tok.tokens.empty()) continue;  // already counted as empty_after_cleaning
    const auto idx = ds.class_index(label);
    if (!idx) fail(kExitData, "dataset label '" + label + "' missing from class list");
    out.docs.push_back(std::move(tok));
    out.labels.push_back(*idx);
  }
  return out;
}

std::vector<domid::TrainExample> to_examples(const PreparedDataset& ds,
                                             const domid::EmbeddingTable& table,
                                             std::size_t max_len) {
  std::vector<domid::TrainExample> out;
  out.reserve(ds.docs.size());
  for (std::size_t i = 0; i < ds.docs.size(); ++i) {
    domid::TrainExample ex;
    ex.matrix = domid::sentence_matrix(table, ds.docs[i], max_len);
    ex.label = ds.labels[i];
    out.push_back(std::move(ex));
  }
  return out;
}

void write_manifest(const std::string& out_path, const std::string& command,
                    const domid::RunConfig& cfg) {
  std::ofstream os(out_path + ".manifest", std::ios::binary);
  if (!os) fail(kExitData, "cannot write manifest next to " + out_path);
  os << "tool=domid " << kVersion << '\n'
     << "model_format=" << domid::MultichannelModel::kFormatVersion << '\n'
     << "command=" << command << '\n'
     << domid::config_snapshot(cfg);
}

std::string format_probs(const std::vector<double>& p) {
  if (p.empty()) return "-";
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", p[i]);
    if (i) out.push_back(',');
    out += buf;
  }
  return out;
}

void write_text(const std::string& path, const std::string& content, const char* what) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(kExitData, std::string("cannot open ") + path + " for " + what);
  os << content;
}

// ---- subcommands ----

int cmd_preprocess(const std::string& in_path, const std::string& out_path,
                   const domid::RunConfig& cfg) {
  domid::TextPipeline pipeline = build_pipeline(cfg);
  domid::LabeledDataset ds = load_dataset(in_path, "preprocess input");
  domid::PipelineReport report;
  report.blank_lines_skipped = ds.blank_lines_skipped;
  std::ostringstream cleaned;
  for (const auto& [text, label] : ds.documents) {
    domid::RawDocument doc = pipeline.run({text, label}, report);
    cleaned << label << '\t' << doc.text << '\n';
  }
  if (out_path.empty()) {
    std::cout << cleaned.str();
    std::cerr << report.to_key_values();
  } else {
    write_text(out_path, cleaned.str(), "cleaned output");
    write_text(out_path + ".report", report.to_key_values(), "pipeline report");
    write_manifest(out_path, "preprocess", cfg);
    std::cout << report.to_key_values();
  }
  return 0;
}

int cmd_train(const domid::RunConfig& cfg, const std::string& out_override) {
  domid::TextPipeline pipeline = build_pipeline(cfg);
  domid::LabeledDataset train_raw = load_dataset(cfg.train_tsv, "train");
  PreparedDataset train_ds = prepare(train_raw, pipeline);
  if (train_ds.docs.empty()) fail(kExitData, "training set is empty after preprocessing");

  PreparedDataset val_ds;
  val_ds.class_list = train_ds.class_list;
  if (!cfg.val_tsv.empty()) {
    domid::LabeledDataset val_raw = load_dataset(cfg.val_tsv, "val");
    for (const auto& c : val_raw.class_list)
      if (!train_raw.class_index(c))
        fail(kExitData, "validation label '" + c + "' never appears in the training set");
    val_raw.class_list = train_raw.class_list;  // align label indices
    val_ds = prepare(val_raw, pipeline);
  }

  domid::EmbeddingTable table = load_embeddings(cfg);

  domid::ModelConfig mc;
  mc.class_list = train_raw.class_list;
  try {
    mc.channel = domid::channel_kind_from_string(cfg.channel);
    mc.fusion = domid::fusion_rule_from_string(cfg.fusion);
  } catch (const std::exception& e) {
    fail(kExitMismatch, e.what());
  }
  mc.embedding_dim = table.dimension();
  mc.max_len = cfg.max_len;
  mc.hidden_dim = cfg.hidden_dim;
  mc.filters = cfg.filters;
  mc.kernel_sizes = cfg.kernel_sizes;
  mc.kmax = cfg.kmax;
  mc.dropout = cfg.dropout;
  mc.fingerprint = domid::preprocessing_fingerprint(cfg);

  domid::TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rate = cfg.learning_rate;
  tc.patience = cfg.patience;
  tc.seed = cfg.seed;
  tc.class_weighting = cfg.class_weighting;
  tc.joint = cfg.joint;

  domid::MultichannelModel model(mc);
  model.init_params(cfg.seed);
  domid::TrainHistory history;
  try {
    history = model.train(to_examples(train_ds, table, cfg.max_len),
                          to_examples(val_ds, table, cfg.max_len), tc);
  } catch (const std::invalid_argument& e) {
    fail(kExitMismatch, e.what());
  }

  const std::string out = out_override.empty() ? cfg.model_path : out_override;
  model.save(out);
  write_text(out + ".history", history.to_key_values(), "training history");
  write_manifest(out, "train", cfg);

  std::cout << "model=" << out << '\n' << "examples=" << train_ds.docs.size() << '\n';
  if (!history.epochs.empty() && !val_ds.docs.empty()) {
    double best_acc = 0.0, best_f1 = 0.0;
    for (const auto& e : history.epochs) {
      best_acc = std::max(best_acc, e.val_accuracy);
      best_f1 = std::max(best_f1, e.val_weighted_f1);
    }
    std::cout << "best_val_accuracy=" << domid::format_4dp(best_acc) << '\n'
              << "best_val_weighted_f1=" << domid::format_4dp(best_f1) << '\n';
  }
  std::cerr << train_ds.report.to_key_values();
  return 0;
}

struct LoadedRuntime {
  domid::MultichannelModel model;
  domid::TextPipeline pipeline;
  domid::EmbeddingTable table;
};

LoadedRuntime load_runtime(const std::string& model_path, const domid::RunConfig& cfg) {
  LoadedRuntime rt{load_model(model_path), build_pipeline(cfg), load_embeddings(cfg)};
  try {
    rt.model.require_fingerprint(domid::preprocessing_fingerprint(cfg));
  } catch (const domid::FingerprintMismatch& e) {
    fail(kExitMismatch, e.what());
  }
  if (rt.table.dimension() != rt.model.config().embedding_dim)
    fail(kExitMismatch, "embedding dimension " + std::to_string(rt.table.dimension()) +
                            " does not match the model's " +
                            std::to_string(rt.model.config().embedding_dim));
  return rt;
}

int cmd_eval(const std::string& model_path, const std::string& test_override,
             const domid::RunConfig& cfg, const std::string& out_path) {
  LoadedRuntime rt = load_runtime(model_path, cfg);
  const std::string test_path = test_override.empty() ? cfg.test_tsv : test_override;
  domid::LabeledDataset test_raw = load_dataset(test_path, "test");

  for (const auto& c : test_raw.class_list) {
    bool known = false;
    for (const auto& m : rt.model.class_list()) known = known || (m == c);
    if (!known) fail(kExitData, "test label '" + c + "' unknown to the model");
  }

  domid::PipelineReport report;
  std::vector<std::string> gold, pred;
  std::size_t skipped = 0;
  const std::size_t max_len = rt.model.config().max_len;
  for (const auto& [text, label] : test_raw.documents) {
    domid::TokenizedDocument tok = domid::tokenize(rt.pipeline.run({text, label}, report));
    if (tok.tokens.empty()) {
      ++skipped;
      continue;
    }
    const domid::SentenceMatrix m = domid::sentence_matrix(rt.table, tok, max_len);
    gold.push_back(label);
    pred.push_back(rt.model.predict(m).class_name);
  }
  if (gold.empty()) fail(kExitData, "no evaluable documents in " + test_path);

  domid::EvalReport rep = domid::evaluate(gold, pred, rt.model.class_list());
  std::ostringstream out;
  out << domid::render_report(rep) << '\n' << domid::report_key_values(rep);
  if (skipped) out << "skipped_empty_documents=" << skipped << '\n';
  std::cout << out.str();
  if (!out_path.empty()) {
    write_text(out_path, out.str(), "evaluation report");
    write_manifest(out_path, "eval", cfg);
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& text,
                const std::string& in_path, const domid::RunConfig& cfg,
                const std::string& out_path) {
  LoadedRuntime rt = load_runtime(model_path, cfg);

  std::vector<std::string> lines;
  if (!text.empty()) {
    lines.push_back(text);
  } else {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) fail(kExitData, "cannot open " + in_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  const std::size_t max_len = rt.model.config().max_len;
  std::ostringstream out;
  domid::PipelineReport report;
  for (const std::string& line : lines) {
    domid::TokenizedDocument tok =
        domid::tokenize(rt.pipeline.run({line, std::nullopt}, report));
    if (tok.tokens.empty()) {
      out << "<error>\tempty-input\n";  // marker line, processing continues
      continue;
    }
    const domid::SentenceMatrix m = domid::sentence_matrix(rt.table, tok, max_len);
    const domid::Prediction p = rt.model.predict(m);
    out << p.class_name << '\t' << format_probs(p.p_final) << '\t' << format_probs(p.p_lstm)
        << '\t' << format_probs(p.p_cnn) << '\n';
  }
  std::cout << out.str();
  if (!out_path.empty()) {
    write_text(out_path, out.str(), "predictions");
    write_manifest(out_path, "predict", cfg);
  }
  return 0;
}

int cmd_baseline(const domid::RunConfig& cfg, const std::string& out_path) {
  domid::TextPipeline pipeline = build_pipeline(cfg);
  domid::LabeledDataset train_raw = load_dataset(cfg.train_tsv, "train");
  PreparedDataset train_ds = prepare(train_raw, pipeline);
  if (train_ds.docs.empty()) fail(kExitData, "training set is empty after preprocessing");

  const std::string eval_path = !cfg.test_tsv.empty() ? cfg.test_tsv : cfg.val_tsv;
  domid::LabeledDataset eval_raw = load_dataset(eval_path, "test/val");
  for (const auto& c : eval_raw.class_list)
    if (!train_raw.class_index(c))
      fail(kExitData, "evaluation label '" + c + "' never appears in the training set");
  eval_raw.class_list = train_raw.class_list;
  PreparedDataset eval_ds = prepare(eval_raw, pipeline);
  if (eval_ds.docs.empty()) fail(kExitData, "evaluation set is empty after preprocessing");

  domid::TfidfConfig tf;
  try {
    tf.mode = domid::tfidf_mode_from_string(cfg.tfidf_mode);
  } catch (const std::exception& e) {
    fail(kExitMismatch, e.what());
  }
  if (tf.mode == domid::TfidfMode::WordNgram) {
    tf.ngram_min = 1;
    tf.ngram_max = 2;
  } else if (tf.mode == domid::TfidfMode::CharNgram) {
    tf.ngram_min = 2;
    tf.ngram_max = 5;
  }
  if (cfg.ngram_min) tf.ngram_min = cfg.ngram_min;
  if (cfg.ngram_max) tf.ngram_max = cfg.ngram_max;

  domid::TfidfVectorizer vec(tf);
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(train_ds.docs.size());
  for (const auto& d : train_ds.docs) corpus.push_back(d.tokens);
  vec.fit(corpus);

  std::vector<domid::SparseVec> xs;
  std::vector<std::size_t> ys = train_ds.labels;
  xs.reserve(train_ds.docs.size());
  for (const auto& d : train_ds.docs) xs.push_back(vec.transform(d.tokens));

  const std::size_t C = train_raw.class_list.size();
  const std::size_t V = vec.vocabulary_size();

  if (cfg.smote) {
    // oversample every smaller class up to the majority count, in tf-idf space
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t y : ys) ++counts[y];
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());
    for (std::size_t c = 0; c < C; ++c) {
      if (counts[c] >= majority || counts[c] < 2) continue;
      std::vector<std::vector<double>> dense;
      for (std::size_t i = 0; i < train_ds.docs.size(); ++i)
        if (ys[i] == c) dense.push_back(domid::densify(xs[i], V));
      auto synth =
          domid::smote_oversample(dense, majority - counts[c], cfg.smote_k, cfg.seed + c);
      for (const auto& v : synth) {
        domid::SparseVec sv;
        for (std::size_t f = 0; f < V; ++f)
          if (v[f] != 0.0) sv.emplace_back(f, v[f]);
        xs.push_back(std::move(sv));
        ys.push_back(c);
      }
    }
  }

  std::vector<std::string> gold, pred;
  auto evaluate_with = [&](auto&& predict_fn) {
    for (std::size_t i = 0; i < eval_ds.docs.size(); ++i) {
      gold.push_back(eval_raw.class_list[eval_ds.labels[i]]);
      pred.push_back(eval_raw.class_list[predict_fn(vec.transform(eval_ds.docs[i].tokens))]);
    }
  };

  if (cfg.baseline_model == "svm" || cfg.baseline_model == "logreg") {
    domid::LinearTrainConfig lc;
    lc.loss =
        cfg.baseline_model == "svm" ? domid::LinearLoss::Hinge : domid::LinearLoss::Logistic;
    lc.epochs = cfg.baseline_epochs;
    lc.learning_rate = 0.5;
    lc.l2 = cfg.l2;
    lc.seed = cfg.seed;
    domid::LinearModel model(C, V);
    model.train(xs, ys, lc);
    evaluate_with([&](const domid::SparseVec& x) { return model.predict(x); });
  } else if (cfg.baseline_model == "mlp") {
    domid::MlpConfig mc;
    mc.hidden = cfg.mlp_hidden;
    mc.epochs = cfg.baseline_epochs;
    mc.learning_rate = 1e-2;
    mc.seed = cfg.seed;
    domid::MlpModel model(C, V, mc);
    model.train(xs, ys);
    evaluate_with([&](const domid::SparseVec& x) { return model.predict(x); });
  } else {
    fail(kExitMismatch,
         "config: unknown baseline_model '" + cfg.baseline_model + "' (want svm|logreg|mlp)");
  }

  domid::EvalReport rep = domid::evaluate(gold, pred, train_raw.class_list);
  std::ostringstream out;
  out << "baseline=" << cfg.baseline_model << " tfidf_mode=" << cfg.tfidf_mode
      << " vocabulary=" << V << " smote=" << (cfg.smote ? "true" : "false") << "\n\n"
      << domid::render_report(rep) << '\n'
      << domid::report_key_values(rep);
  std::cout << out.str();
  if (!out_path.empty()) {
    write_text(out_path, out.str(), "baseline report");
    write_manifest(out_path, "baseline", cfg);
  }
  return 0;
}

int cmd_stats(const std::string& in_path, const std::string& out_path,
              const domid::RunConfig& cfg) {
  domid::LabeledDataset ds = load_dataset(in_path, "stats input");
  const std::string text = domid::render_class_stats(domid::class_stats(ds));
  std::cout << text;
  if (!out_path.empty()) {
    write_text(out_path, text, "class statistics");
    write_manifest(out_path, "stats", cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domid: multichannel LSTM-CNN technical domain identification"};
  app.set_version_flag("--version", std::string("domid ") + kVersion);
  app.require_subcommand(1);

  std::string config_path, in_path, out_path, model_path, test_path, text;
  FlagOverrides flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--out", out_path, "output path");
    sub->add_option("--seed", flags.seed, "random seed override");
  };

  CLI::App* preprocess = app.add_subcommand("preprocess", "clean a label<TAB>text corpus");
  add_common(preprocess);
  preprocess->add_option("--in", in_path, "input TSV")->required();

  CLI::App* train = app.add_subcommand("train", "train a model per the configuration");
  add_common(train);
  train->add_option("--channel", flags.channel, "lstm|cnn|multichannel");
  train->add_option("--fusion", flags.fusion, "product|average|maximum|minimum|addition");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a model on a labeled TSV");
  add_common(eval);
  eval->add_option("--model", model_path, "model file")->required();
  eval->add_option("--test", test_path, "test TSV (defaults to config 'test')");

  CLI::App* predict = app.add_subcommand("predict", "classify text or a file of lines");
  add_common(predict);
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--text", text, "single input text");
  predict->add_option("--in", in_path, "file with one input per line");

  CLI::App* baseline = app.add_subcommand("baseline", "TF-IDF classical baselines");
  add_common(baseline);

  CLI::App* stats = app.add_subcommand("stats", "per-class dataset statistics");
  add_common(stats);
  stats->add_option("--in", in_path, "input TSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const domid::RunConfig cfg = load_config(config_path, flags);
    if (preprocess->parsed()) return cmd_preprocess(in_path, out_path, cfg);
    if (train->parsed()) return cmd_train(cfg, out_path);
    if (eval->parsed()) return cmd_eval(model_path, test_path, cfg, out_path);
    if (predict->parsed()) {
      if (text.empty() && in_path.empty()) {
        std::cerr << "predict: need --text or --in\n";
        return kExitUsage;
      }
      return cmd_predict(model_path, text, in_path, cfg, out_path);
    }
    if (baseline->parsed()) return cmd_baseline(cfg, out_path);
    if (stats->parsed()) return cmd_stats(in_path, out_path, cfg);
  } catch (const Exit& e) {
    std::cerr << "domid: " << e.message << '\n';
    return e.code;
  } catch (const domid::ConfigError& e) {
    std::cerr << "domid: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const std::exception& e) {
    std::cerr << "domid: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
