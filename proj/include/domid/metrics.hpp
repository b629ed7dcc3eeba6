#pragma once

// Dataset ingestion (label<TAB>text TSV), class statistics, and the
// confusion-matrix metrics the reports are built from: accuracy plus
// per-class / macro / weighted precision, recall, F1.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace domid {

struct LabeledDataset {
  std::vector<std::pair<std::string, std::string>> documents;  // (text, class name)
  std::vector<std::string> class_list;                         // ordered, unique
  std::size_t blank_lines_skipped = 0;

  std::size_t size() const { return documents.size(); }

  std::optional<std::size_t> class_index(const std::string& name) const {
    auto it = std::find(class_list.begin(), class_list.end(), name);
    if (it == class_list.end()) return std::nullopt;
    return static_cast<std::size_t>(it - class_list.begin());
  }
};

// UTF-8, `label<TAB>text`, one document per line. Only the first TAB splits;
// blank lines are skipped and counted.
inline LabeledDataset load_tsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tsv: cannot open " + path);
  LabeledDataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++ds.blank_lines_skipped;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("load_tsv: " + path + ":" + std::to_string(lineno) +
                               ": missing TAB separator");
    std::string label = line.substr(0, tab);
    std::string text = line.substr(tab + 1);
    if (std::find(ds.class_list.begin(), ds.class_list.end(), label) == ds.class_list.end())
      ds.class_list.push_back(label);
    ds.documents.emplace_back(std::move(text), std::move(label));
  }
  return ds;
}

struct ClassStats {
  std::vector<std::pair<std::string, std::size_t>> counts;  // class order preserved
  std::size_t total = 0;
};

inline ClassStats class_stats(const LabeledDataset& ds) {
  ClassStats stats;
  for (const std::string& c : ds.class_list) stats.counts.emplace_back(c, 0);
  for (const auto& [text, label] : ds.documents) {
    for (auto& [name, count] : stats.counts)
      if (name == label) {
        ++count;
        break;
      }
    ++stats.total;
  }
  return stats;
}

// Table-1 layout: one row per class plus a Total row.
inline std::string render_class_stats(const ClassStats& stats,
                                      const std::string& column = "Count") {
  std::size_t width = 6;  // fits "Labels" and "Total"
  for (const auto& [name, _] : stats.counts) width = std::max(width, name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width + 2)) << "Labels" << column << '\n';
  for (const auto& [name, count] : stats.counts)
    os << std::left << std::setw(static_cast<int>(width + 2)) << name << count << '\n';
  os << std::left << std::setw(static_cast<int>(width + 2)) << "Total" << stats.total << '\n';
  return os.str();
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool precision_undefined = false;  // no predictions for this class
  bool recall_undefined = false;     // no gold examples of this class
};

struct EvalReport {
  std::vector<std::string> class_list;
  std::vector<std::size_t> confusion;  // C x C row-major, rows gold, columns predicted
  std::size_t total = 0;
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;

  std::size_t cell(std::size_t gold, std::size_t pred) const {
    return confusion[gold * class_list.size() + pred];
  }
};

inline EvalReport evaluate(const std::vector<std::size_t>& gold,
                           const std::vector<std::size_t>& predicted,
                           const std::vector<std::string>& class_list) {
  if (gold.size() != predicted.size())
    throw std::invalid_argument("evaluate: gold and predicted lengths differ");
  if (gold.empty()) throw std::invalid_argument("evaluate: empty label lists");
  const std::size_t C = class_list.size();
  EvalReport rep;
  rep.class_list = class_list;
  rep.confusion.assign(C * C, 0);
  rep.total = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= C)
      throw std::invalid_argument("evaluate: gold label index " + std::to_string(gold[i]) +
                                  " outside class list of size " + std::to_string(C));
    if (predicted[i] >= C)
      throw std::invalid_argument("evaluate: predicted label index " +
                                  std::to_string(predicted[i]) +
                                  " outside class list of size " + std::to_string(C));
    ++rep.confusion[gold[i] * C + predicted[i]];
  }

  std::size_t trace = 0;
  rep.per_class.resize(C);
  double support_sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t tp = rep.cell(c, c);
    trace += tp;
    std::size_t gold_count = 0, pred_count = 0;
    for (std::size_t j = 0; j < C; ++j) {
      gold_count += rep.cell(c, j);
      pred_count += rep.cell(j, c);
    }
    ClassMetrics& m = rep.per_class[c];
    m.support = gold_count;
    m.precision_undefined = pred_count == 0;
    m.recall_undefined = gold_count == 0;
    m.precision = pred_count ? static_cast<double>(tp) / static_cast<double>(pred_count) : 0.0;
    m.recall = gold_count ? static_cast<double>(tp) / static_cast<double>(gold_count) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    rep.macro_precision += m.precision;
    rep.macro_recall += m.recall;
    rep.macro_f1 += m.f1;
    rep.weighted_precision += static_cast<double>(m.support) * m.precision;
    rep.weighted_recall += static_cast<double>(m.support) * m.recall;
    rep.weighted_f1 += static_cast<double>(m.support) * m.f1;
    support_sum += static_cast<double>(m.support);
  }
  rep.accuracy = static_cast<double>(trace) / static_cast<double>(rep.total);
  rep.macro_precision /= static_cast<double>(C);
  rep.macro_recall /= static_cast<double>(C);
  rep.macro_f1 /= static_cast<double>(C);
  rep.weighted_precision /= support_sum;
  rep.weighted_recall /= support_sum;
  rep.weighted_f1 /= support_sum;
  return rep;
}

inline EvalReport evaluate(const std::vector<std::string>& gold,
                           const std::vector<std::string>& predicted,
                           const std::vector<std::string>& class_list) {
  auto resolve = [&class_list](const std::string& name) {
    auto it = std::find(class_list.begin(), class_list.end(), name);
    if (it == class_list.end())
      throw std::invalid_argument("evaluate: label '" + name + "' outside class list");
    return static_cast<std::size_t>(it - class_list.begin());
  };
  std::vector<std::size_t> g, p;
  g.reserve(gold.size());
  p.reserve(predicted.size());
  for (const auto& s : gold) g.push_back(resolve(s));
  for (const auto& s : predicted) p.push_back(resolve(s));
  return evaluate(g, p, class_list);
}

// Round-half-up at 4 decimals, done in decimal space so values like 0.69925
// print as 0.6993.
inline std::string format_4dp(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.8f", x);
  std::string s(buf);
  const auto dot = s.find('.');
  // decide the carry from the fifth decimal digit
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, 5);
  bool carry = digits.back() >= '5';
  digits.pop_back();
  for (std::size_t i = digits.size(); carry && i-- > 0;) {
    if (digits[i] == '9') {
      digits[i] = '0';
    } else {
      ++digits[i];
      carry = false;
    }
  }
  if (carry) digits.insert(digits.begin(), '1');
  const std::size_t split = digits.size() - 4;
  return digits.substr(0, split) + "." + digits.substr(split);
}

// Fixed-width table in the shape of the paper's result rows, 4-decimal
// rounding. Classes with no gold or predicted examples print n/a.
inline std::string render_report(const EvalReport& rep) {
  std::size_t width = 8;  // fits "weighted"
  for (const auto& name : rep.class_list) width = std::max(width, name.size());
  const int w = static_cast<int>(width + 2);
  std::ostringstream os;
  os << std::left << std::setw(w) << "class" << std::right << std::setw(11) << "precision"
     << std::setw(11) << "recall" << std::setw(11) << "f1-score" << std::setw(11) << "support"
     << '\n';
  for (std::size_t c = 0; c < rep.class_list.size(); ++c) {
    const ClassMetrics& m = rep.per_class[c];
    os << std::left << std::setw(w) << rep.class_list[c] << std::right;
    os << std::setw(11) << (m.precision_undefined ? "n/a" : format_4dp(m.precision));
    os << std::setw(11) << (m.recall_undefined ? "n/a" : format_4dp(m.recall));
    os << std::setw(11)
       << ((m.precision_undefined && m.recall_undefined) ? "n/a" : format_4dp(m.f1));
    os << std::setw(11) << m.support << '\n';
  }
  os << std::left << std::setw(w) << "macro" << std::right << std::setw(11)
     << format_4dp(rep.macro_precision) << std::setw(11) << format_4dp(rep.macro_recall)
     << std::setw(11) << format_4dp(rep.macro_f1) << std::setw(11) << rep.total << '\n';
  os << std::left << std::setw(w) << "weighted" << std::right << std::setw(11)
     << format_4dp(rep.weighted_precision) << std::setw(11) << format_4dp(rep.weighted_recall)
     << std::setw(11) << format_4dp(rep.weighted_f1) << std::setw(11) << rep.total << '\n';
  os << "accuracy " << format_4dp(rep.accuracy) << '\n';
  return os.str();
}

// Machine-readable companion to render_report.
inline std::string report_key_values(const EvalReport& rep) {
  std::ostringstream os;
  os << "accuracy=" << format_4dp(rep.accuracy) << '\n'
     << "precision_macro=" << format_4dp(rep.macro_precision) << '\n'
     << "recall_macro=" << format_4dp(rep.macro_recall) << '\n'
     << "f1_macro=" << format_4dp(rep.macro_f1) << '\n'
     << "precision_weighted=" << format_4dp(rep.weighted_precision) << '\n'
     << "recall_weighted=" << format_4dp(rep.weighted_recall) << '\n'
     << "f1_weighted=" << format_4dp(rep.weighted_f1) << '\n';
  for (std::size_t c = 0; c < rep.class_list.size(); ++c) {
    const ClassMetrics& m = rep.per_class[c];
    os << "precision_" << rep.class_list[c] << '='
       << (m.precision_undefined ? "n/a" : format_4dp(m.precision)) << '\n';
    os << "recall_" << rep.class_list[c] << '='
       << (m.recall_undefined ? "n/a" : format_4dp(m.recall)) << '\n';
    os << "f1_" << rep.class_list[c] << '='
       << ((m.precision_undefined && m.recall_undefined) ? "n/a" : format_4dp(m.f1)) << '\n';
    os << "support_" << rep.class_list[c] << '=' << m.support << '\n';
  }
  return os.str();
}

}  // namespace domid
