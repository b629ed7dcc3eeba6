#pragma once

// The five-stage preprocessing pipeline: acronym expansion, foreign-token
// discovery, token translation, Hindi sentence translation, noise removal.
// Every stage is total: bad input degrades with a counted warning, never an
// exception, so arbitrary corpus text can stream through.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "domid/unicode.hpp"

namespace domid {

struct RawDocument {
  std::string text;
  std::optional<std::string> label;
};

struct TokenizedDocument {
  std::vector<std::string> tokens;
  std::optional<std::size_t> label;  // index into a class list, set by the caller
};

// Per-stage modification counters, aggregated across a corpus run.
struct PipelineReport {
  std::size_t acronyms_expanded = 0;
  std::size_t latin_tokens_found = 0;
  std::size_t tokens_translated = 0;
  std::size_t translation_fallbacks = 0;
  std::size_t transport_failures = 0;
  std::size_t hindi_sentences_translated = 0;
  std::size_t punctuation_stripped = 0;
  std::size_t noise_tokens_removed = 0;
  std::size_t empty_after_cleaning = 0;
  std::size_t blank_lines_skipped = 0;

  void add(const PipelineReport& o) {
    acronyms_expanded += o.acronyms_expanded;
    latin_tokens_found += o.latin_tokens_found;
    tokens_translated += o.tokens_translated;
    translation_fallbacks += o.translation_fallbacks;
    transport_failures += o.transport_failures;
    hindi_sentences_translated += o.hindi_sentences_translated;
    punctuation_stripped += o.punctuation_stripped;
    noise_tokens_removed += o.noise_tokens_removed;
    empty_after_cleaning += o.empty_after_cleaning;
    blank_lines_skipped += o.blank_lines_skipped;
  }

  std::string to_key_values() const {
    std::ostringstream os;
    os << "acronyms_expanded=" << acronyms_expanded << '\n'
       << "latin_tokens_found=" << latin_tokens_found << '\n'
       << "tokens_translated=" << tokens_translated << '\n'
       << "translation_fallbacks=" << translation_fallbacks << '\n'
       << "transport_failures=" << transport_failures << '\n'
       << "hindi_sentences_translated=" << hindi_sentences_translated << '\n'
       << "punctuation_stripped=" << punctuation_stripped << '\n'
       << "noise_tokens_removed=" << noise_tokens_removed << '\n'
       << "empty_after_cleaning=" << empty_after_cleaning << '\n'
       << "blank_lines_skipped=" << blank_lines_skipped << '\n';
    return os.str();
  }
};

// Uppercase Latin acronym -> expansion. Case-sensitive whole-token lookup.
class AcronymDictionary {
 public:
  static bool valid_key(std::string_view key) {
    if (key.size() < 2 || key.size() > 10) return false;
    if (!(key[0] >= 'A' && key[0] <= 'Z')) return false;
    for (std::size_t i = 1; i < key.size(); ++i) {
      const char c = key[i];
      if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))) return false;
    }
    return true;
  }

  void insert(std::string key, std::string expansion) {
    if (!valid_key(key))
      throw std::invalid_argument("AcronymDictionary: invalid key '" + key +
                                  "' (want [A-Z][A-Z0-9]{1,9})");
    map_[std::move(key)] = std::move(expansion);
  }

  // UTF-8 TSV, ACRONYM<TAB>expansion, '#' comment lines.
  static AcronymDictionary load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("AcronymDictionary: cannot open " + path);
    AcronymDictionary dict;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("AcronymDictionary: " + path + ":" + std::to_string(lineno) +
                                 ": missing TAB separator");
      try {
        dict.insert(line.substr(0, tab), line.substr(tab + 1));
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("AcronymDictionary: " + path + ":" + std::to_string(lineno) +
                                 ": " + e.what());
      }
    }
    return dict;
  }

  const std::string* find(const std::string& token) const {
    auto it = map_.find(token);
    return it == map_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::string> map_;
};

struct TranslationResult {
  std::string text;
  bool translated = false;
  bool transport_failure = false;
};

// Total function over text: implementations return the input unchanged (with
// translated=false) rather than dropping or throwing on unknown content.
class TranslationClient {
 public:
  virtual ~TranslationClient() = default;
  virtual TranslationResult translate(const std::string& text, const std::string& source_lang,
                                      const std::string& target_lang) = 0;
};

class IdentityTranslator final : public TranslationClient {
 public:
  TranslationResult translate(const std::string& text, const std::string&,
                              const std::string&) override {
    return {text, false, false};
  }
};

// Offline bilingual dictionary, source<TAB>target TSV. Language tags are
// ignored: one dictionary covers one direction.
class DictionaryTranslator final : public TranslationClient {
 public:
  static DictionaryTranslator load_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("DictionaryTranslator: cannot open " + path);
    DictionaryTranslator t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("DictionaryTranslator: " + path + ":" +
                                 std::to_string(lineno) + ": missing TAB separator");
      t.map_[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return t;
  }

  void insert(std::string source, std::string target) {
    map_[std::move(source)] = std::move(target);
  }

  TranslationResult translate(const std::string& text, const std::string&,
                              const std::string&) override {
    auto it = map_.find(text);
    if (it == map_.end()) return {text, false, false};
    return {it->second, true, false};
  }

  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::string> map_;
};

// ---- pipeline stages ----

inline RawDocument expand_acronyms(const RawDocument& doc, const AcronymDictionary& dict,
                                   PipelineReport* report = nullptr) {
  auto tokens = uni::split_tokens(doc.text);
  std::size_t hits = 0;
  for (std::string& tok : tokens) {
    if (const std::string* exp = dict.find(tok)) {
      tok = *exp;
      ++hits;
    }
  }
  if (report) report->acronyms_expanded += hits;
  if (hits == 0) return doc;  // untouched documents come back byte-identical
  return {uni::join_tokens(tokens), doc.label};
}

// Positions (token index, token) of candidates for translation: tokens of
// two or more codepoints, all Latin letters.
inline std::vector<std::pair<std::size_t, std::string>> find_latin_tokens(
    const RawDocument& doc, PipelineReport* report = nullptr) {
  std::vector<std::pair<std::size_t, std::string>> found;
  const auto tokens = uni::split_tokens(doc.text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::u32string cps = uni::decode_utf8(tokens[i]);
    if (cps.size() < 2) continue;
    if (std::all_of(cps.begin(), cps.end(), uni::is_latin_letter))
      found.emplace_back(i, tokens[i]);
  }
  if (report) report->latin_tokens_found += found.size();
  return found;
}

inline RawDocument translate_tokens(const RawDocument& doc,
                                    const std::vector<std::pair<std::size_t, std::string>>& positions,
                                    TranslationClient& client, PipelineReport* report = nullptr,
                                    const std::string& source_lang = "en",
                                    const std::string& target_lang = "te") {
  if (positions.empty()) return doc;
  auto tokens = uni::split_tokens(doc.text);
  std::size_t replaced = 0;
  for (const auto& [idx, tok] : positions) {
    if (idx >= tokens.size())
      throw std::invalid_argument("translate_tokens: position " + std::to_string(idx) +
                                  " out of range " + std::to_string(tokens.size()));
    TranslationResult r = client.translate(tok, source_lang, target_lang);
    if (r.transport_failure) {
      if (report) ++report->transport_failures;
      continue;  // identity fallback
    }
    if (!r.translated) {
      if (report) ++report->translation_fallbacks;
      continue;
    }
    tokens[idx] = r.text;
    ++replaced;
  }
  if (report) report->tokens_translated += replaced;
  if (replaced == 0) return doc;
  return {uni::join_tokens(tokens), doc.label};
}

// Whole-document translation when the majority of tokens are Devanagari.
inline RawDocument translate_hindi_sentence(const RawDocument& doc, TranslationClient& client,
                                            PipelineReport* report = nullptr,
                                            double token_threshold = 0.5) {
  const auto tokens = uni::split_tokens(doc.text);
  if (tokens.empty()) return doc;
  std::size_t devanagari = 0;
  for (const std::string& tok : tokens) {
    const std::u32string cps = uni::decode_utf8(tok);
    std::size_t dev = 0, other_letters = 0;
    for (char32_t cp : cps) {
      if (uni::is_devanagari(cp)) ++dev;
      else if (uni::is_latin_letter(cp) || uni::is_telugu(cp)) ++other_letters;
    }
    if (dev > 0 && dev >= other_letters) ++devanagari;
  }
  if (static_cast<double>(devanagari) <= token_threshold * static_cast<double>(tokens.size()))
    return doc;
  TranslationResult r = client.translate(doc.text, "hi", "te");
  if (r.transport_failure) {
    if (report) ++report->transport_failures;
    return doc;
  }
  if (!r.translated) {
    if (report) ++report->translation_fallbacks;
    return doc;
  }
  if (report) ++report->hindi_sentences_translated;
  return {r.text, doc.label};
}

// Strips punctuation, drops tokens carrying U+FFFD (the decoder maps every
// malformed byte sequence and unpaired surrogate there) and single-character
// Latin tokens, and collapses whitespace. Idempotent.
inline RawDocument strip_noise(const RawDocument& doc, PipelineReport* report = nullptr) {
  const std::u32string cps = uni::decode_utf8(doc.text);
  std::u32string depunct;
  depunct.reserve(cps.size());
  std::size_t punct = 0;
  for (char32_t cp : cps) {
    if (uni::is_punct(cp)) {
      depunct.push_back(U' ');  // punctuation separates, never glues
      ++punct;
    } else {
      depunct.push_back(cp);
    }
  }
  std::vector<std::string> kept;
  std::size_t dropped = 0;
  for (std::string& tok : uni::split_tokens(uni::encode_utf8(depunct))) {
    const std::u32string tok_cps = uni::decode_utf8(tok);
    const bool has_replacement =
        std::find(tok_cps.begin(), tok_cps.end(), uni::kReplacement) != tok_cps.end();
    const bool single_latin = tok_cps.size() == 1 && uni::is_latin_letter(tok_cps[0]);
    if (has_replacement || single_latin) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(tok));
  }
  if (report) {
    report->punctuation_stripped += punct;
    report->noise_tokens_removed += dropped;
    if (kept.empty()) ++report->empty_after_cleaning;
  }
  return {uni::join_tokens(kept), doc.label};
}

inline TokenizedDocument tokenize(const RawDocument& doc) {
  return {uni::split_tokens(doc.text), std::nullopt};
}

// fasttext-style character n-grams of the token wrapped in '<' '>' markers.
// Lengths run nmin..nmax; windows are emitted left to right per length.
inline std::vector<std::string> char_ngrams(std::string_view token, std::size_t nmin = 3,
                                            std::size_t nmax = 6) {
  if (nmin < 1 || nmin > nmax)
    throw std::invalid_argument("char_ngrams: need 1 <= nmin <= nmax");
  std::vector<std::string> grams;
  if (token.empty()) return grams;
  std::u32string wrapped;
  wrapped.push_back(U'<');
  wrapped += uni::decode_utf8(token);
  wrapped.push_back(U'>');
  for (std::size_t n = nmin; n <= nmax; ++n) {
    if (n > wrapped.size()) break;
    for (std::size_t i = 0; i + n <= wrapped.size(); ++i)
      grams.push_back(uni::encode_utf8(std::u32string_view(wrapped).substr(i, n)));
  }
  return grams;
}

// ---- full pipeline ----

struct PipelineOptions {
  bool expand_acronyms = true;
  bool translate = true;
  bool hindi_sentences = true;
  double hindi_token_threshold = 0.5;
  std::string source_lang = "en";
  std::string target_lang = "te";
};

// Wires the five stages in paper order. The translation client defaults to
// identity; acronym dictionary is optional.
class TextPipeline {
 public:
  TextPipeline() : identity_(std::make_shared<IdentityTranslator>()) {}

  TextPipeline& with_acronyms(std::shared_ptr<const AcronymDictionary> dict) {
    acronyms_ = std::move(dict);
    return *this;
  }

  TextPipeline& with_translator(std::shared_ptr<TranslationClient> client) {
    client_ = std::move(client);
    return *this;
  }

  TextPipeline& with_options(PipelineOptions opts) {
    options_ = std::move(opts);
    return *this;
  }

  const PipelineOptions& options() const { return options_; }

  RawDocument run(const RawDocument& doc, PipelineReport& report) const {
    RawDocument cur = doc;
    if (options_.expand_acronyms && acronyms_) cur = expand_acronyms(cur, *acronyms_, &report);
    TranslationClient& client = client_ ? *client_ : *identity_;
    if (options_.translate) {
      const auto positions = find_latin_tokens(cur, &report);
      cur = translate_tokens(cur, positions, client, &report, options_.source_lang,
                             options_.target_lang);
    }
    if (options_.hindi_sentences)
      cur = translate_hindi_sentence(cur, client, &report, options_.hindi_token_threshold);
    return strip_noise(cur, &report);
  }

 private:
  std::shared_ptr<const AcronymDictionary> acronyms_;
  std::shared_ptr<TranslationClient> client_;
  std::shared_ptr<IdentityTranslator> identity_;
  PipelineOptions options_;
};

}  // namespace domid
