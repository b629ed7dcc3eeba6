#pragma once

// Optional remote translation client. Speaks a LibreTranslate-style JSON
// protocol: POST {"q","source","target"} -> {"translatedText"}. Any transport
// or protocol problem degrades to an identity result flagged as a transport
// failure; the pipeline turns that into a counted warning.

#include <memory>
#include <mutex>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "domid/text_pipeline.hpp"

namespace domid {

class HttpTranslator final : public TranslationClient {
 public:
  HttpTranslator(std::string host, int port, std::string path = "/translate",
                 double timeout_seconds = 5.0)
      : client_(host, port), path_(std::move(path)) {
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client_.set_connection_timeout(secs, usecs);
    client_.set_read_timeout(secs, usecs);
  }

  TranslationResult translate(const std::string& text, const std::string& source_lang,
                              const std::string& target_lang) override {
    nlohmann::json body{{"q", text}, {"source", source_lang}, {"target", target_lang}};
    std::lock_guard<std::mutex> lock(mu_);  // httplib clients are not concurrent-safe
    auto res = client_.Post(path_, body.dump(), "application/json");
    if (!res || res->status != 200) return {text, false, true};
    try {
      auto parsed = nlohmann::json::parse(res->body);
      const auto it = parsed.find("translatedText");
      if (it == parsed.end() || !it->is_string()) return {text, false, true};
      std::string translated = it->get<std::string>();
      if (translated.empty() || translated == text) return {text, false, false};
      return {std::move(translated), true, false};
    } catch (const nlohmann::json::exception&) {
      return {text, false, true};
    }
  }

 private:
  httplib::Client client_;
  std::string path_;
  std::mutex mu_;
};

}  // namespace domid
