#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>

#include <openssl/evp.h>

namespace domid::detail {

inline std::array<std::uint8_t, 32> sha256(std::string_view data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256: digest computation failed");
  }
  EVP_MD_CTX_free(ctx);
  return out;
}

inline std::string hex(const std::array<std::uint8_t, 32>& digest) {
  static const char* k = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : digest) {
    s.push_back(k[b >> 4]);
    s.push_back(k[b & 0xF]);
  }
  return s;
}

}  // namespace domid::detail
