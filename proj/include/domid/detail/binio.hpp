#pragma once

// Little-endian binary readers/writers for the model container. Reads throw
// TruncatedFile when the stream ends early so callers can name truncation
// distinctly from format errors.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace domid::detail {

struct TruncatedFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void write_bytes(std::ostream& os, const void* data, std::size_t n) {
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
  write_bytes(os, buf, sizeof(T));
}

inline void write_f64_le(std::ostream& os, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  write_le<std::uint64_t>(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline void read_bytes(std::istream& is, void* data, std::size_t n, const char* what) {
  is.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw TruncatedFile(std::string("truncated file while reading ") + what);
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T), what);
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline double read_f64_le(std::istream& is, const char* what) {
  const std::uint64_t bits = read_le<std::uint64_t>(is, what);
  double value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

inline std::string read_string(std::istream& is, const char* what, std::size_t max_len = 1u << 20) {
  const auto n = read_le<std::uint32_t>(is, what);
  if (n > max_len) throw std::runtime_error(std::string("implausible string length in ") + what);
  std::string s(n, '\0');
  if (n) read_bytes(is, s.data(), n, what);
  return s;
}

}  // namespace domid::detail
