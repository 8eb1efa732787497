#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "mpd/core/error.hpp"

namespace mpd {

inline std::array<unsigned char, 32> sha256_bytes(std::string_view data) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size())
    throw Error("sha256 digest failed");
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(64);
  for (unsigned char b : sha256_bytes(data)) {
    hex.push_back(digits[b >> 4]);
    hex.push_back(digits[b & 0xF]);
  }
  return hex;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

// Stable 64-bit seed derived from a base seed and a label (stage, country, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  auto digest = sha256_bytes(std::to_string(base) + ":" + std::string(label));
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s = (s << 8) | digest[i];
  return s;
}

}  // namespace mpd
