#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nidsdl {

// 64-bit FNV-1a. Used to pair encoders with models, not for integrity against tampering.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex_digest(std::string_view bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  auto h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace nidsdl
