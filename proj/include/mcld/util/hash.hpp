#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace mcld {

inline uint64_t fnv1a64(const void* data, size_t len,
                        uint64_t seed = 1469598103934665603ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t hash = seed;
  for (size_t i = 0; i < len; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ull;
  }
  return hash;
}

inline uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

std::string to_hex(uint64_t v);

}  // namespace mcld
