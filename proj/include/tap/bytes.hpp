#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

// Little-endian framing helpers shared by the broker segment format and the
// store's commit-log/SSTable encodings.

namespace tap::bytes {

inline void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

inline void put_u64(std::string& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

// Readers operate on an in-memory span with a moving cursor. They return
// false on underrun instead of throwing so torn log tails can be handled.
struct Cursor {
  const char* data = nullptr;
  size_t size = 0;
  size_t pos = 0;

  explicit Cursor(std::string_view s) : data(s.data()), size(s.size()) {}

  size_t remaining() const { return size - pos; }

  bool get_u8(uint8_t& v) {
    if (remaining() < 1) return false;
    v = static_cast<uint8_t>(data[pos++]);
    return true;
  }

  bool get_u32(uint32_t& v) {
    if (remaining() < 4) return false;
    const auto* p = reinterpret_cast<const unsigned char*>(data + pos);
    v = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    pos += 4;
    return true;
  }

  bool get_u64(uint64_t& v) {
    uint32_t lo = 0, hi = 0;
    if (!get_u32(lo)) return false;
    if (!get_u32(hi)) return false;
    v = static_cast<uint64_t>(lo) | (static_cast<uint64_t>(hi) << 32);
    return true;
  }

  bool get_bytes(std::string& out, size_t n) {
    if (remaining() < n) return false;
    out.assign(data + pos, n);
    pos += n;
    return true;
  }
};

// FNV-1a 64-bit. Fixed, documented hash used for keyed partitioning so
// placements are reproducible across runs and platforms.
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace tap::bytes
