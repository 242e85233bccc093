#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tap {

// Binary sentiment label. The byte values are part of the store's on-disk
// encoding (0 = negative, 1 = positive).
enum class Sentiment : uint8_t { Negative = 0, Positive = 1 };

inline const char* to_string(Sentiment s) {
  return s == Sentiment::Positive ? "pos" : "neg";
}

inline std::optional<Sentiment> parse_sentiment(std::string_view s) {
  if (s == "pos") return Sentiment::Positive;
  if (s == "neg") return Sentiment::Negative;
  return std::nullopt;
}

}  // namespace tap
