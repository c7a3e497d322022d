#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace steer {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

// Byte-level vocabulary: ids 0..255 are raw bytes, followed by three specials.
inline constexpr TokenId kBos = 256;
inline constexpr TokenId kEos = 257;
inline constexpr TokenId kPad = 258;
inline constexpr std::size_t kByteVocabSize = 259;

// One token per byte. Never adds BOS.
TokenIds tokenize(std::string_view text);

// Bytes are emitted verbatim, BOS/EOS/PAD are dropped. Ids outside the
// vocabulary raise DecodeError.
std::string detokenize(const TokenIds& ids);

// Token index range [begin, end) covering bytes [byte_begin, byte_end) of a
// text encoded as BOS followed by tokenize(text).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};
TokenSpan byte_range_to_tokens(std::size_t byte_begin, std::size_t byte_end, bool with_bos = true);

}  // namespace steer
