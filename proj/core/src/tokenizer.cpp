#include "steer/tokenizer.hpp"

#include "steer/errors.hpp"

namespace steer {

TokenIds tokenize(std::string_view text) {
  TokenIds ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<TokenId>(c));
  return ids;
}

std::string detokenize(const TokenIds& ids) {
  std::string out;
  out.reserve(ids.size());
  for (TokenId id : ids) {
    if (id >= 0 && id < 256) {
      out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
    } else if (id == kBos || id == kEos || id == kPad) {
      continue;
    } else {
      throw DecodeError("unknown token id " + std::to_string(id));
    }
  }
  return out;
}

TokenSpan byte_range_to_tokens(std::size_t byte_begin, std::size_t byte_end, bool with_bos) {
  const std::size_t off = with_bos ? 1 : 0;
  return {byte_begin + off, byte_end + off};
}

}  // namespace steer
