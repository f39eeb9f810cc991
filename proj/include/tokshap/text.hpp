#pragma once

// Whitespace/punctuation tokenizer, sentence segmentation and prefix records.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tokshap {

struct Token {
  std::string surface;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;  // exclusive
  std::uint32_t sentence_id = 0;

  bool operator==(const Token&) const = default;
};

/// Tokens of one text together with the text they were cut from.
struct TokenSeq {
  std::string text;
  std::vector<Token> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  bool operator==(const TokenSeq&) const = default;
};

/// One (prefix, next token) pair of the context.
struct PrefixRecord {
  std::string prefix_text;
  std::string target_token;
  std::uint32_t position = 0;
  std::uint32_t sentence_id = 0;

  bool operator==(const PrefixRecord&) const = default;
};

namespace detail {

/// Decodes one UTF-8 code point at `pos`; invalid bytes decode as themselves with length 1.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      len = 2;
      return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      len = 3;
      return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      len = 4;
      return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
             char32_t(c3);
    }
  }
  len = 1;
  return b0;
}

/// Unicode White_Space property.
constexpr bool is_unicode_space(char32_t c) noexcept {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

constexpr bool is_split_punct(char32_t c) noexcept {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case '"': case '\'': case '(': case ')': case '[': case ']':
      return true;
    default:
      return false;
  }
}

constexpr bool ends_sentence(std::string_view surface) noexcept {
  return surface == "." || surface == "!" || surface == "?";
}

}  // namespace detail

/// Strips leading and trailing Unicode whitespace.
inline std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    std::size_t len = 0;
    if (!detail::is_unicode_space(detail::decode_utf8(s, begin, len))) break;
    begin += len;
  }
  std::size_t end = begin;
  for (std::size_t pos = begin; pos < s.size();) {
    std::size_t len = 0;
    const bool space = detail::is_unicode_space(detail::decode_utf8(s, pos, len));
    pos += len;
    if (!space) end = pos;
  }
  return s.substr(begin, end - begin);
}

/// Assigns sentence ids: a sentence ends after ".", "!" or "?", or where the gap between two
/// tokens contains a newline.
inline TokenSeq segment_sentences(TokenSeq seq) {
  std::uint32_t sid = 0;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i > 0) {
      const auto& prev = seq.tokens[i - 1];
      const std::string_view gap =
          std::string_view(seq.text).substr(prev.byte_end, seq.tokens[i].byte_start - prev.byte_end);
      if (detail::ends_sentence(prev.surface) || gap.find('\n') != std::string_view::npos) ++sid;
    }
    seq.tokens[i].sentence_id = sid;
  }
  return seq;
}

inline TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  seq.text = std::string(text);
  std::size_t start = 0;
  bool open = false;
  auto close = [&](std::size_t end) {
    if (open) seq.tokens.push_back({std::string(text.substr(start, end - start)), start, end, 0});
    open = false;
  };
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t len = 0;
    const char32_t c = detail::decode_utf8(text, pos, len);
    if (detail::is_unicode_space(c)) {
      close(pos);
    } else if (detail::is_split_punct(c)) {
      close(pos);
      seq.tokens.push_back({std::string(text.substr(pos, len)), pos, pos + len, 0});
    } else if (!open) {
      open = true;
      start = pos;
    }
    pos += len;
  }
  close(text.size());
  return segment_sentences(std::move(seq));
}

/// Canonical text of a token run: surfaces joined by single spaces.
inline std::string render(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

/// One record per token; the prefix runs from the first token of its sentence up to the token.
inline std::vector<PrefixRecord> build_records(const TokenSeq& seq) {
  std::vector<PrefixRecord> records;
  records.reserve(seq.size());
  std::size_t sentence_start = 0;
  const std::span<const Token> all(seq.tokens);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (t == 0 || seq[t].sentence_id != seq[t - 1].sentence_id) sentence_start = t;
    records.push_back({render(all.subspan(sentence_start, t - sentence_start)), seq[t].surface,
                       static_cast<std::uint32_t>(t), seq[t].sentence_id});
  }
  return records;
}

}  // namespace tokshap
