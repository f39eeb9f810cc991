#pragma once

// Embedding providers for prefix texts and the TSEM embedding interchange file.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tokshap/binary_io.hpp"
#include "tokshap/error.hpp"
#include "tokshap/hash.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

using Vector = std::vector<float>;

/// Scales `v` to unit L2 norm in place; the zero vector is left untouched.
inline void l2_normalize(Vector& v) {
  double sq = 0.0;
  for (const float x : v) sq += double(x) * double(x);
  if (sq == 0.0) return;
  const double norm = std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(double(x) / norm);
}

/// Signed feature hashing of character 3/4/5-grams of "^" + text + "$", L2-normalized.
inline Vector hash_embed(std::string_view text, std::size_t dim) {
  if (dim < 16) throw InvalidArgument("hash_embed: dim must be >= 16");
  std::vector<std::int64_t> acc(dim, 0);
  if (!text.empty()) {
    std::string padded = "^";
    padded.append(text);
    padded += '$';
    std::vector<std::size_t> bounds;  // code point start offsets plus the end offset
    for (std::size_t pos = 0; pos < padded.size();) {
      bounds.push_back(pos);
      std::size_t len = 0;
      detail::decode_utf8(padded, pos, len);
      pos += len;
    }
    bounds.push_back(padded.size());
    const std::size_t chars = bounds.size() - 1;
    for (std::size_t n = 3; n <= 5; ++n) {
      for (std::size_t s = 0; s + n <= chars; ++s) {
        const auto h = fnv1a64(std::string_view(padded).substr(bounds[s], bounds[s + n] - bounds[s]));
        acc[h % dim] += (h >> 63) ? -1 : 1;
      }
    }
  }
  double sq = 0.0;
  for (const auto a : acc) sq += double(a) * double(a);
  Vector out(dim, 0.0f);
  if (sq == 0.0) return out;
  const double norm = std::sqrt(sq);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(double(acc[i]) / norm);
  return out;
}

/// Source of prefix embeddings. Implementations are read-only after construction.
class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;

  virtual const std::string& provider_id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual bool normalized() const = 0;

  /// One vector of length dim() per input text, in input order.
  virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const = 0;
};

class HashProvider final : public EmbeddingProvider {
public:
  explicit HashProvider(std::size_t dim) : dim_(dim), id_("hash:" + std::to_string(dim)) {
    if (dim < 16) throw InvalidArgument("hash provider: dim must be >= 16");
  }

  const std::string& provider_id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  bool normalized() const override { return true; }

  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(hash_embed(t, dim_));
    return out;
  }

private:
  std::size_t dim_;
  std::string id_;
};

// ---------------------------------------------------------------------------------------------
// TSEM file

struct EmbeddingEntry {
  std::string text;
  Vector vector;

  bool operator==(const EmbeddingEntry&) const = default;
};

struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<EmbeddingEntry> entries;

  bool operator==(const EmbeddingFile&) const = default;
};

inline constexpr char kEmbeddingMagic[4] = {'T', 'S', 'E', 'M'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

inline std::string encode_embedding_file(const EmbeddingFile& file) {
  std::unordered_set<std::string_view> seen;
  for (const auto& e : file.entries) {
    if (!seen.insert(e.text).second) throw DuplicateText("duplicate text: \"" + e.text + "\"");
    if (e.vector.size() != file.dim)
      throw DimensionMismatch("embedding for \"" + e.text + "\" has length " +
                              std::to_string(e.vector.size()) + ", expected " +
                              std::to_string(file.dim));
  }
  detail::ByteWriter w;
  w.put_raw(std::string_view(kEmbeddingMagic, 4));
  w.put(kEmbeddingVersion);
  w.put(file.dim);
  w.put(static_cast<std::uint64_t>(file.entries.size()));
  for (const auto& e : file.entries) {
    w.put(fnv1a64(e.text));
    w.put_string<std::uint32_t>(e.text);
    for (const float x : e.vector) w.put_f32(x);
  }
  return w.bytes();
}

inline EmbeddingFile decode_embedding_file(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.get_raw(4) != std::string_view(kEmbeddingMagic, 4)) throw FormatError("bad magic, expected TSEM");
  if (const auto v = r.get<std::uint32_t>(); v != kEmbeddingVersion)
    throw FormatError("unsupported embedding file version " + std::to_string(v));
  EmbeddingFile file;
  file.dim = r.get<std::uint32_t>();
  if (file.dim == 0) throw FormatError("embedding dim is zero");
  const auto count = r.get<std::uint64_t>();
  // Every entry needs at least its hash, length prefix and vector.
  if (count > r.remaining() / (12 + 4ULL * file.dim)) throw FormatError("truncated file");
  file.entries.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto hash = r.get<std::uint64_t>();
    EmbeddingEntry e;
    e.text = r.get_string<std::uint32_t>();
    if (hash != fnv1a64(e.text)) throw FormatError("text hash mismatch at entry " + std::to_string(i));
    if (!seen.insert(e.text).second) throw FormatError("duplicate text at entry " + std::to_string(i));
    e.vector.resize(file.dim);
    for (auto& x : e.vector) x = r.get_f32();
    file.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last entry");
  return file;
}

inline void write_embedding_file(const EmbeddingFile& file, const std::filesystem::path& path) {
  detail::write_file(path, encode_embedding_file(file));
}

inline EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  return decode_embedding_file(detail::read_file(path));
}

/// Looks texts up in a precomputed TSEM file.
class FileProvider final : public EmbeddingProvider {
public:
  explicit FileProvider(EmbeddingFile file, std::string provider_id = "file", bool normalize = false)
      : file_(std::move(file)), id_(std::move(provider_id)), normalize_(normalize) {
    index_.reserve(file_.entries.size());
    for (std::size_t i = 0; i < file_.entries.size(); ++i) index_.emplace(file_.entries[i].text, i);
  }

  static FileProvider open(const std::filesystem::path& path, bool normalize = false) {
    return FileProvider(read_embedding_file(path), "file:" + path.filename().string(), normalize);
  }

  const std::string& provider_id() const override { return id_; }
  std::size_t dim() const override { return file_.dim; }
  bool normalized() const override { return normalize_; }

  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      const auto it = index_.find(t);
      if (it == index_.end()) throw MissingText(t);
      out.push_back(file_.entries[it->second].vector);
      if (normalize_) l2_normalize(out.back());
    }
    return out;
  }

private:
  EmbeddingFile file_;
  std::string id_;
  bool normalize_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tokshap
