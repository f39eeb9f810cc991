#pragma once

// Key-value datastore of prefix embeddings and next tokens, plus its TKSH file format.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokshap/binary_io.hpp"
#include "tokshap/embedding.hpp"
#include "tokshap/error.hpp"
#include "tokshap/text.hpp"

namespace tokshap {

struct DatastoreEntry {
  Vector key;
  std::string value_token;
  std::uint32_t position = 0;
  std::uint32_t sentence_id = 0;

  bool operator==(const DatastoreEntry&) const = default;
};

struct Datastore {
  std::uint32_t dim = 0;
  bool normalized = false;
  std::string provider_id;
  std::string build_params;  // JSON object text
  std::vector<DatastoreEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  bool operator==(const Datastore&) const = default;
};

/// Build parameters recorded with every store: sentence-start prefixes joined by single spaces.
inline std::string default_build_params(bool normalized) {
  nlohmann::ordered_json p;
  p["prefix_policy"] = "sentence_start";
  p["prefix_join"] = "space";
  p["normalized"] = normalized;
  return p.dump();
}

inline Datastore build_datastore(const std::vector<PrefixRecord>& records,
                                 const EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.prefix_text);

  std::vector<Vector> keys;
  try {
    keys = provider.embed_batch(texts);
  } catch (const MissingText& e) {
    for (const auto& r : records)
      if (r.prefix_text == e.text())
        throw ProviderError("missing embedding for prefix of position " + std::to_string(r.position) +
                            " (\"" + r.prefix_text + "\")");
    throw;
  }
  if (keys.size() != records.size())
    throw ProviderError("provider returned " + std::to_string(keys.size()) + " vectors for " +
                        std::to_string(records.size()) + " texts");

  Datastore store;
  store.dim = static_cast<std::uint32_t>(provider.dim());
  store.normalized = provider.normalized();
  store.provider_id = provider.provider_id();
  store.build_params = default_build_params(store.normalized);
  store.entries.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (keys[i].size() != store.dim)
      throw DimensionMismatch("embedding for position " + std::to_string(records[i].position) +
                              " has length " + std::to_string(keys[i].size()) + ", expected " +
                              std::to_string(store.dim));
    store.entries.push_back(
        {std::move(keys[i]), records[i].target_token, records[i].position, records[i].sentence_id});
  }
  return store;
}

inline Datastore build_datastore(const TokenSeq& context, const EmbeddingProvider& provider) {
  return build_datastore(build_records(context), provider);
}

inline constexpr char kDatastoreMagic[4] = {'T', 'K', 'S', 'H'};
inline constexpr std::uint32_t kDatastoreVersion = 1;

inline std::string encode_datastore(const Datastore& store) {
  detail::ByteWriter w;
  w.put_raw(std::string_view(kDatastoreMagic, 4));
  w.put(kDatastoreVersion);
  w.put(store.dim);
  w.put(static_cast<std::uint64_t>(store.entries.size()));
  w.put(static_cast<std::uint8_t>(store.normalized ? 1 : 0));
  w.put_string<std::uint16_t>(store.provider_id);
  w.put_string<std::uint32_t>(store.build_params);
  for (const auto& e : store.entries) {
    if (e.key.size() != store.dim)
      throw DimensionMismatch("entry at position " + std::to_string(e.position) + " has key length " +
                              std::to_string(e.key.size()));
    for (const float x : e.key) w.put_f32(x);
    w.put_string<std::uint16_t>(e.value_token);
    w.put(e.position);
    w.put(e.sentence_id);
  }
  return w.bytes();
}

inline Datastore decode_datastore(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.get_raw(4) != std::string_view(kDatastoreMagic, 4)) throw FormatError("bad magic, expected TKSH");
  if (const auto v = r.get<std::uint32_t>(); v != kDatastoreVersion)
    throw FormatError("unsupported datastore version " + std::to_string(v));
  Datastore store;
  store.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  const auto flag = r.get<std::uint8_t>();
  if (flag > 1) throw FormatError("invalid normalization flag " + std::to_string(flag));
  store.normalized = flag == 1;
  store.provider_id = r.get_string<std::uint16_t>();
  store.build_params = r.get_string<std::uint32_t>();
  if (count > r.remaining() / (4ULL * store.dim + 10)) throw FormatError("truncated file");
  store.entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    DatastoreEntry e;
    e.key.resize(store.dim);
    for (auto& x : e.key) x = r.get_f32();
    e.value_token = r.get_string<std::uint16_t>();
    e.position = r.get<std::uint32_t>();
    e.sentence_id = r.get<std::uint32_t>();
    store.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last entry");
  return store;
}

inline void save_datastore(const Datastore& store, const std::filesystem::path& path) {
  detail::write_file(path, encode_datastore(store));
}

inline Datastore load_datastore(const std::filesystem::path& path) {
  return decode_datastore(detail::read_file(path));
}

}  // namespace tokshap
