#pragma once

// Client for the /embed + /health embedding protocol, and provider construction from a
// "hash:DIM" | "file:PATH" | "http:URL" specification.

#include <cstdlib>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tokshap/embedding.hpp"
#include "tokshap/error.hpp"

namespace tokshap {

/// POST /embed {"texts": [...]} -> {"dim": D, "embeddings": [[...], ...]}.
///
/// Each call opens its own connection, so concurrent embed_batch calls are independent.
class HttpProvider final : public EmbeddingProvider {
public:
  /// Queries /health for the advertised dimension and model.
  explicit HttpProvider(std::string base_url, bool normalize = false, std::size_t batch_size = 64)
      : url_(std::move(base_url)), normalize_(normalize), batch_size_(batch_size == 0 ? 64 : batch_size) {
    auto client = connect();
    const auto res = client->Get("/health");
    if (!res) throw TransportError("GET " + url_ + "/health failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw ProtocolError("GET /health returned status " + std::to_string(res->status));
    const auto body = parse(res->body, "/health");
    if (!body.contains("dim") || !body["dim"].is_number_unsigned() || body["dim"].get<std::size_t>() == 0)
      throw ProtocolError("/health response lacks a positive integer \"dim\"");
    dim_ = body["dim"].get<std::size_t>();
    const std::string model = body.contains("model") && body["model"].is_string() ? body["model"].get<std::string>() : "unknown";
    id_ = "http:" + model;
  }

  const std::string& provider_id() const override { return id_; }
  std::size_t dim() const override { return dim_; }
  bool normalized() const override { return normalize_; }
  const std::string& url() const { return url_; }

  std::vector<Vector> embed_batch(std::span<const std::string> texts) const override {
    std::vector<Vector> out;
    out.reserve(texts.size());
    auto client = connect();
    for (std::size_t first = 0; first < texts.size(); first += batch_size_) {
      const auto chunk = texts.subspan(first, std::min(batch_size_, texts.size() - first));
      nlohmann::json request;
      request["texts"] = std::vector<std::string>(chunk.begin(), chunk.end());
      const auto res = client->Post("/embed", request.dump(), "application/json");
      if (!res) throw TransportError("POST " + url_ + "/embed failed: " + httplib::to_string(res.error()));
      const auto body = parse(res->body, "/embed");
      if (res->status != 200) {
        const std::string msg = body.contains("error") && body["error"].is_string() ? body["error"].get<std::string>() : res->body;
        throw ProtocolError("/embed returned status " + std::to_string(res->status) + ": " + msg);
      }
      if (!body.contains("dim") || !body["dim"].is_number_unsigned() || body["dim"].get<std::size_t>() != dim_)
        throw ProtocolError("/embed response \"dim\" missing or different from advertised " + std::to_string(dim_));
      if (!body.contains("embeddings") || !body["embeddings"].is_array() || body["embeddings"].size() != chunk.size())
        throw ProtocolError("/embed response must carry one embedding per text");
      for (const auto& row : body["embeddings"]) {
        if (!row.is_array() || row.size() != dim_) throw ProtocolError("/embed embedding has wrong length");
        Vector v;
        v.reserve(dim_);
        for (const auto& x : row) {
          if (!x.is_number()) throw ProtocolError("/embed embedding holds a non-number");
          v.push_back(x.get<float>());
        }
        if (normalize_) l2_normalize(v);
        out.push_back(std::move(v));
      }
    }
    return out;
  }

private:
  std::unique_ptr<httplib::Client> connect() const {
    auto client = std::make_unique<httplib::Client>(url_);
    if (!client->is_valid()) throw TransportError("invalid embedding service URL: " + url_);
    client->set_connection_timeout(10);
    client->set_read_timeout(300);
    return client;
  }

  static nlohmann::json parse(const std::string& body, const char* where) {
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      throw ProtocolError(std::string(where) + " response is not JSON");
    }
  }

  std::string url_;
  bool normalize_;
  std::size_t batch_size_;
  std::size_t dim_ = 0;
  std::string id_;
};

/// "hash:DIM", "file:PATH" or "http:URL"; a bare "http" reads the URL from TOKSHAP_EMBED_URL.
inline std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec, bool normalize = false) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "hash") {
    std::size_t dim = 0;
    try {
      std::size_t used = 0;
      dim = std::stoul(arg, &used);
      if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
      throw InvalidArgument("hash provider needs an integer dimension, got \"" + arg + "\"");
    }
    return std::make_unique<HashProvider>(dim);
  }
  if (kind == "file") {
    if (arg.empty()) throw InvalidArgument("file provider needs a path");
    return std::make_unique<FileProvider>(FileProvider::open(arg, normalize));
  }
  if (kind == "http" || kind == "https") {
    std::string url = colon == std::string::npos ? "" : spec;
    if (kind == "http" && arg.rfind("//", 0) != 0) url = arg;  // "http:localhost:8000" form
    if (url.empty()) {
      const char* env = std::getenv("TOKSHAP_EMBED_URL");
      if (!env || !*env) throw InvalidArgument("http provider needs a URL or TOKSHAP_EMBED_URL");
      url = env;
    }
    if (url.find("://") == std::string::npos) url = "http://" + url;
    return std::make_unique<HttpProvider>(url, normalize);
  }
  throw InvalidArgument("unknown provider \"" + spec + "\" (expected hash:DIM, file:PATH or http:URL)");
}

}  // namespace tokshap
