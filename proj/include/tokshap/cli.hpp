#pragma once

// Command-line front end: build-store | attribute | eval | gen-kv.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tokshap/datastore.hpp"
#include "tokshap/eval.hpp"
#include "tokshap/http_provider.hpp"
#include "tokshap/pipeline.hpp"
#include "tokshap/report.hpp"
#include "tokshap/text.hpp"

namespace tokshap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

struct RunConfig {
  std::size_t k = 1;
  std::size_t m = 10;
  double gamma = 1.0;
  std::string provider;
  bool normalize = false;
  int weight_bits = kDefaultWeightBits;
  std::string output;
  std::string format = "json";
  unsigned threads = 1;
  bool timestamp = true;

  AttributionParams params() const { return {k, m, gamma, weight_bits}; }
};

namespace detail {

class UsageError : public Error {
public:
  using Error::Error;
};

inline std::string read_text(const std::string& path) { return tokshap::detail::read_file(path); }

inline void add_run_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--K", cfg.k, "neighbours voting in the utility")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--M", cfg.m, "candidates per response token")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--gamma", cfg.gamma, "RBF kernel width")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--weight-bits", cfg.weight_bits, "weight discretization for K > 1")
      ->capture_default_str()
      ->check(CLI::Range(4, 16));
  cmd.add_option("--threads", cfg.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void validate(const RunConfig& cfg, std::ostream& err) {
  if (cfg.k > cfg.m) throw UsageError("--K must not exceed --M");
  if (cfg.k == cfg.m) err << "warning: K equals M; every candidate can vote\n";
}

inline std::vector<std::size_t> parse_targets(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = trim(item);
    if (v.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(std::string(v), &used));
      if (used != v.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError("--targets expects comma-separated indices, got \"" + list + "\"");
    }
  }
  return out;
}

inline void write_output(const std::string& path, const std::string& bytes, std::ostream& out) {
  if (path.empty() || path == "-")
    out << bytes;
  else
    tokshap::detail::write_file(path, bytes);
}

}  // namespace detail

/// Runs one subcommand. Returns 0 on success, 1 on usage errors and 2 on runtime errors.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Token-level Shapley attribution of responses to their context", "tokshap"};
  app.require_subcommand(1);

  // gen-kv
  std::size_t pairs = 50, count = 1;
  std::uint64_t seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-kv", "generate synthetic key-value retrieval examples as JSONL");
  gen->add_option("--pairs", pairs, "key-value pairs per example")->capture_default_str()->check(CLI::Range(2, 1 << 20));
  gen->add_option("--count", count, "number of examples (seeds seed..seed+count-1)")->capture_default_str();
  gen->add_option("--seed", seed, "first seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output JSONL ('-' for stdout)")->required();

  // build-store
  std::string context_path, store_out;
  RunConfig build_cfg;
  auto* build = app.add_subcommand("build-store", "embed context prefixes into a datastore file");
  build->add_option("--context", context_path, "context text file")->required()->check(CLI::ExistingFile);
  build->add_option("--provider", build_cfg.provider, "hash:DIM | file:PATH | http:URL")->required();
  build->add_flag("--normalize", build_cfg.normalize, "L2-normalize file/http embeddings");
  build->add_option("--out", store_out, "datastore output path")->required();

  // attribute
  std::string store_path, query_path, response_path, targets_arg, attr_context;
  int top_k = 3;
  RunConfig attr_cfg;
  auto* attr = app.add_subcommand("attribute", "attribute response tokens to context spans");
  attr->add_option("--store", store_path, "datastore file")->required()->check(CLI::ExistingFile);
  attr->add_option("--query", query_path, "query text file")->required()->check(CLI::ExistingFile);
  attr->add_option("--response", response_path, "response text file")->required()->check(CLI::ExistingFile);
  attr->add_option("--provider", attr_cfg.provider, "hash:DIM | file:PATH | http:URL (default: the store's hash provider)");
  attr->add_flag("--normalize", attr_cfg.normalize, "L2-normalize file/http embeddings");
  attr->add_option("--targets", targets_arg, "comma-separated 0-based response token indices (default: all)");
  attr->add_option("--context", attr_context, "original context text, for HTML rendering")->check(CLI::ExistingFile);
  attr->add_option("--top-k", top_k, "spans to report")->capture_default_str()->check(CLI::PositiveNumber);
  attr->add_option("--out", attr_cfg.output, "report path ('-' for stdout)")->required();
  attr->add_option("--format", attr_cfg.format, "json | html")->capture_default_str();
  attr->add_flag("!--no-timestamp", attr_cfg.timestamp, "omit the timestamp from the report");
  detail::add_run_options(*attr, attr_cfg);

  // eval
  std::string data_path;
  std::size_t eval_k = 1;
  RunConfig eval_cfg;
  auto* ev = app.add_subcommand("eval", "run attribution over a JSONL dataset and report metrics");
  ev->add_option("--data", data_path, "dataset JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--provider", eval_cfg.provider, "hash:DIM | file:PATH | http:URL")->required();
  ev->add_flag("--normalize", eval_cfg.normalize, "L2-normalize file/http embeddings");
  ev->add_option("--top-k", eval_k, "k for precision/recall at k")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--out", eval_cfg.output, "metrics JSON output path");
  detail::add_run_options(*ev, eval_cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      std::string jsonl;
      for (std::size_t i = 0; i < count; ++i) jsonl += to_jsonl({gen_kv(pairs, seed + i)});
      detail::write_output(gen_out, jsonl, out);
    } else if (build->parsed()) {
      const auto provider = make_provider(build_cfg.provider, build_cfg.normalize);
      const auto context = tokenize(detail::read_text(context_path));
      if (context.empty()) throw InvalidArgument("context file has no tokens");
      const auto store = build_datastore(context, *provider);
      save_datastore(store, store_out);
      err << "datastore: " << store.size() << " entries, dim " << store.dim << ", provider " << store.provider_id << "\n";
    } else if (attr->parsed()) {
      detail::validate(attr_cfg, err);
      if (attr_cfg.format != "json" && attr_cfg.format != "html")
        throw detail::UsageError("--format must be json or html");
      const auto store = load_datastore(store_path);
      std::string spec = attr_cfg.provider;
      if (spec.empty()) {
        if (store.provider_id.rfind("hash:", 0) != 0)
          throw detail::UsageError("--provider is required for stores not built with the hash provider");
        spec = store.provider_id;
      }
      const auto provider = make_provider(spec, attr_cfg.normalize);
      if (provider->provider_id() != store.provider_id)
        throw InvalidArgument("provider " + provider->provider_id() + " differs from the store's " + store.provider_id);

      AttributionQuery aq;
      aq.query_text = std::string(trim(detail::read_text(query_path)));
      aq.context = attr_context.empty() ? context_from_store(store) : tokenize(detail::read_text(attr_context));
      if (aq.context.size() != store.size())
        throw InvalidArgument("context has " + std::to_string(aq.context.size()) + " tokens, store has " +
                              std::to_string(store.size()));
      aq.response = tokenize(detail::read_text(response_path));
      if (!targets_arg.empty()) aq.target_indices = detail::parse_targets(targets_arg);

      const auto matrix = attribute_response(store, *provider, aq, attr_cfg.params(), attr_cfg.threads);
      const auto ranked = rank_sources(matrix, sentence_spans(store), top_k);
      auto report = make_report(matrix, ranked, nlohmann::json::object(), attr_cfg.timestamp);
      report.context = aq.context;
      if (attr_cfg.output == "-") {
        out << (attr_cfg.format == "json" ? to_json(report).dump(2) + "\n" : render_html(report));
      } else {
        emit_report(report, attr_cfg.output, attr_cfg.format);
      }
    } else if (ev->parsed()) {
      detail::validate(eval_cfg, err);
      const auto provider = make_provider(eval_cfg.provider, eval_cfg.normalize);
      const auto examples = load_jsonl(data_path);
      const auto summary = evaluate(examples, *provider, eval_cfg.params(), eval_k, eval_cfg.threads);
      char line[256];
      std::snprintf(line, sizeof line, "%-10s %-10s %-10s %-10s %-10s\n", "examples", "accuracy", "P@k", "R@k", "F1@k");
      out << line;
      std::snprintf(line, sizeof line, "%-10zu %-10.3f %-10.3f %-10.3f %-10.3f\n", summary.examples, summary.accuracy,
                    summary.mean_at_k.precision, summary.mean_at_k.recall, summary.mean_at_k.f1);
      out << line;
      auto json = summary.to_json();
      json["params"] = {{"K", eval_cfg.k}, {"M", eval_cfg.m}, {"gamma", eval_cfg.gamma}, {"provider", provider->provider_id()}};
      out << json.dump() << "\n";
      if (!eval_cfg.output.empty()) tokshap::detail::write_file(eval_cfg.output, json.dump(2) + "\n");
    }
  } catch (const detail::UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace tokshap::cli
