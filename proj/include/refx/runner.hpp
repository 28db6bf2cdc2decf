#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "refx/dataset.hpp"
#include "refx/models.hpp"
#include "refx/reference.hpp"
#include "refx/serialize.hpp"

namespace refx {

// Run configuration. The file format (JSON) is documented in docs/config.md.

struct DataSpec {
  std::string name;
  std::filesystem::path path;
  CsvOptions csv;
};

struct ModelSpec {
  std::string kind;  // linear | logistic | tree | boosted | external
  NamedValues coefficients;
  double intercept = 0;
  std::string train;  // data name, for trained kinds
  LogisticHyper logistic;
  TreeHyper tree;
  BoostHyper boost;
  std::vector<std::string> command;
  std::vector<std::string> features;
};

struct ReferenceSpec {
  std::string label;
  std::string source;  // dataset | filter | topk | gaussian
  std::string data;
  std::optional<RowPredicate> where;
  std::string key;  // topk: column name, or "@prediction"
  Index k = 0;
  Direction direction = Direction::kHighest;
  NamedValues means;
  NamedValues stds;
  Index n = 0;
  std::uint64_t seed = 0;
  std::string verbatim;  // the config entry, embedded in every artifact
};

struct InstanceSpec {
  std::string data;  // with row
  std::optional<Index> row;
  NamedValues values;  // inline alternative
};

struct RequestSpec {
  std::string id;
  std::string method;
  std::vector<std::string> references;
  std::optional<InstanceSpec> instance;
  std::vector<std::string> features;
  Json params = Json::object();
  std::optional<std::uint64_t> seed;
  std::string where;  // position in the config, for messages
};

struct RunConfig {
  std::vector<DataSpec> data;
  ModelSpec model;
  std::vector<ReferenceSpec> references;
  std::vector<RequestSpec> requests;
  std::filesystem::path output = "refx-out";
  int threads = 1;
  bool svg = false;
};

// Methods accepted in requests (shap is an alias of shapley_exact).
bool is_attribution_method(std::string_view method);
bool is_profile_method(std::string_view method);

// Throws ConfigError naming the offending field, e.g.
// "requests[1].reference: undefined reference label 'payers'".
RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& file);

// Semantic checks that need no computation: labels resolve, seeds present
// for stochastic methods, data files exist, methods and params are known.
void validate_config(const RunConfig& config);

struct ManifestEntry {
  std::string file;
  std::string method;
  std::string reference;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  std::vector<ManifestEntry> artifacts;
  std::filesystem::path manifest;
};

// Validates, executes every request and writes one JSON file per artifact
// plus manifest.json (written last). On failure the manifest records the
// artifacts written so far and the error, and the exception propagates.
RunResult run(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace refx
