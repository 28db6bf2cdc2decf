#include "refx/runner.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "refx/contrast.hpp"
#include "refx/explain.hpp"
#include "refx/svg.hpp"

namespace refx {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void check_keys(const Json& obj, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      fail(where + "." + key, "unknown field");
  }
}

const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) fail(where + "." + key, "required field is missing");
  return obj.at(key);
}

std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

// Numbers may also be written as exact fractions, e.g. "5/3".
double as_number(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto slash = s.find('/');
    auto parse = [&](std::string_view t) {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
      if (ec != std::errc() || ptr != t.data() + t.size()) fail(where, "bad number '" + s + "'");
      return v;
    };
    if (slash == std::string::npos) return parse(s);
    const double den = parse(std::string_view(s).substr(slash + 1));
    if (den == 0) fail(where, "zero denominator in '" + s + "'");
    return parse(std::string_view(s).substr(0, slash)) / den;
  }
  fail(where, "expected a number");
}

Index as_index(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where, "expected an integer");
  return j.get<Index>();
}

std::uint64_t as_seed(const Json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    fail(where, "expected a non-negative integer seed");
  return j.get<std::uint64_t>();
}

NamedValues as_named_values(const Json& j, const std::string& where) {
  if (!j.is_object() || j.empty()) fail(where, "expected a non-empty object of numbers");
  NamedValues out;
  for (const auto& [k, v] : j.items()) out.emplace_back(k, as_number(v, where + "." + k));
  return out;
}

std::vector<std::string> as_string_list(const Json& j, const std::string& where) {
  std::vector<std::string> out;
  if (j.is_string()) return {j.get<std::string>()};
  if (!j.is_array()) fail(where, "expected a string or a list of strings");
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(as_string(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

DataSpec parse_data(const std::string& name, const Json& j, const fs::path& base,
                    const std::string& where) {
  DataSpec d{.name = name};
  if (j.is_string()) {
    d.path = base / j.get<std::string>();
    return d;
  }
  check_keys(j, where, {"path", "target", "has_header", "on_missing"});
  d.path = base / as_string(require(j, "path", where), where + ".path");
  if (j.contains("target")) d.csv.target = as_string(j.at("target"), where + ".target");
  if (j.contains("has_header")) {
    if (!j.at("has_header").is_boolean()) fail(where + ".has_header", "expected true/false");
    d.csv.has_header = j.at("has_header").get<bool>();
  }
  if (j.contains("on_missing")) {
    const auto m = as_string(j.at("on_missing"), where + ".on_missing");
    if (m == "reject") d.csv.on_missing = MissingPolicy::kReject;
    else if (m == "drop_row") d.csv.on_missing = MissingPolicy::kDropRow;
    else fail(where + ".on_missing", "expected 'reject' or 'drop_row'");
  }
  return d;
}

ModelSpec parse_model(const Json& j, const std::string& where) {
  ModelSpec m;
  if (!j.is_object()) fail(where, "expected an object");
  m.kind = as_string(require(j, "kind", where), where + ".kind");
  if (m.kind == "linear") {
    check_keys(j, where, {"kind", "coefficients", "intercept"});
    m.coefficients = as_named_values(require(j, "coefficients", where), where + ".coefficients");
    if (j.contains("intercept")) m.intercept = as_number(j.at("intercept"), where + ".intercept");
  } else if (m.kind == "logistic") {
    check_keys(j, where, {"kind", "train", "lr", "iters", "l2"});
    m.train = as_string(require(j, "train", where), where + ".train");
    if (j.contains("lr")) m.logistic.lr = as_number(j.at("lr"), where + ".lr");
    if (j.contains("iters")) m.logistic.iters = static_cast<int>(as_index(j.at("iters"), where + ".iters"));
    if (j.contains("l2")) m.logistic.l2 = as_number(j.at("l2"), where + ".l2");
  } else if (m.kind == "tree") {
    check_keys(j, where, {"kind", "train", "max_depth", "min_leaf"});
    m.train = as_string(require(j, "train", where), where + ".train");
    if (j.contains("max_depth")) m.tree.max_depth = static_cast<int>(as_index(j.at("max_depth"), where + ".max_depth"));
    if (j.contains("min_leaf")) m.tree.min_leaf = as_index(j.at("min_leaf"), where + ".min_leaf");
  } else if (m.kind == "boosted") {
    check_keys(j, where, {"kind", "train", "n_trees", "lr", "max_depth", "min_leaf"});
    m.train = as_string(require(j, "train", where), where + ".train");
    if (j.contains("n_trees")) m.boost.n_trees = static_cast<int>(as_index(j.at("n_trees"), where + ".n_trees"));
    if (j.contains("lr")) m.boost.lr = as_number(j.at("lr"), where + ".lr");
    if (j.contains("max_depth")) m.boost.max_depth = static_cast<int>(as_index(j.at("max_depth"), where + ".max_depth"));
    if (j.contains("min_leaf")) m.boost.min_leaf = as_index(j.at("min_leaf"), where + ".min_leaf");
  } else if (m.kind == "external") {
    check_keys(j, where, {"kind", "command", "features"});
    m.command = as_string_list(require(j, "command", where), where + ".command");
    m.features = as_string_list(require(j, "features", where), where + ".features");
  } else {
    fail(where + ".kind", "unknown model kind '" + m.kind +
                              "' (expected linear, logistic, tree, boosted or external)");
  }
  return m;
}

ReferenceSpec parse_reference(const Json& j, const std::string& where) {
  ReferenceSpec r;
  if (!j.is_object()) fail(where, "expected an object");
  r.verbatim = j.dump();
  r.label = as_string(require(j, "label", where), where + ".label");
  r.source = as_string(require(j, "source", where), where + ".source");
  if (r.source == "dataset") {
    check_keys(j, where, {"label", "source", "data"});
    r.data = as_string(require(j, "data", where), where + ".data");
  } else if (r.source == "filter") {
    check_keys(j, where, {"label", "source", "data", "where"});
    r.data = as_string(require(j, "data", where), where + ".data");
    const auto text = as_string(require(j, "where", where), where + ".where");
    try {
      r.where = RowPredicate::parse(text);
    } catch (const Error& e) {
      fail(where + ".where", e.what());
    }
  } else if (r.source == "topk") {
    check_keys(j, where, {"label", "source", "data", "key", "k", "direction"});
    r.data = as_string(require(j, "data", where), where + ".data");
    r.key = as_string(require(j, "key", where), where + ".key");
    r.k = as_index(require(j, "k", where), where + ".k");
    if (j.contains("direction")) {
      const auto d = as_string(j.at("direction"), where + ".direction");
      if (d == "highest") r.direction = Direction::kHighest;
      else if (d == "lowest") r.direction = Direction::kLowest;
      else fail(where + ".direction", "expected 'highest' or 'lowest'");
    }
  } else if (r.source == "gaussian") {
    check_keys(j, where, {"label", "source", "means", "stds", "n", "seed"});
    r.means = as_named_values(require(j, "means", where), where + ".means");
    r.stds = as_named_values(require(j, "stds", where), where + ".stds");
    r.n = as_index(require(j, "n", where), where + ".n");
    r.seed = as_seed(require(j, "seed", where), where + ".seed");
  } else {
    fail(where + ".source", "unknown source '" + r.source +
                                "' (expected dataset, filter, topk or gaussian)");
  }
  return r;
}

RequestSpec parse_request(const Json& j, std::size_t index, const std::string& where) {
  check_keys(j, where, {"id", "method", "reference", "references", "instance", "feature",
                        "features", "params", "seed"});
  RequestSpec q;
  q.where = where;
  q.id = j.contains("id") ? as_string(j.at("id"), where + ".id") : "r" + std::to_string(index);
  q.method = as_string(require(j, "method", where), where + ".method");
  if (q.method == "shap") q.method = "shapley_exact";
  if (j.contains("reference"))
    q.references = as_string_list(j.at("reference"), where + ".reference");
  if (j.contains("references")) {
    auto more = as_string_list(j.at("references"), where + ".references");
    q.references.insert(q.references.end(), more.begin(), more.end());
  }
  if (j.contains("instance")) {
    const auto& in = j.at("instance");
    const std::string iw = where + ".instance";
    InstanceSpec spec;
    if (in.is_object() && in.contains("row")) {
      check_keys(in, iw, {"data", "row"});
      spec.data = as_string(require(in, "data", iw), iw + ".data");
      spec.row = as_index(in.at("row"), iw + ".row");
    } else if (in.is_object() && in.contains("values")) {
      check_keys(in, iw, {"values"});
      spec.values = as_named_values(in.at("values"), iw + ".values");
    } else {
      fail(iw, "expected {\"data\": ..., \"row\": N} or {\"values\": {...}}");
    }
    q.instance = std::move(spec);
  }
  if (j.contains("feature")) q.features = as_string_list(j.at("feature"), where + ".feature");
  if (j.contains("features")) {
    auto more = as_string_list(j.at("features"), where + ".features");
    q.features.insert(q.features.end(), more.begin(), more.end());
  }
  if (j.contains("params")) {
    if (!j.at("params").is_object()) fail(where + ".params", "expected an object");
    q.params = j.at("params");
  }
  if (j.contains("seed")) q.seed = as_seed(j.at("seed"), where + ".seed");
  return q;
}

const std::map<std::string, std::set<std::string>>& method_params() {
  static const std::map<std::string, std::set<std::string>> params{
      {"shapley_exact", {"features"}},
      {"shapley_sampled", {"n_permutations"}},
      {"breakdown", {"order"}},
      {"pdp", {"grid", "grid_points"}},
      {"ale", {"bins"}},
      {"ice", {"grid", "grid_points", "max_instances"}},
      {"importance", {"loss", "repeats"}},
      {"contrast", {"attribution", "tolerance", "n_permutations", "features", "order"}},
      {"drift", {"grid", "grid_points", "bins", "kappa", "delta", "loss"}},
  };
  return params;
}

}  // namespace

bool is_attribution_method(std::string_view m) {
  return m == "shapley_exact" || m == "shapley_sampled" || m == "breakdown";
}

bool is_profile_method(std::string_view m) {
  return m == "pdp" || m == "ale" || m == "ice";
}

RunConfig parse_config(const Json& doc, const fs::path& base_dir) {
  check_keys(doc, "config", {"data", "model", "references", "requests", "output", "threads", "svg"});
  RunConfig c;
  if (doc.contains("data")) {
    if (!doc.at("data").is_object()) fail("data", "expected an object of named datasets");
    for (const auto& [name, spec] : doc.at("data").items())
      c.data.push_back(parse_data(name, spec, base_dir, "data." + name));
  }
  c.model = parse_model(require(doc, "model", "config"), "model");
  if (doc.contains("references")) {
    const auto& refs = doc.at("references");
    if (!refs.is_array()) fail("references", "expected a list");
    for (std::size_t i = 0; i < refs.size(); ++i)
      c.references.push_back(parse_reference(refs[i], "references[" + std::to_string(i) + "]"));
  }
  if (doc.contains("requests")) {
    const auto& reqs = doc.at("requests");
    if (!reqs.is_array()) fail("requests", "expected a list");
    for (std::size_t i = 0; i < reqs.size(); ++i)
      c.requests.push_back(parse_request(reqs[i], i, "requests[" + std::to_string(i) + "]"));
  }
  if (doc.contains("output")) c.output = base_dir / as_string(doc.at("output"), "output");
  else c.output = base_dir / "refx-out";
  if (doc.contains("threads")) c.threads = static_cast<int>(as_index(doc.at("threads"), "threads"));
  if (doc.contains("svg")) {
    if (!doc.at("svg").is_boolean()) fail("svg", "expected true/false");
    c.svg = doc.at("svg").get<bool>();
  }
  return c;
}

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot read config file");
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return parse_config(doc, file.parent_path());
}

void validate_config(const RunConfig& c) {
  std::map<std::string, const DataSpec*> data;
  for (const auto& d : c.data) {
    if (!data.emplace(d.name, &d).second) fail("data." + d.name, "duplicate dataset name");
    if (!fs::exists(d.path)) fail("data." + d.name + ".path", "file not found: " + d.path.string());
  }
  auto require_data = [&](const std::string& name, const std::string& where) {
    if (!data.count(name)) fail(where, "undefined dataset '" + name + "'");
    return data.at(name);
  };
  if (c.threads < 1) fail("threads", "must be >= 1");

  const auto& m = c.model;
  if (!m.train.empty()) {
    const auto* d = require_data(m.train, "model.train");
    if (!d->csv.target) fail("model.train", "training data '" + m.train + "' declares no target");
  }
  if (m.kind == "external" && (m.command.empty() || m.features.empty()))
    fail("model", "external model needs a command and features");

  std::map<std::string, const ReferenceSpec*> refs;
  for (std::size_t i = 0; i < c.references.size(); ++i) {
    const auto& r = c.references[i];
    const std::string where = "references[" + std::to_string(i) + "]";
    if (r.label.empty()) fail(where + ".label", "must not be empty");
    if (!refs.emplace(r.label, &r).second) fail(where + ".label", "duplicate reference label '" + r.label + "'");
    if (r.source != "gaussian") require_data(r.data, where + ".data");
    if (r.source == "topk" && r.k < 1) fail(where + ".k", "must be >= 1");
    if (r.source == "gaussian") {
      if (r.n < 1) fail(where + ".n", "must be >= 1");
      if (r.means.size() != r.stds.size()) fail(where + ".stds", "must name the same features as means");
      for (std::size_t k = 0; k < r.means.size(); ++k) {
        if (r.means[k].first != r.stds[k].first)
          fail(where + ".stds", "must list the features of means in the same order");
        if (r.stds[k].second < 0) fail(where + ".stds." + r.stds[k].first, "negative standard deviation");
      }
    }
  }

  // Artifact names are built from (id, reference); a repeated pair would
  // overwrite an earlier artifact.
  std::set<std::pair<std::string, std::string>> outputs;
  for (const auto& q : c.requests) {
    const std::string& w = q.where;
    for (const auto& label : q.references)
      if (!outputs.emplace(q.id, label).second)
        fail(w + ".id", "id '" + q.id + "' is already used with reference '" + label + "'");
    const auto known = method_params().find(q.method);
    if (known == method_params().end())
      fail(w + ".method", "unknown method '" + q.method + "'");
    for (const auto& [key, value] : q.params.items()) {
      (void)value;
      if (!known->second.count(key)) fail(w + ".params." + key, "unknown parameter for " + q.method);
    }
    if (q.references.empty())
      fail(w + ".reference", "a reference is mandatory; name one of the configured references");
    for (const auto& label : q.references)
      if (!refs.count(label)) fail(w + ".reference", "undefined reference label '" + label + "'");
    if (q.instance && q.instance->row) require_data(q.instance->data, w + ".instance.data");

    const bool attribution = is_attribution_method(q.method);
    if ((attribution || q.method == "contrast") && !q.instance)
      fail(w + ".instance", q.method + " explains one instance; give a row or values");
    if (q.method == "contrast" && q.references.size() < 2)
      fail(w + ".reference", "contrast needs at least two references");
    if (q.method == "drift" && q.references.size() != 2)
      fail(w + ".reference", "drift compares exactly two references");
    if ((is_profile_method(q.method) || q.method == "drift") && q.features.empty())
      fail(w + ".feature", q.method + " needs at least one feature");
    std::string attribution_kind = q.method;
    if (q.method == "contrast") {
      attribution_kind = "shapley_exact";
      if (q.params.contains("attribution")) {
        const auto& a = q.params.at("attribution");
        if (!a.is_string()) fail(w + ".params.attribution", "expected a string");
        attribution_kind = a.get<std::string>();
        if (attribution_kind == "shap") attribution_kind = "shapley_exact";
        if (!is_attribution_method(attribution_kind))
          fail(w + ".params.attribution", "unknown attribution method '" + attribution_kind + "'");
      }
    }
    if ((attribution_kind == "shapley_sampled" || q.method == "importance") && !q.seed)
      fail(w + ".seed", q.method + " is stochastic; a seed is mandatory");
    if (q.method == "importance" || q.method == "drift") {
      for (const auto& label : q.references) {
        const auto* r = refs.at(label);
        if (r->source == "gaussian")
          fail(w + ".reference", q.method + " needs a data-backed reference; '" + label +
                                     "' is synthetic");
        if (q.method == "importance" && !data.at(r->data)->csv.target)
          fail(w + ".reference", "importance needs a target; dataset '" + r->data +
                                     "' declares none");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct BoundReference {
  ReferenceSample sample;
  std::optional<Dataset> rows;  // backing data (with target) when data-based
};

std::string sanitize(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '-' || ch == '_';
    out += ok ? ch : '_';
  }
  return out.empty() ? "_" : out;
}

void write_atomic(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

class Runner {
 public:
  Runner(const RunConfig& config, std::ostream* log) : c_(config), log_(log) {}

  RunResult execute() {
    validate_config(c_);
    fs::create_directories(c_.output);
    RunResult result{.manifest = c_.output / "manifest.json"};
    try {
      load_data();
      build_model();
      for (const auto& q : c_.requests) {
        if (log_) *log_ << "running " << q.id << " (" << q.method << ")\n";
        execute(q, result);
      }
    } catch (const std::exception& e) {
      write_manifest(result, e.what());
      throw;
    }
    write_manifest(result, std::nullopt);
    return result;
  }

 private:
  Execution exec() const { return {c_.threads}; }

  void load_data() {
    for (const auto& d : c_.data)
      data_.emplace(d.name, load_csv(d.path, d.csv).with_label(d.name));
  }

  void build_model() {
    const auto& m = c_.model;
    if (m.kind == "linear") {
      model_ = linear_model(m.coefficients, m.intercept);
    } else if (m.kind == "external") {
      model_ = external_predictor(m.command, m.features);
    } else {
      const Dataset& train = data_.at(m.train);
      if (m.kind == "logistic") model_ = fit_logistic(train, m.logistic);
      else if (m.kind == "tree") model_ = fit_tree(train, m.tree);
      else model_ = fit_boosted_stumps(train, m.boost);
    }
  }

  // Bound on first use, so requests before a failing reference still write
  // their artifacts.
  const BoundReference& reference(const std::string& label) {
    if (auto it = refs_.find(label); it != refs_.end()) return it->second;
    const auto& r = *std::find_if(c_.references.begin(), c_.references.end(),
                                  [&](const ReferenceSpec& s) { return s.label == label; });
    return refs_.emplace(label, bind(r)).first->second;
  }

  BoundReference bind(const ReferenceSpec& r) const {
    if (r.source == "gaussian")
      return {ref_gaussian(r.means, r.stds, r.n, r.seed, r.label).with_source(r.verbatim),
              std::nullopt};
    const Dataset& ds = data_.at(r.data);
    std::optional<Dataset> rows;
    if (r.source == "dataset") {
      rows = ds;
    } else if (r.source == "filter") {
      rows = filter_rows(ds, *r.where);
      if (rows->n_rows() == 0)
        throw ExplainError("empty reference '" + r.label + "': filter " +
                           r.where->to_string() + " matched no rows of '" + r.data + "'");
    } else {
      TopKKey key = r.key;
      if (r.key == "@prediction") key = *model_;
      rows = top_k_rows(ds, key, r.k, r.direction);
    }
    rows = rows->with_label(r.label);
    return {ref_from_dataset(*rows, r.label).with_source(r.verbatim), rows};
  }

  Vector instance(const RequestSpec& q) const {
    const auto& in = *q.instance;
    if (in.row) return instance_from(*model_, data_.at(in.data), *in.row);
    return instance_from(*model_, in.values);
  }

  template <typename T>
  T param(const RequestSpec& q, const char* key, T fallback) const {
    if (!q.params.contains(key)) return fallback;
    try {
      return q.params.at(key).get<T>();
    } catch (const Json::exception&) {
      fail(q.where + ".params." + key, "wrong type");
    }
  }

  std::uint64_t seed(const RequestSpec& q) const { return q.seed.value_or(0); }

  void emit(RunResult& result, const std::string& file, const std::string& content,
            std::string method, std::string reference, std::optional<std::uint64_t> seed) {
    write_atomic(c_.output / file, content);
    result.artifacts.push_back({file, std::move(method), std::move(reference), seed});
  }

  AttributionSet attribution(const RequestSpec& q, const std::string& method,
                             const ReferenceSample& ref, const Vector& x) const {
    if (method == "shapley_exact") {
      std::optional<std::vector<std::string>> features;
      if (q.params.contains("features"))
        features = param<std::vector<std::string>>(q, "features", {});
      return shapley_exact(*model_, ref, x, features, exec());
    }
    if (method == "shapley_sampled")
      return shapley_sampled(*model_, ref, x, param<Index>(q, "n_permutations", 1000),
                             seed(q), exec());
    return breakdown(*model_, ref, x,
                     param<std::vector<std::string>>(q, "order", model_->feature_names()));
  }

  void execute(const RequestSpec& q, RunResult& result) {
    const std::string id = sanitize(q.id);
    if (is_attribution_method(q.method)) {
      const Vector x = instance(q);
      for (const auto& label : q.references) {
        const auto a = attribution(q, q.method, reference(label).sample, x);
        const std::string base = id + "." + sanitize(label);
        emit(result, base + ".json", emit_json(a), q.method, label, a.seed);
        if (c_.svg) emit(result, base + ".svg", emit_svg(a), q.method, label, a.seed);
      }
    } else if (q.method == "pdp" || q.method == "ale") {
      for (const auto& feature : q.features) {
        std::vector<Profile> curves;
        for (const auto& label : q.references) {
          const auto& ref = reference(label).sample;
          Profile p = q.method == "pdp"
                          ? pdp(*model_, ref, feature,
                                make_grid(ref, feature,
                                          parse_grid_strategy(param<std::string>(q, "grid", "quantile")),
                                          param<Index>(q, "grid_points", 20)),
                                exec())
                          : ale(*model_, ref, feature, param<Index>(q, "bins", 10), exec());
          emit(result, id + "." + sanitize(feature) + "." + sanitize(label) + ".json",
               emit_json(p), q.method, label, std::nullopt);
          curves.push_back(std::move(p));
        }
        if (c_.svg)
          emit(result, id + "." + sanitize(feature) + ".svg", emit_svg(curves), q.method,
               join(q.references, " | "), std::nullopt);
      }
    } else if (q.method == "ice") {
      for (const auto& feature : q.features) {
        for (const auto& label : q.references) {
          const auto& ref = reference(label).sample;
          const Vector grid = make_grid(
              ref, feature, parse_grid_strategy(param<std::string>(q, "grid", "quantile")),
              param<Index>(q, "grid_points", 20));
          std::optional<ReferenceSample> instances;
          if (q.instance) {
            instances.emplace(model_->feature_names(), Matrix(instance(q).transpose()),
                              std::nullopt, label, ref.source());
          } else {
            const Index cap = std::min(ref.n_rows(), param<Index>(q, "max_instances", 50));
            const Matrix rows = ref.gather(model_->feature_names()).topRows(cap);
            instances.emplace(model_->feature_names(), rows, std::nullopt, label, ref.source());
          }
          const auto curves = ice(*model_, *instances, feature, grid, exec());
          const std::string base = id + "." + sanitize(feature) + "." + sanitize(label);
          emit(result, base + ".json", emit_json(curves), "ice", label, std::nullopt);
          if (c_.svg) emit(result, base + ".svg", emit_svg(curves), "ice", label, std::nullopt);
        }
      }
    } else if (q.method == "importance") {
      for (const auto& label : q.references) {
        const auto& bound = reference(label);
        const auto features = q.features.empty() ? model_->feature_names() : q.features;
        auto table = permutation_importance(
            *model_, *bound.rows, parse_loss(param<std::string>(q, "loss", "mse")), features,
            param<Index>(q, "repeats", 10), seed(q), exec());
        table.reference = bound.sample.info();
        emit(result, id + "." + sanitize(label) + ".json", emit_json(table), "importance",
             label, table.seed);
      }
    } else if (q.method == "contrast") {
      const Vector x = instance(q);
      std::string method = param<std::string>(q, "attribution", "shapley_exact");
      if (method == "shap") method = "shapley_exact";
      std::vector<AttributionSet> sets;
      for (const auto& label : q.references) {
        sets.push_back(attribution(q, method, reference(label).sample, x));
        const std::string base = id + "." + sanitize(label);
        emit(result, base + ".json", emit_json(sets.back()), method, label, sets.back().seed);
        if (c_.svg) emit(result, base + ".svg", emit_svg(sets.back()), method, label, sets.back().seed);
      }
      std::optional<double> tolerance;
      if (q.params.contains("tolerance")) tolerance = param<double>(q, "tolerance", 0.0);
      const auto report = compare_attributions(sets, tolerance);
      emit(result, id + ".contrast.json", emit_json(report), "contrast",
           join(q.references, " | "), q.seed);
    } else if (q.method == "drift") {
      const auto& a = reference(q.references[0]);
      const auto& b = reference(q.references[1]);
      DriftSettings s;
      s.grid = parse_grid_strategy(param<std::string>(q, "grid", "quantile"));
      s.grid_points = param<Index>(q, "grid_points", s.grid_points);
      s.bins = param<Index>(q, "bins", s.bins);
      s.kappa = param<double>(q, "kappa", s.kappa);
      if (q.params.contains("delta")) s.delta = param<double>(q, "delta", 0.0);
      s.loss = parse_loss(param<std::string>(q, "loss", "mse"));
      s.exec = exec();
      auto report = drift_report(*model_, *a.rows, *b.rows, q.features, s);
      report.reference_a = a.sample.info();
      report.reference_b = b.sample.info();
      emit(result, id + ".drift.json", emit_json(report), "drift",
           join(q.references, " | "), std::nullopt);
      if (c_.svg) {
        for (const auto& f : report.features) {
          emit(result, id + "." + sanitize(f.feature) + ".pdp.svg",
               emit_svg(std::vector<Profile>{f.pdp_a, f.pdp_b}), "drift",
               join(q.references, " | "), std::nullopt);
          emit(result, id + "." + sanitize(f.feature) + ".ale.svg",
               emit_svg(std::vector<Profile>{f.ale_a, f.ale_b}), "drift",
               join(q.references, " | "), std::nullopt);
        }
      }
    }
  }

  void write_manifest(const RunResult& result, const std::optional<std::string>& error) {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["toolkit_version"] = REFX_VERSION;
    doc["status"] = error ? "error" : "ok";
    if (error) doc["error"] = *error;
    Json list = Json::array();
    for (const auto& e : result.artifacts) {
      Json entry;
      entry["file"] = e.file;
      entry["method"] = e.method;
      entry["reference"] = e.reference;
      entry["seed"] = e.seed ? Json(*e.seed) : Json(nullptr);
      list.push_back(std::move(entry));
    }
    doc["artifacts"] = std::move(list);
    write_atomic(result.manifest, doc.dump(2) + "\n");
  }

  const RunConfig& c_;
  std::ostream* log_;
  std::map<std::string, Dataset> data_;
  std::optional<Predictor> model_;
  std::map<std::string, BoundReference> refs_;
};

}  // namespace

RunResult run(const RunConfig& config, std::ostream* log) {
  return Runner(config, log).execute();
}

}  // namespace refx
