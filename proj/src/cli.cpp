#include "refx/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "refx/runner.hpp"

namespace refx {

namespace fs = std::filesystem;

namespace {

// Thrown for command-line misuse; reported with the subcommand's usage text.
struct UsageError : Error {
  using Error::Error;
};

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  bool svg = false;

  std::string model;
  std::vector<std::string> model_features;
  std::string data;
  std::string data_a;
  std::string data_b;
  std::string target;
  std::vector<std::string> references;
  Index instance_row = 0;
  std::string instance;
  std::vector<std::string> features;

  std::string method;
  Index permutations = 0;
  std::vector<std::string> order;
  std::string grid;
  Index grid_points = 0;
  Index bins = 0;
  Index max_instances = 0;
  std::string loss;
  Index repeats = 0;
  std::string attribution;
  double tolerance = 0;
  double kappa = 0;
  double delta = 0;

  CLI::App* sub = nullptr;
  bool given(const std::string& name) const {
    const auto* opt = sub->get_option_no_throw(name);
    return opt && opt->count() > 0;
  }
};

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Integers stay integers (hyperparameters); everything else goes through the
// config parser as a string, which also accepts fractions like 5/3.
Json scalar(const std::string& text) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && ptr == text.data() + text.size()) return v;
  return text;
}

Json key_values(std::string_view text, std::string_view what) {
  Json obj = Json::object();
  if (text.empty()) return obj;
  for (const auto& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError(std::string(what) + ": expected name=value, got '" + item + "'");
    obj[item.substr(0, eq)] = scalar(item.substr(eq + 1));
  }
  return obj;
}

std::string absolute(const std::string& path) { return fs::absolute(path).string(); }

Json data_entry(const std::string& path, const Flags& f) {
  Json d{{"path", absolute(path)}};
  if (!f.target.empty()) d["target"] = f.target;
  return d;
}

// linear:a=5/3,b=2/3[,intercept=c] | logistic|tree|boosted[:hyper=v,...] |
// external:COMMAND (whitespace separated argv)
Json model_from_flag(const Flags& f) {
  const auto colon = f.model.find(':');
  const std::string kind = f.model.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : f.model.substr(colon + 1);
  Json m{{"kind", kind}};
  if (kind == "linear") {
    Json coefs = key_values(rest, "--model linear");
    if (coefs.contains("intercept")) {
      m["intercept"] = coefs["intercept"];
      coefs.erase("intercept");
    }
    m["coefficients"] = coefs;
  } else if (kind == "logistic" || kind == "tree" || kind == "boosted") {
    if (f.data.empty()) throw UsageError("--model " + kind + " trains on --data; none given");
    if (f.target.empty()) throw UsageError("--model " + kind + " needs --target");
    m["train"] = "data";
    const Json hyper = key_values(rest, "--model " + kind);
    for (const auto& [k, v] : hyper.items()) m[k] = v;
  } else if (kind == "external") {
    Json argv = Json::array();
    std::istringstream words(rest);
    for (std::string w; words >> w;) argv.push_back(w);
    if (argv.empty()) throw UsageError("--model external: needs a command, e.g. external:./model");
    m["command"] = argv;
    std::vector<std::string> names = f.model_features;
    if (names.empty()) {
      const auto& path = f.data.empty() ? f.data_a : f.data;
      if (path.empty())
        throw UsageError("--model external: pass --model-features or --data to name the inputs");
      CsvOptions csv;
      if (!f.target.empty()) csv.target = f.target;
      names = load_csv(path, csv).feature_names();
    }
    m["features"] = names;
  } else {
    throw UsageError("--model: unknown kind '" + kind +
                     "' (expected linear, logistic, tree, boosted or external)");
  }
  return m;
}

// dataset | filter:EXPR | topk:KEY:K[:highest|lowest]. The label is the flag text.
Json reference_from_flag(const std::string& spec, const std::string& data_name) {
  Json r{{"label", spec}};
  if (spec == "dataset") {
    r["source"] = "dataset";
    r["data"] = data_name;
  } else if (spec.rfind("filter:", 0) == 0) {
    r["source"] = "filter";
    r["data"] = data_name;
    r["where"] = spec.substr(7);
  } else if (spec.rfind("topk:", 0) == 0) {
    const auto parts = split(spec.substr(5), ':');
    if (parts.size() < 2 || parts.size() > 3)
      throw UsageError("--reference " + spec + ": expected topk:KEY:K[:highest|lowest]");
    r["source"] = "topk";
    r["data"] = data_name;
    r["key"] = parts[0];
    r["k"] = scalar(parts[1]);
    if (parts.size() == 3) r["direction"] = parts[2];
  } else {
    throw UsageError("--reference " + spec +
                     ": expected a configured label, dataset, filter:EXPR or topk:KEY:K");
  }
  return r;
}

Json read_config_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot read config file");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Flags layered over an optional config: the config supplies data, model and
// named references; flags add to or replace them and describe one request.
RunConfig build_request(const Flags& f, const std::string& method) {
  Json doc = f.config.empty() ? Json::object() : read_config_document(f.config);
  const fs::path base = f.config.empty() ? fs::current_path() : fs::path(f.config).parent_path();
  if (!doc.contains("data")) doc["data"] = Json::object();

  std::set<std::string> labels;
  if (doc.contains("references") && doc["references"].is_array())
    for (const auto& r : doc["references"])
      if (r.contains("label") && r["label"].is_string()) labels.insert(r["label"]);
  if (!doc.contains("references")) doc["references"] = Json::array();

  if (!f.data.empty()) doc["data"]["data"] = data_entry(f.data, f);
  if (!f.model.empty()) doc["model"] = model_from_flag(f);
  if (!doc.contains("model")) throw UsageError("--model is required (or a --config with a model)");

  Json request{{"id", method}, {"method", method}};
  std::vector<std::string> refs;
  if (method == "drift" && !f.data_a.empty()) {
    if (f.data_b.empty()) throw UsageError("drift: --data-a needs --data-b");
    doc["data"]["a"] = data_entry(f.data_a, f);
    doc["data"]["b"] = data_entry(f.data_b, f);
    std::string la = f.data_a, lb = f.data_b;
    if (la == lb) {
      la += " (a)";
      lb += " (b)";
    }
    doc["references"].push_back({{"label", la}, {"source", "dataset"}, {"data", "a"}});
    doc["references"].push_back({{"label", lb}, {"source", "dataset"}, {"data", "b"}});
    refs = {la, lb};
  }
  for (const auto& spec : f.references) {
    if (!labels.count(spec)) {
      if (f.data.empty())
        throw UsageError("--reference " + spec + " draws from --data; none given");
      doc["references"].push_back(reference_from_flag(spec, "data"));
      labels.insert(spec);
    }
    refs.push_back(spec);
  }
  request["reference"] = refs;

  if (f.given("--instance-row")) {
    if (f.data.empty()) throw UsageError("--instance-row selects a row of --data; none given");
    request["instance"] = {{"data", "data"}, {"row", f.instance_row}};
  } else if (f.given("--instance")) {
    request["instance"] = {{"values", key_values(f.instance, "--instance")}};
  }
  if (!f.features.empty()) request["features"] = f.features;
  if (f.given("--seed")) request["seed"] = f.seed;

  Json params = Json::object();
  if (f.given("--permutations")) params["n_permutations"] = f.permutations;
  if (f.given("--order")) params["order"] = f.order;
  if (f.given("--grid")) params["grid"] = f.grid;
  if (f.given("--grid-points")) params["grid_points"] = f.grid_points;
  if (f.given("--bins")) params["bins"] = f.bins;
  if (f.given("--max-instances")) params["max_instances"] = f.max_instances;
  if (f.given("--loss")) params["loss"] = f.loss;
  if (f.given("--repeats")) params["repeats"] = f.repeats;
  if (f.given("--attribution")) params["attribution"] = f.attribution;
  if (f.given("--tolerance")) params["tolerance"] = f.tolerance;
  if (f.given("--kappa")) params["kappa"] = f.kappa;
  if (f.given("--delta")) params["delta"] = f.delta;
  if (!params.empty()) request["params"] = params;
  doc["requests"] = Json::array({request});

  if (!f.out.empty()) doc["output"] = absolute(f.out);
  else if (f.config.empty()) doc["output"] = absolute("refx-out");
  return parse_config(doc, base);
}

void apply_overrides(RunConfig& c, const Flags& f) {
  if (!f.out.empty()) c.output = fs::absolute(f.out);
  if (f.threads > 0) c.threads = f.threads;
  if (f.svg) c.svg = true;
  if (f.given("--seed"))
    for (auto& q : c.requests) q.seed = f.seed;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "Run configuration file (JSON)");
  sub->add_option("--seed", f.seed, "Seed for stochastic methods");
  sub->add_option("--out", f.out, "Output directory");
  sub->add_option("--threads", f.threads, "Worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--svg", f.svg, "Also write SVG plots");
}

void add_context(CLI::App* sub, Flags& f) {
  sub->add_option("--model", f.model,
                  "linear:a=1,b=2[,intercept=c] | logistic|tree|boosted[:k=v,...] | "
                  "external:COMMAND");
  sub->add_option("--model-features", f.model_features, "Input names of an external model")
      ->delimiter(',');
  sub->add_option("--data", f.data, "CSV data file");
  sub->add_option("--target", f.target, "Target column of the data");
  sub->add_option("--reference", f.references,
                  "Reference: a configured label, dataset, filter:EXPR or topk:KEY:K[:lowest]")
      ->expected(1)
      ->take_all();
}

void add_instance(CLI::App* sub, Flags& f) {
  auto* row = sub->add_option("--instance-row", f.instance_row, "Explain this row of --data");
  sub->add_option("--instance", f.instance, "Explain these values, e.g. a=1,b=2")->excludes(row);
}

void require_reference(const Flags& f, const std::string& what) {
  if (f.references.empty())
    throw UsageError(what +
                     ": a reference is mandatory. Every explanation is relative to a reference "
                     "distribution and there is no default; pass --reference dataset to use all "
                     "rows of --data, or e.g. --reference filter:age>=50");
}

int execute(const RunConfig& config, std::ostream& out) {
  const auto result = run(config);
  for (const auto& a : result.artifacts) out << (config.output / a.file).string() << "\n";
  out << result.manifest.string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference-aware model explanations", "refx"};
  app.set_version_flag("--version", std::string(REFX_VERSION));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Flags f;
  auto* validate = app.add_subcommand("validate", "Check a run configuration without executing it");
  add_common(validate, f);
  validate->get_option("--config")->required();

  auto* run_cmd = app.add_subcommand("run", "Execute every request of a run configuration");
  add_common(run_cmd, f);
  run_cmd->get_option("--config")->required();

  auto* explain = app.add_subcommand("explain", "Explain one instance or one feature");
  add_common(explain, f);
  add_context(explain, f);
  add_instance(explain, f);
  explain->add_option("method", f.method,
                      "shap | shapley_exact | shapley_sampled | breakdown | pdp | ale | ice")
      ->required()
      ->check(CLI::IsMember({"shap", "shapley_exact", "shapley_sampled", "breakdown", "pdp",
                             "ale", "ice"}));
  explain->add_option("--feature", f.features, "Feature(s) for pdp, ale and ice")
      ->expected(1)
      ->take_all()
      ->delimiter(',');
  explain->add_option("--permutations", f.permutations, "Permutations for shapley_sampled");
  explain->add_option("--order", f.order, "Feature order for breakdown")->delimiter(',');
  explain->add_option("--grid", f.grid, "quantile | equidistant");
  explain->add_option("--grid-points", f.grid_points, "Grid size for pdp and ice");
  explain->add_option("--bins", f.bins, "Bins for ale");
  explain->add_option("--max-instances", f.max_instances, "Reference rows drawn as ICE curves");

  auto* contrast = app.add_subcommand("contrast", "Compare one instance's attributions across references");
  add_common(contrast, f);
  add_context(contrast, f);
  add_instance(contrast, f);
  contrast->add_option("--attribution", f.attribution,
                       "shapley_exact (default) | shapley_sampled | breakdown");
  contrast->add_option("--permutations", f.permutations, "Permutations for shapley_sampled");
  contrast->add_option("--tolerance", f.tolerance, "Sign-flip tolerance");

  auto* drift = app.add_subcommand("drift", "Compare marginals and explanations of two datasets");
  add_common(drift, f);
  add_context(drift, f);
  drift->add_option("--data-a", f.data_a, "First CSV");
  drift->add_option("--data-b", f.data_b, "Second CSV");
  drift->add_option("--feature", f.features, "Feature(s) to compare")
      ->required()
      ->expected(1)
      ->take_all()
      ->delimiter(',');
  drift->add_option("--grid", f.grid, "quantile | equidistant");
  drift->add_option("--grid-points", f.grid_points, "PDP grid size");
  drift->add_option("--bins", f.bins, "ALE bins");
  drift->add_option("--kappa", f.kappa, "KS threshold for similar marginals");
  drift->add_option("--delta", f.delta, "Curve distance threshold");
  drift->add_option("--loss", f.loss, "mse | mae | logloss | 1-auc");

  auto* importance = app.add_subcommand("importance", "Permutation importance on a reference");
  add_common(importance, f);
  add_context(importance, f);
  importance->add_option("--feature", f.features, "Feature(s) to permute (default: all)")
      ->expected(1)
      ->take_all()
      ->delimiter(',');
  importance->add_option("--loss", f.loss, "mse | mae | logloss | 1-auc");
  importance->add_option("--repeats", f.repeats, "Permutations per feature");

  CLI::App* active = nullptr;
  try {
    app.parse(argc, argv);
    for (auto* sub : {validate, run_cmd, explain, contrast, drift, importance})
      if (sub->parsed()) active = sub;
    f.sub = active;

    if (active == validate) {
      const auto config = load_config(f.config);
      validate_config(config);
      out << "ok: " << config.references.size() << " reference(s), "
          << config.requests.size() << " request(s)\n";
      return 0;
    }
    if (active == run_cmd) {
      auto config = load_config(f.config);
      apply_overrides(config, f);
      return execute(config, out);
    }

    std::string method = active->get_name();
    if (active == explain) {
      method = f.method == "shap" ? "shapley_exact" : f.method;
      require_reference(f, "explain " + f.method);
    } else if (active == drift) {
      if (f.data_a.empty() && f.references.size() != 2)
        throw UsageError("drift: pass --data-a and --data-b, or two --reference labels");
    } else {
      require_reference(f, method);
    }
    auto config = build_request(f, method);
    apply_overrides(config, f);
    return execute(config, out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << (active ? active->help() : app.help());
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace refx
