#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "refx/cli.hpp"
#include "refx/runner.hpp"

namespace fs = std::filesystem;

namespace refx {
namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "refx");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Golden config and data copied into a scratch directory so outputs land there.
fs::path stage_golden(const test::TempDir& dir) {
  const auto src = test::source_dir() / "configs" / "golden";
  fs::copy_file(src / "golden.json", dir / "golden.json");
  fs::copy_file(src / "loans.csv", dir / "loans.csv");
  return dir / "golden.json";
}

Json read_json(const fs::path& p) { return Json::parse(test::read_file(p)); }

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = test::read_file(e.path());
  return out;
}

// ---------------------------------------------------------------------------
// Config parsing and validation

TEST(Config, ZeroRequestsGiveEmptyManifest) {
  test::TempDir dir;
  test::write_file(dir / "c.json", R"({"model": {"kind": "linear", "coefficients": {"a": 1}}, "output": "o"})");
  const auto result = run(load_config(dir / "c.json"));
  EXPECT_TRUE(result.artifacts.empty());
  const Json m = read_json(dir / "o" / "manifest.json");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_TRUE(m["artifacts"].empty());
  EXPECT_EQ(m["schema_version"], "1");
  EXPECT_EQ(cli({"run", "--config", (dir / "c.json").string()}).code, 0);
}

TEST(Config, UndefinedReferenceLabelIsNamed) {
  test::TempDir dir;
  test::write_file(dir / "c.json", R"({
    "model": {"kind": "linear", "coefficients": {"a": 1}},
    "references": [{"label": "known", "source": "gaussian", "means": {"a": 0}, "stds": {"a": 1}, "n": 3, "seed": 1}],
    "requests": [{"method": "pdp", "reference": "payers", "features": ["a"]}]
  })");
  try {
    validate_config(load_config(dir / "c.json"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'payers'"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("requests[0]"), std::string::npos) << e.what();
  }
  const auto r = cli({"validate", "--config", (dir / "c.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("payers"), std::string::npos);
}

TEST(Config, Rejections) {
  const std::string model = R"("model": {"kind": "linear", "coefficients": {"a": 1}},
    "references": [{"label": "g", "source": "gaussian", "means": {"a": 0}, "stds": {"a": 1}, "n": 3, "seed": 1}],)";
  const std::vector<std::pair<std::string, std::string>> cases = {
      {R"("requests": [{"method": "shapley_sampled", "reference": "g", "instance": {"values": {"a": 1}}}])", "seed"},
      {R"("requests": [{"method": "pdp", "features": ["a"]}])", "reference is mandatory"},
      {R"("requests": [{"method": "pdp", "reference": "g", "features": ["a"], "params": {"bogus": 1}}])", "bogus"},
      {R"("requests": [{"method": "lime", "reference": "g"}])", "lime"},
      {R"("requests": [{"method": "shap", "reference": "g"}])", "instance"},
      {R"("requests": [{"method": "contrast", "reference": "g", "instance": {"values": {"a": 1}}}])", "contrast"},
      {R"("requests": [{"method": "importance", "reference": "g", "seed": 1}])", "importance"},
      {R"("requests": [], "surprise": 1)", "surprise"},
  };
  for (const auto& [requests, needle] : cases) {
    const Json doc = Json::parse("{" + model + requests + "}");
    try {
      validate_config(parse_config(doc, fs::current_path()));
      ADD_FAILURE() << "accepted: " << requests;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  }
}

// ---------------------------------------------------------------------------
// Golden run

TEST(Run, GoldenConfigMatchesClosedForm) {
  test::TempDir dir;
  const auto cfg = stage_golden(dir);
  const auto result = run(load_config(cfg));
  const fs::path out = dir / "out";

  auto attr = [&](const std::string& label) {
    const Json d = read_json(out / ("shap." + label + ".json"));
    EXPECT_EQ(d["reference"]["label"], label);
    return d["payload"];
  };
  const auto paid = attr("paid");
  EXPECT_NEAR(paid["attributions"]["savings"].get<double>(), -70.0 / 3, 1e-9);
  EXPECT_NEAR(paid["attributions"]["wages"].get<double>(), -125.0 / 3, 1e-9);
  EXPECT_NEAR(paid["baseline"].get<double>(), 150, 1e-9);
  EXPECT_NEAR(paid["prediction"].get<double>(), 85, 1e-9);
  const auto def = attr("defaulted");
  EXPECT_NEAR(def["attributions"]["savings"].get<double>(), 10, 1e-9);
  EXPECT_NEAR(def["attributions"]["wages"].get<double>(), -25.0 / 3, 1e-9);
  // "all": means savings 35, wages 44.
  const auto all = attr("all");
  EXPECT_NEAR(all["attributions"]["savings"].get<double>(), 2.0 / 3 * 5, 1e-9);
  EXPECT_NEAR(all["attributions"]["wages"].get<double>(), -15, 1e-9);

  const Json c = read_json(out / "contrast.contrast.json");
  EXPECT_EQ(c["method"], "contrast");
  EXPECT_EQ(c["reference"]["label"], "paid | defaulted");

  // The reference spec in every artifact is the verbatim config entry.
  EXPECT_NE(read_json(out / "shap.paid.json")["reference"]["spec"].get<std::string>().find("paid==1"),
            std::string::npos);
}

TEST(Run, ManifestListsEveryFileAndEveryFileParses) {
  test::TempDir dir;
  test::write_everything_config(dir, "o", 1);
  const auto result = run(load_config(dir / "everything-o.json"));
  const Json m = read_json(result.manifest);
  EXPECT_EQ(m["status"], "ok");
  std::set<std::string> listed;
  for (const auto& a : m["artifacts"]) {
    const std::string file = a["file"];
    listed.insert(file);
    ASSERT_TRUE(fs::exists(dir / "o" / file)) << file;
    if (file.ends_with(".json")) {
      EXPECT_NO_THROW(read_json(dir / "o" / file)) << file;
    } else {
      std::string why;
      EXPECT_TRUE(test::xml_well_formed(test::read_file(dir / "o" / file), &why)) << file << ": " << why;
    }
    EXPECT_FALSE(a["reference"].get<std::string>().empty());
  }
  for (const auto& e : fs::directory_iterator(dir / "o")) {
    const auto name = e.path().filename().string();
    if (name != "manifest.json") {
      EXPECT_TRUE(listed.count(name)) << "unlisted " << name;
    }
  }
  EXPECT_GE(listed.size(), 20u);
}

TEST(Run, ByteIdenticalAcrossRunsAndThreadCounts) {
  test::TempDir dir;
  test::write_everything_config(dir, "one", 1);
  test::write_everything_config(dir, "again", 1);
  test::write_everything_config(dir, "four", 4);
  run(load_config(dir / "everything-one.json"));
  run(load_config(dir / "everything-again.json"));
  run(load_config(dir / "everything-four.json"));
  const auto a = directory_bytes(dir / "one");
  EXPECT_EQ(a, directory_bytes(dir / "again"));
  EXPECT_EQ(a, directory_bytes(dir / "four"));
}

TEST(Run, ExplainerErrorLeavesPartialManifest) {
  test::TempDir dir;
  test::write_file(dir / "d.csv", "a,y\n1,0\n2,1\n");
  test::write_file(dir / "c.json", R"({
    "data": {"d": {"path": "d.csv", "target": "y"}},
    "model": {"kind": "linear", "coefficients": {"a": 1}},
    "references": [{"label": "all", "source": "dataset", "data": "d"},
                   {"label": "none", "source": "filter", "data": "d", "where": "a>5"}],
    "requests": [{"id": "first", "method": "pdp", "reference": "all", "features": ["a"]},
                 {"id": "second", "method": "pdp", "reference": "none", "features": ["a"]}],
    "output": "o"
  })");
  EXPECT_THROW(run(load_config(dir / "c.json")), Error);
  const Json m = read_json(dir / "o" / "manifest.json");
  EXPECT_EQ(m["status"], "error");
  EXPECT_NE(m["error"].get<std::string>().find("empty reference"), std::string::npos);
  ASSERT_EQ(m["artifacts"].size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "o" / m["artifacts"][0]["file"].get<std::string>()));
  EXPECT_EQ(cli({"run", "--config", (dir / "c.json").string()}).code, 1);
}

// ---------------------------------------------------------------------------
// CLI

TEST(Cli, ValidateGoldenConfig) {
  const auto r = cli({"validate", "--config", (test::source_dir() / "configs/golden/golden.json").string()});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, ExplainWithoutReferenceIsUsageError) {
  const auto r = cli({"explain", "shap", "--model", "linear:a=1", "--instance", "a=2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("a reference is mandatory"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("--reference"), std::string::npos);
}

TEST(Cli, UnknownFlagPrintsUsage) {
  const auto r = cli({"explain", "shap", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST(Cli, HelpOnEveryLevel) {
  for (const auto& sub : {"", "explain", "contrast", "drift", "importance", "validate", "run"}) {
    std::vector<std::string> args;
    if (*sub) args.push_back(sub);
    args.push_back("--help");
    const auto r = cli(args);
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, ExplainFromFlags) {
  test::TempDir dir;
  const auto csv = (test::source_dir() / "configs/golden/loans.csv").string();
  const auto r = cli({"explain", "shap", "--model", "linear:wages=5/3,savings=2/3", "--data", csv,
                      "--target", "paid", "--reference", "filter:paid==1", "--instance",
                      "savings=40,wages=35", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto files = directory_bytes(dir / "o");
  ASSERT_EQ(files.size(), 2u);  // artifact + manifest
  Json artifact;
  for (const auto& [name, bytes] : files)
    if (name != "manifest.json") artifact = Json::parse(bytes);
  EXPECT_EQ(artifact["reference"]["label"], "filter:paid==1");
  EXPECT_NEAR(artifact["payload"]["attributions"]["savings"].get<double>(), -70.0 / 3, 1e-9);
}

TEST(Cli, TrainedModelWithHyperparameters) {
  test::TempDir dir;
  const auto csv = (test::source_dir() / "configs/golden/loans.csv").string();
  for (const std::string model : {"tree:max_depth=2", "boosted:n_trees=5,lr=0.5"}) {
    const auto r = cli({"explain", "pdp", "--model", model, "--data", csv, "--target", "paid",
                        "--reference", "dataset", "--feature", "savings", "--out", (dir / "o").string()});
    ASSERT_EQ(r.code, 0) << model << ": " << r.err;
  }
  const auto r = cli({"explain", "pdp", "--model", "tree:depth=2", "--data", csv, "--target", "paid",
                      "--reference", "dataset", "--feature", "savings", "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, DriftOnIdenticalPathsIsAllZero) {
  test::TempDir dir;
  const auto csv = (test::source_dir() / "configs/golden/loans.csv").string();
  const auto r = cli({"drift", "--model", "linear:wages=5/3,savings=2/3", "--data-a", csv, "--data-b", csv,
                      "--target", "paid", "--feature", "savings,wages", "--out", (dir / "o").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json d = read_json(dir / "o" / "drift.drift.json");
  ASSERT_EQ(d["payload"]["features"].size(), 2u);
  for (const auto& f : d["payload"]["features"]) {
    EXPECT_EQ(f["ks"], 0.0);
    EXPECT_EQ(f["w1"], 0.0);
    EXPECT_EQ(f["pdp_distance"]["l2"], 0.0);
    EXPECT_EQ(f["pdp_distance"]["sup"], 0.0);
    EXPECT_EQ(f["ale_distance"]["l2"], 0.0);
    EXPECT_EQ(f["ale_distance"]["sup"], 0.0);
  }
  EXPECT_EQ(d["payload"]["similar_marginals_different_explanations"], false);
}

TEST(Cli, SeedAndThreadOverridesKeepBytes) {
  test::TempDir dir;
  test::write_everything_config(dir, "base", 1);
  const auto cfg = (dir / "everything-base.json").string();
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", (dir / "t1").string(), "--threads", "1"}).code, 0);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", (dir / "t3").string(), "--threads", "3"}).code, 0);
  ASSERT_EQ(cli({"run", "--config", cfg, "--out", (dir / "s").string(), "--seed", "1234"}).code, 0);
  const auto t1 = directory_bytes(dir / "t1");
  EXPECT_EQ(t1, directory_bytes(dir / "t3"));
  EXPECT_NE(t1.at("s.all.json"), directory_bytes(dir / "s").at("s.all.json"));
}

TEST(Cli, RealBinaryExitCodes) {
  const std::string bin = test::cli_binary();
  const std::string golden = (test::source_dir() / "configs/golden/golden.json").string();
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(bin + " validate --config " + golden), 0);
  EXPECT_EQ(status(bin + " explain shap --model linear:a=1 --instance a=1"), 2);
  EXPECT_EQ(status(bin + " --no-such-flag"), 2);
}

}  // namespace
}  // namespace refx
