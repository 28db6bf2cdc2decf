#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "refx/models.hpp"
#include "refx/reference.hpp"
#include "refx/serialize.hpp"
#include "support.hpp"

namespace refx::test {

// 5/3 wages + 2/3 savings.
inline Predictor credit_model() {
  return linear_model({{"savings", 2.0 / 3}, {"wages", 5.0 / 3}}, 0);
}

inline ReferenceSample point_reference(double savings, double wages, const std::string& label) {
  Matrix row(1, 2);
  row << savings, wages;
  return ReferenceSample({"savings", "wages"}, row, std::nullopt, label,
                         "point(" + label + ")");
}

inline Vector credit_instance() { return (Vector(2) << 40, 35).finished(); }

enum class ModelFamily { kLinear, kTree, kBoosted };

// A nonlinear target so trees and stumps have something to fit.
inline Dataset training_data(Rng& rng, Index n, Index p) {
  Matrix m(n, p + 1);
  m.leftCols(p) = random_matrix(rng, n, p, -2, 2);
  for (Index i = 0; i < n; ++i) {
    double y = 0;
    for (Index j = 0; j < p; ++j) y += (j + 1) * std::sin(m(i, j) * (j % 3 + 1)) + 0.3 * m(i, j) * m(i, (j + 1) % p);
    m(i, p) = y + 0.1 * rng.normal();
  }
  auto names = feature_names(p);
  names.push_back("y");
  return Dataset(names, m, "y");
}

inline Predictor random_model(Rng& rng, ModelFamily family, Index p) {
  switch (family) {
    case ModelFamily::kLinear: {
      NamedValues coefs;
      for (const auto& n : feature_names(p)) coefs.emplace_back(n, 3 * rng.normal());
      return linear_model(coefs, rng.normal());
    }
    case ModelFamily::kTree:
      return fit_tree(training_data(rng, 80, p), {.max_depth = 4, .min_leaf = 2});
    case ModelFamily::kBoosted:
      return fit_boosted_stumps(training_data(rng, 80, p), {.n_trees = 40, .lr = 0.2});
  }
  throw std::logic_error("family");
}

// Random rows with random positive weights.
inline ReferenceSample random_reference(Rng& rng, Index n, Index p, const std::string& label = "rand") {
  Vector w(n);
  for (Index i = 0; i < n; ++i) w[i] = 0.1 + rng.uniform();
  return ReferenceSample(feature_names(p), random_matrix(rng, n, p, -2, 2), w, label, "random");
}

inline Vector random_instance(Rng& rng, Index p) {
  return random_matrix(rng, p, 1, -2, 2);
}

// A config touching every method, for determinism checks.
inline void write_everything_config(const TempDir& dir, const std::string& out, int threads) {
  Rng rng(5);
  std::ostringstream csv;
  csv << "a,b,c,y\n";
  for (int i = 0; i < 60; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.uniform();
    csv << a << "," << b << "," << c << "," << a * b + std::sin(3 * c) << "\n";
  }
  write_file(dir / "train.csv", csv.str());
  const Json doc = {
      {"data", {{"train", {{"path", "train.csv"}, {"target", "y"}}}}},
      {"model", {{"kind", "boosted"}, {"train", "train"}, {"n_trees", 30}, {"max_depth", 2}}},
      {"references",
       {{{"label", "all"}, {"source", "dataset"}, {"data", "train"}},
        {{"label", "high-c"}, {"source", "filter"}, {"data", "train"}, {"where", "c>0.5"}},
        {{"label", "top"}, {"source", "topk"}, {"data", "train"}, {"key", "@prediction"}, {"k", 10}},
        {{"label", "g"}, {"source", "gaussian"}, {"means", {{"a", 0}, {"b", 1}, {"c", 0.5}}},
         {"stds", {{"a", 1}, {"b", 0.5}, {"c", 0.1}}}, {"n", 50}, {"seed", 3}}}},
      {"requests",
       {{{"id", "s"}, {"method", "shapley_sampled"}, {"reference", "all"},
         {"instance", {{"data", "train"}, {"row", 4}}}, {"params", {{"n_permutations", 64}}}, {"seed", 9}},
        {{"id", "e"}, {"method", "shap"}, {"reference", {"high-c", "g"}},
         {"instance", {{"values", {{"a", 1}, {"b", -1}, {"c", 0.25}}}}}},
        {{"id", "bd"}, {"method", "breakdown"}, {"reference", "top"},
         {"instance", {{"data", "train"}, {"row", 0}}}, {"params", {{"order", {"c", "a", "b"}}}}},
        {{"id", "p"}, {"method", "pdp"}, {"reference", {"all", "high-c"}}, {"features", {"a", "c"}}},
        {{"id", "al"}, {"method", "ale"}, {"reference", "all"}, {"features", {"b"}}, {"params", {{"bins", 6}}}},
        {{"id", "ic"}, {"method", "ice"}, {"reference", "top"}, {"features", {"a"}}},
        {{"id", "imp"}, {"method", "importance"}, {"reference", "all"}, {"params", {{"repeats", 5}}}, {"seed", 4}},
        {{"id", "ct"}, {"method", "contrast"}, {"reference", {"all", "high-c", "top"}},
         {"instance", {{"data", "train"}, {"row", 2}}},
         {"params", {{"attribution", "shapley_sampled"}, {"n_permutations", 32}}}, {"seed", 1}},
        {{"id", "dr"}, {"method", "drift"}, {"reference", {"all", "high-c"}}, {"features", {"a", "b"}}}}},
      {"output", out},
      {"threads", threads},
      {"svg", true}};
  write_file(dir / ("everything-" + out + ".json"), doc.dump(2));
}

}  // namespace refx::test
