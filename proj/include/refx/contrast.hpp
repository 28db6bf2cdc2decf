#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refx/common.hpp"
#include "refx/explain.hpp"

namespace refx {

// Pearson correlation of average ranks. Throws ExplainError when either
// vector has zero rank variance.
double spearman(const Vector& x, const Vector& y);

struct FeatureContrast {
  std::string feature;
  Vector values;  // one per input set
  double max_delta = 0;
  bool sign_flip = false;
};

struct ContrastReport {
  std::vector<AttributionSet> inputs;
  std::vector<FeatureContrast> features;
  // Spearman of |attributions| between input pairs; NaN when undefined
  // (an input with all-equal magnitudes).
  Matrix spearman;
  // Feature names ordered by decreasing |attribution|, per input.
  std::vector<std::vector<std::string>> rankings;
  double tolerance = 0;

  std::vector<std::string> labels() const;
  // Combined context: labels joined by " | ", summed row counts.
  ReferenceInfo reference() const;
};

// tolerance defaults to 1e-6 * max |prediction - baseline| over the inputs.
ContrastReport compare_attributions(const std::vector<AttributionSet>& sets,
                                    std::optional<double> tolerance = std::nullopt);

struct CurveDistance {
  double l2 = 0;
  double sup = 0;
};

// Both curves interpolated onto the union of their grids, restricted to the
// overlapping range. l2 = sqrt(trapezoid integral of d^2 / range length).
CurveDistance compare_profiles(const Profile& a, const Profile& b);

struct DriftSettings {
  Index grid_points = 20;
  GridStrategy grid = GridStrategy::kQuantile;
  Index bins = 10;
  double kappa = 0.1;
  // Defaults to 0.05 * (max - min prediction on ds_a).
  std::optional<double> delta;
  Loss loss = Loss::kMse;
  Execution exec;
};

struct FeatureDrift {
  std::string feature;
  double ks = 0;
  double w1 = 0;
  CurveDistance pdp;
  CurveDistance ale;
  Profile pdp_a, pdp_b, ale_a, ale_b;
};

struct DriftReport {
  ReferenceInfo reference_a;
  ReferenceInfo reference_b;
  std::vector<FeatureDrift> features;
  Loss loss = Loss::kMse;
  std::optional<double> loss_a;  // present when both datasets have targets
  std::optional<double> loss_b;
  double kappa = 0;
  double delta = 0;
  Index grid_points = 0;
  GridStrategy grid = GridStrategy::kQuantile;
  Index bins = 0;
  // Every KS < kappa, yet some PDP or ALE distance > delta.
  bool similar_marginals_different_explanations = false;

  ReferenceInfo reference() const;
};

DriftReport drift_report(const Predictor& pred, const Dataset& ds_a,
                         const Dataset& ds_b,
                         const std::vector<std::string>& features,
                         const DriftSettings& settings = {});

}  // namespace refx
