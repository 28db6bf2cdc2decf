#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refx/common.hpp"
#include "refx/loss.hpp"
#include "refx/models.hpp"
#include "refx/reference.hpp"

namespace refx {

// Every explainer here takes its reference sample explicitly. Coalition
// values are interventional: features outside a coalition are taken from
// reference rows, ignoring dependence between features.

enum class AttributionMethod { kShapleyExact, kShapleySampled, kBreakdown };
enum class ProfileKind { kPdp, kAle, kIce };
enum class GridStrategy { kQuantile, kEquidistant };

std::string_view to_string(AttributionMethod m);
std::string_view to_string(ProfileKind k);
std::string_view to_string(GridStrategy g);
GridStrategy parse_grid_strategy(std::string_view text);

struct AttributionSet {
  std::vector<std::string> features;
  Vector values;
  Vector instance;  // aligned with features
  double baseline = 0;
  double prediction = 0;
  AttributionMethod method = AttributionMethod::kShapleyExact;
  ReferenceInfo reference;
  std::string value_function = "interventional";
  // Sampled only.
  std::optional<Vector> std_errors;
  std::optional<std::uint64_t> seed;
  Index n_permutations = 0;
  // Largest |sum of one permutation path - (prediction - baseline)|.
  double max_path_residual = 0;
  // Breakdown only.
  std::vector<std::string> order;

  double value(std::string_view feature) const;
  // sum(values) - (prediction - baseline)
  double completeness_residual() const;
};

struct Profile {
  std::string feature;
  Vector grid;  // strictly increasing
  Vector values;
  ProfileKind kind = ProfileKind::kPdp;
  ReferenceInfo reference;
  std::optional<Index> instance_id;  // ICE only
  std::vector<Index> empty_bins;     // ALE only
};

// Piecewise-linear evaluation; flat extrapolation outside the grid.
double interpolate(const Profile& p, double z);

struct ImportanceTable {
  std::vector<std::string> features;
  Vector ratios;      // mean over repeats
  Matrix per_repeat;  // features x repeats
  double baseline_loss = 0;
  Loss loss = Loss::kMse;
  Index repeats = 0;
  std::uint64_t seed = 0;
  ReferenceInfo reference;
};

// Explained row, aligned with pred.feature_names().
Vector instance_from(const Predictor& pred, const NamedValues& values);
Vector instance_from(const Predictor& pred, const Dataset& ds, Index row);

// quantile: type-7 quantiles at k/(n-1), duplicates removed (may return
// fewer points). equidistant: n points from min to max inclusive.
Vector make_grid(const ReferenceSample& ref, std::string_view feature,
                 GridStrategy strategy, Index n_points);

// Mean over repeats of loss(permuted) / loss(original). Repeat r of feature
// i permutes with stream seed Rng::derive(seed, {i, r}).
ImportanceTable permutation_importance(const Predictor& pred,
                                       const Dataset& eval_ds, Loss loss,
                                       const std::vector<std::string>& features,
                                       Index repeats, std::uint64_t seed,
                                       Execution exec = {});

Profile pdp(const Predictor& pred, const ReferenceSample& ref,
            std::string_view feature, const Vector& grid, Execution exec = {});

// One curve per instance row (instance_id = row index).
std::vector<Profile> ice(const Predictor& pred, const ReferenceSample& instances,
                         std::string_view feature, const Vector& grid,
                         Execution exec = {});

// Finite-difference ALE over quantile bins; centered so the weighted mean of
// the curve at the reference values is 0. Grid = bin edges.
Profile ale(const Predictor& pred, const ReferenceSample& ref,
            std::string_view feature, Index n_bins, Execution exec = {});

inline constexpr Index kMaxExactShapleyFeatures = 20;

// Exact Shapley values by enumerating all 2^p coalitions (p <= 20). With a
// feature subset, the players are that subset and the remaining features stay
// at the instance values; the reported baseline is then v(empty set).
AttributionSet shapley_exact(
    const Predictor& pred, const ReferenceSample& ref, const Vector& instance,
    const std::optional<std::vector<std::string>>& features = std::nullopt,
    Execution exec = {});

// Permutation sampling of marginal contributions. Permutation k is drawn
// from stream (seed, k).
AttributionSet shapley_sampled(const Predictor& pred, const ReferenceSample& ref,
                               const Vector& instance, Index n_permutations,
                               std::uint64_t seed, Execution exec = {});

AttributionSet breakdown(const Predictor& pred, const ReferenceSample& ref,
                         const Vector& instance,
                         const std::vector<std::string>& order);

}  // namespace refx
