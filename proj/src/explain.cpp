#include "refx/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "refx/distance.hpp"
#include "refx/rng.hpp"

namespace refx {

std::string_view to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::kShapleyExact: return "shapley_exact";
    case AttributionMethod::kShapleySampled: return "shapley_sampled";
    case AttributionMethod::kBreakdown: return "breakdown";
  }
  return "?";
}

std::string_view to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::kPdp: return "pdp";
    case ProfileKind::kAle: return "ale";
    case ProfileKind::kIce: return "ice";
  }
  return "?";
}

std::string_view to_string(GridStrategy g) {
  return g == GridStrategy::kQuantile ? "quantile" : "equidistant";
}

GridStrategy parse_grid_strategy(std::string_view text) {
  if (text == "quantile") return GridStrategy::kQuantile;
  if (text == "equidistant") return GridStrategy::kEquidistant;
  throw InvalidArgument("unknown grid strategy '" + std::string(text) + "'");
}

double AttributionSet::value(std::string_view feature) const {
  const auto it = std::find(features.begin(), features.end(), feature);
  if (it == features.end())
    throw InvalidArgument("attribution has no feature '" + std::string(feature) + "'");
  return values[it - features.begin()];
}

double AttributionSet::completeness_residual() const {
  return ordered_sum(values) - (prediction - baseline);
}

double interpolate(const Profile& p, double z) {
  const Vector& g = p.grid;
  if (g.size() == 1 || z <= g[0]) return p.values[0];
  if (z >= g[g.size() - 1]) return p.values[g.size() - 1];
  const auto* hi = std::upper_bound(g.data(), g.data() + g.size(), z);
  const Index k = hi - g.data();
  const double t = (z - g[k - 1]) / (g[k] - g[k - 1]);
  return p.values[k - 1] + t * (p.values[k] - p.values[k - 1]);
}

namespace {

Index predictor_column(const Predictor& pred, std::string_view feature) {
  const auto& names = pred.feature_names();
  const auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end())
    throw FeatureMismatch("predictor '" + pred.description() + "'",
                          {std::string(feature)});
  return static_cast<Index>(it - names.begin());
}

void check_instance(const Predictor& pred, const Vector& instance) {
  if (instance.size() != pred.n_features())
    throw InvalidArgument("instance has " + std::to_string(instance.size()) +
                          " values; predictor declares " +
                          std::to_string(pred.n_features()) + " features");
  if (!instance.allFinite()) throw InvalidArgument("instance has non-finite values");
}

double weighted_mean_prediction(const Predictor& pred, const Matrix& rows,
                                const Vector& weights) {
  return ordered_dot(weights, pred.predict(rows));
}

}  // namespace

Vector instance_from(const Predictor& pred, const NamedValues& values) {
  Vector out(pred.n_features());
  std::vector<std::string> missing;
  for (Index j = 0; j < pred.n_features(); ++j) {
    const auto& name = pred.feature_names()[static_cast<std::size_t>(j)];
    const auto it = std::find_if(values.begin(), values.end(),
                                 [&](const auto& kv) { return kv.first == name; });
    if (it == values.end()) missing.push_back(name);
    else out[j] = it->second;
  }
  if (!missing.empty()) throw FeatureMismatch("instance", missing);
  return out;
}

Vector instance_from(const Predictor& pred, const Dataset& ds, Index row) {
  if (row < 0 || row >= ds.n_rows())
    throw InvalidArgument("instance row " + std::to_string(row) + " out of range");
  return ds.select(pred.feature_names()).row(row).transpose();
}

Vector make_grid(const ReferenceSample& ref, std::string_view feature,
                 GridStrategy strategy, Index n_points) {
  if (n_points < 2) throw InvalidArgument("grid needs at least 2 points");
  const auto sorted = detail::sorted_copy(ref.column(feature));
  std::vector<double> grid;
  if (strategy == GridStrategy::kQuantile) {
    for (Index k = 0; k < n_points; ++k) {
      const double q = quantile_sorted(
          sorted, static_cast<double>(k) / static_cast<double>(n_points - 1));
      if (grid.empty() || q > grid.back()) grid.push_back(q);
    }
  } else {
    const double lo = sorted.front(), hi = sorted.back();
    if (!(hi > lo))
      throw ExplainError("equidistant grid for constant feature '" +
                         std::string(feature) + "' would have a single point");
    for (Index k = 0; k < n_points; ++k) {
      const double z = k == n_points - 1
                           ? hi
                           : lo + (hi - lo) * static_cast<double>(k) /
                                      static_cast<double>(n_points - 1);
      if (grid.empty() || z > grid.back()) grid.push_back(z);
    }
  }
  return Eigen::Map<const Vector>(grid.data(), static_cast<Index>(grid.size()));
}

// ---------------------------------------------------------------------------

ImportanceTable permutation_importance(const Predictor& pred,
                                       const Dataset& eval_ds, Loss loss,
                                       const std::vector<std::string>& features,
                                       Index repeats, std::uint64_t seed,
                                       Execution exec) {
  if (repeats < 1) throw InvalidArgument("importance needs repeats >= 1");
  if (features.empty()) throw InvalidArgument("importance needs at least one feature");
  const Vector y = eval_ds.target();
  for (const auto& f : features) eval_ds.column_index(f);
  const double base = loss_value(loss, pred.predict(eval_ds), y);
  if (!(base > 0))
    throw ExplainError("undefined importance ratio: baseline " +
                       std::string(to_string(loss)) + " loss is zero on '" +
                       eval_ds.label() + "'");

  const auto p = static_cast<Index>(features.size());
  Matrix per_repeat(p, repeats);
  parallel_for(static_cast<std::size_t>(p * repeats), exec.threads, [&](std::size_t k) {
    const Index i = static_cast<Index>(k) / repeats;
    const Index r = static_cast<Index>(k) % repeats;
    const auto s = Rng::derive(seed, {static_cast<std::uint64_t>(i),
                                      static_cast<std::uint64_t>(r)});
    const Dataset permuted =
        permute_column(eval_ds, features[static_cast<std::size_t>(i)], s);
    per_repeat(i, r) = loss_value(loss, pred.predict(permuted), y) / base;
  });
  Vector ratios(p);
  for (Index i = 0; i < p; ++i)
    ratios[i] = ordered_sum(per_repeat.row(i)) / static_cast<double>(repeats);

  return ImportanceTable{
      .features = features,
      .ratios = ratios,
      .per_repeat = per_repeat,
      .baseline_loss = base,
      .loss = loss,
      .repeats = repeats,
      .seed = seed,
      .reference = ReferenceInfo(eval_ds.label(), eval_ds.n_rows(),
                                 "evaluation dataset " + eval_ds.label()),
  };
}

Profile pdp(const Predictor& pred, const ReferenceSample& ref,
            std::string_view feature, const Vector& grid, Execution exec) {
  const Index j = predictor_column(pred, feature);
  if (grid.size() < 1) throw InvalidArgument("pdp: empty grid");
  const Matrix x = ref.gather(pred.feature_names());
  Vector values(grid.size());
  parallel_for(static_cast<std::size_t>(grid.size()), exec.threads, [&](std::size_t k) {
    Matrix z = x;
    z.col(j).setConstant(grid[static_cast<Index>(k)]);
    values[static_cast<Index>(k)] = weighted_mean_prediction(pred, z, ref.weights());
  });
  return Profile{.feature = std::string(feature),
                 .grid = grid,
                 .values = values,
                 .kind = ProfileKind::kPdp,
                 .reference = ref.info()};
}

std::vector<Profile> ice(const Predictor& pred, const ReferenceSample& instances,
                         std::string_view feature, const Vector& grid,
                         Execution exec) {
  const Index j = predictor_column(pred, feature);
  if (grid.size() < 1) throw InvalidArgument("ice: empty grid");
  const Matrix x = instances.gather(pred.feature_names());
  std::vector<Vector> curves(static_cast<std::size_t>(x.rows()));
  parallel_for(curves.size(), exec.threads, [&](std::size_t i) {
    Matrix z = x.row(static_cast<Index>(i)).replicate(grid.size(), 1);
    z.col(j) = grid;
    curves[i] = pred.predict(z);
  });
  std::vector<Profile> out;
  out.reserve(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i)
    out.push_back(Profile{.feature = std::string(feature),
                          .grid = grid,
                          .values = std::move(curves[i]),
                          .kind = ProfileKind::kIce,
                          .reference = instances.info(),
                          .instance_id = static_cast<Index>(i)});
  return out;
}

Profile ale(const Predictor& pred, const ReferenceSample& ref,
            std::string_view feature, Index n_bins, Execution exec) {
  (void)exec;
  if (n_bins < 1) throw InvalidArgument("ale needs n_bins >= 1");
  const Index j = predictor_column(pred, feature);
  const Matrix x = ref.gather(pred.feature_names());
  const Vector& w = ref.weights();
  const auto sorted = detail::sorted_copy(x.col(j));
  if (!(sorted.back() > sorted.front()))
    throw ExplainError("ale: feature '" + std::string(feature) +
                       "' is constant in reference '" + ref.label() + "'");

  std::vector<double> edges;
  for (Index k = 0; k <= n_bins; ++k) {
    const double q =
        quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(n_bins));
    if (edges.empty() || q > edges.back()) edges.push_back(q);
  }
  const auto n_edges = static_cast<Index>(edges.size());
  const Index bins = n_edges - 1;

  // Bin b covers (edges[b], edges[b+1]]; the first bin also takes edges[0].
  std::vector<Index> bin_of(static_cast<std::size_t>(x.rows()));
  Matrix lower = x, upper = x;
  for (Index i = 0; i < x.rows(); ++i) {
    const double v = x(i, j);
    auto it = std::lower_bound(edges.begin() + 1, edges.end(), v);
    if (it == edges.end()) --it;  // v == max after rounding
    const Index b = static_cast<Index>(it - edges.begin()) - 1;
    bin_of[static_cast<std::size_t>(i)] = b;
    lower(i, j) = edges[static_cast<std::size_t>(b)];
    upper(i, j) = edges[static_cast<std::size_t>(b + 1)];
  }
  const Vector diff = pred.predict(upper) - pred.predict(lower);

  Vector effect_sum = Vector::Zero(bins), weight_sum = Vector::Zero(bins);
  for (Index i = 0; i < x.rows(); ++i) {
    const Index b = bin_of[static_cast<std::size_t>(i)];
    effect_sum[b] += w[i] * diff[i];
    weight_sum[b] += w[i];
  }
  Vector accumulated(n_edges);
  accumulated[0] = 0;
  std::vector<Index> empty;
  for (Index b = 0; b < bins; ++b) {
    double effect = 0;
    if (weight_sum[b] > 0) effect = effect_sum[b] / weight_sum[b];
    else empty.push_back(b);
    accumulated[b + 1] = accumulated[b] + effect;
  }

  Profile profile{.feature = std::string(feature),
                  .grid = Eigen::Map<const Vector>(edges.data(), n_edges),
                  .values = accumulated,
                  .kind = ProfileKind::kAle,
                  .reference = ref.info(),
                  .empty_bins = std::move(empty)};
  double center = 0;
  for (Index i = 0; i < x.rows(); ++i) center += w[i] * interpolate(profile, x(i, j));
  profile.values.array() -= center;
  return profile;
}

// ---------------------------------------------------------------------------
// Attributions

namespace {

double binomial(Index n, Index k) {
  double c = 1;
  for (Index i = 1; i <= k; ++i)
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

std::vector<Index> resolve_players(const Predictor& pred,
                                   const std::vector<std::string>& names) {
  std::vector<Index> out;
  std::set<Index> seen;
  for (const auto& n : names) {
    const Index j = predictor_column(pred, n);
    if (!seen.insert(j).second)
      throw InvalidArgument("feature '" + n + "' listed twice");
    out.push_back(j);
  }
  return out;
}

}  // namespace

AttributionSet shapley_exact(const Predictor& pred, const ReferenceSample& ref,
                             const Vector& instance,
                             const std::optional<std::vector<std::string>>& features,
                             Execution exec) {
  check_instance(pred, instance);
  const std::vector<std::string> player_names =
      features ? *features : pred.feature_names();
  if (player_names.empty()) throw InvalidArgument("shapley_exact: no features");
  const auto players = resolve_players(pred, player_names);
  const auto p = static_cast<Index>(players.size());
  if (p > kMaxExactShapleyFeatures)
    throw ExplainError("shapley_exact: " + std::to_string(p) +
                       " features need 2^" + std::to_string(p) +
                       " coalition evaluations; the limit is " +
                       std::to_string(kMaxExactShapleyFeatures) +
                       ". Use shapley_sampled instead.");

  Matrix base_rows = ref.gather(pred.feature_names());
  {
    std::vector<bool> is_player(static_cast<std::size_t>(pred.n_features()), false);
    for (Index j : players) is_player[static_cast<std::size_t>(j)] = true;
    for (Index j = 0; j < pred.n_features(); ++j)
      if (!is_player[static_cast<std::size_t>(j)])
        base_rows.col(j).setConstant(instance[j]);
  }
  const double prediction = pred.predict_one(instance);
  const std::size_t n_masks = std::size_t{1} << p;
  std::vector<double> value(n_masks);
  // The full coalition goes through the same weighted mean as the others, so
  // a feature the model never reads gets exactly zero.
  parallel_for(n_masks, exec.threads, [&](std::size_t mask) {
    Matrix z = base_rows;
    for (Index b = 0; b < p; ++b)
      if (mask >> b & 1) z.col(players[b]).setConstant(instance[players[b]]);
    value[mask] = weighted_mean_prediction(pred, z, ref.weights());
  });

  // weight(s) = s! (p-s-1)! / p! = 1 / (p * C(p-1, s))
  std::vector<double> weight(static_cast<std::size_t>(p));
  for (Index s = 0; s < p; ++s)
    weight[static_cast<std::size_t>(s)] =
        1.0 / (static_cast<double>(p) * binomial(p - 1, s));

  Vector attr = Vector::Zero(p);
  for (Index i = 0; i < p; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double sum = 0;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      sum += weight[s] * (value[mask | bit] - value[mask]);
    }
    attr[i] = sum;
  }

  Vector x(p);
  for (Index i = 0; i < p; ++i) x[i] = instance[players[i]];
  return AttributionSet{.features = player_names,
                        .values = attr,
                        .instance = x,
                        .baseline = value[0],
                        .prediction = prediction,
                        .method = AttributionMethod::kShapleyExact,
                        .reference = ref.info()};
}

AttributionSet shapley_sampled(const Predictor& pred, const ReferenceSample& ref,
                               const Vector& instance, Index n_permutations,
                               std::uint64_t seed, Execution exec) {
  check_instance(pred, instance);
  if (n_permutations < 2) throw InvalidArgument("shapley_sampled needs n_permutations >= 2");
  const Index p = pred.n_features();
  const Matrix rows = ref.gather(pred.feature_names());
  const Vector& w = ref.weights();
  const double base = weighted_mean_prediction(pred, rows, w);
  const double prediction = pred.predict_one(instance);

  Matrix contrib(n_permutations, p);
  parallel_for(static_cast<std::size_t>(n_permutations), exec.threads, [&](std::size_t k) {
    std::vector<Index> perm(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng::stream(seed, {static_cast<std::uint64_t>(k)}).shuffle(perm.begin(), perm.end());
    Matrix z = rows;
    double prev = base;
    for (Index t = 0; t < p; ++t) {
      const Index col = perm[static_cast<std::size_t>(t)];
      double cur;
      if (t == p - 1) {
        cur = prediction;
      } else {
        z.col(col).setConstant(instance[col]);
        cur = weighted_mean_prediction(pred, z, w);
      }
      contrib(static_cast<Index>(k), col) = cur - prev;
      prev = cur;
    }
  });

  const double n = static_cast<double>(n_permutations);
  Vector mean(p), se(p);
  for (Index i = 0; i < p; ++i) {
    mean[i] = ordered_sum(contrib.col(i)) / n;
    double ss = 0;
    for (Index k = 0; k < n_permutations; ++k)
      ss += (contrib(k, i) - mean[i]) * (contrib(k, i) - mean[i]);
    se[i] = std::sqrt(ss / (n - 1)) / std::sqrt(n);
  }
  double worst = 0;
  for (Index k = 0; k < n_permutations; ++k)
    worst = std::max(worst,
                     std::abs(ordered_sum(contrib.row(k)) - (prediction - base)));

  return AttributionSet{.features = pred.feature_names(),
                        .values = mean,
                        .instance = instance,
                        .baseline = base,
                        .prediction = prediction,
                        .method = AttributionMethod::kShapleySampled,
                        .reference = ref.info(),
                        .std_errors = se,
                        .seed = seed,
                        .n_permutations = n_permutations,
                        .max_path_residual = worst};
}

AttributionSet breakdown(const Predictor& pred, const ReferenceSample& ref,
                         const Vector& instance,
                         const std::vector<std::string>& order) {
  check_instance(pred, instance);
  const auto cols = resolve_players(pred, order);
  if (static_cast<Index>(cols.size()) != pred.n_features())
    throw InvalidArgument("breakdown order must be a permutation of the predictor's " +
                          std::to_string(pred.n_features()) + " features");
  const Index p = pred.n_features();
  Matrix z = ref.gather(pred.feature_names());
  const Vector& w = ref.weights();
  const double base = weighted_mean_prediction(pred, z, w);
  const double prediction = pred.predict_one(instance);
  Vector attr(p);
  double prev = base;
  for (Index t = 0; t < p; ++t) {
    const Index col = cols[static_cast<std::size_t>(t)];
    double cur;
    if (t == p - 1) {
      cur = prediction;
    } else {
      z.col(col).setConstant(instance[col]);
      cur = weighted_mean_prediction(pred, z, w);
    }
    attr[col] = cur - prev;
    prev = cur;
  }
  return AttributionSet{.features = pred.feature_names(),
                        .values = attr,
                        .instance = instance,
                        .baseline = base,
                        .prediction = prediction,
                        .method = AttributionMethod::kBreakdown,
                        .reference = ref.info(),
                        .order = order};
}

}  // namespace refx
