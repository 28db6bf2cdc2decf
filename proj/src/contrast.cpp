#include "refx/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "refx/distance.hpp"

namespace refx {

namespace {

Vector average_ranks(const Vector& x) {
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return x[a] < x[b]; });
  Vector ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const Vector& x, const Vector& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidArgument("spearman: need two vectors of equal length >= 2");
  const Vector rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = ordered_sum(rx) / n, my = ordered_sum(ry) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (Index i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0)
    throw ExplainError("spearman: undefined for a vector with zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<std::string> ContrastReport::labels() const {
  std::vector<std::string> out;
  for (const auto& s : inputs) out.push_back(s.reference.label);
  return out;
}

ReferenceInfo ContrastReport::reference() const {
  Index rows = 0;
  std::vector<std::string> specs;
  for (const auto& s : inputs) {
    rows += s.reference.n_rows;
    specs.push_back(s.reference.spec);
  }
  return {join(labels(), " | "), rows, join(specs, " | ")};
}

ContrastReport compare_attributions(const std::vector<AttributionSet>& sets,
                                    std::optional<double> tolerance) {
  if (sets.size() < 2) throw InvalidArgument("contrast needs at least two attribution sets");
  const auto& first = sets.front();
  for (const auto& s : sets) {
    if (s.features != first.features)
      throw InvalidArgument("contrast: attribution sets have different features");
    if (s.instance.size() != first.instance.size() || s.instance != first.instance)
      throw InvalidArgument("contrast: attribution sets explain different instances");
  }
  double tau = 0;
  if (tolerance) {
    if (!(*tolerance >= 0)) throw InvalidArgument("contrast: tolerance must be >= 0");
    tau = *tolerance;
  } else {
    for (const auto& s : sets) tau = std::max(tau, std::abs(s.prediction - s.baseline));
    tau *= 1e-6;
  }

  const auto k = static_cast<Index>(sets.size());
  const auto p = first.features.size();
  ContrastReport report{.inputs = sets, .spearman = Matrix(k, k), .tolerance = tau};
  for (std::size_t f = 0; f < p; ++f) {
    FeatureContrast fc{.feature = first.features[f], .values = Vector(k)};
    for (Index s = 0; s < k; ++s)
      fc.values[s] = sets[static_cast<std::size_t>(s)].values[static_cast<Index>(f)];
    fc.max_delta = fc.values.maxCoeff() - fc.values.minCoeff();
    bool pos = false, neg = false;
    for (Index s = 0; s < k; ++s) {
      pos = pos || fc.values[s] > tau;
      neg = neg || fc.values[s] < -tau;
    }
    fc.sign_flip = pos && neg;
    report.features.push_back(std::move(fc));
  }

  std::vector<Vector> magnitudes;
  for (const auto& s : sets) magnitudes.push_back(s.values.cwiseAbs());
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) {
      double rho = std::numeric_limits<double>::quiet_NaN();
      if (p >= 2) {
        try {
          rho = spearman(magnitudes[static_cast<std::size_t>(a)],
                         magnitudes[static_cast<std::size_t>(b)]);
        } catch (const ExplainError&) {
        }
      }
      report.spearman(a, b) = rho;
    }

  for (const auto& m : magnitudes) {
    std::vector<std::size_t> order(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return m[static_cast<Index>(x)] > m[static_cast<Index>(y)];
    });
    std::vector<std::string> names;
    for (auto i : order) names.push_back(first.features[i]);
    report.rankings.push_back(std::move(names));
  }
  return report;
}

CurveDistance compare_profiles(const Profile& a, const Profile& b) {
  if (a.feature != b.feature)
    throw InvalidArgument("compare_profiles: curves describe different features ('" +
                          a.feature + "' vs '" + b.feature + "')");
  const double lo = std::max(a.grid[0], b.grid[0]);
  const double hi = std::min(a.grid[a.grid.size() - 1], b.grid[b.grid.size() - 1]);
  if (!(hi > lo))
    throw ExplainError("compare_profiles: grids of '" + a.feature + "' do not overlap");

  std::vector<double> points{lo, hi};
  for (const Vector* g : {&a.grid, &b.grid})
    for (Index i = 0; i < g->size(); ++i)
      if ((*g)[i] > lo && (*g)[i] < hi) points.push_back((*g)[i]);
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());

  CurveDistance d;
  double integral = 0, prev_sq = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double diff = interpolate(a, points[i]) - interpolate(b, points[i]);
    d.sup = std::max(d.sup, std::abs(diff));
    const double sq = diff * diff;
    if (i > 0) integral += (prev_sq + sq) / 2 * (points[i] - points[i - 1]);
    prev_sq = sq;
  }
  d.l2 = std::sqrt(integral / (hi - lo));
  return d;
}

ReferenceInfo DriftReport::reference() const {
  return {reference_a.label + " | " + reference_b.label,
          reference_a.n_rows + reference_b.n_rows,
          reference_a.spec + " | " + reference_b.spec};
}

DriftReport drift_report(const Predictor& pred, const Dataset& ds_a,
                         const Dataset& ds_b, const std::vector<std::string>& features,
                         const DriftSettings& settings) {
  if (features.empty()) throw InvalidArgument("drift: no features requested");
  std::string label_a = ds_a.label(), label_b = ds_b.label();
  if (label_a == label_b) {
    label_a += " (a)";
    label_b += " (b)";
  }
  const auto ref_a = ref_from_dataset(ds_a, label_a);
  const auto ref_b = ref_from_dataset(ds_b, label_b);

  const Vector scores_a = pred.predict(ds_a);
  double delta = 0;
  if (settings.delta) {
    delta = *settings.delta;
  } else {
    delta = 0.05 * (scores_a.maxCoeff() - scores_a.minCoeff());
  }

  DriftReport report{.reference_a = ref_a.info(),
                     .reference_b = ref_b.info(),
                     .loss = settings.loss,
                     .kappa = settings.kappa,
                     .delta = delta,
                     .grid_points = settings.grid_points,
                     .grid = settings.grid,
                     .bins = settings.bins};
  if (ds_a.target_name() && ds_b.target_name()) {
    report.loss_a = loss_value(settings.loss, scores_a, ds_a.target());
    report.loss_b = evaluate_loss(pred, ds_b, settings.loss);
  }

  bool marginals_similar = true, explanations_differ = false;
  for (const auto& f : features) {
    const auto col_a = ds_a.column(f);
    const auto col_b = ds_b.column(f);
    const Vector grid_a = make_grid(ref_a, f, settings.grid, settings.grid_points);
    const Vector grid_b = make_grid(ref_b, f, settings.grid, settings.grid_points);
    FeatureDrift fd{.feature = f,
                    .ks = ks_distance(col_a, col_b),
                    .w1 = wasserstein1(col_a, col_b),
                    .pdp_a = pdp(pred, ref_a, f, grid_a, settings.exec),
                    .pdp_b = pdp(pred, ref_b, f, grid_b, settings.exec),
                    .ale_a = ale(pred, ref_a, f, settings.bins, settings.exec),
                    .ale_b = ale(pred, ref_b, f, settings.bins, settings.exec)};
    fd.pdp = compare_profiles(fd.pdp_a, fd.pdp_b);
    fd.ale = compare_profiles(fd.ale_a, fd.ale_b);
    marginals_similar = marginals_similar && fd.ks < settings.kappa;
    explanations_differ = explanations_differ || fd.pdp.l2 > delta ||
                          fd.pdp.sup > delta || fd.ale.l2 > delta ||
                          fd.ale.sup > delta;
    report.features.push_back(std::move(fd));
  }
  report.similar_marginals_different_explanations =
      marginals_similar && explanations_differ;
  return report;
}

}  // namespace refx
