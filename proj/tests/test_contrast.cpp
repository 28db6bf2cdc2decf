#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "refx/contrast.hpp"
#include "refx/distance.hpp"

namespace refx {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Profile line(const std::string& feature, const Vector& grid, double slope, double icpt = 0) {
  return Profile{.feature = feature,
                 .grid = grid,
                 .values = (slope * grid.array() + icpt).matrix(),
                 .kind = ProfileKind::kPdp,
                 .reference = ReferenceInfo("r", 1, "")};
}

// ---------------------------------------------------------------------------
// Spearman

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(spearman(vec({3, 1, 2, 9}), vec({3, 1, 2, 9})), 1.0);
  EXPECT_DOUBLE_EQ(spearman(vec({1, 2, 3, 4}), vec({4, 3, 2, 1})), -1.0);
  EXPECT_NEAR(spearman(vec({1, 2, 3}), vec({1, 3, 2})), 0.5, 1e-15);
}

TEST(Spearman, MatchesDistinctValueFormula) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const Index n = 2 + Index(rng.below(12));
    std::vector<double> rx(static_cast<std::size_t>(n)), ry(rx.size());
    std::iota(rx.begin(), rx.end(), 1.0);
    std::iota(ry.begin(), ry.end(), 1.0);
    rng.shuffle(rx.begin(), rx.end());
    rng.shuffle(ry.begin(), ry.end());
    // Values are a monotone map of the ranks, so ranks are known.
    Vector x(n), y(n);
    double d2 = 0;
    for (Index i = 0; i < n; ++i) {
      x[i] = std::exp(rx[std::size_t(i)]);
      y[i] = -1.0 / ry[std::size_t(i)];
      d2 += (rx[std::size_t(i)] - ry[std::size_t(i)]) * (rx[std::size_t(i)] - ry[std::size_t(i)]);
    }
    const double dn = double(n);
    EXPECT_NEAR(spearman(x, y), 1 - 6 * d2 / (dn * (dn * dn - 1)), 1e-12);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  // ranks x = [1.5, 1.5, 3], y = [1, 2, 3]
  const double mx = 2, my = 2;
  const double sxy = (1.5 - mx) * (1 - my) + (1.5 - mx) * (2 - my) + (3 - mx) * (3 - my);
  const double sxx = 2 * 0.25 + 1, syy = 2;
  EXPECT_NEAR(spearman(vec({5, 5, 7}), vec({1, 2, 3})), sxy / std::sqrt(sxx * syy), 1e-15);
}

TEST(Spearman, Errors) {
  EXPECT_THROW(spearman(vec({1, 1, 1}), vec({1, 2, 3})), ExplainError);
  EXPECT_THROW(spearman(vec({1}), vec({1})), InvalidArgument);
  EXPECT_THROW(spearman(vec({1, 2}), vec({1, 2, 3})), InvalidArgument);
}

TEST(Spearman, BoundedOnRandomInputs) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const Index n = 2 + Index(rng.below(8));
    Vector x(n), y(n);
    for (Index i = 0; i < n; ++i) {
      x[i] = double(rng.below(3));
      y[i] = double(rng.below(3));
    }
    try {
      const double r = spearman(x, y);
      EXPECT_GE(r, -1);
      EXPECT_LE(r, 1);
    } catch (const ExplainError&) {
      EXPECT_TRUE(x.minCoeff() == x.maxCoeff() || y.minCoeff() == y.maxCoeff());
    }
  }
}

// ---------------------------------------------------------------------------
// compare_attributions

TEST(CompareAttributions, CreditSignFlip) {
  const auto f = test::credit_model();
  const auto paid = shapley_exact(f, test::point_reference(75, 60, "paid"), test::credit_instance());
  const auto def = shapley_exact(f, test::point_reference(25, 40, "defaulted"), test::credit_instance());
  const auto r = compare_attributions({paid, def});
  ASSERT_EQ(r.features.size(), 2u);
  EXPECT_EQ(r.features[0].feature, "savings");
  EXPECT_TRUE(r.features[0].sign_flip);
  EXPECT_FALSE(r.features[1].sign_flip);
  EXPECT_NEAR(r.features[0].max_delta, 10 + 70.0 / 3, 1e-9);
  EXPECT_NEAR(r.features[1].max_delta, 125.0 / 3 - 25.0 / 3, 1e-9);
  EXPECT_NEAR(r.tolerance, 1e-6 * 65, 1e-15);
  EXPECT_EQ(r.labels(), (std::vector<std::string>{"paid", "defaulted"}));
  EXPECT_EQ(r.rankings[0], (std::vector<std::string>{"wages", "savings"}));
  EXPECT_EQ(r.rankings[1], (std::vector<std::string>{"savings", "wages"}));
  EXPECT_EQ(r.reference().label, "paid | defaulted");
  EXPECT_EQ(r.reference().n_rows, 2);
}

TEST(CompareAttributions, IdenticalSets) {
  Rng rng(3);
  const auto f = test::random_model(rng, test::ModelFamily::kTree, 4);
  const auto s = shapley_exact(f, test::random_reference(rng, 8, 4), test::random_instance(rng, 4));
  const auto r = compare_attributions({s, s});
  for (const auto& fc : r.features) {
    EXPECT_EQ(fc.max_delta, 0);
    EXPECT_FALSE(fc.sign_flip);
  }
  if (s.values.cwiseAbs().maxCoeff() > s.values.cwiseAbs().minCoeff()) {
    EXPECT_DOUBLE_EQ(r.spearman(0, 1), 1.0);
  }
}

TEST(CompareAttributions, SharedZeroFeatureNeverFlips) {
  const auto f = make_predictor({"a", "unused", "c"}, [](const Eigen::Ref<const Matrix>& x) -> Vector {
    return x.col(0).cwiseProduct(x.col(2));
  });
  Rng rng(4);
  const Vector x = test::random_instance(rng, 3);
  std::vector<AttributionSet> sets;
  for (int k = 0; k < 3; ++k)
    sets.push_back(shapley_exact(
        f, ReferenceSample({"a", "unused", "c"}, test::random_matrix(rng, 5, 3, -3, 3), std::nullopt,
                           "r" + std::to_string(k), ""),
        x));
  const auto r = compare_attributions(sets);
  EXPECT_FALSE(r.features[1].sign_flip);
  EXPECT_EQ(r.features[1].max_delta, 0);
  // Even a zero tolerance cannot flip exact zeros.
  EXPECT_FALSE(compare_attributions(sets, 0.0).features[1].sign_flip);
}

TEST(CompareAttributions, FlipImpliesMagnitudesAboveTolerance) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const auto f = test::random_model(rng, test::ModelFamily(t % 3), 3);
    const Vector x = test::random_instance(rng, 3);
    std::vector<AttributionSet> sets;
    for (int k = 0; k < 2 + t % 3; ++k)
      sets.push_back(shapley_exact(f, test::random_reference(rng, 4, 3, "r" + std::to_string(k)), x));
    const auto r = compare_attributions(sets);
    for (const auto& fc : r.features) {
      if (!fc.sign_flip) continue;
      EXPECT_GT(fc.values.maxCoeff(), r.tolerance);
      EXPECT_LT(fc.values.minCoeff(), -r.tolerance);
    }
    for (Index a = 0; a < r.spearman.rows(); ++a)
      for (Index b = 0; b < r.spearman.cols(); ++b)
        if (!std::isnan(r.spearman(a, b))) {
          EXPECT_GE(r.spearman(a, b), -1);
          EXPECT_LE(r.spearman(a, b), 1);
        }
  }
}

TEST(CompareAttributions, PermutationInvariantUpToRelabeling) {
  Rng rng(6);
  const auto f = test::random_model(rng, test::ModelFamily::kTree, 4);
  const Vector x = test::random_instance(rng, 4);
  std::vector<AttributionSet> sets;
  for (int k = 0; k < 4; ++k)
    sets.push_back(shapley_exact(f, test::random_reference(rng, 6, 4, "r" + std::to_string(k)), x));
  const auto base = compare_attributions(sets);
  std::vector<int> perm{0, 1, 2, 3};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<AttributionSet> shuffled;
    for (int i : perm) shuffled.push_back(sets[std::size_t(i)]);
    const auto r = compare_attributions(shuffled);
    EXPECT_EQ(r.tolerance, base.tolerance);
    for (std::size_t j = 0; j < r.features.size(); ++j) {
      EXPECT_EQ(r.features[j].sign_flip, base.features[j].sign_flip);
      EXPECT_EQ(r.features[j].max_delta, base.features[j].max_delta);
      for (Index s = 0; s < 4; ++s)
        EXPECT_EQ(r.features[j].values[s], base.features[j].values[perm[std::size_t(s)]]);
    }
    for (Index a = 0; a < 4; ++a)
      for (Index b = 0; b < 4; ++b) {
        const double want = base.spearman(perm[std::size_t(a)], perm[std::size_t(b)]);
        if (std::isnan(want)) {
          EXPECT_TRUE(std::isnan(r.spearman(a, b)));
        } else {
          EXPECT_DOUBLE_EQ(r.spearman(a, b), want);
        }
      }
  }
}

TEST(CompareAttributions, UndefinedSpearmanIsNan) {
  const auto f = linear_model({{"a", 1.0}, {"b", 1.0}}, 0);
  const ReferenceSample ref({"a", "b"}, Matrix::Zero(1, 2), std::nullopt, "zero", "");
  const ReferenceSample ref2({"a", "b"}, (Matrix(1, 2) << 0, 3).finished(), std::nullopt, "other", "");
  const Vector x = vec({2, 2});
  const auto r = compare_attributions({shapley_exact(f, ref, x), shapley_exact(f, ref2, x)});
  EXPECT_TRUE(std::isnan(r.spearman(0, 1)));
}

TEST(CompareAttributions, Errors) {
  const auto f = test::credit_model();
  const auto a = shapley_exact(f, test::point_reference(75, 60, "paid"), test::credit_instance());
  const auto b = shapley_exact(f, test::point_reference(75, 60, "paid"), vec({1, 2}));
  EXPECT_THROW(compare_attributions({a}), InvalidArgument);
  EXPECT_THROW(compare_attributions({a, b}), InvalidArgument);
  auto c = a;
  c.features = {"wages", "savings"};
  EXPECT_THROW(compare_attributions({a, c}), InvalidArgument);
  EXPECT_THROW(compare_attributions({a, a}, -1.0), InvalidArgument);
}

TEST(CompareAttributions, SignFlipSurvivesSampledReferences) {
  const Index n = 2000;
  const auto f = test::credit_model();
  const auto paid = ref_gaussian({{"savings", 75}, {"wages", 60}}, {{"savings", 5}, {"wages", 5}}, n, 11, "paid");
  const auto def = ref_gaussian({{"savings", 25}, {"wages", 40}}, {{"savings", 5}, {"wages", 5}}, n, 12, "defaulted");
  const auto sp = shapley_exact(f, paid, test::credit_instance());
  const auto sd = shapley_exact(f, def, test::credit_instance());
  // Closed form at the sample means, and the means within 4 sigma/sqrt(n).
  const double slack = 2.0 / 3 * 4 * 5 / std::sqrt(double(n));
  EXPECT_NEAR(sp.value("savings"), 2.0 / 3 * (40 - paid.column("savings").mean()), 1e-9);
  EXPECT_NEAR(sp.value("savings"), -70.0 / 3, slack);
  EXPECT_NEAR(sd.value("savings"), 10, slack);
  const auto r = compare_attributions({sp, sd});
  EXPECT_TRUE(r.features[0].sign_flip);
  EXPECT_FALSE(r.features[1].sign_flip);
}

// ---------------------------------------------------------------------------
// compare_profiles

TEST(CompareProfiles, Examples) {
  const Vector g = Vector::LinSpaced(5, 0, 1);
  const auto z = line("a", g, 1);
  const auto d0 = compare_profiles(z, z);
  EXPECT_EQ(d0.l2, 0);
  EXPECT_EQ(d0.sup, 0);
  const auto d1 = compare_profiles(line("a", g, 0, 0), line("a", g, 0, 1));
  EXPECT_NEAR(d1.l2, 1, 1e-15);
  EXPECT_EQ(d1.sup, 1);
}

TEST(CompareProfiles, TrapezoidAgainstAnalyticIntegral) {
  // Difference z on [0, 1]: exact l2 = sqrt(1/3). Trapezoid error for z^2 on
  // panels of width h is h^2 / 6 per unit length.
  for (Index m : {1, 2, 5, 50}) {
    const Vector g = Vector::LinSpaced(m + 1, 0, 1);
    const auto d = compare_profiles(line("a", g, 1), line("a", g, 2));
    const double h = 1.0 / double(m);
    EXPECT_LE(std::abs(d.l2 * d.l2 - 1.0 / 3), h * h / 6 + 1e-15) << m;
    EXPECT_NEAR(d.l2 * d.l2, oracle::trapezoid([](double z) { return z * z; }, 0, 1, int(m)), 1e-15);
    EXPECT_NEAR(d.sup, 1, 1e-15);
  }
}

TEST(CompareProfiles, UnionGridAndOverlap) {
  // a on [0, 4] with 3 points, b on [1, 6] with 6 points; overlap [1, 4].
  const auto a = line("a", vec({0, 2, 4}), 1);
  const auto b = line("a", vec({1, 2, 3, 4, 5, 6}), 0, 2);
  const auto d = compare_profiles(a, b);
  // diff = z - 2; union nodes 1, 2, 3, 4 give squared diffs 1, 0, 1, 4, so the
  // trapezoid sum is 0.5 + 0.5 + 2.5 = 3.5 over a range of 3.
  EXPECT_DOUBLE_EQ(d.sup, 2);
  EXPECT_NEAR(d.l2, std::sqrt(3.5 / 3), 1e-15);
}

TEST(CompareProfiles, SymmetricAndZeroOnlyWhenEqual) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    auto grid = [&] {
      std::vector<double> g{0, 1};
      const auto extra = rng.below(5);
      for (std::uint64_t k = 0; k < extra; ++k) g.push_back(rng.uniform());
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
      return Vector(Eigen::Map<Vector>(g.data(), Index(g.size())));
    };
    Profile a = line("a", grid(), 0), b = line("a", grid(), 0);
    a.values = test::random_matrix(rng, a.grid.size(), 1);
    b.values = test::random_matrix(rng, b.grid.size(), 1);
    const auto ab = compare_profiles(a, b), ba = compare_profiles(b, a);
    EXPECT_EQ(ab.l2, ba.l2);
    EXPECT_EQ(ab.sup, ba.sup);
    EXPECT_GT(ab.sup, 0);
    EXPECT_GE(ab.l2, 0);
  }
}

TEST(CompareProfiles, Errors) {
  EXPECT_THROW(compare_profiles(line("a", vec({0, 1}), 1), line("b", vec({0, 1}), 1)), InvalidArgument);
  EXPECT_THROW(compare_profiles(line("a", vec({0, 1}), 1), line("a", vec({2, 3}), 1)), ExplainError);
}

// ---------------------------------------------------------------------------
// drift_report

Dataset two_columns(const std::string& label, const Vector& a, const Vector& b) {
  Matrix m(a.size(), 2);
  m.col(0) = a;
  m.col(1) = b;
  return Dataset({"a", "b"}, m, std::nullopt, label);
}

Predictor product() {
  return make_predictor({"a", "b"}, [](const Eigen::Ref<const Matrix>& x) -> Vector {
    return x.col(0).cwiseProduct(x.col(1));
  }, "a*b");
}

TEST(Drift, IdenticalDatasetsAreAllZero) {
  Rng rng(8);
  const auto ds = test::training_data(rng, 40, 3);
  const auto f = fit_tree(ds);
  const auto r = drift_report(f, ds, ds, {"x0", "x1", "x2"});
  for (const auto& fd : r.features) {
    EXPECT_EQ(fd.ks, 0);
    EXPECT_EQ(fd.w1, 0);
    EXPECT_EQ(fd.pdp.l2, 0);
    EXPECT_EQ(fd.pdp.sup, 0);
    EXPECT_EQ(fd.ale.l2, 0);
    EXPECT_EQ(fd.ale.sup, 0);
  }
  EXPECT_FALSE(r.similar_marginals_different_explanations);
  EXPECT_NE(r.reference_a.label, r.reference_b.label);
  ASSERT_TRUE(r.loss_a && r.loss_b);
  EXPECT_EQ(*r.loss_a, *r.loss_b);
}

TEST(Drift, LinearModelPdpShiftHasClosedForm) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const Vector c = test::random_matrix(rng, 3, 1, -3, 3);
    const auto f = linear_model({{"x0", c[0]}, {"x1", c[1]}, {"x2", c[2]}}, 1);
    const Dataset a(test::feature_names(3), test::random_matrix(rng, 30, 3, -1, 1), std::nullopt, "a");
    const Dataset b(test::feature_names(3), test::random_matrix(rng, 25, 3, -0.5, 2), std::nullopt, "b");
    const auto r = drift_report(f, a, b, {"x0", "x2"});
    for (const auto& fd : r.features) {
      const Index j = fd.feature == "x0" ? 0 : 2;
      double shift = 0;
      for (Index k = 0; k < 3; ++k)
        if (k != j) shift += c[k] * (a.values().col(k).mean() - b.values().col(k).mean());
      EXPECT_NEAR(fd.pdp.sup, std::abs(shift), 1e-9);
      EXPECT_NEAR(fd.pdp.l2, std::abs(shift), 1e-9);
      // ALE of an additive model is the same line on both sides once centered
      // at the respective data, so only the centering constant differs.
      EXPECT_NEAR(fd.ale.sup, std::abs(c[j] * (a.values().col(j).mean() - b.values().col(j).mean())), 1e-9);
    }
  }
}

TEST(Drift, RankShuffledJointKeepsPdpButMovesAle) {
  // Same 20 values per column; b rises with a in one set and falls in the other.
  const Vector up = Vector::LinSpaced(20, 1, 20);
  const Vector down = up.reverse();
  const auto together = two_columns("together", up, up);
  const auto opposed = two_columns("opposed", up, down);
  const auto r = drift_report(product(), together, opposed, {"a", "b"});
  // delta = 0.05 * (400 - 1)
  EXPECT_NEAR(r.delta, 19.95, 1e-12);
  for (const auto& fd : r.features) {
    EXPECT_EQ(fd.ks, 0);
    EXPECT_EQ(fd.w1, 0);
    // ICE averaging by hand: PDP_a(z) = z * mean(b) = 10.5 z for both sets.
    for (Index k = 0; k < fd.pdp_a.grid.size(); ++k) {
      EXPECT_NEAR(fd.pdp_a.values[k], 10.5 * fd.pdp_a.grid[k], 1e-12);
      EXPECT_NEAR(fd.pdp_b.values[k], 10.5 * fd.pdp_b.grid[k], 1e-12);
    }
    EXPECT_LT(fd.pdp.sup, 1e-12);
    EXPECT_GT(fd.ale.sup, r.delta);
  }
  EXPECT_TRUE(r.similar_marginals_different_explanations);
}

TEST(Drift, ThreeWayInteractionMovesPdp) {
  // f = a*b*c: PDP_a(z) = z * E[b c], which depends on how b and c co-occur.
  const Vector up = Vector::LinSpaced(20, 1, 20);
  Matrix ma(20, 3), mb(20, 3);
  ma << up, up, up;
  mb << up, up, up.reverse();
  const Dataset a({"a", "b", "c"}, ma, std::nullopt, "aligned");
  const Dataset b({"a", "b", "c"}, mb, std::nullopt, "crossed");
  const auto f = make_predictor({"a", "b", "c"}, [](const Eigen::Ref<const Matrix>& x) -> Vector {
    return x.col(0).cwiseProduct(x.col(1)).cwiseProduct(x.col(2));
  });
  const auto r = drift_report(f, a, b, {"a"});
  const double ebc_a = up.squaredNorm() / 20, ebc_b = up.dot(up.reverse()) / 20;
  EXPECT_EQ(r.features[0].ks, 0);
  EXPECT_NEAR(r.features[0].pdp.sup, 20 * (ebc_a - ebc_b), 1e-9);
  EXPECT_GT(r.features[0].pdp.sup, r.delta);
  EXPECT_TRUE(r.similar_marginals_different_explanations);
}

TEST(Drift, SettingsEchoedAndThreadInvariant) {
  Rng rng(10);
  const auto ds = test::training_data(rng, 50, 3);
  const auto other = test::training_data(rng, 50, 3);
  const auto f = fit_boosted_stumps(ds, {.n_trees = 20});
  DriftSettings s{.grid_points = 7, .grid = GridStrategy::kEquidistant, .bins = 4, .kappa = 0.3, .delta = 0.01};
  const auto r1 = drift_report(f, ds, other, {"x1"}, s);
  s.exec.threads = 3;
  const auto r2 = drift_report(f, ds, other, {"x1"}, s);
  EXPECT_EQ(r1.features[0].pdp_a.values, r2.features[0].pdp_a.values);
  EXPECT_EQ(r1.features[0].ale.l2, r2.features[0].ale.l2);
  EXPECT_EQ(r1.grid_points, 7);
  EXPECT_EQ(r1.bins, 4);
  EXPECT_EQ(r1.kappa, 0.3);
  EXPECT_EQ(r1.delta, 0.01);
  EXPECT_EQ(r1.features[0].pdp_a.grid.size(), 7);
  EXPECT_THROW(drift_report(f, ds, other, {}), InvalidArgument);
}

}  // namespace
}  // namespace refx
