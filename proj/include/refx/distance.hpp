#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "refx/common.hpp"

namespace refx {

namespace detail {

template <typename Derived>
std::vector<typename Derived::Scalar> sorted_copy(
    const Eigen::DenseBase<Derived>& x) {
  std::vector<typename Derived::Scalar> v(x.size());
  for (Index i = 0; i < x.size(); ++i) v[i] = x.derived().coeff(i);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

// Type-7 quantile of already sorted values: linear interpolation between
// order statistics at h = (n - 1) p.
template <typename Scalar>
Scalar quantile_sorted(const std::vector<Scalar>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const Scalar frac = static_cast<Scalar>(h - static_cast<double>(lo));
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& x, double p) {
  return quantile_sorted(detail::sorted_copy(x), p);
}

// Sup-norm distance between the two empirical CDFs.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ks_distance(const Eigen::DenseBase<DerivedA>& a,
                                      const Eigen::DenseBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() == 0 || b.size() == 0)
    throw InvalidArgument("ks_distance: empty sample");
  const auto sa = detail::sorted_copy(a);
  const auto sb = detail::sorted_copy(b);
  const Scalar na = static_cast<Scalar>(sa.size());
  const Scalar nb = static_cast<Scalar>(sb.size());
  std::size_t i = 0, j = 0;
  Scalar best = 0;
  while (i < sa.size() || j < sb.size()) {
    // Advance past every copy of the next breakpoint on both sides.
    Scalar t;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) t = sa[i];
    else t = sb[j];
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    best = std::max(best, std::abs(static_cast<Scalar>(i) / na -
                                   static_cast<Scalar>(j) / nb));
  }
  return best;
}

// 1-Wasserstein distance between empirical distributions, computed as the
// integral of |F_a - F_b| over the merged breakpoints (equal to the
// integral of |Q_a - Q_b| over (0, 1)).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar wasserstein1(const Eigen::DenseBase<DerivedA>& a,
                                       const Eigen::DenseBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() == 0 || b.size() == 0)
    throw InvalidArgument("wasserstein1: empty sample");
  const auto sa = detail::sorted_copy(a);
  const auto sb = detail::sorted_copy(b);
  const Scalar na = static_cast<Scalar>(sa.size());
  const Scalar nb = static_cast<Scalar>(sb.size());
  std::size_t i = 0, j = 0;
  Scalar total = 0;
  bool started = false;
  Scalar prev = 0, gap = 0;
  while (i < sa.size() || j < sb.size()) {
    Scalar t;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) t = sa[i];
    else t = sb[j];
    if (started) total += gap * (t - prev);
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    gap = std::abs(static_cast<Scalar>(i) / na - static_cast<Scalar>(j) / nb);
    prev = t;
    started = true;
  }
  return total;
}

}  // namespace refx
