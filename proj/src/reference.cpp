#include "refx/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refx/rng.hpp"

namespace refx {

ReferenceInfo::ReferenceInfo(std::string label_, Index n_rows_, std::string spec_)
    : label(std::move(label_)), n_rows(n_rows_), spec(std::move(spec_)) {
  if (label.empty()) throw InvalidArgument("reference label must not be empty");
  if (n_rows < 1) throw InvalidArgument("reference must have at least one row");
}

ReferenceSample::ReferenceSample(std::vector<std::string> names, Matrix rows,
                                 std::optional<Vector> weights, std::string label,
                                 std::string source)
    : names_(std::move(names)),
      rows_(std::move(rows)),
      label_(std::move(label)),
      source_(std::move(source)) {
  if (rows_.rows() < 1) throw ExplainError("empty reference '" + label_ + "'");
  if (static_cast<Index>(names_.size()) != rows_.cols())
    throw InvalidArgument("reference: name count does not match columns");
  if (label_.empty()) throw InvalidArgument("reference label must not be empty");
  if (!rows_.allFinite()) throw DataError("reference contains non-finite values");
  if (weights) {
    if (weights->size() != rows_.rows())
      throw InvalidArgument("reference: one weight per row required");
    for (Index i = 0; i < weights->size(); ++i)
      if (!((*weights)[i] > 0) || !std::isfinite((*weights)[i]))
        throw InvalidArgument("reference weights must be strictly positive");
    weights_ = *weights / ordered_sum(*weights);
  } else {
    weights_ = Vector::Constant(rows_.rows(), 1.0 / static_cast<double>(rows_.rows()));
  }
}

bool ReferenceSample::has_feature(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Index ReferenceSample::feature_index(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw FeatureMismatch("reference '" + label_ + "'", {std::string(name)});
  return static_cast<Index>(it - names_.begin());
}

Matrix ReferenceSample::gather(const std::vector<std::string>& names) const {
  std::vector<std::string> missing;
  for (const auto& n : names)
    if (!has_feature(n)) missing.push_back(n);
  if (!missing.empty()) throw FeatureMismatch("reference '" + label_ + "'", missing);
  Matrix out(n_rows(), static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    out.col(static_cast<Index>(j)) = rows_.col(feature_index(names[j]));
  return out;
}

ReferenceSample ReferenceSample::with_source(std::string source) const {
  ReferenceSample copy = *this;
  copy.source_ = std::move(source);
  return copy;
}

ReferenceSample ref_from_dataset(const Dataset& ds, std::string label) {
  if (ds.n_rows() < 1) throw ExplainError("empty reference '" + label + "'");
  const auto names = ds.feature_names();
  return ReferenceSample(names, ds.select(names), std::nullopt, std::move(label),
                         "dataset(" + ds.label() + ")");
}

ReferenceSample ref_from_filter(const Dataset& ds, const RowPredicate& pred,
                                std::string label) {
  const Dataset sub = filter_rows(ds, pred);
  if (sub.n_rows() == 0)
    throw ExplainError("empty reference '" + label + "': filter " + pred.to_string() +
                       " matched no rows of '" + ds.label() + "'");
  const auto names = sub.feature_names();
  return ReferenceSample(names, sub.select(names), std::nullopt, std::move(label),
                         "filter(" + pred.to_string() + ") on " + ds.label());
}

namespace {

Vector key_scores(const Dataset& ds, const TopKKey& key) {
  if (const auto* col = std::get_if<std::string>(&key)) return ds.column(*col);
  return std::get<Predictor>(key).predict(ds);
}

}  // namespace

Dataset top_k_rows(const Dataset& ds, const TopKKey& key, Index k, Direction direction) {
  if (k < 1 || k > ds.n_rows())
    throw InvalidArgument("top-k: k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(ds.n_rows()) + "]");
  const Vector scores = key_scores(ds, key);
  std::vector<Index> order(static_cast<std::size_t>(ds.n_rows()));
  std::iota(order.begin(), order.end(), Index{0});
  if (direction == Direction::kHighest)
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return scores[a] > scores[b]; });
  else
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return scores[a] < scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return ds.with_rows(order);
}

ReferenceSample ref_top_k(const Dataset& ds, const TopKKey& key, Index k,
                          Direction direction, std::string label) {
  const Dataset sub = top_k_rows(ds, key, k, direction);
  const std::string key_desc = std::holds_alternative<std::string>(key)
                                   ? std::get<std::string>(key)
                                   : "prediction of " + std::get<Predictor>(key).description();
  const auto names = sub.feature_names();
  return ReferenceSample(
      names, sub.select(names), std::nullopt, std::move(label),
      "top-" + std::to_string(k) +
          (direction == Direction::kHighest ? " highest " : " lowest ") + key_desc +
          " on " + ds.label());
}

ReferenceSample ref_gaussian(const NamedValues& means, const NamedValues& stds,
                             Index n, std::uint64_t seed, std::string label) {
  if (n < 1) throw InvalidArgument("gaussian reference needs n >= 1");
  if (means.empty() || means.size() != stds.size())
    throw InvalidArgument("gaussian reference: means and stds must name the same features");
  std::vector<std::string> names;
  const auto p = static_cast<Index>(means.size());
  Matrix rows(n, p);
  for (Index j = 0; j < p; ++j) {
    const auto& [name, mean] = means[static_cast<std::size_t>(j)];
    const auto& [std_name, sd] = stds[static_cast<std::size_t>(j)];
    if (name != std_name)
      throw InvalidArgument("gaussian reference: stds must follow the order of means");
    if (!(sd >= 0)) throw InvalidArgument("gaussian reference: negative std for '" + name + "'");
    names.push_back(name);
    Rng rng = Rng::stream(seed, {static_cast<std::uint64_t>(j)});
    for (Index i = 0; i < n; ++i) rows(i, j) = mean + sd * rng.normal();
  }
  return ReferenceSample(std::move(names), std::move(rows), std::nullopt,
                         std::move(label),
                         "gaussian(n=" + std::to_string(n) + ", seed=" +
                             std::to_string(seed) + ")");
}

double baseline(const Predictor& pred, const ReferenceSample& ref) {
  const Vector scores = pred.predict(ref.gather(pred.feature_names()));
  return ordered_dot(ref.weights(), scores);
}

}  // namespace refx
