#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "refx/common.hpp"
#include "refx/dataset.hpp"
#include "refx/models.hpp"

namespace refx {

// Identifies the data an artifact was computed against. There is no default
// constructor: every artifact carries one, so none is context-free.
struct ReferenceInfo {
  ReferenceInfo(std::string label, Index n_rows, std::string spec);

  std::string label;
  Index n_rows;
  std::string spec;

  bool operator==(const ReferenceInfo&) const = default;
};

// The explanation context: weighted rows over named features.
class ReferenceSample {
 public:
  // weights: strictly positive, one per row; normalized to sum 1. Uniform
  // when absent.
  ReferenceSample(std::vector<std::string> names, Matrix rows,
                  std::optional<Vector> weights, std::string label,
                  std::string source);

  const std::vector<std::string>& feature_names() const { return names_; }
  const Matrix& rows() const { return rows_; }
  const Vector& weights() const { return weights_; }
  const std::string& label() const { return label_; }
  const std::string& source() const { return source_; }
  Index n_rows() const { return rows_.rows(); }

  bool has_feature(std::string_view name) const;
  Index feature_index(std::string_view name) const;
  Matrix::ConstColXpr column(std::string_view name) const {
    return rows_.col(feature_index(name));
  }

  // Rows restricted and reordered to the given names. Throws
  // FeatureMismatch listing every missing name.
  Matrix gather(const std::vector<std::string>& names) const;

  ReferenceInfo info() const { return {label_, n_rows(), source_}; }
  ReferenceSample with_source(std::string source) const;

 private:
  std::vector<std::string> names_;
  Matrix rows_;
  Vector weights_;
  std::string label_;
  std::string source_;
};

// All rows, uniform weights, target column dropped.
ReferenceSample ref_from_dataset(const Dataset& ds, std::string label);

// Throws ExplainError("empty reference ...") when nothing matches.
ReferenceSample ref_from_filter(const Dataset& ds, const RowPredicate& pred,
                                std::string label);

enum class Direction { kHighest, kLowest };

// Either a column name or a predictor whose scores rank the rows.
using TopKKey = std::variant<std::string, Predictor>;

// The k rows with the most extreme key; ties keep original row order.
// Selected rows are returned in original row order.
ReferenceSample ref_top_k(const Dataset& ds, const TopKKey& key, Index k,
                          Direction direction, std::string label);

// The selected rows themselves, target column included.
Dataset top_k_rows(const Dataset& ds, const TopKKey& key, Index k, Direction direction);

// n i.i.d. rows with independent normal coordinates; std 0 gives a point
// mass. Coordinate j of every row is drawn from stream (seed, j).
ReferenceSample ref_gaussian(const NamedValues& means, const NamedValues& stds,
                             Index n, std::uint64_t seed, std::string label);

// Weighted mean prediction over the reference rows.
double baseline(const Predictor& pred, const ReferenceSample& ref);

}  // namespace refx
