#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "refx/common.hpp"

namespace refx {

// Named numeric columns of equal length, optionally with one target column.
// Immutable after construction; every operation returns a new Dataset.
class Dataset {
 public:
  // Throws DataError on empty/duplicate names, zero rows, non-finite values
  // or a target name that is not a column.
  Dataset(std::vector<std::string> names, Matrix values,
          std::optional<std::string> target = std::nullopt,
          std::string label = "dataset");

  Index n_rows() const { return values_.rows(); }
  Index n_columns() const { return values_.cols(); }
  Index n_features() const { return n_columns() - (target_ ? 1 : 0); }

  const std::vector<std::string>& column_names() const { return names_; }
  // Column names excluding the target, in column order.
  std::vector<std::string> feature_names() const;
  const std::optional<std::string>& target_name() const { return target_; }
  const std::string& label() const { return label_; }
  const Matrix& values() const { return values_; }

  bool has_column(std::string_view name) const;
  // Throws InvalidArgument naming the column when absent.
  Index column_index(std::string_view name) const;
  Matrix::ConstColXpr column(std::string_view name) const {
    return values_.col(column_index(name));
  }
  // Throws InvalidArgument when the dataset has no target.
  Vector target() const;

  // n_rows x names.size() matrix of the named columns, in the given order.
  // Throws FeatureMismatch listing every absent name.
  Matrix select(const std::vector<std::string>& names) const;

  Dataset with_rows(const std::vector<Index>& rows) const;
  Dataset with_column_values(std::string_view name, const Vector& values) const;
  Dataset with_label(std::string label) const;

 private:
  // Unchecked; used for subsets that may legitimately be empty.
  struct Unchecked {};
  Dataset(Unchecked, std::vector<std::string> names, Matrix values,
          std::optional<std::string> target, std::string label);

  std::vector<std::string> names_;
  Matrix values_;
  std::optional<std::string> target_;
  std::string label_;
};

enum class Comparator { kLess, kLessEqual, kEqual, kGreaterEqual, kGreater };

struct Clause {
  std::string column;
  Comparator op;
  double threshold;

  bool matches(double value) const;
};

// Conjunction of clauses. Text form: "a>=2,b<5" (comma means AND).
class RowPredicate {
 public:
  explicit RowPredicate(std::vector<Clause> clauses);
  static RowPredicate parse(std::string_view text);

  const std::vector<Clause>& clauses() const { return clauses_; }
  RowPredicate operator&&(const RowPredicate& other) const;
  std::string to_string() const;

 private:
  std::vector<Clause> clauses_;
};

enum class MissingPolicy { kReject, kDropRow };

struct CsvOptions {
  bool has_header = true;
  std::optional<std::string> target;
  MissingPolicy on_missing = MissingPolicy::kReject;
};

// RFC-4180 style: quoted fields, '.' decimal separator. Empty, "NA", "NaN",
// non-numeric and non-finite cells count as missing.
Dataset load_csv(const std::filesystem::path& path,
                 const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options,
                  std::string label = "dataset");
// Header row always written; numbers with 17 significant digits.
void write_csv(const Dataset& ds, std::ostream& out);

// May return an empty dataset (zero rows).
Dataset filter_rows(const Dataset& ds, const RowPredicate& pred);

struct ColumnStats {
  static constexpr std::size_t kQuantiles = 99;

  double mean = 0;
  double std = 0;  // population
  double min = 0;
  double max = 0;
  // quantiles[k] is the (k+1)/100 quantile, linear interpolation (type 7).
  std::array<double, kQuantiles> quantiles{};
  Index count = 0;

  double median() const { return quantiles[49]; }
};

ColumnStats column_stats(const Dataset& ds, std::string_view column);

// Uniformly random permutation of one column, deterministic from seed.
Dataset permute_column(const Dataset& ds, std::string_view column,
                       std::uint64_t seed);

}  // namespace refx
