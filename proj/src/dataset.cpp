#include "refx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "refx/distance.hpp"
#include "refx/rng.hpp"

namespace refx {

namespace {

void check_names(const std::vector<std::string>& names) {
  std::set<std::string_view> seen;
  for (const auto& n : names) {
    if (n.empty()) throw DataError("empty column name");
    if (!seen.insert(n).second) throw DataError("duplicate column name '" + n + "'");
  }
}

}  // namespace

Dataset::Dataset(std::vector<std::string> names, Matrix values,
                 std::optional<std::string> target, std::string label)
    : names_(std::move(names)),
      values_(std::move(values)),
      target_(std::move(target)),
      label_(std::move(label)) {
  if (names_.empty()) throw DataError("dataset has no columns");
  if (static_cast<Index>(names_.size()) != values_.cols())
    throw DataError("column name count does not match value columns");
  if (values_.rows() < 1) throw DataError("dataset has no rows");
  check_names(names_);
  if (!values_.allFinite()) throw DataError("dataset contains non-finite values");
  if (target_ && !has_column(*target_))
    throw DataError("target column '" + *target_ + "' not found");
}

Dataset::Dataset(Unchecked, std::vector<std::string> names, Matrix values,
                 std::optional<std::string> target, std::string label)
    : names_(std::move(names)),
      values_(std::move(values)),
      target_(std::move(target)),
      label_(std::move(label)) {}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> out;
  for (const auto& n : names_)
    if (!target_ || n != *target_) out.push_back(n);
  return out;
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

Index Dataset::column_index(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw InvalidArgument("unknown column '" + std::string(name) + "'");
  return static_cast<Index>(it - names_.begin());
}

Vector Dataset::target() const {
  if (!target_) throw InvalidArgument("dataset '" + label_ + "' has no target column");
  return values_.col(column_index(*target_));
}

Matrix Dataset::select(const std::vector<std::string>& names) const {
  std::vector<std::string> missing;
  for (const auto& n : names)
    if (!has_column(n)) missing.push_back(n);
  if (!missing.empty()) throw FeatureMismatch("dataset '" + label_ + "'", missing);
  Matrix out(n_rows(), static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j)
    out.col(static_cast<Index>(j)) = values_.col(column_index(names[j]));
  return out;
}

Dataset Dataset::with_rows(const std::vector<Index>& rows) const {
  Matrix sub(static_cast<Index>(rows.size()), n_columns());
  for (std::size_t i = 0; i < rows.size(); ++i)
    sub.row(static_cast<Index>(i)) = values_.row(rows[i]);
  return Dataset(Unchecked{}, names_, std::move(sub), target_, label_);
}

Dataset Dataset::with_column_values(std::string_view name,
                                    const Vector& values) const {
  if (values.size() != n_rows())
    throw InvalidArgument("replacement column has wrong length");
  Matrix copy = values_;
  copy.col(column_index(name)) = values;
  return Dataset(Unchecked{}, names_, std::move(copy), target_, label_);
}

Dataset Dataset::with_label(std::string label) const {
  return Dataset(Unchecked{}, names_, values_, target_, std::move(label));
}

// ---------------------------------------------------------------------------

bool Clause::matches(double v) const {
  switch (op) {
    case Comparator::kLess: return v < threshold;
    case Comparator::kLessEqual: return v <= threshold;
    case Comparator::kEqual: return v == threshold;
    case Comparator::kGreaterEqual: return v >= threshold;
    case Comparator::kGreater: return v > threshold;
  }
  return false;
}

RowPredicate::RowPredicate(std::vector<Clause> clauses)
    : clauses_(std::move(clauses)) {
  if (clauses_.empty()) throw InvalidArgument("row predicate needs at least one clause");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

std::string_view comparator_text(Comparator op) {
  switch (op) {
    case Comparator::kLess: return "<";
    case Comparator::kLessEqual: return "<=";
    case Comparator::kEqual: return "=";
    case Comparator::kGreaterEqual: return ">=";
    case Comparator::kGreater: return ">";
  }
  return "?";
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RowPredicate RowPredicate::parse(std::string_view text) {
  std::vector<Clause> clauses;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto part = trim(text.substr(
        start, comma == std::string_view::npos ? std::string_view::npos
                                               : comma - start));
    const auto op_pos = part.find_first_of("<>=");
    if (op_pos == std::string_view::npos || op_pos == 0)
      throw InvalidArgument("bad predicate clause '" + std::string(part) + "'");
    auto rest = part.substr(op_pos);
    Comparator op;
    std::size_t op_len = 1;
    if (rest.starts_with("<=")) { op = Comparator::kLessEqual; op_len = 2; }
    else if (rest.starts_with(">=")) { op = Comparator::kGreaterEqual; op_len = 2; }
    else if (rest.starts_with("==")) { op = Comparator::kEqual; op_len = 2; }
    else if (rest.starts_with("<")) op = Comparator::kLess;
    else if (rest.starts_with(">")) op = Comparator::kGreater;
    else op = Comparator::kEqual;
    const auto value = parse_number(rest.substr(op_len));
    if (!value)
      throw InvalidArgument("bad threshold in predicate clause '" + std::string(part) + "'");
    clauses.push_back({std::string(trim(part.substr(0, op_pos))), op, *value});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return RowPredicate(std::move(clauses));
}

RowPredicate RowPredicate::operator&&(const RowPredicate& other) const {
  auto all = clauses_;
  all.insert(all.end(), other.clauses_.begin(), other.clauses_.end());
  return RowPredicate(std::move(all));
}

std::string RowPredicate::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < clauses_.size(); ++i) {
    if (i) out += ",";
    out += clauses_[i].column;
    out += comparator_text(clauses_[i].op);
    out += format_number(clauses_[i].threshold);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

// Splits one logical record; handles quoted fields with "" escapes and
// embedded newlines. Returns false at end of input.
bool next_record(std::string_view text, std::size_t& pos,
                 std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          pos += 2;
          continue;
        }
        quoted = false;
      } else {
        field += c;
      }
      ++pos;
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n') ++pos;
      ++pos;
      fields.push_back(std::move(field));
      return true;
    } else {
      field += c;
    }
    ++pos;
  }
  if (quoted) throw DataError("unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return fields.size() == 1 && trim(fields[0]).empty();
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& options,
                  std::string label) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::size_t pos = 0;
  std::vector<std::string> fields;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::size_t line = 0;
  bool have_names = false;

  while (next_record(text, pos, fields)) {
    ++line;
    if (blank(fields)) continue;
    if (!have_names) {
      have_names = true;
      if (options.has_header) {
        for (const auto& f : fields) names.emplace_back(trim(f));
        check_names(names);
        continue;
      }
      for (std::size_t j = 0; j < fields.size(); ++j)
        names.push_back("x" + std::to_string(j));
    }
    if (fields.size() != names.size())
      throw DataError("line " + std::to_string(line) + ": expected " +
                      std::to_string(names.size()) + " fields, found " +
                      std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    bool missing = false;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = parse_number(fields[j]);
      if (!v) {
        if (options.on_missing == MissingPolicy::kReject)
          throw DataError("line " + std::to_string(line) + ", column '" +
                          names[j] + "': non-numeric or missing cell '" +
                          fields[j] + "'");
        missing = true;
        break;
      }
      row[j] = *v;
    }
    if (!missing) rows.push_back(std::move(row));
  }
  if (!have_names) throw DataError("CSV input is empty");
  if (rows.empty()) throw DataError("CSV has zero data rows");

  Matrix values(static_cast<Index>(rows.size()), static_cast<Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return Dataset(std::move(names), std::move(values), options.target,
                 std::move(label));
}

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options, path.string());
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_csv(const Dataset& ds, std::ostream& out) {
  const auto& names = ds.column_names();
  for (std::size_t j = 0; j < names.size(); ++j)
    out << (j ? "," : "") << csv_quote(names[j]);
  out << '\n';
  for (Index i = 0; i < ds.n_rows(); ++i) {
    for (Index j = 0; j < ds.n_columns(); ++j)
      out << (j ? "," : "") << format_number(ds.values()(i, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Dataset filter_rows(const Dataset& ds, const RowPredicate& pred) {
  std::vector<Index> cols;
  for (const auto& c : pred.clauses()) cols.push_back(ds.column_index(c.column));
  std::vector<Index> keep;
  for (Index i = 0; i < ds.n_rows(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < cols.size() && ok; ++k)
      ok = pred.clauses()[k].matches(ds.values()(i, cols[k]));
    if (ok) keep.push_back(i);
  }
  return ds.with_rows(keep);
}

ColumnStats column_stats(const Dataset& ds, std::string_view column) {
  const auto col = ds.column(column);
  const auto sorted = detail::sorted_copy(col);
  ColumnStats s;
  s.count = col.size();
  s.mean = ordered_sum(col) / static_cast<double>(s.count);
  double ss = 0;
  for (Index i = 0; i < col.size(); ++i) ss += (col[i] - s.mean) * (col[i] - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.count));
  s.min = sorted.front();
  s.max = sorted.back();
  for (std::size_t k = 0; k < ColumnStats::kQuantiles; ++k)
    s.quantiles[k] = quantile_sorted(sorted, static_cast<double>(k + 1) / 100.0);
  return s;
}

Dataset permute_column(const Dataset& ds, std::string_view column,
                       std::uint64_t seed) {
  const Index j = ds.column_index(column);
  std::vector<Index> order(static_cast<std::size_t>(ds.n_rows()));
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  Vector permuted(ds.n_rows());
  for (Index i = 0; i < ds.n_rows(); ++i)
    permuted[i] = ds.values()(order[static_cast<std::size_t>(i)], j);
  return ds.with_column_values(column, permuted);
}

}  // namespace refx
