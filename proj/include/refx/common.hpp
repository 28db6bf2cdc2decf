#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace refx {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Ordered (name, value) pairs. Order is significant: it fixes feature order.
using NamedValues = std::vector<std::pair<std::string, double>>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: bad CSV cells, ragged rows, non-finite values.
class DataError : public Error {
 public:
  using Error::Error;
};

// A precondition on arguments does not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A predictor needs features that the data or reference does not provide.
class FeatureMismatch : public Error {
 public:
  FeatureMismatch(const std::string& context, std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

// The external model child violated the line protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Explanation is mathematically undefined for the given inputs.
class ExplainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Execution {
  int threads = 1;
};

// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
// write results into per-index slots and reduce afterwards in index order,
// so the outcome never depends on the thread count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& body);

// Sum in index order. Used wherever a reduction must be reproducible.
template <typename Derived>
double ordered_sum(const Eigen::DenseBase<Derived>& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += v.derived().coeff(i);
  return s;
}

template <typename DerivedA, typename DerivedB>
double ordered_dot(const Eigen::DenseBase<DerivedA>& a,
                   const Eigen::DenseBase<DerivedB>& b) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    s += a.derived().coeff(i) * b.derived().coeff(i);
  return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace refx
