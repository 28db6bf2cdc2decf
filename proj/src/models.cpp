#include "refx/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string_view>

namespace refx {

Predictor::Predictor(std::vector<std::string> feature_names,
                     std::shared_ptr<const Model> model, std::string description)
    : names_(std::move(feature_names)),
      model_(std::move(model)),
      description_(std::move(description)) {
  if (!model_) throw InvalidArgument("predictor without a model");
  if (names_.empty()) throw InvalidArgument("predictor declares no features");
  std::set<std::string_view> seen;
  for (const auto& name : names_) {
    if (name.empty()) throw InvalidArgument("predictor feature with an empty name");
    if (!seen.insert(name).second)
      throw InvalidArgument("predictor declares feature '" + name + "' twice");
  }
}

Vector Predictor::predict(const Eigen::Ref<const Matrix>& rows) const {
  if (rows.cols() != n_features())
    throw InvalidArgument("predictor expects " + std::to_string(n_features()) +
                          " columns, got " + std::to_string(rows.cols()));
  if (rows.rows() == 0) return Vector(0);
  Vector out = model_->predict(rows);
  if (out.size() != rows.rows())
    throw Error("model returned " + std::to_string(out.size()) +
                " scores for " + std::to_string(rows.rows()) + " rows");
  return out;
}

double Predictor::predict_one(const Vector& row) const {
  return predict(row.transpose())[0];
}

Vector Predictor::predict(const Dataset& ds) const {
  return predict(ds.select(names_));
}

namespace {

class FunctionModel : public Model {
 public:
  explicit FunctionModel(BatchFunction fn) : fn_(std::move(fn)) {}
  Vector predict(const Eigen::Ref<const Matrix>& rows) const override {
    return fn_(rows);
  }

 private:
  BatchFunction fn_;
};

}  // namespace

Predictor make_predictor(std::vector<std::string> feature_names, BatchFunction fn,
                         std::string description) {
  return Predictor(std::move(feature_names),
                   std::make_shared<FunctionModel>(std::move(fn)),
                   std::move(description));
}

// ---------------------------------------------------------------------------

Vector LinearModel::predict(const Eigen::Ref<const Matrix>& rows) const {
  // Explicit per-row accumulation keeps every score bit-identical regardless
  // of batch size or alignment.
  Vector out(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    double s = intercept_;
    for (Index j = 0; j < coefs_.size(); ++j) s += coefs_[j] * rows(i, j);
    out[i] = s;
  }
  return out;
}

Predictor linear_model(const NamedValues& coefs, double intercept) {
  if (coefs.empty()) throw InvalidArgument("linear model needs at least one coefficient");
  std::vector<std::string> names;
  Vector c(static_cast<Index>(coefs.size()));
  for (std::size_t j = 0; j < coefs.size(); ++j) {
    names.push_back(coefs[j].first);
    c[static_cast<Index>(j)] = coefs[j].second;
    if (!std::isfinite(coefs[j].second))
      throw InvalidArgument("non-finite coefficient for '" + coefs[j].first + "'");
  }
  std::string desc = "linear(";
  for (std::size_t j = 0; j < coefs.size(); ++j) {
    if (j) desc += ", ";
    desc += coefs[j].first;
  }
  desc += ")";
  return Predictor(std::move(names),
                   std::make_shared<LinearModel>(std::move(c), intercept), desc);
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

// log(1 + exp(m)) without overflow.
double softplus(double m) {
  return std::max(m, 0.0) + std::log1p(std::exp(-std::abs(m)));
}

constexpr double kProbLow = std::numeric_limits<double>::min();
constexpr double kProbHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2;

}  // namespace

Vector LogisticModel::predict(const Eigen::Ref<const Matrix>& rows) const {
  Vector out(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    double m = intercept_;
    for (Index j = 0; j < weights_.size(); ++j) m += weights_[j] * rows(i, j);
    out[i] = std::clamp(sigmoid(m), kProbLow, kProbHigh);
  }
  return out;
}

double detail::logistic_objective(const Eigen::Ref<const Matrix>& x,
                                  const Vector& y, const Vector& w, double b,
                                  double l2, Vector* grad_w, double* grad_b) {
  const Index n = x.rows();
  double loss = 0;
  if (grad_w) *grad_w = Vector::Zero(w.size());
  if (grad_b) *grad_b = 0;
  for (Index i = 0; i < n; ++i) {
    double m = b;
    for (Index j = 0; j < w.size(); ++j) m += w[j] * x(i, j);
    // -[y log s(m) + (1-y) log(1-s(m))] = softplus(m) - y m
    loss += softplus(m) - y[i] * m;
    const double r = sigmoid(m) - y[i];
    if (grad_w)
      for (Index j = 0; j < w.size(); ++j) (*grad_w)[j] += r * x(i, j);
    if (grad_b) *grad_b += r;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss = loss * inv_n + 0.5 * l2 * ordered_dot(w, w);
  if (grad_w) *grad_w = *grad_w * inv_n + l2 * w;
  if (grad_b) *grad_b *= inv_n;
  return loss;
}

namespace {

Vector require_binary_target(const Dataset& ds) {
  const Vector y = ds.target();
  bool has0 = false, has1 = false;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) has0 = true;
    else if (y[i] == 1.0) has1 = true;
    else throw InvalidArgument("logistic regression needs a {0,1} target; found " +
                               std::to_string(y[i]));
  }
  if (!has0 || !has1)
    throw InvalidArgument("logistic regression needs both classes in the target");
  return y;
}

}  // namespace

LogisticFit train_logistic(const Dataset& ds, const LogisticHyper& hyper) {
  const Vector y = require_binary_target(ds);
  if (ds.n_rows() < 2) throw InvalidArgument("logistic regression needs >= 2 rows");
  if (hyper.iters < 0 || !(hyper.lr > 0) || hyper.l2 < 0)
    throw InvalidArgument("invalid logistic hyperparameters");
  const auto names = ds.feature_names();
  const Matrix raw = ds.select(names);
  const Index p = raw.cols();

  // Fit on standardized columns, then fold the scaling back into the
  // reported weights so the model scores raw features.
  Vector center(p), scale(p);
  for (Index j = 0; j < p; ++j) {
    center[j] = ordered_sum(raw.col(j)) / static_cast<double>(raw.rows());
    double ss = 0;
    for (Index i = 0; i < raw.rows(); ++i)
      ss += (raw(i, j) - center[j]) * (raw(i, j) - center[j]);
    const double sd = std::sqrt(ss / static_cast<double>(raw.rows()));
    scale[j] = sd > 0 ? sd : 1.0;
  }
  Matrix x(raw.rows(), p);
  for (Index j = 0; j < p; ++j)
    x.col(j) = (raw.col(j).array() - center[j]) / scale[j];

  Vector w = Vector::Zero(p);
  double b = 0;
  Vector gw;
  double gb = 0;
  std::vector<double> history;
  history.push_back(detail::logistic_objective(x, y, w, b, hyper.l2, &gw, &gb));
  for (int it = 0; it < hyper.iters; ++it) {
    w -= hyper.lr * gw;
    b -= hyper.lr * gb;
    history.push_back(detail::logistic_objective(x, y, w, b, hyper.l2, &gw, &gb));
  }

  Vector raw_w(p);
  double raw_b = b;
  for (Index j = 0; j < p; ++j) {
    raw_w[j] = w[j] / scale[j];
    raw_b -= raw_w[j] * center[j];
  }
  Predictor pred(names, std::make_shared<LogisticModel>(raw_w, raw_b),
                 "logistic(" + join(names, ", ") + ")");
  return {std::move(pred), std::move(history)};
}

Predictor fit_logistic(const Dataset& ds, const LogisticHyper& hyper) {
  return train_logistic(ds, hyper).predictor;
}

// ---------------------------------------------------------------------------
// Regression tree

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double gain = -1;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::Ref<const Matrix>& x, const Vector& y,
              const TreeHyper& hyper, std::vector<TreeNode>& nodes)
      : x_(x), y_(y), hyper_(hyper), nodes_(nodes) {}

  int build(std::vector<Index> rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    const auto n = static_cast<Index>(rows.size());
    double sum = 0, lo = y_[rows[0]], hi = y_[rows[0]];
    for (Index r : rows) {
      sum += y_[r];
      lo = std::min(lo, y_[r]);
      hi = std::max(hi, y_[r]);
    }
    const double mean = sum / static_cast<double>(n);
    nodes_[id].value = mean;
    nodes_[id].n_samples = n;
    if (depth >= hyper_.max_depth || n < 2 * hyper_.min_leaf || lo == hi) return id;

    const SplitChoice best = find_split(rows, mean);
    if (best.feature < 0) return id;

    std::vector<Index> left, right;
    for (Index r : rows)
      (x_(r, best.feature) <= best.threshold ? left : right).push_back(r);
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int l = build(std::move(left), depth + 1);
    const int rgt = build(std::move(right), depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = rgt;
    return id;
  }

 private:
  // Gain of a split = reduction in squared error = sL^2/nL + sR^2/nR over
  // residuals centered at the node mean. Zero-gain splits are allowed (an
  // impure node with no improving split still splits, e.g. XOR patterns).
  SplitChoice find_split(const std::vector<Index>& rows, double mean) const {
    SplitChoice best;
    const auto n = static_cast<Index>(rows.size());
    std::vector<Index> order(rows);
    std::vector<double> centered(static_cast<std::size_t>(n));
    for (Index f = 0; f < x_.cols(); ++f) {
      order = rows;
      std::stable_sort(order.begin(), order.end(),
                       [&](Index a, Index b) { return x_(a, f) < x_(b, f); });
      double total = 0;
      for (Index k = 0; k < n; ++k) {
        centered[k] = y_[order[k]] - mean;
        total += centered[k];
      }
      double left = 0;
      for (Index k = 1; k < n; ++k) {
        left += centered[k - 1];
        if (k < hyper_.min_leaf || n - k < hyper_.min_leaf) continue;
        const double xa = x_(order[k - 1], f), xb = x_(order[k], f);
        if (!(xa < xb)) continue;
        const double right = total - left;
        const double gain = left * left / static_cast<double>(k) +
                            right * right / static_cast<double>(n - k);
        if (gain > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = xa + (xb - xa) / 2;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const Eigen::Ref<const Matrix>& x_;
  const Vector& y_;
  const TreeHyper& hyper_;
  std::vector<TreeNode>& nodes_;
};

}  // namespace

RegressionTree RegressionTree::grow(const Eigen::Ref<const Matrix>& x,
                                    const Vector& y, const TreeHyper& hyper) {
  if (x.rows() != y.size()) throw InvalidArgument("tree: row count mismatch");
  if (hyper.max_depth < 0 || hyper.min_leaf < 1)
    throw InvalidArgument("tree: max_depth >= 0 and min_leaf >= 1 required");
  if (x.rows() < 2 * hyper.min_leaf)
    throw InvalidArgument("tree: need at least 2 * min_leaf rows");
  RegressionTree tree;
  std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  TreeBuilder(x, y, hyper, tree.nodes_).build(std::move(rows), 0);
  return tree;
}

double RegressionTree::predict_row(const Eigen::Ref<const Matrix>& rows,
                                   Index r) const {
  int id = 0;
  while (!nodes_[id].is_leaf())
    id = rows(r, nodes_[id].feature) <= nodes_[id].threshold ? nodes_[id].left
                                                             : nodes_[id].right;
  return nodes_[id].value;
}

Vector RegressionTree::predict(const Eigen::Ref<const Matrix>& rows) const {
  Vector out(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) out[i] = predict_row(rows, i);
  return out;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[nodes_[i].left] = d[i] + 1;
      d[nodes_[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

Predictor fit_tree(const Dataset& ds, const TreeHyper& hyper) {
  const auto names = ds.feature_names();
  auto tree = std::make_shared<RegressionTree>(
      RegressionTree::grow(ds.select(names), ds.target(), hyper));
  return Predictor(names, std::move(tree),
                   "tree(depth<=" + std::to_string(hyper.max_depth) + ")");
}

// ---------------------------------------------------------------------------
// Boosting

Vector BoostedTrees::predict(const Eigen::Ref<const Matrix>& rows) const {
  Vector out(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    double s = init_;
    for (const auto& t : trees_) s += lr_ * t.predict_row(rows, i);
    out[i] = s;
  }
  return out;
}

BoostFit train_boosted_stumps(const Dataset& ds, const BoostHyper& hyper) {
  if (hyper.n_trees < 1) throw InvalidArgument("boosting: n_trees must be >= 1");
  if (hyper.max_depth < 1 || hyper.max_depth > 2)
    throw InvalidArgument("boosting: max_depth must be 1 or 2");
  if (!(hyper.lr > 0)) throw InvalidArgument("boosting: lr must be > 0");
  const auto names = ds.feature_names();
  const Matrix x = ds.select(names);
  const Vector y = ds.target();
  const auto n = static_cast<double>(y.size());

  const double init = ordered_sum(y) / n;
  Vector fitted = Vector::Constant(y.size(), init);
  auto mse = [&] {
    double s = 0;
    for (Index i = 0; i < y.size(); ++i) s += (y[i] - fitted[i]) * (y[i] - fitted[i]);
    return s / n;
  };
  std::vector<double> history{mse()};
  std::vector<RegressionTree> trees;
  const TreeHyper tree_hyper{hyper.max_depth, hyper.min_leaf};
  for (int t = 0; t < hyper.n_trees; ++t) {
    const Vector residual = y - fitted;
    trees.push_back(RegressionTree::grow(x, residual, tree_hyper));
    for (Index i = 0; i < y.size(); ++i)
      fitted[i] += hyper.lr * trees.back().predict_row(x, i);
    history.push_back(mse());
  }
  Predictor pred(names, std::make_shared<BoostedTrees>(init, hyper.lr, std::move(trees)),
                 "boosted(" + std::to_string(hyper.n_trees) + " trees, depth " +
                     std::to_string(hyper.max_depth) + ")");
  return {std::move(pred), std::move(history)};
}

Predictor fit_boosted_stumps(const Dataset& ds, const BoostHyper& hyper) {
  return train_boosted_stumps(ds, hyper).predictor;
}

}  // namespace refx
