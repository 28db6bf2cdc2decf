#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "refx/common.hpp"
#include "refx/dataset.hpp"

namespace refx {

// A scoring function over rows laid out in a fixed feature order.
// Implementations must be deterministic and batch-invariant: the score of a
// row never depends on the other rows in the batch.
class Model {
 public:
  virtual ~Model() = default;
  virtual Vector predict(const Eigen::Ref<const Matrix>& rows) const = 0;
};

// The model under explanation: a Model bound to its declared feature names.
// Cheap to copy; the model is shared and immutable.
class Predictor {
 public:
  Predictor(std::vector<std::string> feature_names,
            std::shared_ptr<const Model> model, std::string description);

  const std::vector<std::string>& feature_names() const { return names_; }
  Index n_features() const { return static_cast<Index>(names_.size()); }
  const std::string& description() const { return description_; }

  // rows: n x n_features() in feature_names() order.
  Vector predict(const Eigen::Ref<const Matrix>& rows) const;
  double predict_one(const Vector& row) const;
  // Scores the dataset, selecting the declared features by name.
  Vector predict(const Dataset& ds) const;

  template <typename T>
  const T* model_as() const {
    return dynamic_cast<const T*>(model_.get());
  }

 private:
  std::vector<std::string> names_;
  std::shared_ptr<const Model> model_;
  std::string description_;
};

using BatchFunction = std::function<Vector(const Eigen::Ref<const Matrix>&)>;

// Wraps an arbitrary batch function. The function must honor the Model
// contract.
Predictor make_predictor(std::vector<std::string> feature_names,
                         BatchFunction fn, std::string description = "function");

class LinearModel : public Model {
 public:
  LinearModel(Vector coefs, double intercept)
      : coefs_(std::move(coefs)), intercept_(intercept) {}
  Vector predict(const Eigen::Ref<const Matrix>& rows) const override;
  const Vector& coefficients() const { return coefs_; }
  double intercept() const { return intercept_; }

 private:
  Vector coefs_;
  double intercept_;
};

// intercept + sum_i coef_i x_i; features in the order of coefs.
Predictor linear_model(const NamedValues& coefs, double intercept);

// ---------------------------------------------------------------------------
// Logistic regression.

struct LogisticHyper {
  double lr = 0.1;
  int iters = 1000;
  double l2 = 0.0;
};

class LogisticModel : public Model {
 public:
  LogisticModel(Vector weights, double intercept)
      : weights_(std::move(weights)), intercept_(intercept) {}
  Vector predict(const Eigen::Ref<const Matrix>& rows) const override;
  const Vector& weights() const { return weights_; }
  double intercept() const { return intercept_; }

 private:
  Vector weights_;
  double intercept_;
};

struct LogisticFit {
  Predictor predictor;
  // Objective after each iteration (index 0 is the zero-initialized model).
  std::vector<double> objective_history;
};

namespace detail {
// Mean log-loss + l2/2 |w|^2 (intercept unpenalized). Gradients are written
// when the output pointers are non-null.
double logistic_objective(const Eigen::Ref<const Matrix>& x, const Vector& y,
                          const Vector& w, double b, double l2,
                          Vector* grad_w = nullptr, double* grad_b = nullptr);
}  // namespace detail

// Full-batch gradient descent from zero weights. Features are every
// non-target column; the target must be binary {0,1} with both classes.
LogisticFit train_logistic(const Dataset& ds, const LogisticHyper& hyper = {});
Predictor fit_logistic(const Dataset& ds, const LogisticHyper& hyper = {});

// ---------------------------------------------------------------------------
// CART regression tree.

struct TreeHyper {
  int max_depth = 3;
  Index min_leaf = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
  Index n_samples = 0;

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree : public Model {
 public:
  // Squared-error splits; exhaustive search over midpoints of sorted unique
  // values. Any node with a non-constant target splits, even when the best
  // split does not lower the error (XOR needs that first step). Ties go to
  // the lowest feature index, then the lowest threshold.
  static RegressionTree grow(const Eigen::Ref<const Matrix>& x, const Vector& y,
                             const TreeHyper& hyper);

  Vector predict(const Eigen::Ref<const Matrix>& rows) const override;
  double predict_row(const Eigen::Ref<const Matrix>& rows, Index r) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

Predictor fit_tree(const Dataset& ds, const TreeHyper& hyper = {});

// ---------------------------------------------------------------------------
// Least-squares gradient boosting over shallow trees.

struct BoostHyper {
  int n_trees = 100;
  double lr = 0.1;
  int max_depth = 1;  // at most 2
  Index min_leaf = 1;
};

class BoostedTrees : public Model {
 public:
  BoostedTrees(double init, double lr, std::vector<RegressionTree> trees)
      : init_(init), lr_(lr), trees_(std::move(trees)) {}
  Vector predict(const Eigen::Ref<const Matrix>& rows) const override;
  double initial_value() const { return init_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  double init_;
  double lr_;
  std::vector<RegressionTree> trees_;
};

struct BoostFit {
  Predictor predictor;
  // Training MSE after each stage; index 0 is the constant initial model.
  std::vector<double> training_mse;
};

BoostFit train_boosted_stumps(const Dataset& ds, const BoostHyper& hyper = {});
Predictor fit_boosted_stumps(const Dataset& ds, const BoostHyper& hyper = {});

// ---------------------------------------------------------------------------
// External black-box model over a line protocol.
//
// Per batch the parent writes "N P\n" and N lines of P comma-separated
// decimals (17 significant digits) to the child's stdin, then reads exactly
// N lines from its stdout, one decimal score each. The child must flush
// after every batch. Closing stdin (EOF) tells the child to exit. Batches
// from concurrent callers are serialized.
Predictor external_predictor(std::vector<std::string> argv,
                             std::vector<std::string> feature_names);

}  // namespace refx
