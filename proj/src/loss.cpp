#include "refx/loss.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>

namespace refx {

std::string_view to_string(Loss loss) {
  switch (loss) {
    case Loss::kMse: return "mse";
    case Loss::kMae: return "mae";
    case Loss::kLogLoss: return "logloss";
    case Loss::kOneMinusAuc: return "one_minus_auc";
  }
  return "?";
}

Loss parse_loss(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "mse") return Loss::kMse;
  if (t == "mae") return Loss::kMae;
  if (t == "logloss") return Loss::kLogLoss;
  if (t == "one_minus_auc" || t == "1-auc") return Loss::kOneMinusAuc;
  throw InvalidArgument("unknown loss '" + std::string(text) + "'");
}

double auc(const Vector& scores, const Vector& labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auc: length mismatch");
  // Mann-Whitney: sort by score, give tied groups their average rank.
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0;
  Index n_pos = 0, n_neg = 0;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1.0) ++n_pos;
    else if (labels[i] == 0.0) ++n_neg;
    else throw InvalidArgument("auc: labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0)
    throw InvalidArgument("auc: target has a single class");
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1.0) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1) / 2) / (np * nn);
}

double loss_value(Loss loss, const Vector& scores, const Vector& targets) {
  if (scores.size() != targets.size() || scores.size() == 0)
    throw InvalidArgument("loss: scores and targets must be non-empty and equal length");
  const auto n = static_cast<double>(scores.size());
  double s = 0;
  switch (loss) {
    case Loss::kMse:
      for (Index i = 0; i < scores.size(); ++i)
        s += (scores[i] - targets[i]) * (scores[i] - targets[i]);
      return s / n;
    case Loss::kMae:
      for (Index i = 0; i < scores.size(); ++i) s += std::abs(scores[i] - targets[i]);
      return s / n;
    case Loss::kLogLoss:
      for (Index i = 0; i < scores.size(); ++i) {
        const double p = scores[i];
        if (!(p > 0 && p < 1))
          throw InvalidArgument("logloss needs scores in (0, 1); got " + std::to_string(p));
        s -= targets[i] * std::log(p) + (1 - targets[i]) * std::log1p(-p);
      }
      return s / n;
    case Loss::kOneMinusAuc:
      return 1.0 - auc(scores, targets);
  }
  return 0;
}

double evaluate_loss(const Predictor& pred, const Dataset& ds, Loss loss) {
  return loss_value(loss, pred.predict(ds), ds.target());
}

}  // namespace refx
