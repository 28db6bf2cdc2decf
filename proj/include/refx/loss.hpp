#pragma once

#include <string_view>

#include "refx/common.hpp"
#include "refx/models.hpp"

namespace refx {

enum class Loss { kMse, kMae, kLogLoss, kOneMinusAuc };

std::string_view to_string(Loss loss);
// Accepts "mse", "mae", "logloss", "one_minus_auc" (case-insensitive).
Loss parse_loss(std::string_view text);

// AUC by the rank statistic: over all (positive, negative) pairs, 1 when the
// positive scores higher, 0.5 on ties. Labels must be 0/1 with both present.
double auc(const Vector& scores, const Vector& labels);

// Mean loss. LOGLOSS requires scores strictly inside (0, 1).
double loss_value(Loss loss, const Vector& scores, const Vector& targets);

double evaluate_loss(const Predictor& pred, const Dataset& ds, Loss loss);

}  // namespace refx
