#pragma once

#include <Eigen/Core>
#include <vector>

#include "dynloss/schedule.hpp"

namespace dynloss {

/// Class-weighted mean cross entropy:
///   (1/P) sum_j gamma[y_j] * (-log softmax(logits_j)[y_j])
/// computed with the usual max-shift so any finite logits are safe.
/// With gamma all ones this is the standard mean cross entropy.
double dynamical_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                    const ClassWeights& gamma);

/// Mean squared error against one-hot targets on raw logits:
///   (1/(2P)) sum_{j,k} (logits_{jk} - onehot(y_j)_k)^2
double mse_loss(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Residual vector g of length P*C, entry (j*C + k) = logits_{jk} - onehot(y_j)_k.
/// Satisfies mse_loss = |g|^2 / (2P).
Eigen::VectorXd residuals(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

}  // namespace dynloss
