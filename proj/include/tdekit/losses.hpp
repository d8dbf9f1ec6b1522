#pragma once

#include <Eigen/Core>

#include "tdekit/common.hpp"
#include "tdekit/embedding.hpp"

namespace tde {

/// Row-stochastic cross-channel transition probabilities:
/// A(s, t) = softmax_t( h1(s) . h2(t) / c ). Keeps the embeddings that
/// produced it so losses can push gradients back through the softmax.
struct AffinityMatrix {
  Eigen::MatrixXd values;  // n x n, rows sum to 1
  double temperature = 0.05;
  Eigen::MatrixXd h1, h2;  // n x d row embeddings (first / second argument)
};

AffinityMatrix affinity(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2,
                        double temperature = 0.05);
AffinityMatrix affinity(const EmbeddingSequence& h1, const EmbeddingSequence& h2,
                        double temperature = 0.05);

/// Loss value plus exact gradients with respect to both embedding sets.
/// grad_h1 / grad_h2 refer to the first / second argument of the A12
/// affinity (for the walk losses, the two channels).
struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad_h1;
  Eigen::MatrixXd grad_h2;
};

/// Cycle-consistency walk loss  L = -(1/n) tr(log(A12 * A21)) with the log
/// taken element-wise on the diagonal, floored at 1e-12.
/// a21 must be affinity(h2, h1, c) for the same embeddings as a12.
LossResult crw_loss(const AffinityMatrix& a12, const AffinityMatrix& a21);

/// Temporal co-occurrence loss  L = -(1/n) tr(log A12), same flooring.
LossResult zero_loss(const AffinityMatrix& a12);

/// Instance-discrimination loss over one clip: the positive for timestep t
/// is the shift-corrected row of h_aug; negatives are all rows of h_aug.
/// shift_samples is the time-shift augmentation applied to the clip behind
/// h_aug and must be divisible by the window step; rows without a
/// shift-corrected partner are dropped from the loss.
LossResult monoclr_loss(const EmbeddingSequence& h, const EmbeddingSequence& h_aug,
                        int shift_samples, double temperature = 0.05);

}  // namespace tde
