#pragma once

#include <Eigen/Core>

namespace tde {

/// Per-window unit-norm embeddings for one channel: row t is the d-vector
/// for sliding window t. window_step and rate turn row offsets into delays.
struct EmbeddingSequence {
  Eigen::MatrixXd vectors;   // n x d, rows l2-normalized
  int window_step = 0;       // samples between consecutive windows (0 = unknown)
  double rate = 16000.0;

  Eigen::Index count() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

}  // namespace tde
