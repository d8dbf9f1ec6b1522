#include "tdekit/losses.hpp"

#include <cmath>

namespace tde {

namespace {

constexpr double kLogFloor = 1e-12;

// Backprop through a row-wise softmax: given probabilities p (rows of A) and
// upstream dL/dA, returns dL/dlogits.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& dprobs) {
  Eigen::MatrixXd dlogits(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double dot = dprobs.row(i).dot(probs.row(i));
    dlogits.row(i) = probs.row(i).array() * (dprobs.row(i).array() - dot);
  }
  return dlogits;
}

}  // namespace

AffinityMatrix affinity(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2, double temperature) {
  require(temperature > 0, "affinity: temperature must be positive");
  require(h1.rows() == h2.rows() && h1.cols() == h2.cols(),
          "affinity: embedding sets must have equal row counts and dimension");
  require(h1.rows() >= 1, "affinity: empty embedding sets");

  AffinityMatrix a;
  a.temperature = temperature;
  a.h1 = h1;
  a.h2 = h2;
  Eigen::MatrixXd logits = h1 * h2.transpose() / temperature;
  a.values.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    a.values.row(i) = (e / e.sum()).matrix();
  }
  return a;
}

AffinityMatrix affinity(const EmbeddingSequence& h1, const EmbeddingSequence& h2,
                        double temperature) {
  return affinity(h1.vectors, h2.vectors, temperature);
}

LossResult crw_loss(const AffinityMatrix& a12, const AffinityMatrix& a21) {
  const Eigen::Index n = a12.values.rows();
  require(a21.values.rows() == n && a21.values.cols() == n && a12.values.cols() == n,
          "crw_loss: affinity matrices must be conformable n x n");
  require(a12.h1.rows() == n && a21.h1.rows() == n, "crw_loss: affinity matrices lack embeddings");

  const Eigen::MatrixXd product = a12.values * a21.values;

  LossResult r;
  Eigen::VectorXd ddiag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = product(i, i);
    const double floored = std::max(p, kLogFloor);
    r.value -= std::log(floored) / static_cast<double>(n);
    ddiag[i] = p >= kLogFloor ? -1.0 / (static_cast<double>(n) * p) : 0.0;
  }

  // dL/dA12(i,k) = ddiag_i * A21(k,i);  dL/dA21(k,j) = ddiag_j * A12(j,k)
  const Eigen::MatrixXd dA12 = ddiag.asDiagonal() * a21.values.transpose();
  const Eigen::MatrixXd dA21 = (ddiag.asDiagonal() * a12.values).transpose();

  const Eigen::MatrixXd dS12 = softmax_backward(a12.values, dA12);
  const Eigen::MatrixXd dS21 = softmax_backward(a21.values, dA21);

  // S12 = H1 H2^T / c and S21 = H2 H1^T / c share the same embeddings.
  const double inv_c = 1.0 / a12.temperature;
  r.grad_h1 = (dS12 * a12.h2 + dS21.transpose() * a21.h1) * inv_c;
  r.grad_h2 = (dS12.transpose() * a12.h1 + dS21 * a21.h2) * inv_c;
  return r;
}

LossResult zero_loss(const AffinityMatrix& a12) {
  const Eigen::Index n = a12.values.rows();
  require(a12.values.cols() == n, "zero_loss: affinity must be square");

  LossResult r;
  Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = a12.values(i, i);
    const double floored = std::max(p, kLogFloor);
    r.value -= std::log(floored) / static_cast<double>(n);
    if (p >= kLogFloor) dA(i, i) = -1.0 / (static_cast<double>(n) * p);
  }

  const Eigen::MatrixXd dS = softmax_backward(a12.values, dA);
  const double inv_c = 1.0 / a12.temperature;
  r.grad_h1 = dS * a12.h2 * inv_c;
  r.grad_h2 = dS.transpose() * a12.h1 * inv_c;
  return r;
}

LossResult monoclr_loss(const EmbeddingSequence& h, const EmbeddingSequence& h_aug,
                        int shift_samples, double temperature) {
  require(temperature > 0, "monoclr_loss: temperature must be positive");
  const Eigen::Index n = h.vectors.rows();
  require(h_aug.vectors.rows() == n && h_aug.vectors.cols() == h.vectors.cols(),
          "monoclr_loss: embedding sets must have matching shapes");
  const int step = h.window_step;
  require(step >= 1, "monoclr_loss: embedding sequences must record a window step");
  require(shift_samples % step == 0,
          "monoclr_loss: time shift is not divisible by the window step; alignment impossible");

  // Window t of the original clip corresponds to window t + shift/step of the
  // clip shifted right by shift_samples.
  const Eigen::Index offset = shift_samples / step;
  const Eigen::Index lo = std::max<Eigen::Index>(0, -offset);
  const Eigen::Index hi = std::min<Eigen::Index>(n, n - offset);
  require(hi - lo >= 2, "monoclr_loss: fewer than two aligned indices after shift correction");

  const Eigen::MatrixXd logits = h.vectors * h_aug.vectors.transpose() / temperature;

  LossResult r;
  r.grad_h1 = Eigen::MatrixXd::Zero(n, h.vectors.cols());
  r.grad_h2 = Eigen::MatrixXd::Zero(n, h.vectors.cols());
  const double inv_m = 1.0 / static_cast<double>(hi - lo);
  const double inv_c = 1.0 / temperature;

  for (Eigen::Index t = lo; t < hi; ++t) {
    const Eigen::Index pos = t + offset;
    const double m = logits.row(t).maxCoeff();
    Eigen::ArrayXd e = (logits.row(t).array() - m).exp();
    const double z = e.sum();
    r.value -= (logits(t, pos) - m - std::log(z)) * inv_m;

    // d(-log softmax)/dlogits = p - onehot(pos)
    Eigen::VectorXd dlogit = (e / z).matrix() * inv_m;
    dlogit[pos] -= inv_m;
    r.grad_h1.row(t) += (dlogit.transpose() * h_aug.vectors) * inv_c;
    r.grad_h2 += dlogit * h.vectors.row(t) * inv_c;
  }
  return r;
}

}  // namespace tde
