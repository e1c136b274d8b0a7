// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "tricl/error.hpp"
#include "tricl/graph.hpp"

namespace tricl {

// Numerically stable softplus / logistic pair; the loss gradients flow through these.
inline double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline Eigen::VectorXd softplus(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return softplus(x); });
}
inline Eigen::VectorXd logistic(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return logistic(x); });
}

// raw value whose softplus is exactly 1: ln(e - 1).
inline double raw_importance_for_unit() { return std::log(std::expm1(1.0)); }

// Trainable embedding table. F_x = sqrt(d_x) f(x); importance s = softplus(raw).
struct EmbeddingModel {
  Eigen::MatrixXd scaled_features;   // N x k
  Eigen::VectorXd raw_importance;    // length k

  Eigen::VectorXd importance() const { return softplus(raw_importance); }
};

struct LossValueAndGradient {
  double value = 0.0;
  Eigen::MatrixXd grad_features;        // matches F (or F_A / F_online)
  Eigen::VectorXd grad_raw_importance;  // size 0 when the loss has no importance
  Eigen::MatrixXd grad_features_b;      // second side (triCLIP); 0x0 otherwise
};

// ||Abar - F F^T||^2 - ||Abar||^2; the subtracted constant makes the zero-feature
// value 0 and the optimum value -||Abar||^2 + sum_{i>k} sigma_i^2.
inline LossValueAndGradient scl_loss(const NormalizedAdjacency& abar, const Eigen::MatrixXd& f) {
  check(abar.matrix.rows() == abar.matrix.cols(), "scl_loss: adjacency must be square");
  check(f.rows() == abar.matrix.rows(), "scl_loss: feature rows must match graph size");
  LossValueAndGradient out;
  Eigen::MatrixXd e = f * f.transpose() - abar.matrix;
  out.value = e.squaredNorm() - abar.matrix.squaredNorm();
  out.grad_features = 4.0 * e * f;
  return out;
}

inline LossValueAndGradient dec_penalty(const Eigen::MatrixXd& f) {
  const Eigen::Index k = f.cols();
  LossValueAndGradient out;
  Eigen::MatrixXd c = f.transpose() * f - Eigen::MatrixXd::Identity(k, k);
  out.value = c.squaredNorm();
  out.grad_features = 4.0 * f * c;
  return out;
}

// (||Abar - F diag(s) F^T||^2 - ||Abar||^2) + lambda ||F^T F - I||^2, s = softplus(raw).
inline LossValueAndGradient tricl_loss(const NormalizedAdjacency& abar, const Eigen::MatrixXd& f,
                                       const Eigen::VectorXd& raw_importance, double lambda) {
  check(abar.matrix.rows() == abar.matrix.cols(), "tricl_loss: adjacency must be square");
  check(f.rows() == abar.matrix.rows(), "tricl_loss: feature rows must match graph size");
  check(raw_importance.size() == f.cols(), "tricl_loss: importance length must match feature dims");
  check(lambda >= 0.0, "tricl_loss: penalty weight must be nonnegative");
  const Eigen::Index k = f.cols();
  Eigen::VectorXd s = softplus(raw_importance);
  Eigen::MatrixXd e = f * s.asDiagonal() * f.transpose() - abar.matrix;
  Eigen::MatrixXd c = f.transpose() * f - Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd ef = e * f;  // shared by both gradients

  LossValueAndGradient out;
  out.value = e.squaredNorm() - abar.matrix.squaredNorm() + lambda * c.squaredNorm();
  out.grad_features = 4.0 * ef * s.asDiagonal() + 4.0 * lambda * f * c;
  out.grad_raw_importance.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    out.grad_raw_importance(j) = 2.0 * f.col(j).dot(ef.col(j)) * logistic(raw_importance(j));
  return out;
}

// Exact expectation form of the InfoNCE-style objective:
//   -sum_{x,x+} A_{x,x+} log[ exp(f(x)^T S f(x+)) / sum_{x-} d_{x-} exp(f(x)^T S f(x-)) ]
//   + lambda ||F^T F - I||^2,  f(x) = F_x / sqrt(d_x).
// Log-sum-exp uses a per-anchor max shift.
inline LossValueAndGradient tri_infonce_loss(const NormalizedAdjacency& abar,
                                             const Eigen::VectorXd& d, const Eigen::MatrixXd& f,
                                             const Eigen::VectorXd& raw_importance, double lambda) {
  const Eigen::Index n = abar.matrix.rows();
  check(abar.matrix.cols() == n, "tri_infonce_loss: adjacency must be square");
  check(f.rows() == n, "tri_infonce_loss: feature rows must match graph size");
  check(d.size() == n, "tri_infonce_loss: degree length mismatch");
  check((d.array() > 0.0).all(), "tri_infonce_loss: degrees must be positive");
  check(raw_importance.size() == f.cols(),
        "tri_infonce_loss: importance length must match feature dims");
  check(lambda >= 0.0, "tri_infonce_loss: penalty weight must be nonnegative");
  const Eigen::Index k = f.cols();
  Eigen::VectorXd s = softplus(raw_importance);
  Eigen::VectorXd inv_sqrt_d = d.array().rsqrt();
  Eigen::VectorXd sqrt_d = d.array().sqrt();
  Eigen::MatrixXd phi = inv_sqrt_d.asDiagonal() * f;               // rows are f(x)
  Eigen::MatrixXd a = sqrt_d.asDiagonal() * abar.matrix * sqrt_d.asDiagonal();  // pair weights
  Eigen::MatrixXd logits = phi * s.asDiagonal() * phi.transpose();

  double align = -(a.array() * logits.array()).sum();
  // W = dL/dlogits = -A + diag(d) Q, where Q_x is the d-weighted softmax of row x.
  Eigen::MatrixXd w = -a;
  for (Eigen::Index x = 0; x < n; ++x) {
    const double shift = logits.row(x).maxCoeff();
    Eigen::ArrayXd expl = (logits.row(x).transpose().array() - shift).exp() * d.array();
    const double z = expl.sum();
    align += d(x) * (shift + std::log(z));
    w.row(x) += d(x) * (expl / z).matrix().transpose();
  }

  Eigen::MatrixXd c = f.transpose() * f - Eigen::MatrixXd::Identity(k, k);
  LossValueAndGradient out;
  out.value = align + lambda * c.squaredNorm();
  Eigen::MatrixXd grad_phi = (w + w.transpose()) * phi * s.asDiagonal();
  out.grad_features = inv_sqrt_d.asDiagonal() * grad_phi + 4.0 * lambda * f * c;
  out.grad_raw_importance.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    out.grad_raw_importance(j) =
        phi.col(j).dot(w * phi.col(j)) * logistic(raw_importance(j));
  return out;
}

// ||Pbar - F_A diag(s) F_B^T||^2 - ||Pbar||^2 + lambda(||F_A^T F_A - I||^2 + ||F_B^T F_B - I||^2).
inline LossValueAndGradient triclip_loss(const NormalizedJoint& pbar, const Eigen::MatrixXd& fa,
                                         const Eigen::MatrixXd& fb,
                                         const Eigen::VectorXd& raw_importance, double lambda) {
  check(fa.rows() == pbar.matrix.rows(), "triclip_loss: side-A rows must match joint rows");
  check(fb.rows() == pbar.matrix.cols(), "triclip_loss: side-B rows must match joint cols");
  check(fa.cols() == fb.cols(), "triclip_loss: both sides must share the feature dimension");
  check(raw_importance.size() == fa.cols(),
        "triclip_loss: importance length must match feature dims");
  check(lambda >= 0.0, "triclip_loss: penalty weight must be nonnegative");
  const Eigen::Index k = fa.cols();
  Eigen::VectorXd s = softplus(raw_importance);
  Eigen::MatrixXd e = fa * s.asDiagonal() * fb.transpose() - pbar.matrix;
  Eigen::MatrixXd ca = fa.transpose() * fa - Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd cb = fb.transpose() * fb - Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd efb = e * fb;  // shared

  LossValueAndGradient out;
  out.value = e.squaredNorm() - pbar.matrix.squaredNorm() +
              lambda * (ca.squaredNorm() + cb.squaredNorm());
  out.grad_features = 2.0 * efb * s.asDiagonal() + 4.0 * lambda * fa * ca;
  out.grad_features_b = 2.0 * e.transpose() * fa * s.asDiagonal() + 4.0 * lambda * fb * cb;
  out.grad_raw_importance.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    out.grad_raw_importance(j) = 2.0 * fa.col(j).dot(efb.col(j)) * logistic(raw_importance(j));
  return out;
}

// Non-contrastive (stop-gradient) objective:
//   2 - 2 sum_{x,x+} A_{x,x+} (g_x^T S t_{x+}) / (||g_x|| ||t_{x+}||)
//   + lambda ||F_online^T F_online - I||^2,
// rows of the online/target tables used directly; no gradient reaches the target.
inline LossValueAndGradient trimse_loss(const NormalizedAdjacency& abar, const Eigen::VectorXd& d,
                                        const Eigen::MatrixXd& f_online,
                                        const Eigen::MatrixXd& f_target,
                                        const Eigen::VectorXd& raw_importance, double lambda) {
  const Eigen::Index n = abar.matrix.rows();
  check(abar.matrix.cols() == n, "trimse_loss: adjacency must be square");
  check(f_online.rows() == n && f_target.rows() == n,
        "trimse_loss: feature rows must match graph size");
  check(f_online.cols() == f_target.cols(), "trimse_loss: online/target dims must agree");
  check(d.size() == n, "trimse_loss: degree length mismatch");
  check(raw_importance.size() == f_online.cols(),
        "trimse_loss: importance length must match feature dims");
  check(lambda >= 0.0, "trimse_loss: penalty weight must be nonnegative");
  const Eigen::Index k = f_online.cols();
  Eigen::VectorXd gn = f_online.rowwise().norm();
  Eigen::VectorXd tn = f_target.rowwise().norm();
  for (Eigen::Index x = 0; x < n; ++x) {
    check(gn(x) > 0.0, "trimse_loss: zero-norm online row " + std::to_string(x));
    check(tn(x) > 0.0, "trimse_loss: zero-norm target row " + std::to_string(x));
  }
  Eigen::VectorXd s = softplus(raw_importance);
  Eigen::VectorXd sqrt_d = d.array().sqrt();
  Eigen::MatrixXd a = sqrt_d.asDiagonal() * abar.matrix * sqrt_d.asDiagonal();
  Eigen::MatrixXd m = f_online * s.asDiagonal() * f_target.transpose();
  // W_xp = A_xp / (||g_x|| ||t_p||)
  Eigen::MatrixXd w = gn.array().inverse().matrix().asDiagonal() * a *
                      tn.array().inverse().matrix().asDiagonal();

  LossValueAndGradient out;
  out.value = 2.0 - 2.0 * (w.array() * m.array()).sum();
  Eigen::MatrixXd c =
      f_online.transpose() * f_online - Eigen::MatrixXd::Identity(k, k);
  out.value += lambda * c.squaredNorm();
  // d/dG of -2 sum W_xp (G S T^T)_xp, including the 1/||g_x|| factor inside W.
  Eigen::VectorXd row_coupling = (w.array() * m.array()).rowwise().sum();
  out.grad_features = -2.0 * (w * f_target * s.asDiagonal()) +
                      2.0 * (row_coupling.array() / gn.array().square()).matrix().asDiagonal() *
                          f_online +
                      4.0 * lambda * f_online * c;
  out.grad_raw_importance.resize(k);
  for (Eigen::Index j = 0; j < k; ++j)
    out.grad_raw_importance(j) =
        -2.0 * f_online.col(j).dot(w * f_target.col(j)) * logistic(raw_importance(j));
  return out;
}

struct FiniteDifferenceReport {
  double max_rel_error = 0.0;
  Eigen::Index worst_coordinate = -1;
  Eigen::Index coordinates_checked = 0;
};

// Central-difference audit of an analytic gradient over a flat parameter vector.
// Checks every coordinate, or a seeded random subset of at least `min_subset` for
// large models. Relative error uses a small absolute floor so exact-zero gradient
// coordinates do not produce spurious blowups.
inline FiniteDifferenceReport finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& loss_fn, const Eigen::VectorXd& params,
    const Eigen::VectorXd& analytic_grad, double epsilon, std::uint64_t seed = 0,
    Eigen::Index min_subset = 200) {
  check(epsilon >= 1e-7 && epsilon <= 1e-3, "finite_difference_check: epsilon outside [1e-7, 1e-3]");
  check(params.size() == analytic_grad.size(),
        "finite_difference_check: gradient length must match parameters");
  const Eigen::Index dim = params.size();
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(dim));
  std::iota(coords.begin(), coords.end(), 0);
  if (dim > std::max<Eigen::Index>(min_subset, 200)) {
    auto rng = make_engine(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(std::max<Eigen::Index>(min_subset, 200)));
    std::sort(coords.begin(), coords.end());
  }

  FiniteDifferenceReport report;
  Eigen::VectorXd p = params;
  for (Eigen::Index i : coords) {
    const double keep = p(i);
    p(i) = keep + epsilon;
    const double up = loss_fn(p);
    p(i) = keep - epsilon;
    const double down = loss_fn(p);
    p(i) = keep;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(numeric), std::abs(analytic_grad(i)), 1e-3});
    const double rel = std::abs(numeric - analytic_grad(i)) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  report.coordinates_checked = static_cast<Eigen::Index>(coords.size());
  return report;
}

}  // namespace tricl
