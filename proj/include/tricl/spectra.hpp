// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tricl/error.hpp"

namespace tricl {

// Full spectral decomposition of a normalized adjacency (or any dense matrix).
// The entire spectrum is retained (r = min dims); `k` marks the prefix used by the
// closed-form optima. For symmetric input the columns of U are eigenvectors and
// right_vectors(i) = sign(lambda_i) * U(i).
struct SpectralReference {
  Eigen::VectorXd singular_values;  // descending, length r
  Eigen::MatrixXd left_vectors;     // N x r, orthonormal columns
  Eigen::MatrixXd right_vectors;    // M x r
  int k = 0;                        // retained rank
  std::vector<std::string> warnings;
};

// Closed-form trifactor optimum: features row x holds f*(x), importance holds the
// top-k singular values.
struct GroundTruthModel {
  Eigen::MatrixXd features;    // N x k, rows are f*(x)
  Eigen::VectorXd importance;  // length k
  std::string convention_note;
  std::vector<std::string> warnings;
};

struct GapEntry {
  int index = 0;  // 1-based position i of the gap sigma_i - sigma_{i+1}
  double gap = 0.0;
};

struct SpectralGapReport {
  std::vector<GapEntry> gaps;
  bool degenerate = false;  // any gap < 1e-6
};

namespace detail {

// Sign convention: make the largest-magnitude entry of v positive; ties broken by
// the lowest index. Applied to left vectors; the paired right vector flips together.
inline bool needs_sign_flip(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return v(best) < 0.0;
}

inline void append_degeneracy_warnings(SpectralReference& ref) {
  const Eigen::Index r = ref.singular_values.size();
  const Eigen::Index limit = std::min<Eigen::Index>(ref.k + 1, r);
  for (Eigen::Index i = 0; i + 1 < limit; ++i) {
    if (ref.singular_values(i) - ref.singular_values(i + 1) < 1e-6) {
      ref.warnings.push_back("degenerate spectrum: gap between sigma_" + std::to_string(i + 1) +
                             " and sigma_" + std::to_string(i + 2) + " is below 1e-6");
    }
  }
}

}  // namespace detail

// Deterministic full decomposition. Symmetric input (detected exactly up to 1e-12
// of the max entry) uses the symmetric eigensolver with sigma_i = |lambda_i| and
// right vector sign(lambda_i) u_i; anything else uses a deterministic SVD.
inline SpectralReference decompose(const Eigen::MatrixXd& m, int k) {
  const Eigen::Index rows = m.rows(), cols = m.cols();
  check(rows >= 1 && cols >= 1, "decompose: empty matrix");
  check(k >= 0 && k <= std::min(rows, cols), "decompose: k must lie in [0, min(rows, cols)]");

  SpectralReference ref;
  ref.k = k;
  const double scale = m.cwiseAbs().maxCoeff();
  const bool symmetric =
      rows == cols && (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, scale);

  if (symmetric) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    check(es.info() == Eigen::Success,
          "decompose: symmetric eigensolver failed to converge (residual report: input scale " +
              std::to_string(scale) + ")");
    const Eigen::VectorXd lam = es.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(lam(a)) > std::abs(lam(b));
    });
    ref.singular_values.resize(rows);
    ref.left_vectors.resize(rows, rows);
    ref.right_vectors.resize(rows, rows);
    for (Eigen::Index j = 0; j < rows; ++j) {
      const Eigen::Index src = order[static_cast<std::size_t>(j)];
      Eigen::VectorXd u = es.eigenvectors().col(src);
      if (detail::needs_sign_flip(u)) u = -u;
      ref.singular_values(j) = std::abs(lam(src));
      ref.left_vectors.col(j) = u;
      ref.right_vectors.col(j) = lam(src) < 0.0 ? Eigen::VectorXd(-u) : u;
    }
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    check(svd.info() == Eigen::Success,
          "decompose: SVD failed to converge (residual report: input scale " +
              std::to_string(scale) + ")");
    ref.singular_values = svd.singularValues();
    ref.left_vectors = svd.matrixU();
    ref.right_vectors = svd.matrixV();
    for (Eigen::Index j = 0; j < ref.left_vectors.cols(); ++j) {
      if (detail::needs_sign_flip(ref.left_vectors.col(j))) {
        ref.left_vectors.col(j) = -ref.left_vectors.col(j);
        ref.right_vectors.col(j) = -ref.right_vectors.col(j);
      }
    }
  }
  detail::append_degeneracy_warnings(ref);
  return ref;
}

// Bifactor (importance-free) optimum set: F*(x) = (1/sqrt(d_x)) (U^k diag(sqrt(sigma)) R)_x.
// The square root is what makes F F^T match the rank-k eigentruncation of the input,
// which is the Eckart-Young minimizer; any unitary R gives the same loss value.
inline Eigen::MatrixXd scl_closed_form(const SpectralReference& ref, const Eigen::VectorXd& d,
                                       const Eigen::MatrixXd& rotation) {
  const int k = ref.k;
  check(ref.left_vectors.rows() == d.size(), "scl_closed_form: degree length mismatch");
  check((d.array() > 0.0).all(), "scl_closed_form: degrees must be positive");
  check(rotation.rows() == k && rotation.cols() == k,
        "scl_closed_form: rotation must be k x k");
  if (k > 0) {
    const double ortho_err =
        (rotation.transpose() * rotation - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
    check(ortho_err <= 1e-10, "scl_closed_form: rotation is not unitary (max deviation " +
                                  std::to_string(ortho_err) + ")");
  }
  Eigen::VectorXd root_sigma = ref.singular_values.head(k).array().sqrt();
  Eigen::MatrixXd f = ref.left_vectors.leftCols(k) * root_sigma.asDiagonal() * rotation;
  return d.array().rsqrt().matrix().asDiagonal() * f;
}

inline Eigen::MatrixXd scl_closed_form(const SpectralReference& ref, const Eigen::VectorXd& d) {
  return scl_closed_form(ref, d, Eigen::MatrixXd::Identity(ref.k, ref.k));
}

// Trifactor optimum (unique up to per-column sign): f*_j(x) = U^k_{x,j} / sqrt(d_x),
// importance_j = sigma_j.
inline GroundTruthModel tricl_closed_form(const SpectralReference& ref, const Eigen::VectorXd& d) {
  const int k = ref.k;
  check(ref.left_vectors.rows() == d.size(), "tricl_closed_form: degree length mismatch");
  check((d.array() > 0.0).all(), "tricl_closed_form: degrees must be positive");
  GroundTruthModel gt;
  gt.features = d.array().rsqrt().matrix().asDiagonal() * ref.left_vectors.leftCols(k);
  gt.importance = ref.singular_values.head(k);
  gt.convention_note =
      "column signs follow the decomposition convention: largest-magnitude entry of each "
      "left singular vector is positive";
  gt.warnings = ref.warnings;
  return gt;
}

inline SpectralGapReport spectral_gap_report(const SpectralReference& ref, int k) {
  check(k >= 0 && k <= ref.singular_values.size(), "spectral_gap_report: k out of range");
  SpectralGapReport report;
  const Eigen::Index last = std::min<Eigen::Index>(k, ref.singular_values.size() - 1);
  for (Eigen::Index i = 0; i < last; ++i) {
    GapEntry e;
    e.index = static_cast<int>(i + 1);
    e.gap = ref.singular_values(i) - ref.singular_values(i + 1);
    if (e.gap < 1e-6) report.degenerate = true;
    report.gaps.push_back(e);
  }
  return report;
}

}  // namespace tricl
