// SPDX-License-Identifier: Apache-2.0
//
// Tests for the spectral oracle: deterministic decomposition, the bifactor
// (rotation-family) optimum, the trifactor optimum and gap reporting. The
// 2-node constants were derived by hand: the normalized adjacency
// [[0.6, 0.4], [0.4, 0.6]] has eigenpairs (1.0, (1,1)/sqrt(2)) and
// (0.2, (1,-1)/sqrt(2)), and ||Abar||^2 = 1.04.
#include "tricl/spectra.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "tricl/error.hpp"
#include "tricl/graph.hpp"
#include "tricl/losses.hpp"
#include "tricl/rng.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

tricl::NormalizedAdjacency two_node_abar() {
  tricl::NormalizedAdjacency na;
  na.matrix.resize(2, 2);
  na.matrix << 0.6, 0.4, 0.4, 0.6;
  return na;
}

VectorXd two_node_degrees() { return VectorXd::Constant(2, 0.5); }

// softplus inverse, for evaluating losses at a prescribed importance value.
VectorXd raw_for_importance(const VectorXd& s) {
  VectorXd raw(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) raw(j) = std::log(std::expm1(s(j)));
  return raw;
}

tricl::AugmentationGraph small_class_graph(std::uint64_t seed) {
  tricl::ClassGraphSpec spec;
  spec.num_classes = 2;
  spec.naturals_per_class = 2;
  spec.augmentations_per_natural = 3;
  spec.within_class_mix = 0.55;
  spec.cross_class_leak = 0.07;
  spec.seed = seed;
  return tricl::generate_class_graph(spec);
}

TEST(Decompose, TwoNodeMatrixMatchesHandEigendecomposition) {
  const auto ref = tricl::decompose(two_node_abar().matrix, 2);
  ASSERT_EQ(ref.singular_values.size(), 2);
  EXPECT_NEAR(ref.singular_values(0), 1.0, 1e-12);
  EXPECT_NEAR(ref.singular_values(1), 0.2, 1e-12);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(ref.left_vectors(0, 0), r, 1e-12);
  EXPECT_NEAR(ref.left_vectors(1, 0), r, 1e-12);
  EXPECT_NEAR(ref.left_vectors(0, 1), r, 1e-12);
  EXPECT_NEAR(ref.left_vectors(1, 1), -r, 1e-12);
  // Both eigenvalues are positive, so right vectors equal left vectors.
  EXPECT_EQ(ref.left_vectors, ref.right_vectors);
  EXPECT_TRUE(ref.warnings.empty());
}

TEST(Decompose, IdentityHasUnitSpectrumAndDegeneracyWarning) {
  const auto ref = tricl::decompose(MatrixXd::Identity(5, 5), 3);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(ref.singular_values(i), 1.0, 1e-12);
  EXPECT_FALSE(ref.warnings.empty());
}

TEST(Decompose, ResidualEqualsTailSumOnRectangularInput) {
  auto rng = tricl::make_engine(52);
  const MatrixXd m = tricl::gaussian_matrix(50, 30, 1.0, rng);
  for (int k : {0, 5, 13}) {
    const auto ref = tricl::decompose(m, k);
    const MatrixXd approx = ref.left_vectors.leftCols(k) *
                            ref.singular_values.head(k).asDiagonal() *
                            ref.right_vectors.leftCols(k).transpose();
    const double tail = ref.singular_values.tail(ref.singular_values.size() - k).squaredNorm();
    EXPECT_NEAR((m - approx).squaredNorm(), tail, 1e-8) << "k=" << k;
  }
}

TEST(Decompose, LeftVectorsOrthonormalAndEigenEquationHolds) {
  const auto g = small_class_graph(11);
  const MatrixXd abar = tricl::normalize(g).matrix;
  const auto ref = tricl::decompose(abar, 4);
  const Eigen::Index r = ref.left_vectors.cols();
  const MatrixXd gram = ref.left_vectors.transpose() * ref.left_vectors;
  EXPECT_LT((gram - MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
  // Abar u_i = lambda_i u_i with |lambda_i| = sigma_i; the stored right vector
  // carries the eigenvalue sign, so Abar * left = sigma * right.
  for (Eigen::Index i = 0; i < r; ++i) {
    const VectorXd lhs = abar * ref.left_vectors.col(i);
    const VectorXd rhs = ref.singular_values(i) * ref.right_vectors.col(i);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8) << "column " << i;
  }
}

TEST(Decompose, DeterministicBitForBit) {
  const auto g = small_class_graph(23);
  const MatrixXd abar = tricl::normalize(g).matrix;
  const auto a = tricl::decompose(abar, 3);
  const auto b = tricl::decompose(abar, 3);
  EXPECT_EQ(a.singular_values, b.singular_values);
  EXPECT_EQ(a.left_vectors, b.left_vectors);
  EXPECT_EQ(a.right_vectors, b.right_vectors);
}

TEST(Decompose, SignConventionMakesLargestEntryPositive) {
  auto rng = tricl::make_engine(77);
  const MatrixXd m = tricl::gaussian_matrix(9, 9, 1.0, rng);
  const MatrixXd sym = 0.5 * (m + m.transpose());
  const auto ref = tricl::decompose(sym, 9);
  for (Eigen::Index j = 0; j < ref.left_vectors.cols(); ++j) {
    Eigen::Index best = 0;
    ref.left_vectors.col(j).cwiseAbs().maxCoeff(&best);
    EXPECT_GT(ref.left_vectors(best, j), 0.0) << "column " << j;
  }
}

TEST(Decompose, RankOutOfRangeIsAnError) {
  EXPECT_THROW(tricl::decompose(MatrixXd::Identity(3, 3), 4), tricl::Error);
  EXPECT_THROW(tricl::decompose(MatrixXd::Identity(3, 3), -1), tricl::Error);
}

TEST(Decompose, BeatsRandomRankKFactorizations) {
  // Eckart-Young: the truncated decomposition is at least as good as any other
  // rank-k factorization; compare against 20 random candidates.
  auto rng = tricl::make_engine(301);
  const MatrixXd m = tricl::gaussian_matrix(12, 9, 1.0, rng);
  const int k = 3;
  const auto ref = tricl::decompose(m, k);
  const double best = ref.singular_values.tail(ref.singular_values.size() - k).squaredNorm();
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd x = tricl::gaussian_matrix(12, k, 1.0, rng);
    MatrixXd y = tricl::gaussian_matrix(9, k, 1.0, rng);
    // Scale the candidate to the truncation's norm so the comparison is not
    // won purely on magnitude.
    const double target = ref.singular_values.head(k).norm();
    const MatrixXd candidate = (x * y.transpose()) * (target / (x * y.transpose()).norm());
    EXPECT_LE(best, (m - candidate).squaredNorm() + 1e-10) << "trial " << trial;
  }
}

TEST(SclClosedForm, TwoNodeOptimumHasZeroResidualAndKnownValue) {
  const auto abar = two_node_abar();
  const auto ref = tricl::decompose(abar.matrix, 2);
  const MatrixXd f = tricl::scl_closed_form(ref, two_node_degrees());
  // Feature-level optimum: f*(x1) = (1, sqrt(0.2)), f*(x2) = (1, -sqrt(0.2)).
  // The sqrt makes the scaled table reproduce Abar exactly (zero residual),
  // which is what the global-minimum contract requires.
  const double root02 = std::sqrt(0.2);
  EXPECT_NEAR(f(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(f(0, 1), root02, 1e-12);
  EXPECT_NEAR(f(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(f(1, 1), -root02, 1e-12);

  const MatrixXd table = two_node_degrees().array().sqrt().matrix().asDiagonal() * f;
  EXPECT_LT((table * table.transpose() - abar.matrix).cwiseAbs().maxCoeff(), 1e-12);
  const auto loss = tricl::scl_loss(abar, table);
  EXPECT_NEAR(loss.value, -1.04, 1e-12);
}

TEST(SclClosedForm, LossInvariantUnderRotations) {
  const auto g = small_class_graph(31);
  const auto abar = tricl::normalize(g);
  const int k = 3;
  const auto ref = tricl::decompose(abar.matrix, k);
  const MatrixXd base = tricl::scl_closed_form(ref, g.degrees);
  const MatrixXd table0 = g.degrees.array().sqrt().matrix().asDiagonal() * base;
  const double value0 = tricl::scl_loss(abar, table0).value;
  // Also the analytic optimum value.
  const double tail = ref.singular_values.tail(ref.singular_values.size() - k).squaredNorm();
  EXPECT_NEAR(value0, tail - abar.matrix.squaredNorm(), 1e-8);

  auto rng = tricl::make_engine(5);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd rot = tricl::haar_orthogonal(k, rng);
    const MatrixXd rotated = tricl::scl_closed_form(ref, g.degrees, rot);
    const MatrixXd table = g.degrees.array().sqrt().matrix().asDiagonal() * rotated;
    EXPECT_NEAR(tricl::scl_loss(abar, table).value, value0, 1e-10) << "trial " << trial;
  }
}

TEST(SclClosedForm, RejectsBadRotations) {
  const auto ref = tricl::decompose(two_node_abar().matrix, 2);
  MatrixXd not_unitary(2, 2);
  not_unitary << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(tricl::scl_closed_form(ref, two_node_degrees(), not_unitary), tricl::Error);
  EXPECT_THROW(tricl::scl_closed_form(ref, two_node_degrees(), MatrixXd::Identity(3, 3)),
               tricl::Error);
}

TEST(SclClosedForm, RankZeroGivesEmptyFeaturesAndStructureConstant) {
  const auto abar = two_node_abar();
  const auto ref = tricl::decompose(abar.matrix, 0);
  const MatrixXd f = tricl::scl_closed_form(ref, two_node_degrees());
  EXPECT_EQ(f.rows(), 2);
  EXPECT_EQ(f.cols(), 0);
  const auto loss = tricl::scl_loss(abar, f);
  // With no features the loss is the structure constant
  // sum_i sigma_i^2 - ||Abar||^2 = 0.
  EXPECT_NEAR(loss.value, ref.singular_values.squaredNorm() - abar.matrix.squaredNorm(), 1e-12);
  EXPECT_NEAR(loss.value, 0.0, 1e-12);
}

TEST(TriclClosedForm, TwoNodeOptimumMatchesHandValues) {
  const auto ref = tricl::decompose(two_node_abar().matrix, 2);
  const auto gt = tricl::tricl_closed_form(ref, two_node_degrees());
  ASSERT_EQ(gt.importance.size(), 2);
  EXPECT_NEAR(gt.importance(0), 1.0, 1e-12);
  EXPECT_NEAR(gt.importance(1), 0.2, 1e-12);
  MatrixXd expected(2, 2);
  expected << 1.0, 1.0, 1.0, -1.0;
  EXPECT_LT((gt.features - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE(gt.convention_note.empty());
}

TEST(TriclClosedForm, FeaturesDecorrelateUnderDegreeWeights) {
  const auto g = small_class_graph(47);
  const auto ref = tricl::decompose(tricl::normalize(g).matrix, 4);
  const auto gt = tricl::tricl_closed_form(ref, g.degrees);
  MatrixXd second_moment = MatrixXd::Zero(4, 4);
  for (int x = 0; x < g.n; ++x)
    second_moment += g.degrees(x) * gt.features.row(x).transpose() * gt.features.row(x);
  EXPECT_LT((second_moment - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TriclClosedForm, AchievesTailSumLossValue) {
  const auto g = small_class_graph(13);
  const auto abar = tricl::normalize(g);
  const int k = 3;
  const auto ref = tricl::decompose(abar.matrix, k);
  const auto gt = tricl::tricl_closed_form(ref, g.degrees);
  const MatrixXd table = g.degrees.array().sqrt().matrix().asDiagonal() * gt.features;
  const auto loss = tricl::tricl_loss(abar, table, raw_for_importance(gt.importance), 1.0);
  const double tail = ref.singular_values.tail(ref.singular_values.size() - k).squaredNorm();
  EXPECT_NEAR(loss.value, tail - abar.matrix.squaredNorm(), 1e-10);
}

TEST(TriclClosedForm, PropagatesDegeneracyWarnings) {
  const auto ref = tricl::decompose(MatrixXd::Identity(4, 4), 2);
  const auto gt = tricl::tricl_closed_form(ref, VectorXd::Constant(4, 0.25));
  EXPECT_FALSE(gt.warnings.empty());
}

TEST(SpectralGapReport, TwoNodeSpectrumHasSingleWideGap) {
  const auto ref = tricl::decompose(two_node_abar().matrix, 2);
  const auto report = tricl::spectral_gap_report(ref, 2);
  ASSERT_EQ(report.gaps.size(), 1u);
  EXPECT_EQ(report.gaps[0].index, 1);
  EXPECT_NEAR(report.gaps[0].gap, 0.8, 1e-12);
  EXPECT_FALSE(report.degenerate);
}

TEST(SpectralGapReport, FlagsRepeatedSpectrum) {
  const auto ref = tricl::decompose(MatrixXd::Identity(4, 4), 3);
  const auto report = tricl::spectral_gap_report(ref, 3);
  EXPECT_TRUE(report.degenerate);
  for (const auto& e : report.gaps) EXPECT_NEAR(e.gap, 0.0, 1e-12);
}

TEST(SpectralGapReport, WellSeparatedSpectrumIsClean) {
  MatrixXd m = MatrixXd::Zero(3, 3);
  m.diagonal() << 0.9, 0.5, 0.3;
  const auto ref = tricl::decompose(m, 2);
  const auto report = tricl::spectral_gap_report(ref, 2);
  EXPECT_FALSE(report.degenerate);
  ASSERT_EQ(report.gaps.size(), 2u);
  EXPECT_NEAR(report.gaps[0].gap, 0.4, 1e-12);
  EXPECT_NEAR(report.gaps[1].gap, 0.2, 1e-12);
}

}  // namespace
