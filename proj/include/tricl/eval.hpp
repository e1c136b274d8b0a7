// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tricl/error.hpp"
#include "tricl/graph.hpp"
#include "tricl/losses.hpp"
#include "tricl/rng.hpp"
#include "tricl/spectra.hpp"
#include "tricl/trainer.hpp"

namespace tricl {

// Scale constants of the downstream-error bounds: the spectral-sum term and the
// cross-class leakage term enter with these fixed coefficients.
inline constexpr double kBoundSpectrumCoefficient = 32.0;
inline constexpr double kBoundLeakageCoefficient = 80.0;

struct PairDistance {
  Eigen::Index first = 0;
  Eigen::Index second = 0;
  double distance = 0.0;
};

struct IdentifiabilityReport {
  std::string method;
  int num_runs = 0;
  double mean_pairwise_distance = 0.0;
  double distance_variance = 0.0;  // population variance over the listed pairs
  std::vector<PairDistance> pairs;
  bool no_pairs = false;  // set when fewer than two runs were supplied
};

// Pairwise Frobenius distances between feature matrices from repeated runs.
// When `require_canonical` is set, every column of every input must already be in
// canonical sign form (first above-tolerance coordinate negative).
inline IdentifiabilityReport identifiability_distance(const std::vector<Eigen::MatrixXd>& models,
                                                      const std::string& method,
                                                      bool require_canonical = true,
                                                      double tolerance = 1e-8) {
  check(!models.empty(), "identifiability_distance: at least one model required");
  const Eigen::Index rows = models.front().rows();
  const Eigen::Index cols = models.front().cols();
  for (std::size_t i = 0; i < models.size(); ++i) {
    check(models[i].rows() == rows && models[i].cols() == cols,
          "identifiability_distance: model " + std::to_string(i) + " has mismatched shape");
    if (!require_canonical) continue;
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index x = 0; x < rows; ++x) {
        if (std::abs(models[i](x, j)) <= tolerance) continue;
        check(models[i](x, j) < 0.0, "identifiability_distance: model " + std::to_string(i) +
                                         " dimension " + std::to_string(j) +
                                         " is not sign-canonicalized");
        break;
      }
    }
  }

  IdentifiabilityReport report;
  report.method = method;
  report.num_runs = static_cast<int>(models.size());
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j)
      report.pairs.push_back({static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                              (models[i] - models[j]).norm()});
  if (report.pairs.empty()) {
    report.no_pairs = true;
    return report;
  }
  double sum = 0.0;
  for (const auto& p : report.pairs) sum += p.distance;
  report.mean_pairwise_distance = sum / static_cast<double>(report.pairs.size());
  double var = 0.0;
  for (const auto& p : report.pairs) {
    const double delta = p.distance - report.mean_pairwise_distance;
    var += delta * delta;
  }
  report.distance_variance = var / static_cast<double>(report.pairs.size());
  return report;
}

struct FactorComparisonReport {
  IdentifiabilityReport trifactor;
  IdentifiabilityReport bifactor;
  bool degenerate_spectrum = false;
};

// Draws one random matrix and materializes the optimum set of the two rank-k
// factorization objectives: the two-factor optimum composed with independent
// random rotations (its full solution family), and the three-factor optimum with
// random per-dimension sign draws followed by sign canonicalization. The second
// family collapses to a single point; the first does not.
inline FactorComparisonReport bifactor_vs_trifactor_experiment(Eigen::Index rows,
                                                               Eigen::Index cols, Eigen::Index k,
                                                               int num_solutions,
                                                               std::uint64_t seed) {
  check(rows >= 1 && cols >= 1, "bifactor_vs_trifactor_experiment: empty matrix");
  check(k >= 1 && k <= std::min(rows, cols),
        "bifactor_vs_trifactor_experiment: k must lie in [1, min(rows, cols)]");
  check(num_solutions >= 1, "bifactor_vs_trifactor_experiment: need at least one solution");

  auto rng = make_engine(mix_seed(seed, 0));
  Eigen::MatrixXd target = gaussian_matrix(rows, cols, 1.0, rng);
  SpectralReference ref = decompose(target, k);
  Eigen::MatrixXd left_k = ref.left_vectors.leftCols(k);
  Eigen::VectorXd sqrt_sigma = ref.singular_values.head(k).array().sqrt();
  Eigen::MatrixXd bifactor_base = left_k * sqrt_sigma.asDiagonal();

  std::vector<Eigen::MatrixXd> bifactor_runs;
  std::vector<Eigen::MatrixXd> trifactor_runs;
  bifactor_runs.reserve(static_cast<std::size_t>(num_solutions));
  trifactor_runs.reserve(static_cast<std::size_t>(num_solutions));
  for (int i = 0; i < num_solutions; ++i) {
    auto rotation_rng = make_engine(mix_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
    bifactor_runs.push_back(bifactor_base * haar_orthogonal(k, rotation_rng));

    auto sign_rng = make_engine(mix_seed(seed, 2000 + static_cast<std::uint64_t>(i)));
    std::bernoulli_distribution coin(0.5);
    Eigen::VectorXd signs(k);
    for (Eigen::Index j = 0; j < k; ++j) signs(j) = coin(sign_rng) ? -1.0 : 1.0;
    Eigen::MatrixXd tri = left_k * signs.asDiagonal();
    canonicalize_feature_signs(tri);
    trifactor_runs.push_back(std::move(tri));
  }

  FactorComparisonReport report;
  report.trifactor = identifiability_distance(trifactor_runs, "trifactor", true);
  report.bifactor = identifiability_distance(bifactor_runs, "bifactor", false);
  report.degenerate_spectrum = !ref.warnings.empty();
  return report;
}

namespace detail {

// Distinct labels in ascending order; prediction columns follow this order, so
// argmax ties resolve to the smallest class id.
inline std::vector<int> sorted_classes(const std::vector<int>& labels) {
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

// Ranked neighbor order for one query: cosine similarity descending, index
// ascending on ties. Rows with zero norm rank below every real similarity.
inline std::vector<Eigen::Index> ranked_neighbors(const Eigen::MatrixXd& gram,
                                                  const Eigen::VectorXd& norms,
                                                  Eigen::Index query) {
  const Eigen::Index n = gram.rows();
  std::vector<std::pair<double, Eigen::Index>> order;
  order.reserve(static_cast<std::size_t>(n - 1));
  for (Eigen::Index y = 0; y < n; ++y) {
    if (y == query) continue;
    const double denom = norms(query) * norms(y);
    order.push_back({denom > 0.0 ? gram(query, y) / denom : -2.0, y});
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Eigen::Index> ranked(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = order[i].second;
  return ranked;
}

}  // namespace detail

// Closed-form ridge regression of one-hot class targets on the per-sample features,
// with samples weighted by their degrees; prediction is the argmax row score and the
// returned value is the degree-weighted zero-one error. `scaled_features` rows are
// sqrt(d_x) f(x), the trained table layout.
inline double linear_probe(const Eigen::MatrixXd& scaled_features, const std::vector<int>& labels,
                           const Eigen::VectorXd& degrees, double ridge = 1e-6) {
  const Eigen::Index n = scaled_features.rows();
  const Eigen::Index m = scaled_features.cols();
  check(m >= 1, "linear_probe: need at least one feature dimension");
  check(static_cast<Eigen::Index>(labels.size()) == n, "linear_probe: label count mismatch");
  check(degrees.size() == n, "linear_probe: degree length mismatch");
  check((degrees.array() > 0.0).all(), "linear_probe: degrees must be positive");
  check(ridge >= 0.0, "linear_probe: ridge must be nonnegative");
  std::vector<int> classes = detail::sorted_classes(labels);
  check(classes.size() >= 2, "linear_probe: need at least two classes");

  Eigen::MatrixXd phi = unscaled_features(scaled_features, degrees);
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(classes.size()));
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto it = std::lower_bound(classes.begin(), classes.end(), labels[static_cast<std::size_t>(x)]);
    targets(x, static_cast<Eigen::Index>(it - classes.begin())) = 1.0;
  }

  // Weighted normal equations: (Phi^T D Phi + ridge I) W = Phi^T D Y.
  Eigen::MatrixXd normal = phi.transpose() * degrees.asDiagonal() * phi +
                           ridge * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd moment = phi.transpose() * degrees.asDiagonal() * targets;
  Eigen::LDLT<Eigen::MatrixXd> solver(normal);
  check(solver.info() == Eigen::Success,
        "linear_probe: normal equations could not be factorized; use ridge > 0");
  if (ridge == 0.0) {
    // The factorization tolerates exact rank deficiency (it pseudo-solves), so
    // detect it from the pivots rather than a condition estimate.
    const Eigen::VectorXd pivots = solver.vectorD();
    const double largest = pivots.cwiseAbs().maxCoeff();
    check(largest > 0.0 && pivots.minCoeff() > 1e-12 * largest,
          "linear_probe: singular normal equations at ridge=0; use ridge > 0");
  }
  Eigen::MatrixXd weights = solver.solve(moment);

  Eigen::MatrixXd scores = phi * weights;
  double wrong = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    Eigen::Index best = 0;
    scores.row(x).maxCoeff(&best);  // first maximum = smallest class id on ties
    if (classes[static_cast<std::size_t>(best)] != labels[static_cast<std::size_t>(x)])
      wrong += degrees(x);
  }
  return wrong / degrees.sum();
}

// Leave-one-out k-nearest-neighbor accuracy by cosine similarity, evaluated
// independently on each half-open dimension block [begin, end). Majority vote;
// vote ties resolve to the smallest class id.
inline std::vector<double> knn_eval(const Eigen::MatrixXd& features,
                                    const std::vector<int>& labels,
                                    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& dim_blocks,
                                    int neighbors) {
  const Eigen::Index n = features.rows();
  check(static_cast<Eigen::Index>(labels.size()) == n, "knn_eval: label count mismatch");
  check(neighbors >= 1, "knn_eval: neighbor count must be positive");
  check(neighbors < n, "knn_eval: neighbor count must be below the sample count");
  check(!dim_blocks.empty(), "knn_eval: at least one dimension block required");

  std::vector<double> accuracy;
  accuracy.reserve(dim_blocks.size());
  for (const auto& [begin, end] : dim_blocks) {
    check(begin >= 0 && begin < end && end <= features.cols(),
          "knn_eval: dimension block [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") out of range");
    Eigen::MatrixXd block = features.middleCols(begin, end - begin);
    Eigen::VectorXd norms = block.rowwise().norm();
    Eigen::MatrixXd gram = block * block.transpose();
    int correct = 0;
    for (Eigen::Index x = 0; x < n; ++x) {
      std::vector<Eigen::Index> ranked = detail::ranked_neighbors(gram, norms, x);
      std::map<int, int> votes;
      for (int i = 0; i < neighbors; ++i)
        ++votes[labels[static_cast<std::size_t>(ranked[static_cast<std::size_t>(i)])]];
      int winner = votes.begin()->first;
      int best_count = votes.begin()->second;
      for (const auto& [cls, count] : votes) {
        if (count > best_count) {
          winner = cls;
          best_count = count;
        }
      }
      if (winner == labels[static_cast<std::size_t>(x)]) ++correct;
    }
    accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
  }
  return accuracy;
}

// Mean average precision of same-class retrieval: each query ranks all other
// samples by cosine similarity and keeps the top_r; the per-query average
// precision runs over the same-class hits in that list (queries with no hits
// score 0), and the result is the unweighted mean over queries.
inline double retrieval_map(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                            int top_r) {
  const Eigen::Index n = features.rows();
  check(static_cast<Eigen::Index>(labels.size()) == n, "retrieval_map: label count mismatch");
  check(top_r >= 1, "retrieval_map: top_r must be positive");
  check(top_r < n, "retrieval_map: top_r must be below the sample count");

  Eigen::VectorXd norms = features.rowwise().norm();
  Eigen::MatrixXd gram = features * features.transpose();
  double total = 0.0;
  for (Eigen::Index x = 0; x < n; ++x) {
    std::vector<Eigen::Index> ranked = detail::ranked_neighbors(gram, norms, x);
    int hits = 0;
    double precision_sum = 0.0;
    for (int rank = 1; rank <= top_r; ++rank) {
      const Eigen::Index y = ranked[static_cast<std::size_t>(rank - 1)];
      if (labels[static_cast<std::size_t>(y)] == labels[static_cast<std::size_t>(x)]) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
      }
    }
    if (hits > 0) total += precision_sum / static_cast<double>(hits);
  }
  return total / static_cast<double>(n);
}

struct BoundReport {
  Eigen::Index m = 0;
  Eigen::Index k = 0;
  double alpha = 0.0;
  double sigma_sq_top_k = 0.0;   // sum of squared singular values with index <= k
  double sigma_sq_tail_k = 0.0;  // sum with index > k
  double sigma_sq_tail_m = 0.0;  // sum with index > m
  double u_scl_raw = 0.0;        // (1 - m/k) * top-k sum + tail-k sum
  double u_tricl_raw = 0.0;      // tail-m sum
  double u_scl = 0.0;            // scaled bound including the leakage term
  double u_tricl = 0.0;
  double gap = 0.0;  // u_scl - u_tricl
};

// Downstream-error bound quantities for keeping the top m of k dimensions. The
// spectrum is the singular-value vector (values are squared internally); entries
// beyond its length count as zero. The tail sums share one accumulation so the
// m = k gap cancels exactly.
inline BoundReport bound_values(const Eigen::VectorXd& spectrum, Eigen::Index m, Eigen::Index k,
                                double alpha) {
  check(m >= 1 && m <= k, "bound_values: m must lie in [1, k]");
  check(alpha >= 0.0, "bound_values: alpha must be nonnegative");
  const Eigen::Index r = spectrum.size();
  for (Eigen::Index i = 0; i < r; ++i) {
    check(spectrum(i) >= 0.0, "bound_values: spectrum entries must be nonnegative");
    if (i > 0)
      check(spectrum(i) <= spectrum(i - 1) + 1e-9 * std::max(1.0, spectrum(i - 1)),
            "bound_values: spectrum must be non-increasing");
  }

  BoundReport report;
  report.m = m;
  report.k = k;
  report.alpha = alpha;
  for (Eigen::Index i = 0; i < std::min(k, r); ++i)
    report.sigma_sq_top_k += spectrum(i) * spectrum(i);
  for (Eigen::Index i = k; i < r; ++i) report.sigma_sq_tail_k += spectrum(i) * spectrum(i);
  double middle = 0.0;  // indices in (m, k]
  for (Eigen::Index i = m; i < std::min(k, r); ++i) middle += spectrum(i) * spectrum(i);
  report.sigma_sq_tail_m = middle + report.sigma_sq_tail_k;

  const double keep_fraction = 1.0 - static_cast<double>(m) / static_cast<double>(k);
  report.u_scl_raw = keep_fraction * report.sigma_sq_top_k + report.sigma_sq_tail_k;
  report.u_tricl_raw = report.sigma_sq_tail_m;
  report.u_scl =
      kBoundSpectrumCoefficient * report.u_scl_raw + kBoundLeakageCoefficient * alpha;
  report.u_tricl =
      kBoundSpectrumCoefficient * report.u_tricl_raw + kBoundLeakageCoefficient * alpha;
  report.gap = report.u_scl - report.u_tricl;
  return report;
}

// Importance vector normalized to unit sum.
inline Eigen::VectorXd importance_distribution(const EmbeddingModel& model) {
  Eigen::VectorXd s = model.importance();
  const double total = s.sum();
  check(std::isfinite(total) && total > 0.0,
        "importance_distribution: importance must be finite and positive");
  return s / total;
}

// Mean probe error over uniformly random m-column subsets of the feature table;
// trial t draws its subset from a generator derived from (seed, t).
inline double scl_random_subset_eval(const Eigen::MatrixXd& scaled_features,
                                     const std::vector<int>& labels,
                                     const Eigen::VectorXd& degrees, Eigen::Index m, int trials,
                                     std::uint64_t seed, double ridge = 1e-6) {
  const Eigen::Index k = scaled_features.cols();
  check(m >= 1 && m <= k, "scl_random_subset_eval: m must lie in [1, k]");
  check(trials >= 1, "scl_random_subset_eval: trials must be positive");

  std::vector<Eigen::Index> all(static_cast<std::size_t>(k));
  std::iota(all.begin(), all.end(), 0);
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto rng = make_engine(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> pick;
    pick.reserve(static_cast<std::size_t>(m));
    std::sample(all.begin(), all.end(), std::back_inserter(pick), m, rng);
    Eigen::MatrixXd subset(scaled_features.rows(), m);
    for (Eigen::Index j = 0; j < m; ++j)
      subset.col(j) = scaled_features.col(pick[static_cast<std::size_t>(j)]);
    total += linear_probe(subset, labels, degrees, ridge);
  }
  return total / static_cast<double>(trials);
}

struct EvalReport {
  std::vector<std::pair<Eigen::Index, double>> probe_error_per_m;
  std::vector<double> knn_accuracy_per_block;
  std::vector<std::pair<Eigen::Index, double>> retrieval_map_per_m;
  Eigen::VectorXd importance_distribution;
};

}  // namespace tricl
