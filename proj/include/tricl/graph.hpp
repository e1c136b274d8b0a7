// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tricl/error.hpp"
#include "tricl/rng.hpp"

namespace tricl {

// Synthetic class-structured corpus: C classes, M natural samples per class, and a
// deterministic augmentation kernel per natural sample spreading mass over per-natural
// clouds of `augmentations_per_natural` augmented samples.
struct ClassGraphSpec {
  int num_classes = 2;
  int naturals_per_class = 2;
  int augmentations_per_natural = 4;
  // Nominal probability mass an augmentation kernel keeps on its own natural's cloud.
  // The generator jitters the per-natural value around this nominal (seeded) so the
  // natural-level spectrum is non-degenerate.
  double within_class_mix = 0.5;
  // Exact probability mass each kernel sends across class boundaries.
  double cross_class_leak = 0.05;
  std::uint64_t seed = 0;

  int num_naturals() const { return num_classes * naturals_per_class; }
  int num_augmented() const { return num_naturals() * augmentations_per_natural; }

  void validate() const {
    check(num_classes >= 1, "ClassGraphSpec: num_classes must be >= 1");
    check(naturals_per_class >= 1, "ClassGraphSpec: naturals_per_class must be >= 1");
    check(augmentations_per_natural >= 1, "ClassGraphSpec: augmentations_per_natural must be >= 1");
    check(within_class_mix >= 0.0 && within_class_mix <= 1.0,
          "ClassGraphSpec: within_class_mix must lie in [0, 1]");
    check(cross_class_leak >= 0.0 && cross_class_leak <= 1.0,
          "ClassGraphSpec: cross_class_leak must lie in [0, 1]");
    check(within_class_mix + cross_class_leak <= 1.0,
          "ClassGraphSpec: within_class_mix + cross_class_leak must not exceed 1");
  }
};

// Finite augmentation graph over N augmented samples. adjacency(x, x') is the joint
// probability of drawing the positive pair (x, x'), so entries are nonnegative,
// the matrix is symmetric and all entries sum to one. degrees are the row sums
// (the marginal probability of each augmented sample).
struct AugmentationGraph {
  int n = 0;
  Eigen::MatrixXd adjacency;
  Eigen::VectorXd degrees;
  std::vector<int> labels;         // class id per augmented sample
  std::vector<int> natural_index;  // generating natural sample per augmented sample

  // Generative metadata; required for the exact label-disagreement rate alpha.
  Eigen::VectorXd natural_weights;  // size 0 when unknown
  Eigen::MatrixXd kernel;           // num_naturals x n; 0x0 when unknown
  std::vector<int> natural_labels;
  std::optional<ClassGraphSpec> spec;

  bool has_generative_model() const { return kernel.size() > 0; }
};

struct NormalizedAdjacency {
  Eigen::MatrixXd matrix;  // D^{-1/2} A D^{-1/2}
};

// Builds the graph whose adjacency is the exact finite expectation
//   A(x, x') = sum_u p(u) kernel(x | u) kernel(x' | u).
// `naturals` is the distribution over natural samples, `kernel` holds one augmentation
// distribution per row. natural_index defaults to argmax_u p(u) kernel(x|u), lowest
// index on ties; labels (when natural_labels given) follow natural_index.
inline AugmentationGraph build_from_kernel(const Eigen::VectorXd& naturals,
                                           const Eigen::MatrixXd& kernel,
                                           std::vector<int> natural_labels = {}) {
  const Eigen::Index nu = kernel.rows();
  const Eigen::Index n = kernel.cols();
  check(nu >= 1 && n >= 1, "build_from_kernel: kernel must be nonempty");
  check(naturals.size() == nu, "build_from_kernel: naturals length must match kernel rows");
  check((naturals.array() >= 0.0).all(), "build_from_kernel: natural weights must be nonnegative");
  check(std::abs(naturals.sum() - 1.0) <= 1e-9,
        "build_from_kernel: natural weights must sum to 1");
  for (Eigen::Index u = 0; u < nu; ++u) {
    check((kernel.row(u).array() >= 0.0).all(),
          "build_from_kernel: kernel row " + std::to_string(u) + " has a negative entry");
    check(std::abs(kernel.row(u).sum() - 1.0) <= 1e-9,
          "build_from_kernel: kernel row " + std::to_string(u) + " must sum to 1");
  }
  if (!natural_labels.empty())
    check(static_cast<Eigen::Index>(natural_labels.size()) == nu,
          "build_from_kernel: natural_labels length must match kernel rows");

  AugmentationGraph g;
  g.n = static_cast<int>(n);
  // Evaluate the defining finite sum literally on the lower triangle and
  // mirror it, so entries match the hand-computed expectation to the last bit
  // and the matrix is exactly symmetric.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index u = 0; u < nu; ++u) {
    if (naturals(u) == 0.0) continue;
    for (Eigen::Index x = 0; x < n; ++x) {
      const double wx = naturals(u) * kernel(u, x);
      if (wx == 0.0) continue;
      for (Eigen::Index y = 0; y <= x; ++y) a(x, y) += wx * kernel(u, y);
    }
  }
  g.adjacency = a.selfadjointView<Eigen::Lower>();
  g.degrees = g.adjacency.rowwise().sum();
  for (Eigen::Index x = 0; x < n; ++x)
    check(g.degrees(x) > 0.0,
          "build_from_kernel: isolated augmented sample " + std::to_string(x) +
              " (zero degree; unreachable from every natural)");

  g.natural_index.resize(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    Eigen::Index best = 0;
    double best_mass = -1.0;
    for (Eigen::Index u = 0; u < nu; ++u) {
      const double mass = naturals(u) * kernel(u, x);
      if (mass > best_mass) {
        best_mass = mass;
        best = u;
      }
    }
    g.natural_index[x] = static_cast<int>(best);
  }
  g.natural_weights = naturals;
  g.kernel = kernel;
  g.natural_labels = natural_labels;
  if (!natural_labels.empty()) {
    g.labels.resize(n);
    for (Eigen::Index x = 0; x < n; ++x) g.labels[x] = natural_labels[g.natural_index[x]];
  } else {
    g.labels.assign(n, 0);
  }
  return g;
}

// Deterministic synthetic class graph. All randomness comes from spec.seed in a fixed
// draw order: lognormal natural weights, then per natural sample its self-mass jitter,
// own-cloud sample weights, same-class cloud weights with per-cloud sample weights, and
// cross-class cloud weights with per-cloud sample weights. Per-natural heterogeneity is
// what separates the class/natural eigenvalue groups; with uniform weights those groups
// are exactly degenerate.
inline AugmentationGraph generate_class_graph(const ClassGraphSpec& spec) {
  spec.validate();
  const int c_count = spec.num_classes;
  const int m = spec.naturals_per_class;
  const int a = spec.augmentations_per_natural;
  const int nu = spec.num_naturals();
  const int n = spec.num_augmented();
  auto rng = make_engine(spec.seed);
  std::normal_distribution<double> lognorm(0.0, 1.1);

  Eigen::VectorXd weights(nu);
  for (int u = 0; u < nu; ++u) weights(u) = std::exp(lognorm(rng));
  weights /= weights.sum();

  std::vector<int> natural_labels(nu);
  for (int u = 0; u < nu; ++u) natural_labels[u] = u / m;

  std::uniform_real_distribution<double> jitter(0.35, 1.65);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(nu, n);
  auto spread_over_cloud = [&](int u, int v, double mass) {
    Eigen::VectorXd w(a);
    for (int i = 0; i < a; ++i) w(i) = unit(rng);
    kernel.row(u).segment(static_cast<Eigen::Index>(v) * a, a) += (mass / w.sum()) * w.transpose();
  };

  for (int u = 0; u < nu; ++u) {
    const int cls = natural_labels[u];
    const bool has_same = m > 1;
    const bool has_cross = c_count > 1;
    const double beta = has_cross ? spec.cross_class_leak : 0.0;
    double self_mass = std::min(spec.within_class_mix * jitter(rng), 0.98 - beta);
    double same_mass = 1.0 - self_mass - beta;
    if (!has_same) {
      self_mass += same_mass;
      same_mass = 0.0;
    }
    spread_over_cloud(u, u, self_mass);
    if (same_mass > 0.0) {
      Eigen::VectorXd wv(m - 1);
      for (int i = 0; i < m - 1; ++i) wv(i) = unit(rng);
      wv /= wv.sum();
      int slot = 0;
      for (int v = cls * m; v < (cls + 1) * m; ++v) {
        if (v == u) continue;
        spread_over_cloud(u, v, same_mass * wv(slot++));
      }
    }
    if (beta > 0.0) {
      const int cross_count = nu - m;
      Eigen::VectorXd wv(cross_count);
      for (int i = 0; i < cross_count; ++i) wv(i) = unit(rng);
      wv /= wv.sum();
      int slot = 0;
      for (int v = 0; v < nu; ++v) {
        if (natural_labels[v] == cls) continue;
        spread_over_cloud(u, v, beta * wv(slot++));
      }
    }
  }

  AugmentationGraph g = build_from_kernel(weights, kernel, natural_labels);
  // Ownership is structural here: sample x belongs to the cloud of natural x / a.
  for (int x = 0; x < n; ++x) {
    g.natural_index[x] = x / a;
    g.labels[x] = natural_labels[g.natural_index[x]];
  }
  g.spec = spec;
  return g;
}

inline NormalizedAdjacency normalize(const AugmentationGraph& g) {
  check(g.n >= 1, "normalize: empty graph");
  check((g.degrees.array() > 0.0).all(), "normalize: graph has a zero-degree sample");
  NormalizedAdjacency na;
  // Entrywise A / sqrt(d_x d_y), written as a single divide per entry so simple
  // rational cases stay exact; sqrt(d_x d_y) is symmetric in x, y bit-for-bit.
  na.matrix.resize(g.n, g.n);
  for (int x = 0; x < g.n; ++x)
    for (int y = 0; y < g.n; ++y)
      na.matrix(x, y) = g.adjacency(x, y) / std::sqrt(g.degrees(x) * g.degrees(y));
  return na;
}

inline Eigen::MatrixXd denormalize(const NormalizedAdjacency& na, const Eigen::VectorXd& degrees) {
  check(na.matrix.rows() == degrees.size(), "denormalize: degree length mismatch");
  const Eigen::Index n = na.matrix.rows();
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y)
      a(x, y) = na.matrix(x, y) * std::sqrt(degrees(x) * degrees(y));
  return a;
}

// Exact label-disagreement rate of the augmentation process:
//   alpha = sum_u p(u) sum_x kernel(x | u) 1[label(u) != label(x)].
// Requires the generative metadata; graphs loaded without it cannot evaluate this sum.
inline double compute_alpha(const AugmentationGraph& g) {
  check(g.has_generative_model(),
        "compute_alpha: graph is missing its generative model (natural weights and kernel)");
  check(!g.natural_labels.empty() && !g.labels.empty(),
        "compute_alpha: graph is missing label metadata");
  const Eigen::Index nu = g.kernel.rows();
  double alpha = 0.0;
  for (Eigen::Index u = 0; u < nu; ++u) {
    double mismatch = 0.0;
    for (Eigen::Index x = 0; x < g.kernel.cols(); ++x)
      if (g.natural_labels[u] != g.labels[x]) mismatch += g.kernel(u, x);
    alpha += g.natural_weights(u) * mismatch;
  }
  return alpha;
}

// --- bipartite (two-modality) graphs -----------------------------------------------

struct BipartiteGraphSpec {
  int num_classes = 2;
  int latents_per_class = 2;
  int samples_per_latent_a = 4;
  int samples_per_latent_b = 4;
  double within_class_mix = 0.5;
  double cross_class_leak = 0.05;
  std::uint64_t seed = 0;

  int num_latents() const { return num_classes * latents_per_class; }
  int n_a() const { return num_latents() * samples_per_latent_a; }
  int n_b() const { return num_latents() * samples_per_latent_b; }

  void validate() const {
    check(num_classes >= 1, "BipartiteGraphSpec: num_classes must be >= 1");
    check(latents_per_class >= 1, "BipartiteGraphSpec: latents_per_class must be >= 1");
    check(samples_per_latent_a >= 1 && samples_per_latent_b >= 1,
          "BipartiteGraphSpec: samples per latent must be >= 1");
    check(within_class_mix >= 0.0 && within_class_mix <= 1.0,
          "BipartiteGraphSpec: within_class_mix must lie in [0, 1]");
    check(cross_class_leak >= 0.0 && cross_class_leak <= 1.0,
          "BipartiteGraphSpec: cross_class_leak must lie in [0, 1]");
    check(within_class_mix + cross_class_leak <= 1.0,
          "BipartiteGraphSpec: within_class_mix + cross_class_leak must not exceed 1");
  }
};

// Joint distribution over pairs from two sample spaces (two modalities), built from a
// shared latent: P_O(x_a, x_b) = sum_t p(t) kernel_a(x_a | t) kernel_b(x_b | t).
struct BipartiteGraph {
  int n_a = 0;
  int n_b = 0;
  Eigen::MatrixXd joint;      // n_a x n_b, entries sum to 1
  Eigen::VectorXd marginal_a; // row sums
  Eigen::VectorXd marginal_b; // column sums
  std::vector<int> labels_a;
  std::vector<int> labels_b;

  Eigen::VectorXd latent_weights;
  Eigen::MatrixXd kernel_a;  // num_latents x n_a
  Eigen::MatrixXd kernel_b;  // num_latents x n_b
  std::vector<int> latent_labels;
  std::optional<BipartiteGraphSpec> spec;
};

struct NormalizedJoint {
  Eigen::MatrixXd matrix;  // P_O(x_a, x_b) / sqrt(P_A(x_a) P_B(x_b))
};

inline BipartiteGraph generate_bipartite_graph(const BipartiteGraphSpec& spec) {
  spec.validate();
  const int t_count = spec.num_latents();
  auto rng = make_engine(spec.seed);
  std::normal_distribution<double> lognorm(0.0, 1.0);
  Eigen::VectorXd weights(t_count);
  for (int t = 0; t < t_count; ++t) weights(t) = std::exp(lognorm(rng));
  weights /= weights.sum();

  std::vector<int> latent_labels(t_count);
  for (int t = 0; t < t_count; ++t) latent_labels[t] = t / spec.latents_per_class;

  std::uniform_real_distribution<double> jitter(0.35, 1.65);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  auto make_side_kernel = [&](int per_latent, int n_side) {
    Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(t_count, n_side);
    auto spread = [&](int t, int v, double mass) {
      Eigen::VectorXd w(per_latent);
      for (int i = 0; i < per_latent; ++i) w(i) = unit(rng);
      kernel.row(t).segment(static_cast<Eigen::Index>(v) * per_latent, per_latent) +=
          (mass / w.sum()) * w.transpose();
    };
    for (int t = 0; t < t_count; ++t) {
      const int cls = latent_labels[t];
      const bool has_same = spec.latents_per_class > 1;
      const bool has_cross = spec.num_classes > 1;
      const double beta = has_cross ? spec.cross_class_leak : 0.0;
      double self_mass = std::min(spec.within_class_mix * jitter(rng), 0.98 - beta);
      double same_mass = 1.0 - self_mass - beta;
      if (!has_same) {
        self_mass += same_mass;
        same_mass = 0.0;
      }
      spread(t, t, self_mass);
      if (same_mass > 0.0) {
        Eigen::VectorXd wv(spec.latents_per_class - 1);
        for (int i = 0; i < wv.size(); ++i) wv(i) = unit(rng);
        wv /= wv.sum();
        int slot = 0;
        for (int v = cls * spec.latents_per_class; v < (cls + 1) * spec.latents_per_class; ++v) {
          if (v == t) continue;
          spread(t, v, same_mass * wv(slot++));
        }
      }
      if (beta > 0.0) {
        Eigen::VectorXd wv(t_count - spec.latents_per_class);
        for (int i = 0; i < wv.size(); ++i) wv(i) = unit(rng);
        wv /= wv.sum();
        int slot = 0;
        for (int v = 0; v < t_count; ++v) {
          if (latent_labels[v] == cls) continue;
          spread(t, v, beta * wv(slot++));
        }
      }
    }
    return kernel;
  };

  BipartiteGraph bg;
  bg.n_a = spec.n_a();
  bg.n_b = spec.n_b();
  bg.kernel_a = make_side_kernel(spec.samples_per_latent_a, bg.n_a);
  bg.kernel_b = make_side_kernel(spec.samples_per_latent_b, bg.n_b);
  bg.joint = bg.kernel_a.transpose() * weights.asDiagonal() * bg.kernel_b;
  bg.marginal_a = bg.joint.rowwise().sum();
  bg.marginal_b = bg.joint.colwise().sum().transpose();
  for (int x = 0; x < bg.n_a; ++x)
    check(bg.marginal_a(x) > 0.0,
          "generate_bipartite_graph: isolated sample " + std::to_string(x) + " on side A");
  for (int x = 0; x < bg.n_b; ++x)
    check(bg.marginal_b(x) > 0.0,
          "generate_bipartite_graph: isolated sample " + std::to_string(x) + " on side B");
  bg.labels_a.resize(bg.n_a);
  bg.labels_b.resize(bg.n_b);
  for (int x = 0; x < bg.n_a; ++x) bg.labels_a[x] = latent_labels[x / spec.samples_per_latent_a];
  for (int x = 0; x < bg.n_b; ++x) bg.labels_b[x] = latent_labels[x / spec.samples_per_latent_b];
  bg.latent_weights = weights;
  bg.latent_labels = latent_labels;
  bg.spec = spec;
  return bg;
}

inline NormalizedJoint normalize_bipartite(const BipartiteGraph& bg) {
  check(bg.n_a >= 1 && bg.n_b >= 1, "normalize_bipartite: empty graph");
  check((bg.marginal_a.array() > 0.0).all() && (bg.marginal_b.array() > 0.0).all(),
        "normalize_bipartite: zero marginal");
  NormalizedJoint nj;
  nj.matrix.resize(bg.n_a, bg.n_b);
  for (int x = 0; x < bg.n_a; ++x)
    for (int y = 0; y < bg.n_b; ++y)
      nj.matrix(x, y) = bg.joint(x, y) / std::sqrt(bg.marginal_a(x) * bg.marginal_b(y));
  return nj;
}

}  // namespace tricl
