// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tricl/error.hpp"
#include "tricl/graph.hpp"
#include "tricl/losses.hpp"
#include "tricl/rng.hpp"

namespace tricl {

enum class LossKind { Scl, Tricl, TriInfonce, Triclip, Trimse };
enum class OptimizerKind { Momentum, Adam };
enum class TrainMode { Exact, Sampled };

inline std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Scl: return "scl";
    case LossKind::Tricl: return "tricl";
    case LossKind::TriInfonce: return "tri_infonce";
    case LossKind::Triclip: return "triclip";
    case LossKind::Trimse: return "trimse";
  }
  throw Error("to_string: unknown loss kind");
}

inline LossKind parse_loss_kind(const std::string& name) {
  if (name == "scl") return LossKind::Scl;
  if (name == "tricl") return LossKind::Tricl;
  if (name == "tri_infonce") return LossKind::TriInfonce;
  if (name == "triclip") return LossKind::Triclip;
  if (name == "trimse") return LossKind::Trimse;
  throw Error("parse_loss_kind: unknown loss kind '" + name + "'");
}

inline std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Momentum ? "momentum" : "adam";
}

inline OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "momentum") return OptimizerKind::Momentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw Error("parse_optimizer_kind: unknown optimizer '" + name + "'");
}

inline std::string to_string(TrainMode mode) {
  return mode == TrainMode::Exact ? "exact" : "sampled";
}

inline TrainMode parse_train_mode(const std::string& name) {
  if (name == "exact") return TrainMode::Exact;
  if (name == "sampled") return TrainMode::Sampled;
  throw Error("parse_train_mode: unknown train mode '" + name + "'");
}

struct TrainConfig {
  LossKind loss_kind = LossKind::Tricl;
  Eigen::Index k = 2;
  double lambda = 1.0;
  OptimizerKind optimizer = OptimizerKind::Momentum;
  double learning_rate = 0.1;
  double momentum = 0.9;
  int steps = 1000;
  TrainMode mode = TrainMode::Exact;
  int batch_pairs = 256;
  std::uint64_t seed = 0;
  double init_scale = 0.1;
  double anchor_tolerance = 1e-8;
  double ema_coefficient = 0.99;  // target-table smoothing for the non-contrastive loss

  void validate() const {
    check(k >= 1, "TrainConfig: k must be at least 1");
    check(steps >= 1, "TrainConfig: steps must be at least 1");
    check(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
    check(momentum >= 0.0 && momentum < 1.0, "TrainConfig: momentum must lie in [0, 1)");
    check(lambda >= 0.0, "TrainConfig: lambda must be nonnegative");
    check(init_scale >= 0.0, "TrainConfig: init_scale must be nonnegative");
    check(anchor_tolerance > 0.0, "TrainConfig: anchor_tolerance must be positive");
    check(ema_coefficient >= 0.0 && ema_coefficient < 1.0,
          "TrainConfig: ema_coefficient must lie in [0, 1)");
    if (mode == TrainMode::Sampled)
      check(batch_pairs >= 1, "TrainConfig: batch_pairs must be at least 1 in sampled mode");
  }
};

struct TrainedModel {
  EmbeddingModel model;
  // Second table when the loss has one: side-B features (two-sided loss) or the
  // EMA target table (non-contrastive loss). 0x0 for the single-table losses.
  Eigen::MatrixXd secondary_features;
  std::vector<double> history;  // per-step loss values plus a final evaluation
  bool canonicalized = false;
  bool sorted = false;
  std::vector<Eigen::Index> anchors;  // per-dimension anchor sample, set on canonicalization
  TrainConfig config;
};

inline EmbeddingModel init_model(Eigen::Index n, Eigen::Index k, std::uint64_t seed,
                                 double init_scale) {
  check(n >= 1, "init_model: n must be at least 1");
  check(k >= 1, "init_model: k must be at least 1");
  check(init_scale >= 0.0, "init_model: init_scale must be nonnegative");
  auto rng = make_engine(seed);
  EmbeddingModel model;
  model.scaled_features =
      gaussian_matrix(n, k, init_scale / std::sqrt(static_cast<double>(k)), rng);
  model.raw_importance = Eigen::VectorXd::Constant(k, raw_importance_for_unit());
  return model;
}

// f(x) = F_x / sqrt(d_x), recovering per-sample features from the trained table.
inline Eigen::MatrixXd unscaled_features(const Eigen::MatrixXd& scaled,
                                         const Eigen::VectorXd& degrees) {
  check(degrees.size() == scaled.rows(), "unscaled_features: degree length mismatch");
  check((degrees.array() > 0.0).all(), "unscaled_features: degrees must be positive");
  return degrees.array().rsqrt().matrix().asDiagonal() * scaled;
}

namespace detail {

template <typename Mat>
void optimizer_update(const TrainConfig& config, int step_index, Mat& theta, const Mat& grad,
                      Mat& velocity, Mat& moment1, Mat& moment2) {
  if (config.optimizer == OptimizerKind::Momentum) {
    velocity = config.momentum * velocity + grad;
    theta -= config.learning_rate * velocity;
    return;
  }
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  const double t = static_cast<double>(step_index + 1);
  moment1 = beta1 * moment1 + (1.0 - beta1) * grad;
  moment2.array() = beta2 * moment2.array() + (1.0 - beta2) * grad.array().square();
  const double corr1 = 1.0 - std::pow(beta1, t);
  const double corr2 = 1.0 - std::pow(beta2, t);
  theta.array() -=
      config.learning_rate * (moment1.array() / corr1) / ((moment2.array() / corr2).sqrt() + eps);
}

}  // namespace detail

// Categorical samplers for one minibatch step: positive pairs over the entries of a
// joint weight matrix, negatives over a marginal. Weights need not be pre-normalized.
struct PairSampler {
  std::discrete_distribution<int> positive;
  std::discrete_distribution<int> negative;
  Eigen::Index cols = 0;  // column count used to unflatten positive-entry indices
};

inline PairSampler make_pair_sampler(const Eigen::MatrixXd& joint_weights,
                                     const Eigen::VectorXd& marginal) {
  PairSampler sampler;
  sampler.cols = joint_weights.cols();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(joint_weights.size()));
  for (Eigen::Index x = 0; x < joint_weights.rows(); ++x)
    for (Eigen::Index y = 0; y < joint_weights.cols(); ++y) flat.push_back(joint_weights(x, y));
  sampler.positive = std::discrete_distribution<int>(flat.begin(), flat.end());
  std::vector<double> marg(marginal.data(), marginal.data() + marginal.size());
  sampler.negative = std::discrete_distribution<int>(marg.begin(), marg.end());
  return sampler;
}

// One minibatch estimate of the loss and its gradient at the given parameters.
// Draw order is fixed: batch_pairs positive pairs first, then batch_pairs negatives
// from the marginal (the non-contrastive loss draws positives only). The sampled
// pair terms are unbiased for the squared-error losses; the softmax loss uses the
// standard in-batch denominator, which is a biased estimate of the full one. The
// decorrelation penalty and its gradient are always evaluated exactly.
inline LossValueAndGradient sampled_step(const AugmentationGraph& graph,
                                         const TrainConfig& config, const EmbeddingModel& model,
                                         const Eigen::MatrixXd& secondary, PairSampler& sampler,
                                         std::mt19937_64& rng) {
  const Eigen::Index n = graph.n;
  const Eigen::Index k = model.scaled_features.cols();
  const int batch = config.batch_pairs;
  const double lambda = config.lambda;

  std::vector<Eigen::Index> anchor(static_cast<std::size_t>(batch));
  std::vector<Eigen::Index> positive(static_cast<std::size_t>(batch));
  std::vector<Eigen::Index> negative;
  for (int b = 0; b < batch; ++b) {
    const int entry = sampler.positive(rng);
    anchor[static_cast<std::size_t>(b)] = entry / sampler.cols;
    positive[static_cast<std::size_t>(b)] = entry % sampler.cols;
  }
  if (config.loss_kind != LossKind::Trimse) {
    negative.resize(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) negative[static_cast<std::size_t>(b)] = sampler.negative(rng);
  }

  const Eigen::MatrixXd& f = model.scaled_features;
  Eigen::VectorXd inv_sqrt_d = graph.degrees.array().rsqrt();
  LossValueAndGradient out;

  if (config.loss_kind == LossKind::Scl) {
    Eigen::MatrixXd phi = inv_sqrt_d.asDiagonal() * f;
    Eigen::MatrixXd grad_phi = Eigen::MatrixXd::Zero(n, k);
    double value = 0.0;
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index x = anchor[static_cast<std::size_t>(b)];
      const Eigen::Index p = positive[static_cast<std::size_t>(b)];
      const Eigen::Index y = negative[static_cast<std::size_t>(b)];
      Eigen::VectorXd px = phi.row(x).transpose();
      Eigen::VectorXd pp = phi.row(p).transpose();
      Eigen::VectorXd py = phi.row(y).transpose();
      value += -2.0 * px.dot(pp);
      grad_phi.row(x) -= 2.0 * pp.transpose();
      grad_phi.row(p) -= 2.0 * px.transpose();
      const double m = px.dot(py);
      value += m * m;
      grad_phi.row(x) += 2.0 * m * py.transpose();
      grad_phi.row(y) += 2.0 * m * px.transpose();
    }
    out.value = value / batch;
    out.grad_features = inv_sqrt_d.asDiagonal() * (grad_phi / batch);
    return out;
  }

  Eigen::VectorXd s = softplus(model.raw_importance);
  Eigen::VectorXd sig = logistic(model.raw_importance);
  Eigen::MatrixXd c = f.transpose() * f - Eigen::MatrixXd::Identity(k, k);

  if (config.loss_kind == LossKind::Tricl) {
    Eigen::MatrixXd phi = inv_sqrt_d.asDiagonal() * f;
    Eigen::MatrixXd grad_phi = Eigen::MatrixXd::Zero(n, k);
    Eigen::VectorXd grad_s = Eigen::VectorXd::Zero(k);
    double value = 0.0;
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index x = anchor[static_cast<std::size_t>(b)];
      const Eigen::Index p = positive[static_cast<std::size_t>(b)];
      const Eigen::Index y = negative[static_cast<std::size_t>(b)];
      Eigen::VectorXd px = phi.row(x).transpose();
      Eigen::VectorXd pp = phi.row(p).transpose();
      Eigen::VectorXd py = phi.row(y).transpose();
      value += -2.0 * (px.array() * s.array() * pp.array()).sum();
      grad_phi.row(x) -= (2.0 * s.array() * pp.array()).matrix().transpose();
      grad_phi.row(p) -= (2.0 * s.array() * px.array()).matrix().transpose();
      grad_s -= (2.0 * px.array() * pp.array()).matrix();
      const double m = (px.array() * s.array() * py.array()).sum();
      value += m * m;
      grad_phi.row(x) += (2.0 * m * s.array() * py.array()).matrix().transpose();
      grad_phi.row(y) += (2.0 * m * s.array() * px.array()).matrix().transpose();
      grad_s += (2.0 * m * px.array() * py.array()).matrix();
    }
    out.value = value / batch + lambda * c.squaredNorm();
    out.grad_features = inv_sqrt_d.asDiagonal() * (grad_phi / batch) + 4.0 * lambda * f * c;
    out.grad_raw_importance = (grad_s / batch).cwiseProduct(sig);
    return out;
  }

  if (config.loss_kind == LossKind::TriInfonce) {
    Eigen::MatrixXd phi = inv_sqrt_d.asDiagonal() * f;
    Eigen::MatrixXd px_mat(batch, k), pp_mat(batch, k), py_mat(batch, k);
    for (int b = 0; b < batch; ++b) {
      px_mat.row(b) = phi.row(anchor[static_cast<std::size_t>(b)]);
      pp_mat.row(b) = phi.row(positive[static_cast<std::size_t>(b)]);
      py_mat.row(b) = phi.row(negative[static_cast<std::size_t>(b)]);
    }
    Eigen::MatrixXd spx = px_mat * s.asDiagonal();
    Eigen::VectorXd pos_logit = (spx.array() * pp_mat.array()).rowwise().sum();
    Eigen::MatrixXd neg_logits = spx * py_mat.transpose();
    Eigen::MatrixXd grad_phi = Eigen::MatrixXd::Zero(n, k);
    Eigen::VectorXd grad_s = Eigen::VectorXd::Zero(k);
    double value = 0.0;
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index x = anchor[static_cast<std::size_t>(b)];
      const Eigen::Index p = positive[static_cast<std::size_t>(b)];
      Eigen::VectorXd px = px_mat.row(b).transpose();
      Eigen::VectorXd pp = pp_mat.row(b).transpose();
      const double shift = neg_logits.row(b).maxCoeff();
      Eigen::ArrayXd expl = (neg_logits.row(b).transpose().array() - shift).exp();
      const double z = expl.sum();
      value += -pos_logit(b) + shift + std::log(z / batch);
      grad_phi.row(x) -= (s.array() * pp.array()).matrix().transpose();
      grad_phi.row(p) -= (s.array() * px.array()).matrix().transpose();
      grad_s -= (px.array() * pp.array()).matrix();
      Eigen::VectorXd q = (expl / z).matrix();
      Eigen::VectorXd mix = py_mat.transpose() * q;
      grad_phi.row(x) += (s.array() * mix.array()).matrix().transpose();
      grad_s += (px.array() * mix.array()).matrix();
      Eigen::VectorXd spx_b = (s.array() * px.array()).matrix();
      for (int cc = 0; cc < batch; ++cc)
        grad_phi.row(negative[static_cast<std::size_t>(cc)]) += q(cc) * spx_b.transpose();
    }
    out.value = value / batch + lambda * c.squaredNorm();
    out.grad_features = inv_sqrt_d.asDiagonal() * (grad_phi / batch) + 4.0 * lambda * f * c;
    out.grad_raw_importance = (grad_s / batch).cwiseProduct(sig);
    return out;
  }

  check(config.loss_kind == LossKind::Trimse, "sampled_step: loss kind needs a bipartite graph");
  check(secondary.rows() == n && secondary.cols() == k,
        "sampled_step: target table shape mismatch");
  Eigen::VectorXd gn = f.rowwise().norm();
  Eigen::VectorXd tn = secondary.rowwise().norm();
  for (Eigen::Index x = 0; x < n; ++x) {
    check(gn(x) > 0.0, "sampled_step: zero-norm online row " + std::to_string(x));
    check(tn(x) > 0.0, "sampled_step: zero-norm target row " + std::to_string(x));
  }
  Eigen::MatrixXd grad_g = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd grad_s = Eigen::VectorXd::Zero(k);
  double value = 0.0;
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index x = anchor[static_cast<std::size_t>(b)];
    const Eigen::Index p = positive[static_cast<std::size_t>(b)];
    Eigen::VectorXd gx = f.row(x).transpose();
    Eigen::VectorXd tp = secondary.row(p).transpose();
    const double denom = gn(x) * tn(p);
    const double dot = (gx.array() * s.array() * tp.array()).sum();
    value += -2.0 * dot / denom;
    grad_g.row(x) +=
        (-2.0 * s.array() * tp.array() / denom + 2.0 * dot / (gn(x) * gn(x) * denom) * gx.array())
            .matrix()
            .transpose();
    grad_s += (-2.0 * gx.array() * tp.array() / denom).matrix();
  }
  out.value = 2.0 + value / batch + lambda * c.squaredNorm();
  out.grad_features = grad_g / batch + 4.0 * lambda * f * c;
  out.grad_raw_importance = (grad_s / batch).cwiseProduct(sig);
  return out;
}

inline LossValueAndGradient sampled_step(const BipartiteGraph& graph, const TrainConfig& config,
                                         const EmbeddingModel& model_a,
                                         const Eigen::MatrixXd& features_b, PairSampler& sampler,
                                         std::mt19937_64& rng) {
  check(config.loss_kind == LossKind::Triclip,
        "sampled_step: bipartite graphs support the two-sided loss only");
  const Eigen::Index k = model_a.scaled_features.cols();
  const int batch = config.batch_pairs;
  const double lambda = config.lambda;

  std::vector<Eigen::Index> anchor(static_cast<std::size_t>(batch));
  std::vector<Eigen::Index> positive(static_cast<std::size_t>(batch));
  std::vector<Eigen::Index> negative(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const int entry = sampler.positive(rng);
    anchor[static_cast<std::size_t>(b)] = entry / sampler.cols;
    positive[static_cast<std::size_t>(b)] = entry % sampler.cols;
  }
  for (int b = 0; b < batch; ++b) negative[static_cast<std::size_t>(b)] = sampler.negative(rng);

  const Eigen::MatrixXd& fa = model_a.scaled_features;
  const Eigen::MatrixXd& fb = features_b;
  Eigen::VectorXd s = softplus(model_a.raw_importance);
  Eigen::VectorXd sig = logistic(model_a.raw_importance);
  Eigen::VectorXd inv_sqrt_a = graph.marginal_a.array().rsqrt();
  Eigen::VectorXd inv_sqrt_b = graph.marginal_b.array().rsqrt();
  Eigen::MatrixXd phi_a = inv_sqrt_a.asDiagonal() * fa;
  Eigen::MatrixXd phi_b = inv_sqrt_b.asDiagonal() * fb;
  Eigen::MatrixXd grad_pa = Eigen::MatrixXd::Zero(graph.n_a, k);
  Eigen::MatrixXd grad_pb = Eigen::MatrixXd::Zero(graph.n_b, k);
  Eigen::VectorXd grad_s = Eigen::VectorXd::Zero(k);
  double value = 0.0;
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index x = anchor[static_cast<std::size_t>(b)];
    const Eigen::Index p = positive[static_cast<std::size_t>(b)];
    const Eigen::Index y = negative[static_cast<std::size_t>(b)];
    Eigen::VectorXd px = phi_a.row(x).transpose();
    Eigen::VectorXd pp = phi_b.row(p).transpose();
    Eigen::VectorXd py = phi_b.row(y).transpose();
    value += -2.0 * (px.array() * s.array() * pp.array()).sum();
    grad_pa.row(x) -= (2.0 * s.array() * pp.array()).matrix().transpose();
    grad_pb.row(p) -= (2.0 * s.array() * px.array()).matrix().transpose();
    grad_s -= (2.0 * px.array() * pp.array()).matrix();
    const double m = (px.array() * s.array() * py.array()).sum();
    value += m * m;
    grad_pa.row(x) += (2.0 * m * s.array() * py.array()).matrix().transpose();
    grad_pb.row(y) += (2.0 * m * s.array() * px.array()).matrix().transpose();
    grad_s += (2.0 * m * px.array() * py.array()).matrix();
  }
  Eigen::MatrixXd ca = fa.transpose() * fa - Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd cb = fb.transpose() * fb - Eigen::MatrixXd::Identity(k, k);
  LossValueAndGradient out;
  out.value = value / batch + lambda * (ca.squaredNorm() + cb.squaredNorm());
  out.grad_features = inv_sqrt_a.asDiagonal() * (grad_pa / batch) + 4.0 * lambda * fa * ca;
  out.grad_features_b = inv_sqrt_b.asDiagonal() * (grad_pb / batch) + 4.0 * lambda * fb * cb;
  out.grad_raw_importance = (grad_s / batch).cwiseProduct(sig);
  return out;
}

namespace detail {

// Shared descent loop. `eval_step` produces the (possibly stochastic) loss and
// gradient at the current parameters; `exact_loss` evaluates the full-expectation
// loss once at the end so history always closes with the true final value.
template <typename EvalFn, typename ExactFn>
TrainedModel minimize(EmbeddingModel init, Eigen::MatrixXd secondary, const TrainConfig& config,
                      EvalFn&& eval_step, ExactFn&& exact_loss) {
  TrainedModel out;
  out.config = config;
  out.model = std::move(init);
  out.secondary_features = std::move(secondary);
  const bool secondary_by_gradient = config.loss_kind == LossKind::Triclip;
  const bool secondary_by_ema = config.loss_kind == LossKind::Trimse;

  Eigen::MatrixXd vel_f = Eigen::MatrixXd::Zero(out.model.scaled_features.rows(), config.k);
  Eigen::MatrixXd m1_f = vel_f, m2_f = vel_f;
  Eigen::VectorXd vel_r = Eigen::VectorXd::Zero(config.k);
  Eigen::VectorXd m1_r = vel_r, m2_r = vel_r;
  Eigen::MatrixXd vel_b, m1_b, m2_b;
  if (secondary_by_gradient) {
    vel_b = Eigen::MatrixXd::Zero(out.secondary_features.rows(), config.k);
    m1_b = vel_b;
    m2_b = vel_b;
  }

  double guard = 0.0;
  out.history.reserve(static_cast<std::size_t>(config.steps) + 1);
  for (int step = 0; step < config.steps; ++step) {
    LossValueAndGradient g = eval_step(out.model, out.secondary_features);
    check(std::isfinite(g.value),
          "train: non-finite loss at step " + std::to_string(step));
    if (step == 0) guard = 1e6 * std::max(std::abs(g.value), 1.0);
    check(std::abs(g.value) <= guard, "train: divergence detected at step " +
                                          std::to_string(step) + " (loss " +
                                          std::to_string(g.value) + ")");
    out.history.push_back(g.value);
    optimizer_update(config, step, out.model.scaled_features, g.grad_features, vel_f, m1_f, m2_f);
    if (g.grad_raw_importance.size() > 0)
      optimizer_update(config, step, out.model.raw_importance, g.grad_raw_importance, vel_r, m1_r,
                       m2_r);
    if (secondary_by_gradient)
      optimizer_update(config, step, out.secondary_features, g.grad_features_b, vel_b, m1_b, m2_b);
    if (secondary_by_ema)
      out.secondary_features = config.ema_coefficient * out.secondary_features +
                               (1.0 - config.ema_coefficient) * out.model.scaled_features;
  }
  out.history.push_back(exact_loss(out.model, out.secondary_features));
  return out;
}

}  // namespace detail

inline TrainedModel train(const AugmentationGraph& graph, const TrainConfig& config) {
  config.validate();
  check(config.loss_kind != LossKind::Triclip,
        "train: the two-sided loss requires a bipartite graph");
  NormalizedAdjacency abar = normalize(graph);
  const Eigen::VectorXd& d = graph.degrees;

  EmbeddingModel init = init_model(graph.n, config.k, mix_seed(config.seed, 0), config.init_scale);
  Eigen::MatrixXd secondary;
  if (config.loss_kind == LossKind::Trimse) secondary = init.scaled_features;

  auto exact_eval = [&](const EmbeddingModel& m,
                        const Eigen::MatrixXd& sec) -> LossValueAndGradient {
    switch (config.loss_kind) {
      case LossKind::Scl: return scl_loss(abar, m.scaled_features);
      case LossKind::Tricl:
        return tricl_loss(abar, m.scaled_features, m.raw_importance, config.lambda);
      case LossKind::TriInfonce:
        return tri_infonce_loss(abar, d, m.scaled_features, m.raw_importance, config.lambda);
      case LossKind::Trimse:
        return trimse_loss(abar, d, m.scaled_features, sec, m.raw_importance, config.lambda);
      default: throw Error("train: unsupported loss kind for this graph");
    }
  };
  auto exact_value = [&](const EmbeddingModel& m, const Eigen::MatrixXd& sec) {
    return exact_eval(m, sec).value;
  };

  if (config.mode == TrainMode::Exact)
    return detail::minimize(std::move(init), std::move(secondary), config, exact_eval,
                            exact_value);

  PairSampler sampler = make_pair_sampler(graph.adjacency, d);
  auto rng = make_engine(mix_seed(config.seed, 2));
  auto stochastic_eval = [&](const EmbeddingModel& m, const Eigen::MatrixXd& sec) {
    return sampled_step(graph, config, m, sec, sampler, rng);
  };
  return detail::minimize(std::move(init), std::move(secondary), config, stochastic_eval,
                          exact_value);
}

inline TrainedModel train(const BipartiteGraph& graph, const TrainConfig& config) {
  config.validate();
  check(config.loss_kind == LossKind::Triclip,
        "train: bipartite graphs support the two-sided loss only");
  NormalizedJoint pbar = normalize_bipartite(graph);
  EmbeddingModel init =
      init_model(graph.n_a, config.k, mix_seed(config.seed, 0), config.init_scale);
  Eigen::MatrixXd side_b =
      init_model(graph.n_b, config.k, mix_seed(config.seed, 1), config.init_scale).scaled_features;

  auto exact_eval = [&](const EmbeddingModel& m, const Eigen::MatrixXd& sec) {
    return triclip_loss(pbar, m.scaled_features, sec, m.raw_importance, config.lambda);
  };
  auto exact_value = [&](const EmbeddingModel& m, const Eigen::MatrixXd& sec) {
    return exact_eval(m, sec).value;
  };

  if (config.mode == TrainMode::Exact)
    return detail::minimize(std::move(init), std::move(side_b), config, exact_eval, exact_value);

  PairSampler sampler = make_pair_sampler(graph.joint, graph.marginal_b);
  auto rng = make_engine(mix_seed(config.seed, 2));
  auto stochastic_eval = [&](const EmbeddingModel& m, const Eigen::MatrixXd& sec) {
    return sampled_step(graph, config, m, sec, sampler, rng);
  };
  return detail::minimize(std::move(init), std::move(side_b), config, stochastic_eval,
                          exact_value);
}

// Sign-normalize the columns of an unscaled feature table in place. For each column
// the anchor is the lowest-index row with |value| > tolerance; columns whose anchor
// value is positive are negated, so every anchor coordinate ends up negative.
// Returns the anchor row per column.
inline std::vector<Eigen::Index> canonicalize_feature_signs(Eigen::MatrixXd& features,
                                                            double tolerance = 1e-8) {
  std::vector<Eigen::Index> anchors(static_cast<std::size_t>(features.cols()), -1);
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    Eigen::Index anchor = -1;
    for (Eigen::Index x = 0; x < features.rows(); ++x) {
      if (std::abs(features(x, j)) > tolerance) {
        anchor = x;
        break;
      }
    }
    check(anchor >= 0, "canonicalize_feature_signs: dimension " + std::to_string(j) +
                           " has no coordinate above tolerance");
    anchors[static_cast<std::size_t>(j)] = anchor;
    if (features(anchor, j) > 0.0) features.col(j) = -features.col(j);
  }
  return anchors;
}

// Model-level sign canonicalization. Anchors are found on the per-sample features
// f_j(x) = F_xj / sqrt(d_x); a flipped dimension negates the trained column and,
// when a second table exists, its matching column (their loss value is invariant
// only under paired flips). Idempotent.
inline TrainedModel canonicalize_signs(TrainedModel model, const Eigen::VectorXd& degrees) {
  Eigen::MatrixXd& f = model.model.scaled_features;
  check(degrees.size() == f.rows(), "canonicalize_signs: degree length mismatch");
  check((degrees.array() > 0.0).all(), "canonicalize_signs: degrees must be positive");
  const double tolerance = model.config.anchor_tolerance;
  const Eigen::Index k = f.cols();
  Eigen::VectorXd inv_sqrt_d = degrees.array().rsqrt();
  model.anchors.assign(static_cast<std::size_t>(k), -1);
  for (Eigen::Index j = 0; j < k; ++j) {
    Eigen::Index anchor = -1;
    for (Eigen::Index x = 0; x < f.rows(); ++x) {
      if (std::abs(f(x, j)) * inv_sqrt_d(x) > tolerance) {
        anchor = x;
        break;
      }
    }
    check(anchor >= 0, "canonicalize_signs: dimension " + std::to_string(j) +
                           " has no coordinate above tolerance " + std::to_string(tolerance));
    model.anchors[static_cast<std::size_t>(j)] = anchor;
    if (f(anchor, j) > 0.0) {
      f.col(j) = -f.col(j);
      if (model.secondary_features.size() > 0)
        model.secondary_features.col(j) = -model.secondary_features.col(j);
    }
  }
  model.canonicalized = true;
  return model;
}

inline TrainedModel canonicalize_signs(TrainedModel model, const AugmentationGraph& graph) {
  return canonicalize_signs(std::move(model), graph.degrees);
}

inline TrainedModel canonicalize_signs(TrainedModel model, const BipartiteGraph& graph) {
  return canonicalize_signs(std::move(model), graph.marginal_a);
}

// Permute dimensions so importance is descending; ties keep their original order.
inline TrainedModel sort_by_importance(TrainedModel model) {
  const Eigen::Index k = model.model.raw_importance.size();
  Eigen::VectorXd s = model.model.importance();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return s(a) > s(b); });

  Eigen::MatrixXd f(model.model.scaled_features.rows(), k);
  Eigen::VectorXd raw(k);
  Eigen::MatrixXd secondary;
  if (model.secondary_features.size() > 0) secondary.resize(model.secondary_features.rows(), k);
  std::vector<Eigen::Index> anchors;
  if (!model.anchors.empty()) anchors.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    f.col(j) = model.model.scaled_features.col(src);
    raw(j) = model.model.raw_importance(src);
    if (secondary.size() > 0) secondary.col(j) = model.secondary_features.col(src);
    if (!anchors.empty())
      anchors[static_cast<std::size_t>(j)] = model.anchors[static_cast<std::size_t>(src)];
  }
  model.model.scaled_features = std::move(f);
  model.model.raw_importance = std::move(raw);
  model.secondary_features = std::move(secondary);
  model.anchors = std::move(anchors);
  model.sorted = true;
  return model;
}

// First m columns of the trained table, valid once dimensions are in canonical order.
inline Eigen::MatrixXd select_top_features(const TrainedModel& model, Eigen::Index m) {
  check(model.canonicalized && model.sorted,
        "select_top_features: model must be canonicalized and sorted first");
  check(m >= 1 && m <= model.model.scaled_features.cols(),
        "select_top_features: m must lie in [1, k]");
  return model.model.scaled_features.leftCols(m);
}

}  // namespace tricl
