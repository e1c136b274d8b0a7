// SPDX-License-Identifier: Apache-2.0
//
// tricl-lab: reproducible experiment runner over finite augmentation graphs.
// Every command reads one JSON config, writes CSV/JSON artifacts into an output
// directory, and closes with a manifest listing each produced file and its
// content digest. Identical configs reproduce byte-identical CSV bodies.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tricl/error.hpp"
#include "tricl/eval.hpp"
#include "tricl/graph.hpp"
#include "tricl/losses.hpp"
#include "tricl/rng.hpp"
#include "tricl/serialize.hpp"
#include "tricl/spectra.hpp"
#include "tricl/trainer.hpp"
#include "tricl/version.hpp"

namespace {

using tricl::check;
using tricl::Json;

struct CommandContext {
  Json config;  // config with flag overrides applied; echoed into the manifest
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::vector<tricl::ManifestEntry> files;

  void emit(const std::string& name, const std::string& content) {
    tricl::write_text_file(out_dir / name, content);
    files.push_back({name, tricl::hex_digest(tricl::fnv1a64(content))});
  }

  void finish() {
    tricl::RunManifest manifest;
    manifest.config_echo = config;
    manifest.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.files = files;
    tricl::write_text_file(out_dir / "manifest.json", tricl::to_json(manifest).dump(2) + "\n");
  }
};

tricl::ClassGraphSpec class_spec_from_config(const Json& value) {
  tricl::require_object(value, "class graph config", {"kind"},
                        {"num_classes", "naturals_per_class", "augmentations_per_natural",
                         "within_class_mix", "cross_class_leak", "seed"});
  tricl::ClassGraphSpec spec;
  if (value.contains("num_classes")) spec.num_classes = value["num_classes"].get<int>();
  if (value.contains("naturals_per_class"))
    spec.naturals_per_class = value["naturals_per_class"].get<int>();
  if (value.contains("augmentations_per_natural"))
    spec.augmentations_per_natural = value["augmentations_per_natural"].get<int>();
  if (value.contains("within_class_mix"))
    spec.within_class_mix = value["within_class_mix"].get<double>();
  if (value.contains("cross_class_leak"))
    spec.cross_class_leak = value["cross_class_leak"].get<double>();
  if (value.contains("seed")) spec.seed = value["seed"].get<std::uint64_t>();
  spec.validate();
  return spec;
}

tricl::BipartiteGraphSpec bipartite_spec_from_config(const Json& value) {
  tricl::require_object(value, "bipartite graph config", {"kind"},
                        {"num_classes", "latents_per_class", "samples_per_latent_a",
                         "samples_per_latent_b", "within_class_mix", "cross_class_leak", "seed"});
  tricl::BipartiteGraphSpec spec;
  if (value.contains("num_classes")) spec.num_classes = value["num_classes"].get<int>();
  if (value.contains("latents_per_class"))
    spec.latents_per_class = value["latents_per_class"].get<int>();
  if (value.contains("samples_per_latent_a"))
    spec.samples_per_latent_a = value["samples_per_latent_a"].get<int>();
  if (value.contains("samples_per_latent_b"))
    spec.samples_per_latent_b = value["samples_per_latent_b"].get<int>();
  if (value.contains("within_class_mix"))
    spec.within_class_mix = value["within_class_mix"].get<double>();
  if (value.contains("cross_class_leak"))
    spec.cross_class_leak = value["cross_class_leak"].get<double>();
  if (value.contains("seed")) spec.seed = value["seed"].get<std::uint64_t>();
  spec.validate();
  return spec;
}

struct LoadedGraph {
  bool bipartite = false;
  tricl::AugmentationGraph uni;
  tricl::BipartiteGraph bi;
};

LoadedGraph load_graph(const Json& value) {
  check(value.is_object() && value.contains("kind"),
        "graph config: expected an object with a 'kind' key");
  const std::string kind = value["kind"].get<std::string>();
  LoadedGraph loaded;
  if (kind == "class") {
    loaded.uni = tricl::generate_class_graph(class_spec_from_config(value));
    return loaded;
  }
  if (kind == "explicit") {
    tricl::require_object(value, "explicit graph config", {"kind", "naturals", "kernel"},
                          {"natural_labels"});
    Eigen::VectorXd naturals = tricl::vector_from_json(value["naturals"], "graph.naturals");
    Eigen::MatrixXd kernel = tricl::matrix_from_json(value["kernel"], "graph.kernel");
    std::vector<int> labels;
    if (value.contains("natural_labels")) labels = value["natural_labels"].get<std::vector<int>>();
    loaded.uni = tricl::build_from_kernel(naturals, kernel, labels);
    return loaded;
  }
  if (kind == "bipartite") {
    loaded.bipartite = true;
    loaded.bi = tricl::generate_bipartite_graph(bipartite_spec_from_config(value));
    return loaded;
  }
  throw tricl::Error("graph config: unknown kind '" + kind + "'");
}

std::string integer_field(Eigen::Index v) { return std::to_string(v); }

// --- identifiability -------------------------------------------------------------------

void append_pairs(std::vector<std::vector<std::string>>& rows,
                  const tricl::IdentifiabilityReport& report) {
  for (const auto& pair : report.pairs)
    rows.push_back({report.method, integer_field(pair.first), integer_field(pair.second),
                    tricl::format_double(pair.distance)});
}

void cmd_identifiability(CommandContext& ctx) {
  tricl::require_object(ctx.config, "identifiability config", {},
                        {"experiment", "seed", "out", "rows", "cols", "k", "num_solutions",
                         "trained"});
  const Eigen::Index rows = ctx.config.value("rows", 200);
  const Eigen::Index cols = ctx.config.value("cols", 150);
  const Eigen::Index k = ctx.config.value("k", 16);
  const int num_solutions = ctx.config.value("num_solutions", 10);

  tricl::FactorComparisonReport report =
      tricl::bifactor_vs_trifactor_experiment(rows, cols, k, num_solutions, ctx.seed);
  std::vector<std::vector<std::string>> csv_rows;
  append_pairs(csv_rows, report.trifactor);
  append_pairs(csv_rows, report.bifactor);

  if (ctx.config.contains("trained")) {
    const Json& section = ctx.config["trained"];
    tricl::require_object(section, "identifiability.trained", {"graph"}, {"train", "num_seeds"});
    tricl::AugmentationGraph graph = tricl::generate_class_graph(
        class_spec_from_config(section["graph"]));
    tricl::TrainConfig base =
        tricl::train_config_from_json(section.value("train", Json::object()));
    const int num_seeds = section.value("num_seeds", 5);
    check(num_seeds >= 2, "identifiability.trained: num_seeds must be at least 2");

    auto run_protocol = [&](tricl::LossKind kind, const std::string& method) {
      std::vector<Eigen::MatrixXd> tables;
      tables.reserve(static_cast<std::size_t>(num_seeds));
      for (int i = 0; i < num_seeds; ++i) {
        tricl::TrainConfig cfg = base;
        cfg.loss_kind = kind;
        cfg.seed = tricl::mix_seed(base.seed, static_cast<std::uint64_t>(i));
        tricl::TrainedModel model = tricl::train(graph, cfg);
        model = tricl::canonicalize_signs(std::move(model), graph);
        model = tricl::sort_by_importance(std::move(model));
        tables.push_back(model.model.scaled_features);
      }
      append_pairs(csv_rows, tricl::identifiability_distance(tables, method, false));
    };
    run_protocol(tricl::LossKind::Tricl, "trained_tricl");
    run_protocol(tricl::LossKind::Scl, "trained_scl");
  }

  ctx.emit("identifiability.csv",
           tricl::to_csv({"method", "run_i", "run_j", "distance"}, csv_rows));
  ctx.finish();
}

// --- bounds sweep ----------------------------------------------------------------------

void cmd_bounds_sweep(CommandContext& ctx) {
  tricl::require_object(ctx.config, "bounds-sweep config", {"graph"},
                        {"experiment", "seed", "out", "k", "m_grid"});
  LoadedGraph loaded = load_graph(ctx.config["graph"]);
  check(!loaded.bipartite, "bounds-sweep: requires a unipartite graph");
  const tricl::AugmentationGraph& graph = loaded.uni;
  const int k = ctx.config.value("k", 8);
  check(k >= 1 && k <= graph.n, "bounds-sweep: k must lie in [1, n]");

  tricl::NormalizedAdjacency abar = tricl::normalize(graph);
  tricl::SpectralReference ref = tricl::decompose(abar.matrix, k);
  const double alpha = tricl::compute_alpha(graph);

  std::vector<Eigen::Index> m_grid;
  if (ctx.config.contains("m_grid")) {
    for (const auto& entry : ctx.config["m_grid"]) m_grid.push_back(entry.get<Eigen::Index>());
  } else {
    for (Eigen::Index m = 1; m <= k; ++m) m_grid.push_back(m);
  }

  std::vector<std::vector<std::string>> rows;
  for (const Eigen::Index m : m_grid) {
    tricl::BoundReport bound = tricl::bound_values(ref.singular_values, m, k, alpha);
    rows.push_back({integer_field(m), tricl::format_double(bound.u_scl),
                    tricl::format_double(bound.u_tricl), tricl::format_double(bound.gap),
                    tricl::format_double(bound.alpha)});
  }
  ctx.emit("bounds.csv", tricl::to_csv({"m", "u_scl", "u_tricl", "gap", "alpha"}, rows));
  ctx.finish();
}

// --- train-eval ------------------------------------------------------------------------

void cmd_train_eval(CommandContext& ctx) {
  tricl::require_object(ctx.config, "train-eval config", {"graph"},
                        {"experiment", "seed", "out", "train", "eval"});
  LoadedGraph loaded = load_graph(ctx.config["graph"]);
  tricl::TrainConfig train_config =
      tricl::train_config_from_json(ctx.config.value("train", Json::object()));

  tricl::TrainedModel model;
  Eigen::VectorXd degrees;
  std::vector<int> labels;
  Eigen::MatrixXd normalized;
  if (loaded.bipartite) {
    model = tricl::train(loaded.bi, train_config);
    model = tricl::canonicalize_signs(std::move(model), loaded.bi);
    degrees = loaded.bi.marginal_a;
    labels = loaded.bi.labels_a;
    normalized = tricl::normalize_bipartite(loaded.bi).matrix;
  } else {
    model = tricl::train(loaded.uni, train_config);
    model = tricl::canonicalize_signs(std::move(model), loaded.uni);
    degrees = loaded.uni.degrees;
    labels = loaded.uni.labels;
    normalized = tricl::normalize(loaded.uni).matrix;
  }
  model = tricl::sort_by_importance(std::move(model));

  const Eigen::Index k = train_config.k;
  tricl::SpectralReference ref = tricl::decompose(normalized, static_cast<int>(k));
  Eigen::VectorXd oracle_sigma = ref.singular_values.head(k);
  Eigen::MatrixXd oracle_features =
      degrees.array().rsqrt().matrix().asDiagonal() * ref.left_vectors.leftCols(k);

  const Json eval_config = ctx.config.value("eval", Json::object());
  tricl::require_object(eval_config, "eval config", {},
                        {"m_grid", "dim_blocks", "block_size", "neighbors", "top_r", "ridge"});
  std::vector<Eigen::Index> m_grid;
  if (eval_config.contains("m_grid")) {
    for (const auto& entry : eval_config["m_grid"]) m_grid.push_back(entry.get<Eigen::Index>());
  } else {
    for (Eigen::Index m = 1; m <= k; ++m) m_grid.push_back(m);
  }
  for (const Eigen::Index m : m_grid)
    check(m >= 1 && m <= k, "eval config: m_grid entries must lie in [1, k]");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  if (eval_config.contains("dim_blocks")) {
    for (const auto& entry : eval_config["dim_blocks"]) {
      check(entry.is_array() && entry.size() == 2, "eval config: dim_blocks entries are [begin, end)");
      blocks.push_back({entry[0].get<Eigen::Index>(), entry[1].get<Eigen::Index>()});
    }
  } else {
    const Eigen::Index block_size = eval_config.value("block_size", 2);
    check(block_size >= 1, "eval config: block_size must be positive");
    for (Eigen::Index begin = 0; begin < k; begin += block_size)
      blocks.push_back({begin, std::min(begin + block_size, k)});
  }
  const int neighbors = eval_config.value("neighbors", 10);
  const int top_r = eval_config.value("top_r", 10);
  const double ridge = eval_config.value("ridge", 1e-6);

  std::vector<std::vector<std::string>> metric_rows;
  for (const Eigen::Index m : m_grid) {
    Eigen::MatrixXd top = tricl::select_top_features(model, m);
    metric_rows.push_back({"probe_error", integer_field(m),
                           tricl::format_double(tricl::linear_probe(top, labels, degrees, ridge))});
  }
  std::vector<double> knn = tricl::knn_eval(model.model.scaled_features, labels, blocks, neighbors);
  for (std::size_t i = 0; i < knn.size(); ++i)
    metric_rows.push_back(
        {"knn_accuracy", integer_field(static_cast<Eigen::Index>(i)), tricl::format_double(knn[i])});
  for (const Eigen::Index m : m_grid) {
    Eigen::MatrixXd top = tricl::select_top_features(model, m);
    metric_rows.push_back({"retrieval_map", integer_field(m),
                           tricl::format_double(tricl::retrieval_map(top, labels, top_r))});
  }
  Eigen::MatrixXd trained_features = tricl::unscaled_features(model.model.scaled_features, degrees);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double denom = trained_features.col(j).norm() * oracle_features.col(j).norm();
    const double cosine =
        denom > 0.0 ? std::abs(trained_features.col(j).dot(oracle_features.col(j))) / denom : 0.0;
    metric_rows.push_back(
        {"oracle_feature_abs_cosine", integer_field(j), tricl::format_double(cosine)});
  }

  Eigen::VectorXd s = model.model.importance();
  Eigen::VectorXd s_norm = tricl::importance_distribution(model.model);
  std::vector<std::vector<std::string>> importance_rows;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double sigma = oracle_sigma(j);
    const double rel = sigma > 0.0 ? std::abs(s(j) - sigma) / sigma : std::abs(s(j));
    importance_rows.push_back({integer_field(j), tricl::format_double(s(j)),
                               tricl::format_double(s_norm(j)), tricl::format_double(sigma),
                               tricl::format_double(rel)});
  }

  ctx.emit("model.json", tricl::to_json(model).dump(2) + "\n");
  ctx.emit("metrics.csv", tricl::to_csv({"metric", "m_or_block", "value"}, metric_rows));
  ctx.emit("importance.csv",
           tricl::to_csv({"dim", "s", "s_normalized", "oracle_sigma", "oracle_rel_error"},
                         importance_rows));
  ctx.finish();
}

// --- gradient audit ----------------------------------------------------------------------

struct AuditInstance {
  Eigen::VectorXd params;
  Eigen::VectorXd grad;
  std::function<double(const Eigen::VectorXd&)> value;
};

Eigen::VectorXd flatten2(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out.head(a.size()) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  out.tail(b.size()) = b;
  return out;
}

AuditInstance make_audit_instance(tricl::LossKind kind, std::uint64_t seed, int instance) {
  constexpr Eigen::Index k = 3;
  constexpr double lambda = 0.7;
  auto prng = tricl::make_engine(tricl::mix_seed(seed, 200 + static_cast<std::uint64_t>(instance)));
  AuditInstance out;

  if (kind == tricl::LossKind::Triclip) {
    tricl::BipartiteGraphSpec spec;
    spec.num_classes = 2;
    spec.latents_per_class = 2;
    spec.samples_per_latent_a = 3;
    spec.samples_per_latent_b = 2;
    spec.within_class_mix = 0.55;
    spec.cross_class_leak = 0.08;
    spec.seed = tricl::mix_seed(seed, 100 + static_cast<std::uint64_t>(instance));
    tricl::BipartiteGraph graph = tricl::generate_bipartite_graph(spec);
    tricl::NormalizedJoint pbar = tricl::normalize_bipartite(graph);
    const Eigen::Index na = graph.n_a, nb = graph.n_b;
    Eigen::MatrixXd fa = tricl::gaussian_matrix(na, k, 0.5, prng);
    Eigen::MatrixXd fb = tricl::gaussian_matrix(nb, k, 0.5, prng);
    Eigen::VectorXd raw = tricl::uniform_vector(k, -1.2, 1.2, prng);
    out.params.resize(na * k + nb * k + k);
    out.params.head(na * k) = Eigen::Map<const Eigen::VectorXd>(fa.data(), fa.size());
    out.params.segment(na * k, nb * k) = Eigen::Map<const Eigen::VectorXd>(fb.data(), fb.size());
    out.params.tail(k) = raw;
    tricl::LossValueAndGradient g = tricl::triclip_loss(pbar, fa, fb, raw, lambda);
    out.grad.resize(out.params.size());
    out.grad.head(na * k) =
        Eigen::Map<const Eigen::VectorXd>(g.grad_features.data(), g.grad_features.size());
    out.grad.segment(na * k, nb * k) =
        Eigen::Map<const Eigen::VectorXd>(g.grad_features_b.data(), g.grad_features_b.size());
    out.grad.tail(k) = g.grad_raw_importance;
    out.value = [pbar, na, nb](const Eigen::VectorXd& p) {
      Eigen::MatrixXd fa2 = Eigen::Map<const Eigen::MatrixXd>(p.data(), na, k);
      Eigen::MatrixXd fb2 = Eigen::Map<const Eigen::MatrixXd>(p.data() + na * k, nb, k);
      Eigen::VectorXd raw2 = p.tail(k);
      return tricl::triclip_loss(pbar, fa2, fb2, raw2, lambda).value;
    };
    return out;
  }

  tricl::ClassGraphSpec spec;
  spec.num_classes = 2;
  spec.naturals_per_class = 2;
  spec.augmentations_per_natural = 3;
  spec.within_class_mix = 0.55;
  spec.cross_class_leak = 0.08;
  spec.seed = tricl::mix_seed(seed, 100 + static_cast<std::uint64_t>(instance));
  tricl::AugmentationGraph graph = tricl::generate_class_graph(spec);
  tricl::NormalizedAdjacency abar = tricl::normalize(graph);
  Eigen::VectorXd d = graph.degrees;
  const Eigen::Index n = graph.n;
  Eigen::MatrixXd f = tricl::gaussian_matrix(n, k, 0.5, prng);
  Eigen::VectorXd raw = tricl::uniform_vector(k, -1.2, 1.2, prng);

  if (kind == tricl::LossKind::Scl) {
    out.params = Eigen::Map<const Eigen::VectorXd>(f.data(), f.size());
    tricl::LossValueAndGradient g = tricl::scl_loss(abar, f);
    out.grad = Eigen::Map<const Eigen::VectorXd>(g.grad_features.data(), g.grad_features.size());
    out.value = [abar, n](const Eigen::VectorXd& p) {
      Eigen::MatrixXd f2 = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, k);
      return tricl::scl_loss(abar, f2).value;
    };
    return out;
  }

  if (kind == tricl::LossKind::Trimse) {
    Eigen::MatrixXd target = tricl::gaussian_matrix(n, k, 0.7, prng);
    out.params = flatten2(f, raw);
    tricl::LossValueAndGradient g = tricl::trimse_loss(abar, d, f, target, raw, lambda);
    out.grad = flatten2(g.grad_features, g.grad_raw_importance);
    out.value = [abar, d, target, n](const Eigen::VectorXd& p) {
      Eigen::MatrixXd f2 = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, k);
      Eigen::VectorXd raw2 = p.tail(k);
      return tricl::trimse_loss(abar, d, f2, target, raw2, lambda).value;
    };
    return out;
  }

  out.params = flatten2(f, raw);
  if (kind == tricl::LossKind::Tricl) {
    tricl::LossValueAndGradient g = tricl::tricl_loss(abar, f, raw, lambda);
    out.grad = flatten2(g.grad_features, g.grad_raw_importance);
    out.value = [abar, n](const Eigen::VectorXd& p) {
      Eigen::MatrixXd f2 = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, k);
      Eigen::VectorXd raw2 = p.tail(k);
      return tricl::tricl_loss(abar, f2, raw2, lambda).value;
    };
    return out;
  }

  check(kind == tricl::LossKind::TriInfonce, "gradient-audit: unsupported loss kind");
  tricl::LossValueAndGradient g = tricl::tri_infonce_loss(abar, d, f, raw, lambda);
  out.grad = flatten2(g.grad_features, g.grad_raw_importance);
  out.value = [abar, d, n](const Eigen::VectorXd& p) {
    Eigen::MatrixXd f2 = Eigen::Map<const Eigen::MatrixXd>(p.data(), n, k);
    Eigen::VectorXd raw2 = p.tail(k);
    return tricl::tri_infonce_loss(abar, d, f2, raw2, lambda).value;
  };
  return out;
}

void cmd_gradient_audit(CommandContext& ctx) {
  tricl::require_object(ctx.config, "gradient-audit config", {},
                        {"experiment", "seed", "out", "losses", "num_instances", "epsilon"});
  std::vector<std::string> loss_names =
      ctx.config.value("losses", std::vector<std::string>{"scl", "tricl", "tri_infonce",
                                                          "triclip", "trimse"});
  const int num_instances = ctx.config.value("num_instances", 20);
  const double epsilon = ctx.config.value("epsilon", 1e-5);
  check(num_instances >= 1, "gradient-audit: num_instances must be positive");

  std::vector<std::vector<std::string>> rows;
  for (const std::string& name : loss_names) {
    const tricl::LossKind kind = tricl::parse_loss_kind(name);
    for (int i = 0; i < num_instances; ++i) {
      AuditInstance instance = make_audit_instance(kind, ctx.seed, i);
      tricl::FiniteDifferenceReport report = tricl::finite_difference_check(
          instance.value, instance.params, instance.grad, epsilon,
          tricl::mix_seed(ctx.seed, 9000 + static_cast<std::uint64_t>(i)));
      rows.push_back({name, std::to_string(i), tricl::format_double(epsilon),
                      tricl::format_double(report.max_rel_error),
                      integer_field(report.worst_coordinate)});
    }
  }
  ctx.emit("audit.csv",
           tricl::to_csv({"loss", "instance", "epsilon", "max_rel_error", "worst_coordinate"},
                         rows));
  ctx.finish();
}

constexpr const char* kSchemaFooter = R"(Config schema (one JSON object; unknown keys are rejected):
  common keys      "experiment" (must match the command when present), "seed" (u64), "out" (dir)
  identifiability  "rows", "cols", "k", "num_solutions",
                   optional "trained": {"graph": <class graph>, "train": <train>, "num_seeds"}
  train-eval       "graph": <graph>, "train": <train>,
                   "eval": {"m_grid", "dim_blocks" | "block_size", "neighbors", "top_r", "ridge"}
  bounds-sweep     "graph": <graph>, "k", "m_grid"
  gradient-audit   "losses", "num_instances", "epsilon"
  <graph>          {"kind": "class", "num_classes", "naturals_per_class",
                    "augmentations_per_natural", "within_class_mix", "cross_class_leak", "seed"}
                 | {"kind": "explicit", "naturals": [...], "kernel": [[...]], "natural_labels"}
                 | {"kind": "bipartite", "num_classes", "latents_per_class",
                    "samples_per_latent_a", "samples_per_latent_b", "within_class_mix",
                    "cross_class_leak", "seed"}
  <train>          {"loss_kind": scl|tricl|tri_infonce|triclip|trimse, "k", "lambda",
                    "optimizer": momentum|adam, "learning_rate", "momentum", "steps",
                    "mode": exact|sampled, "batch_pairs", "seed", "init_scale",
                    "anchor_tolerance", "ema_coefficient"}
Flags override the matching top-level config fields.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("tricl-lab ") + tricl::kVersion +
               " - experiment runner for tri-factor contrastive objectives on finite graphs"};
  app.require_subcommand(1);
  app.footer(kSchemaFooter);
  app.failure_message([](const CLI::App*, const CLI::Error& e) {
    return std::string("tricl-lab: error: ") + e.what() + "\n";
  });

  std::string config_path;
  std::string out_flag;
  std::uint64_t seed_flag = 0;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"identifiability", "repeated-solution distance experiment (two- vs three-factor)"},
      {"train-eval", "train one model, compare to the spectral oracle, run downstream metrics"},
      {"bounds-sweep", "downstream-error bound quantities over a grid of kept dimensions"},
      {"gradient-audit", "finite-difference audit of every analytic loss gradient"}};
  std::vector<CLI::App*> subcommands;
  for (const auto& [name, description] : commands) {
    CLI::App* cmd = app.add_subcommand(name, description);
    cmd->add_option("--config", config_path, "path to the JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_flag, "output directory (overrides config \"out\")");
    cmd->add_option("--seed", seed_flag, "seed override (overrides config \"seed\")");
    subcommands.push_back(cmd);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    CommandContext ctx;
    ctx.config = tricl::Json::parse(tricl::read_text_file(config_path));
    check(ctx.config.is_object(), "config: top-level JSON value must be an object");

    std::string command;
    for (std::size_t i = 0; i < subcommands.size(); ++i)
      if (subcommands[i]->parsed()) command = commands[i].first;
    if (ctx.config.contains("experiment"))
      check(ctx.config["experiment"].get<std::string>() == command,
            "config: \"experiment\" is '" + ctx.config["experiment"].get<std::string>() +
                "' but the command is '" + command + "'");

    ctx.seed = ctx.config.value("seed", static_cast<std::uint64_t>(0));
    for (const CLI::App* cmd : subcommands) {
      if (!cmd->parsed()) continue;
      if (cmd->count("--seed") > 0) ctx.seed = seed_flag;
      if (cmd->count("--out") > 0) ctx.config["out"] = out_flag;
    }
    ctx.config["seed"] = ctx.seed;
    ctx.out_dir = ctx.config.value("out", std::string("out"));
    std::filesystem::create_directories(ctx.out_dir);

    if (command == "identifiability") cmd_identifiability(ctx);
    else if (command == "train-eval") cmd_train_eval(ctx);
    else if (command == "bounds-sweep") cmd_bounds_sweep(ctx);
    else cmd_gradient_audit(ctx);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "tricl-lab: error: " << e.what() << std::endl;
    return 1;
  }
}
