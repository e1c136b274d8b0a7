// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tricl/error.hpp"
#include "tricl/graph.hpp"
#include "tricl/spectra.hpp"
#include "tricl/trainer.hpp"
#include "tricl/version.hpp"

namespace tricl {

using Json = nlohmann::json;

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double value) {
  char buffer[64];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  check(result.ec == std::errc(), "format_double: conversion failed");
  return std::string(buffer, result.ptr);
}

// FNV-1a 64-bit content digest, reported as fixed-width hex.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (const char ch : bytes) {
    hash ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
    hash *= 0x100000001b3ull;
  }
  return hash;
}

inline std::string hex_digest(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "write_text_file: cannot open " + path.string());
  out << content;
  check(out.good(), "write_text_file: write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "read_text_file: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// CSV body with a header row; fields are joined verbatim, so callers quote or
// format values themselves (all fields produced here are plain tokens).
inline std::string to_csv(const std::vector<std::string>& header,
                          const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    check(row.size() == header.size(), "to_csv: row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  return out.str();
}

// Rejects JSON objects holding keys outside the declared schema, so config typos
// fail loudly instead of silently using defaults.
inline void require_object(const Json& value, const std::string& context,
                           const std::vector<std::string>& required,
                           const std::vector<std::string>& optional = {}) {
  check(value.is_object(), context + ": expected a JSON object");
  for (const auto& key : required)
    check(value.contains(key), context + ": missing required key '" + key + "'");
  for (const auto& item : value.items()) {
    const std::string& key = item.key();
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    check(known, context + ": unknown key '" + key + "'");
  }
}

inline Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& value, const std::string& context) {
  check(value.is_array(), context + ": expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(value.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  check(value[0].is_array(), context + ": expected an array of rows");
  const Eigen::Index cols = static_cast<Eigen::Index>(value[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    check(value[static_cast<std::size_t>(r)].is_array() &&
              static_cast<Eigen::Index>(value[static_cast<std::size_t>(r)].size()) == cols,
          context + ": ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = value[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::VectorXd vector_from_json(const Json& value, const std::string& context) {
  check(value.is_array(), context + ": expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(value.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = value[static_cast<std::size_t>(i)].get<double>();
  return v;
}

// --- graph specs and graphs ----------------------------------------------------------

inline Json to_json(const ClassGraphSpec& spec) {
  return Json{{"num_classes", spec.num_classes},
              {"naturals_per_class", spec.naturals_per_class},
              {"augmentations_per_natural", spec.augmentations_per_natural},
              {"within_class_mix", spec.within_class_mix},
              {"cross_class_leak", spec.cross_class_leak},
              {"seed", spec.seed}};
}

inline ClassGraphSpec class_graph_spec_from_json(const Json& value) {
  require_object(value, "class graph spec",
                 {"num_classes", "naturals_per_class", "augmentations_per_natural",
                  "within_class_mix", "cross_class_leak", "seed"});
  ClassGraphSpec spec;
  spec.num_classes = value["num_classes"].get<int>();
  spec.naturals_per_class = value["naturals_per_class"].get<int>();
  spec.augmentations_per_natural = value["augmentations_per_natural"].get<int>();
  spec.within_class_mix = value["within_class_mix"].get<double>();
  spec.cross_class_leak = value["cross_class_leak"].get<double>();
  spec.seed = value["seed"].get<std::uint64_t>();
  spec.validate();
  return spec;
}

inline Json to_json(const BipartiteGraphSpec& spec) {
  return Json{{"num_classes", spec.num_classes},
              {"latents_per_class", spec.latents_per_class},
              {"samples_per_latent_a", spec.samples_per_latent_a},
              {"samples_per_latent_b", spec.samples_per_latent_b},
              {"within_class_mix", spec.within_class_mix},
              {"cross_class_leak", spec.cross_class_leak},
              {"seed", spec.seed}};
}

inline BipartiteGraphSpec bipartite_graph_spec_from_json(const Json& value) {
  require_object(value, "bipartite graph spec",
                 {"num_classes", "latents_per_class", "samples_per_latent_a",
                  "samples_per_latent_b", "within_class_mix", "cross_class_leak", "seed"});
  BipartiteGraphSpec spec;
  spec.num_classes = value["num_classes"].get<int>();
  spec.latents_per_class = value["latents_per_class"].get<int>();
  spec.samples_per_latent_a = value["samples_per_latent_a"].get<int>();
  spec.samples_per_latent_b = value["samples_per_latent_b"].get<int>();
  spec.within_class_mix = value["within_class_mix"].get<double>();
  spec.cross_class_leak = value["cross_class_leak"].get<double>();
  spec.seed = value["seed"].get<std::uint64_t>();
  spec.validate();
  return spec;
}

inline Json to_json(const AugmentationGraph& graph) {
  Json adjacency = Json::array();  // row-major flattening
  for (int r = 0; r < graph.n; ++r)
    for (int c = 0; c < graph.n; ++c) adjacency.push_back(graph.adjacency(r, c));
  Json out{{"n", graph.n},
           {"adjacency", std::move(adjacency)},
           {"labels", graph.labels},
           {"natural_index", graph.natural_index},
           {"spec", graph.spec.has_value() ? to_json(*graph.spec) : Json(nullptr)}};
  if (graph.has_generative_model()) {
    out["natural_weights"] = vector_to_json(graph.natural_weights);
    out["kernel"] = matrix_to_json(graph.kernel);
    out["natural_labels"] = graph.natural_labels;
  }
  return out;
}

inline AugmentationGraph graph_from_json(const Json& value) {
  require_object(value, "graph", {"n", "adjacency", "labels", "natural_index", "spec"},
                 {"natural_weights", "kernel", "natural_labels"});
  AugmentationGraph graph;
  graph.n = value["n"].get<int>();
  check(graph.n >= 1, "graph: n must be positive");
  const auto& flat = value["adjacency"];
  check(flat.is_array() && static_cast<int>(flat.size()) == graph.n * graph.n,
        "graph: adjacency must hold n*n row-major entries");
  graph.adjacency.resize(graph.n, graph.n);
  for (int r = 0; r < graph.n; ++r)
    for (int c = 0; c < graph.n; ++c)
      graph.adjacency(r, c) = flat[static_cast<std::size_t>(r * graph.n + c)].get<double>();
  graph.degrees = graph.adjacency.rowwise().sum();
  graph.labels = value["labels"].get<std::vector<int>>();
  graph.natural_index = value["natural_index"].get<std::vector<int>>();
  check(static_cast<int>(graph.labels.size()) == graph.n, "graph: labels length mismatch");
  check(static_cast<int>(graph.natural_index.size()) == graph.n,
        "graph: natural_index length mismatch");
  if (!value["spec"].is_null()) graph.spec = class_graph_spec_from_json(value["spec"]);
  if (value.contains("natural_weights"))
    graph.natural_weights = vector_from_json(value["natural_weights"], "graph.natural_weights");
  if (value.contains("kernel")) graph.kernel = matrix_from_json(value["kernel"], "graph.kernel");
  if (value.contains("natural_labels"))
    graph.natural_labels = value["natural_labels"].get<std::vector<int>>();
  return graph;
}

// --- spectral references -------------------------------------------------------------

inline Json to_json(const SpectralReference& ref) {
  return Json{{"sigma", vector_to_json(ref.singular_values)},
              {"U", matrix_to_json(ref.left_vectors)},
              {"V", matrix_to_json(ref.right_vectors)},
              {"k", ref.k},
              {"warnings", ref.warnings}};
}

inline SpectralReference spectral_reference_from_json(const Json& value) {
  require_object(value, "spectral reference", {"sigma", "U", "V", "k"}, {"warnings"});
  SpectralReference ref;
  ref.singular_values = vector_from_json(value["sigma"], "spectral reference.sigma");
  ref.left_vectors = matrix_from_json(value["U"], "spectral reference.U");
  ref.right_vectors = matrix_from_json(value["V"], "spectral reference.V");
  ref.k = value["k"].get<int>();
  if (value.contains("warnings")) ref.warnings = value["warnings"].get<std::vector<std::string>>();
  return ref;
}

// --- train configs and trained models --------------------------------------------------

inline Json to_json(const TrainConfig& config) {
  return Json{{"loss_kind", to_string(config.loss_kind)},
              {"k", config.k},
              {"lambda", config.lambda},
              {"optimizer", to_string(config.optimizer)},
              {"learning_rate", config.learning_rate},
              {"momentum", config.momentum},
              {"steps", config.steps},
              {"mode", to_string(config.mode)},
              {"batch_pairs", config.batch_pairs},
              {"seed", config.seed},
              {"init_scale", config.init_scale},
              {"anchor_tolerance", config.anchor_tolerance},
              {"ema_coefficient", config.ema_coefficient}};
}

// Strict parse; every field optional so configs state only what they change.
inline TrainConfig train_config_from_json(const Json& value) {
  require_object(value, "train config", {},
                 {"loss_kind", "k", "lambda", "optimizer", "learning_rate", "momentum", "steps",
                  "mode", "batch_pairs", "seed", "init_scale", "anchor_tolerance",
                  "ema_coefficient"});
  TrainConfig config;
  if (value.contains("loss_kind")) config.loss_kind = parse_loss_kind(value["loss_kind"]);
  if (value.contains("k")) config.k = value["k"].get<Eigen::Index>();
  if (value.contains("lambda")) config.lambda = value["lambda"].get<double>();
  if (value.contains("optimizer")) config.optimizer = parse_optimizer_kind(value["optimizer"]);
  if (value.contains("learning_rate")) config.learning_rate = value["learning_rate"].get<double>();
  if (value.contains("momentum")) config.momentum = value["momentum"].get<double>();
  if (value.contains("steps")) config.steps = value["steps"].get<int>();
  if (value.contains("mode")) config.mode = parse_train_mode(value["mode"]);
  if (value.contains("batch_pairs")) config.batch_pairs = value["batch_pairs"].get<int>();
  if (value.contains("seed")) config.seed = value["seed"].get<std::uint64_t>();
  if (value.contains("init_scale")) config.init_scale = value["init_scale"].get<double>();
  if (value.contains("anchor_tolerance"))
    config.anchor_tolerance = value["anchor_tolerance"].get<double>();
  if (value.contains("ema_coefficient"))
    config.ema_coefficient = value["ema_coefficient"].get<double>();
  config.validate();
  return config;
}

inline Json to_json(const TrainedModel& model) {
  Json out{{"F", matrix_to_json(model.model.scaled_features)},
           {"raw_importance", vector_to_json(model.model.raw_importance)},
           {"s", vector_to_json(model.model.importance())},
           {"anchors", model.anchors},
           {"config", to_json(model.config)},
           {"history", model.history},
           {"canonicalized", model.canonicalized},
           {"sorted", model.sorted}};
  out["secondary_F"] =
      model.secondary_features.size() > 0 ? matrix_to_json(model.secondary_features) : Json(nullptr);
  return out;
}

inline TrainedModel trained_model_from_json(const Json& value) {
  require_object(value, "trained model",
                 {"F", "raw_importance", "s", "anchors", "config", "history"},
                 {"canonicalized", "sorted", "secondary_F"});
  TrainedModel model;
  model.model.scaled_features = matrix_from_json(value["F"], "trained model.F");
  model.model.raw_importance =
      vector_from_json(value["raw_importance"], "trained model.raw_importance");
  Eigen::VectorXd stored_s = vector_from_json(value["s"], "trained model.s");
  check(stored_s.size() == model.model.raw_importance.size() &&
            (stored_s - model.model.importance()).cwiseAbs().maxCoeff() <= 1e-12,
        "trained model: stored importance disagrees with raw_importance");
  model.anchors = value["anchors"].get<std::vector<Eigen::Index>>();
  model.config = train_config_from_json(value["config"]);
  model.history = value["history"].get<std::vector<double>>();
  if (value.contains("canonicalized")) model.canonicalized = value["canonicalized"].get<bool>();
  if (value.contains("sorted")) model.sorted = value["sorted"].get<bool>();
  if (value.contains("secondary_F") && !value["secondary_F"].is_null())
    model.secondary_features = matrix_from_json(value["secondary_F"], "trained model.secondary_F");
  return model;
}

// --- run manifests ---------------------------------------------------------------------

struct ManifestEntry {
  std::string name;
  std::string digest;  // fnv1a64 hex of the file body
};

struct RunManifest {
  Json config_echo;
  std::string version = kVersion;
  double duration_seconds = 0.0;
  std::vector<ManifestEntry> files;
};

inline Json to_json(const RunManifest& manifest) {
  Json files = Json::array();
  for (const auto& entry : manifest.files)
    files.push_back(Json{{"name", entry.name}, {"fnv1a64", entry.digest}});
  return Json{{"config", manifest.config_echo},
              {"version", manifest.version},
              {"duration_seconds", manifest.duration_seconds},
              {"files", std::move(files)}};
}

}  // namespace tricl
