#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "modex/features.hpp"
#include "modex/graph.hpp"

namespace modex {

// Standard file names inside a bundle directory.
struct BundlePaths {
  std::filesystem::path nodes;
  std::filesystem::path edges;
  std::filesystem::path splits;
  std::filesystem::path embeddings;  // optional on disk

  static BundlePaths in(const std::filesystem::path& dir);
};

struct DatasetOptions {
  std::size_t couser_cap = kDefaultCoUserCap;
  ShallowTransform transform = ShallowTransform::kLog1pZscore;
  ConflictPolicy conflict_policy = ConflictPolicy::kDrop;
  bool use_fallback = true;
};

// Everything the trainer and explainers consume, derived from one bundle.
struct Dataset {
  HeteroGraph graph;
  std::map<std::string, Label> labels;
  std::map<std::string, Split> splits;
  InteractionGraph interaction;
  std::optional<ShallowStats> stats;
  FeatureSet features;
};

// Labels from claims, interaction projection, shallow statistics fitted on the
// train split, and feature assembly.
Dataset build_dataset(HeteroGraph graph, std::map<std::string, Split> splits,
                      const EmbeddingTable& embeddings, const DatasetOptions& options = {});

// Reads nodes.tsv, edges.tsv, splits.tsv and, if present, embeddings.mmeb.
Dataset load_bundle(const BundlePaths& paths, const DatasetOptions& options = {});

}  // namespace modex
