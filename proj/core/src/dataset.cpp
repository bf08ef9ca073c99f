#include "modex/dataset.hpp"

#include <vector>

#include "modex/error.hpp"

namespace modex {

BundlePaths BundlePaths::in(const std::filesystem::path& dir) {
  return {dir / "nodes.tsv", dir / "edges.tsv", dir / "splits.tsv", dir / "embeddings.mmeb"};
}

Dataset build_dataset(HeteroGraph graph, std::map<std::string, Split> splits,
                      const EmbeddingTable& embeddings, const DatasetOptions& options) {
  Dataset ds;
  ds.graph = std::move(graph);
  ds.splits = std::move(splits);
  ds.labels = derive_tweet_labels(ds.graph, options.conflict_policy);
  ds.interaction = build_interaction_graph(ds.graph, ds.labels, ds.splits, options.couser_cap);

  if (options.transform == ShallowTransform::kLog1pZscore) {
    std::vector<const TweetRecord*> train;
    for (std::size_t i = 0; i < ds.interaction.node_count(); ++i) {
      if (ds.interaction.splits[i] != Split::kTrain || !ds.interaction.labels[i]) continue;
      const auto index = ds.graph.find(ds.interaction.node_ids[i]);
      train.push_back(&std::get<TweetRecord>(ds.graph.node(*index).payload));
    }
    ds.stats = fit_shallow_stats(train);
  }

  std::map<std::string, ShallowVector> shallow;
  for (const std::string& id : ds.interaction.node_ids) {
    const auto& record = std::get<TweetRecord>(ds.graph.node(*ds.graph.find(id)).payload);
    shallow.emplace(id, encode_shallow(record, options.transform, ds.stats));
  }

  const HashedEncoder encoder;
  ds.features = assemble_features(ds.interaction, shallow, embeddings, ds.graph,
                                  options.use_fallback ? &encoder : nullptr);
  return ds;
}

Dataset load_bundle(const BundlePaths& paths, const DatasetOptions& options) {
  HeteroGraph graph = load_dataset(paths.nodes, paths.edges);
  auto splits = load_splits(paths.splits);
  EmbeddingTable embeddings;
  if (std::filesystem::exists(paths.embeddings)) embeddings = load_embeddings(paths.embeddings);
  return build_dataset(std::move(graph), std::move(splits), embeddings, options);
}

}  // namespace modex
