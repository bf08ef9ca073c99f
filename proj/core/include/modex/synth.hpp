#pragma once

// Planted-signal benchmark generator: a small social graph whose labels are
// recoverable from the engagement counts, from the token embeddings, or both.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modex/features.hpp"
#include "modex/graph.hpp"

namespace modex {

enum class SignalPlacement { kGraphOnly, kTextOnly, kBoth };

std::string_view to_string(SignalPlacement placement);
// "graph" / "text" / "both" (also the enum spellings).
std::optional<SignalPlacement> parse_signal_placement(std::string_view text);

struct SynthSpec {
  std::size_t nodes = 200;       // labeled tweets; replies, users and claims are added on top
  double edge_density = 0.01;    // expected retweets per user = edge_density * nodes
  SignalPlacement placement = SignalPlacement::kBoth;
  double class_balance = 0.5;    // fraction of misinformation tweets
  std::uint64_t seed = 0;
  double signal_strength = 2.0;  // class separation of each planted latent, in noise std units
  double homophily = 0.8;        // chance a user posts/retweets within its own leaning
};

struct SynthBundle {
  HeteroGraph graph;
  std::map<std::string, Split> splits;
  std::map<std::string, Label> labels;
  std::vector<EmbeddingRecord> embeddings;
};

// Throws SpecTooSmall when nodes < 20, InvalidArgument for out-of-range ratios.
SynthBundle synth_generate(const SynthSpec& spec);

// nodes.tsv, edges.tsv, splits.tsv, labels.tsv and embeddings.mmeb.
void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir);

}  // namespace modex
