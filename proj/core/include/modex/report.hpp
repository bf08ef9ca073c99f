#pragma once

// Per-node explanation records (JSON) and the static HTML report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modex/attribution.hpp"
#include "modex/dataset.hpp"
#include "modex/graph.hpp"
#include "modex/graphlime.hpp"
#include "modex/trainer.hpp"

namespace modex {

// Display names of the grouped features on the node page.
inline constexpr std::array<std::string_view, 4> kGroupedDisplayNames = {
    "Number of replies", "Number of quotes", "Number of retweets", "Text"};

struct NodeExplanation {
  std::string node_id;
  std::string text;
  std::uint64_t reply_count = 0;
  std::uint64_t quote_count = 0;
  std::uint64_t retweet_count = 0;
  Label predicted = Label::kMisinformation;
  double probability = 0.0;  // model output, P(misinformation)
  FeatureImportance importance;
  std::optional<TokenAttribution> attribution;  // absent when the node has no tokens
  std::size_t ig_steps = 0;
};

// GraphLime (with hop expansion) and integrated gradients for one tweet.
// Throws UnknownNode when `node_id` is not in the interaction graph.
NodeExplanation explain_tweet(const GatModel& model, const Dataset& dataset,
                              std::string_view node_id, const GraphLimeConfig& config = {},
                              std::size_t ig_steps = kDefaultIgSteps);

// {"node": {id, text, reply_count, quote_count, retweet_count},
//  "explanation": {node_id, label, probability, beta[6], grouped{...}, ranking,
//                  flags, hops, sample_size},
//  "attribution": {node_id, tokens, scores, normalized, steps, completeness_gap} | null}
std::string explanation_json(const NodeExplanation& explanation);
// Throws ReadFailure on malformed input.
NodeExplanation parse_explanation_json(const std::string& text);

std::string render_node_html(const NodeExplanation& explanation);
std::string render_index_html(const std::optional<RunReport>& report,
                              const std::vector<NodeExplanation>& explanations);

// index.html plus node_<id>.html per explanation. Throws WriteFailure.
void render_report(const std::vector<NodeExplanation>& explanations,
                   const std::optional<RunReport>& report, const std::filesystem::path& out_dir);

}  // namespace modex
