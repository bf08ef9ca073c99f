#pragma once

// Integrated-gradients word importance through mean pooling, the text
// projection and both attention layers.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modex/autodiff.hpp"
#include "modex/features.hpp"
#include "modex/gat.hpp"

namespace modex {

inline constexpr std::size_t kDefaultIgSteps = 50;

struct IntegratedGradients {
  std::size_t node = 0;
  std::vector<std::string> tokens;
  Tensor attributions;  // tokens x 768
  Label target = Label::kMisinformation;
  double output_input = 0.0;     // F(x)
  double output_baseline = 0.0;  // F(zero tokens)
  std::size_t steps = 0;
};

// F = model output for `node` if `target` is Misinformation, 1 - output
// otherwise, with the node's token matrix replaced by `tokens`. Other nodes
// keep their pooled text.
double target_output(const GatModel& model, const EdgeIndex& edges, const FeatureSet& features,
                     std::size_t node, const Tensor& tokens, Label target,
                     const ForwardOptions& options = {});

// Right Riemann sum of the path integral from the all-zero baseline:
// IG = x * (1/m) sum_{k=1..m} dF(k/m * x)/dx. Without an explicit `target` the
// class predicted at x is explained. Throws NoTokenEmbeddings(node).
IntegratedGradients integrated_gradients(const GatModel& model, const EdgeIndex& edges,
                                         const FeatureSet& features, std::size_t node,
                                         std::size_t steps = kDefaultIgSteps,
                                         const ForwardOptions& options = {},
                                         std::optional<Label> target = std::nullopt);

// |sum(IG) - (F(x) - F(baseline))|
double completeness_gap(const IntegratedGradients& ig);

struct TokenAttribution {
  std::vector<std::string> tokens;
  std::vector<double> scores;
  std::vector<double> normalized;
  double completeness_gap = 0.0;
};

// Row sums scaled by the largest absolute row sum (all-zero stays zero).
// Throws LengthMismatch.
TokenAttribution word_importance(const Tensor& attributions, std::span<const std::string> tokens);

}  // namespace modex
