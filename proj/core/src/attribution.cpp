#include "modex/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "modex/error.hpp"

namespace modex {
namespace {

struct PathPoint {
  double value;
  Tensor grad;
};

PathPoint evaluate(const GatModel& model, const EdgeIndex& edges, const FeatureSet& features,
                   std::size_t node, const Tensor& tokens, Label target,
                   const ForwardOptions& options, bool want_grad) {
  Tape tape;
  const ModelVars vars = bind_model(tape, model, false);
  const Var shallow = tape.constant(features.shallow);
  const Var x = want_grad ? tape.leaf(tokens) : tape.constant(tokens);
  Var text = shallow;
  if (model.mode != Mode::kGraphOnly) {
    text = replace_row(tape, tape.constant(features.text_pooled), node, mean_rows(tape, x));
  }
  const Var prob = model_forward(tape, model, vars, edges, shallow, text, options);
  Var out = pick(tape, prob, node, 0);
  if (target == Label::kFactual) {
    out = add(tape, mul(tape, out, tape.constant(Tensor::scalar(-1.0))),
              tape.constant(Tensor::scalar(1.0)));
  }
  PathPoint point{tape.value(out)[0], Tensor()};
  if (want_grad) {
    const Gradients g = tape.backward(out);
    point.grad = g.has(x) ? g[x] : Tensor(tokens.rows(), tokens.cols());
  }
  return point;
}

}  // namespace

double target_output(const GatModel& model, const EdgeIndex& edges, const FeatureSet& features,
                     std::size_t node, const Tensor& tokens, Label target,
                     const ForwardOptions& options) {
  return evaluate(model, edges, features, node, tokens, target, options, false).value;
}

IntegratedGradients integrated_gradients(const GatModel& model, const EdgeIndex& edges,
                                         const FeatureSet& features, std::size_t node,
                                         std::size_t steps, const ForwardOptions& options,
                                         std::optional<Label> target) {
  if (node >= features.node_count()) {
    throw Error(ErrorCode::kIndexOutOfRange, "node index out of range");
  }
  if (steps < 1) throw Error(ErrorCode::kInvalidArgument, "steps must be >= 1");
  const auto& maybe_tokens = features.text_tokens[node];
  if (!maybe_tokens || maybe_tokens->texts.empty()) {
    throw Error(ErrorCode::kNoTokenEmbeddings,
                "NoTokenEmbeddings(" + std::to_string(node) + "): node has no token vectors");
  }
  const Tensor& x = maybe_tokens->vectors;

  IntegratedGradients ig;
  ig.node = node;
  ig.tokens = maybe_tokens->texts;
  ig.steps = steps;
  if (target) {
    ig.target = *target;
  } else {
    const double p = target_output(model, edges, features, node, x, Label::kMisinformation, options);
    ig.target = p > 0.5 ? Label::kMisinformation : Label::kFactual;
  }

  const Tensor baseline(x.rows(), x.cols());
  ig.output_baseline = target_output(model, edges, features, node, baseline, ig.target, options);

  Tensor grad_sum(x.rows(), x.cols());
  Tensor point(x.rows(), x.cols());
  for (std::size_t k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    for (std::size_t i = 0; i < x.size(); ++i) point[i] = alpha * x[i];
    const PathPoint p = evaluate(model, edges, features, node, k == steps ? x : point, ig.target,
                                 options, true);
    for (std::size_t i = 0; i < x.size(); ++i) grad_sum[i] += p.grad[i];
    if (k == steps) ig.output_input = p.value;
  }
  ig.attributions = Tensor(x.rows(), x.cols());
  const double inv = 1.0 / static_cast<double>(steps);
  for (std::size_t i = 0; i < x.size(); ++i) ig.attributions[i] = x[i] * grad_sum[i] * inv;
  return ig;
}

double completeness_gap(const IntegratedGradients& ig) {
  double total = 0.0;
  for (double v : ig.attributions.data()) total += v;
  return std::abs(total - (ig.output_input - ig.output_baseline));
}

TokenAttribution word_importance(const Tensor& attributions, std::span<const std::string> tokens) {
  if (attributions.rows() != tokens.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "LengthMismatch: " + std::to_string(attributions.rows()) + " attribution rows for " +
                    std::to_string(tokens.size()) + " tokens");
  }
  TokenAttribution out;
  out.tokens.assign(tokens.begin(), tokens.end());
  double peak = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    double s = 0.0;
    for (double v : attributions.row(t)) s += v;
    out.scores.push_back(s);
    peak = std::max(peak, std::abs(s));
  }
  for (double s : out.scores) out.normalized.push_back(peak > 0.0 ? s / peak : 0.0);
  return out;
}

}  // namespace modex
