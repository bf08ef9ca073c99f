#include "modex/gat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

#include "modex/error.hpp"
#include "modex/random.hpp"

namespace modex {
namespace {

Tensor glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (double& v : t.data()) v = rng.uniform(-limit, limit);
  return t;
}

Var activate(Tape& tape, Var x, Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return x;
    case Activation::kElu: return elu(tape, x);
    case Activation::kSigmoid: return sigmoid(tape, x);
  }
  return x;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kGraphOnly: return "GraphOnly";
    case Mode::kTextOnly: return "TextOnly";
    case Mode::kMultimodal: return "Multimodal";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "GraphOnly" || text == "graph") return Mode::kGraphOnly;
  if (text == "TextOnly" || text == "text") return Mode::kTextOnly;
  if (text == "Multimodal" || text == "multi") return Mode::kMultimodal;
  return std::nullopt;
}

std::size_t input_dim(Mode mode) {
  return mode == Mode::kMultimodal ? kMultimodalDim
         : mode == Mode::kGraphOnly ? kShallowDim
                                    : kTextProjectionDim;
}

std::vector<Tensor*> GatModel::parameters() {
  return {&proj_weight, &proj_bias,     &layer1.weight, &layer1.att_src,
          &layer1.att_dst, &layer2.weight, &layer2.att_src, &layer2.att_dst};
}

std::vector<const Tensor*> GatModel::parameters() const {
  return {&proj_weight, &proj_bias,     &layer1.weight, &layer1.att_src,
          &layer1.att_dst, &layer2.weight, &layer2.att_src, &layer2.att_dst};
}

GatModel init_model(Mode mode, std::uint64_t seed) {
  Rng rng(seed);
  GatModel model;
  model.mode = mode;
  model.proj_weight = glorot(rng, kEmbeddingDim, kTextProjectionDim);
  model.proj_bias = Tensor(1, kTextProjectionDim);
  model.layer1.weight = glorot(rng, input_dim(mode), kHiddenDim);
  model.layer1.att_src = glorot(rng, kHiddenDim, 1);
  model.layer1.att_dst = glorot(rng, kHiddenDim, 1);
  model.layer2.weight = glorot(rng, kHiddenDim, 1);
  model.layer2.att_src = glorot(rng, 1, 1);
  model.layer2.att_dst = glorot(rng, 1, 1);
  return model;
}

EdgeIndex make_edge_index(const InteractionGraph& graph) {
  const std::size_t n = graph.node_count();
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = graph.edges[a];
    const auto& eb = graph.edges[b];
    return std::tie(ea.target, ea.source) < std::tie(eb.target, eb.source);
  });

  EdgeIndex index;
  index.node_count = n;
  std::vector<bool> has_self(n, false);
  for (std::size_t k : order) {
    const auto& e = graph.edges[k];
    if (e.source >= n || e.target >= n) {
      throw Error(ErrorCode::kIndexOutOfRange, "interaction edge endpoint out of range");
    }
    if (e.source == e.target) has_self[e.source] = true;
    index.source.push_back(e.source);
    index.target.push_back(e.target);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_self[i]) {
      throw Error(ErrorCode::kMissingSelfLoop,
                  "MissingSelfLoop(" + (i < graph.node_ids.size() ? graph.node_ids[i] : std::to_string(i)) + ")");
    }
  }
  return index;
}

ModelVars bind_model(Tape& tape, const GatModel& model, bool trainable) {
  auto bind = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  ModelVars v;
  v.proj_weight = bind(model.proj_weight);
  v.proj_bias = bind(model.proj_bias);
  v.w1 = bind(model.layer1.weight);
  v.att_src1 = bind(model.layer1.att_src);
  v.att_dst1 = bind(model.layer1.att_dst);
  v.w2 = bind(model.layer2.weight);
  v.att_src2 = bind(model.layer2.att_src);
  v.att_dst2 = bind(model.layer2.att_dst);
  return v;
}

Var project_and_fuse(Tape& tape, const GatModel& model, const ModelVars& vars, Var shallow,
                     Var text_pooled) {
  const Tensor& sv = tape.value(shallow);
  if (sv.cols() != kShallowDim) {
    throw Error(ErrorCode::kModeFeatureMismatch, "shallow features must have 3 columns");
  }
  if (tape.value(vars.w1).rows() != input_dim(model.mode)) {
    throw Error(ErrorCode::kModeFeatureMismatch,
                "layer 1 input width does not match mode " + std::string(to_string(model.mode)));
  }
  if (model.mode == Mode::kGraphOnly) return shallow;

  const Tensor& tv = tape.value(text_pooled);
  if (tv.cols() != kEmbeddingDim || tv.rows() != sv.rows()) {
    throw Error(ErrorCode::kModeFeatureMismatch,
                std::string(to_string(model.mode)) + " mode needs an n x 768 text matrix");
  }
  const Var projected = add_row(tape, matmul(tape, text_pooled, vars.proj_weight), vars.proj_bias);
  if (model.mode == Mode::kTextOnly) return projected;
  const Var parts[] = {shallow, projected};
  return concat(tape, parts, 1);
}

Var gat_layer_forward(Tape& tape, Var weight, Var att_src, Var att_dst, const EdgeIndex& edges,
                      Var h, Activation activation, std::vector<double>* attention) {
  if (tape.value(h).rows() != edges.node_count) {
    throw Error(ErrorCode::kShapeMismatch, "node matrix rows do not match the edge index");
  }
  const Var wh = matmul(tape, h, weight);
  const Var score_src = matmul(tape, wh, att_src);
  const Var score_dst = matmul(tape, wh, att_dst);
  const Var logits = leaky_relu(
      tape, add(tape, gather_rows(tape, score_src, edges.target),
                gather_rows(tape, score_dst, edges.source)));
  const Var alpha = segment_softmax(tape, logits, edges.target);
  if (attention != nullptr) {
    const auto a = tape.value(alpha).data();
    attention->assign(a.begin(), a.end());
  }
  const Var messages = scale_rows(tape, gather_rows(tape, wh, edges.source), alpha);
  const Var aggregated = segment_sum(tape, messages, edges.target, edges.node_count);
  return activate(tape, aggregated, activation);
}

Var model_forward(Tape& tape, const GatModel& model, const ModelVars& vars,
                  const EdgeIndex& edges, Var shallow, Var text_pooled,
                  const ForwardOptions& options, ForwardTrace* trace) {
  const Var input = project_and_fuse(tape, model, vars, shallow, text_pooled);
  const Var hidden = gat_layer_forward(tape, vars.w1, vars.att_src1, vars.att_dst1, edges, input,
                                       options.hidden, trace ? &trace->attention1 : nullptr);
  const Var logit = gat_layer_forward(tape, vars.w2, vars.att_src2, vars.att_dst2, edges, hidden,
                                      Activation::kIdentity, trace ? &trace->attention2 : nullptr);
  return activate(tape, logit, options.output);
}

std::vector<double> predict_proba(const GatModel& model, const EdgeIndex& edges,
                                  const FeatureSet& features, const ForwardOptions& options,
                                  ForwardTrace* trace) {
  Tape tape;
  const ModelVars vars = bind_model(tape, model, false);
  const Var shallow = tape.constant(features.shallow);
  const Var text = model.mode == Mode::kGraphOnly ? shallow : tape.constant(features.text_pooled);
  const Var out = model_forward(tape, model, vars, edges, shallow, text, options, trace);
  const auto p = tape.value(out).data();
  return {p.begin(), p.end()};
}

Tensor multimodal_features(const GatModel& model, const FeatureSet& features) {
  const std::size_t n = features.node_count();
  const Tensor projected = matmul(features.text_pooled, model.proj_weight);
  Tensor out(n, kMultimodalDim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kShallowDim; ++d) out(i, d) = features.shallow(i, d);
    for (std::size_t d = 0; d < kTextProjectionDim; ++d) {
      out(i, kShallowDim + d) = projected(i, d) + model.proj_bias[d];
    }
  }
  return out;
}

std::vector<Label> predict(std::span<const double> probabilities, double threshold) {
  std::vector<Label> labels;
  labels.reserve(probabilities.size());
  for (double p : probabilities) {
    labels.push_back(p > threshold ? Label::kMisinformation : Label::kFactual);
  }
  return labels;
}

}  // namespace modex
