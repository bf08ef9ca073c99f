#include "modex/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "modex/error.hpp"

namespace modex {
namespace {

using nlohmann::json;

}  // namespace

std::string mode_label(Mode mode) {
  switch (mode) {
    case Mode::kGraphOnly: return "Graph-based features only";
    case Mode::kTextOnly: return "Text-based features only";
    case Mode::kMultimodal: return "Multimodal features";
  }
  return "?";
}

void validate(const TrainConfig& config) {
  if (!(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be > 0");
  }
  if (config.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
}

AdamState make_adam_state(std::span<const Tensor* const> params) {
  AdamState state;
  for (const Tensor* p : params) {
    state.m.emplace_back(p->rows(), p->cols());
    state.v.emplace_back(p->rows(), p->cols());
  }
  return state;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               std::size_t t, const TrainConfig& config) {
  if (t < 1) throw Error(ErrorCode::kInvalidArgument, "Adam step index starts at 1");
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "Adam: parameter, gradient and state counts differ");
  }
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    const Tensor& g = grads[k];
    if (!m.same_shape(p) || !v.same_shape(p) || (!g.empty() && !g.same_shape(p))) {
      throw Error(ErrorCode::kShapeMismatch, "Adam: state or gradient shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

F1Scores f1_score(std::span<const Label> predictions, std::span<const Label> labels,
                  Label positive) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "predictions and labels differ in length");
  }
  if (predictions.empty()) throw Error(ErrorCode::kEmptyInput, "f1_score on empty input");

  auto binary = [&](Label pos) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = predictions[i] == pos;
      const bool truth = labels[i] == pos;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    F1Scores s;
    s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
  };

  F1Scores out = binary(positive);
  const Label other = positive == Label::kMisinformation ? Label::kFactual : Label::kMisinformation;
  out.macro_f1 = 0.5 * (out.f1 + binary(other).f1);
  return out;
}

TrainResult train(const InteractionGraph& graph, const FeatureSet& features,
                  const TrainConfig& config) {
  validate(config);
  const std::size_t n = graph.node_count();
  if (features.node_count() != n) {
    throw Error(ErrorCode::kShapeMismatch, "feature rows do not match graph nodes");
  }
  std::vector<double> targets(n, 0.0);
  std::vector<double> mask(n, 0.0);
  std::vector<std::size_t> val_nodes;
  for (std::size_t i = 0; i < n; ++i) {
    if (!graph.labels[i]) continue;
    targets[i] = *graph.labels[i] == Label::kMisinformation ? 1.0 : 0.0;
    if (graph.splits[i] == Split::kTrain) mask[i] = 1.0;
    if (graph.splits[i] == Split::kVal) val_nodes.push_back(i);
  }
  if (std::count(mask.begin(), mask.end(), 1.0) == 0) {
    throw Error(ErrorCode::kEmptyTrainSplit, "no labeled nodes in the train split");
  }

  const EdgeIndex edges = make_edge_index(graph);
  TrainResult result{init_model(config.mode, config.seed), {}};
  auto params = result.model.parameters();
  AdamState state = make_adam_state(std::vector<const Tensor*>(params.begin(), params.end()));
  const bool uses_text = config.mode != Mode::kGraphOnly;

  std::vector<Label> val_pred(val_nodes.size());
  std::vector<Label> val_true(val_nodes.size());
  for (std::size_t k = 0; k < val_nodes.size(); ++k) val_true[k] = *graph.labels[val_nodes[k]];

  std::vector<Tensor> grads(params.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Tape tape;
    const ModelVars vars = bind_model(tape, result.model, true);
    const Var shallow = tape.constant(features.shallow);
    const Var text = uses_text ? tape.constant(features.text_pooled) : shallow;
    const Var prob = model_forward(tape, result.model, vars, edges, shallow, text);
    const Var loss = bce_loss(tape, prob, targets, mask);

    result.history.train_loss.push_back(tape.value(loss)[0]);
    if (val_nodes.empty()) {
      result.history.val_f1.push_back(0.0);
    } else {
      const Tensor& p = tape.value(prob);
      for (std::size_t k = 0; k < val_nodes.size(); ++k) {
        val_pred[k] = p[val_nodes[k]] > 0.5 ? Label::kMisinformation : Label::kFactual;
      }
      result.history.val_f1.push_back(f1_score(val_pred, val_true).f1);
    }

    const Gradients g = tape.backward(loss);
    const auto handles = vars.all();
    for (std::size_t k = 0; k < handles.size(); ++k) {
      grads[k] = g.has(handles[k]) ? g[handles[k]] : Tensor();
    }
    adam_step(params, grads, state, epoch, config);
  }
  return result;
}

F1Scores evaluate_split(const GatModel& model, const InteractionGraph& graph,
                        const FeatureSet& features, Split split) {
  const auto probs = predict_proba(model, make_edge_index(graph), features);
  std::vector<Label> pred;
  std::vector<Label> truth;
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (!graph.labels[i] || graph.splits[i] != split) continue;
    pred.push_back(probs[i] > 0.5 ? Label::kMisinformation : Label::kFactual);
    truth.push_back(*graph.labels[i]);
  }
  return f1_score(pred, truth);
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

ModeResult summarize(Mode mode, std::vector<std::uint64_t> seeds, std::vector<double> f1,
                     std::vector<double> macro_f1) {
  ModeResult r;
  r.mode = mode;
  r.seeds = std::move(seeds);
  r.f1 = std::move(f1);
  r.macro_f1 = std::move(macro_f1);
  double total = 0.0;
  for (double v : r.f1) total += v;
  r.mean = r.f1.empty() ? 0.0 : total / static_cast<double>(r.f1.size());
  r.std = sample_std(r.f1);
  r.single_run = r.f1.size() == 1;
  return r;
}

RunReport run_ablation(const InteractionGraph& graph, const FeatureSet& features,
                       std::span<const Mode> modes, std::span<const std::uint64_t> seeds,
                       const TrainConfig& base) {
  RunReport report;
  for (Mode mode : modes) {
    std::vector<double> f1;
    std::vector<double> macro;
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.mode = mode;
      config.seed = seed;
      const TrainResult trained = train(graph, features, config);
      const F1Scores scores = evaluate_split(trained.model, graph, features, Split::kTest);
      f1.push_back(scores.f1);
      macro.push_back(scores.macro_f1);
    }
    report.modes.push_back(
        summarize(mode, std::vector<std::uint64_t>(seeds.begin(), seeds.end()), f1, macro));
  }
  return report;
}

std::string run_report_json(const RunReport& report) {
  json out = json::object();
  for (const ModeResult& r : report.modes) {
    out[std::string(to_string(r.mode))] = {
        {"seeds", r.seeds}, {"f1", r.f1},         {"mean", r.mean},
        {"std", r.std},     {"macro_f1", r.macro_f1}, {"n", r.f1.size()}};
  }
  return out.dump(2) + "\n";
}

RunReport parse_run_report_json(const std::string& text) {
  RunReport report;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kReadFailure, std::string("run report is not valid JSON: ") + e.what());
  }
  // Keep the canonical mode order regardless of key order in the file.
  for (Mode mode : {Mode::kGraphOnly, Mode::kTextOnly, Mode::kMultimodal}) {
    const std::string key(to_string(mode));
    if (!doc.contains(key)) continue;
    const json& m = doc[key];
    try {
      ModeResult r;
      r.mode = mode;
      r.seeds = m.value("seeds", std::vector<std::uint64_t>{});
      r.f1 = m.at("f1").get<std::vector<double>>();
      r.macro_f1 = m.value("macro_f1", std::vector<double>{});
      r.mean = m.at("mean").get<double>();
      r.std = m.at("std").get<double>();
      r.single_run = r.f1.size() == 1;
      report.modes.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kReadFailure, "run report entry '" + key + "': " + e.what());
    }
  }
  return report;
}

std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", mean, std);
  return buf;
}

std::string format_run_report_table(const RunReport& report) {
  const std::string head = "GAT's input tweet representation";
  std::size_t width = head.size();
  for (const auto& r : report.modes) width = std::max(width, mode_label(r.mode).size());
  std::ostringstream out;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out << pad(head) << "  F1-score\n" << std::string(width + 2 + 17, '-') << '\n';
  for (const auto& r : report.modes) {
    out << pad(mode_label(r.mode)) << "  " << format_mean_std(r.mean, r.std);
    if (r.single_run) out << "  (n=1)";
    out << '\n';
  }
  return out.str();
}

std::string history_json(const TrainHistory& history) {
  return json{{"train_loss", history.train_loss}, {"val_f1", history.val_f1}}.dump(2) + "\n";
}

}  // namespace modex
