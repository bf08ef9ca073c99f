#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modex/features.hpp"
#include "modex/gat.hpp"
#include "modex/graph.hpp"

namespace modex {

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t epochs = 800;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  Mode mode = Mode::kMultimodal;
};

// Throws InvalidArgument for a non-positive learning rate or zero epochs.
void validate(const TrainConfig& config);

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

AdamState make_adam_state(std::span<const Tensor* const> params);

// One bias-corrected Adam update at step t >= 1. An empty gradient tensor is
// treated as all zeros. Throws ShapeMismatch.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               std::size_t t, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_f1;
};

struct TrainResult {
  GatModel model;
  TrainHistory history;
};

// Full-batch training for exactly config.epochs Adam steps on the BCE of
// train-split labeled nodes (target 1 = Misinformation). Throws EmptyTrainSplit.
TrainResult train(const InteractionGraph& graph, const FeatureSet& features,
                  const TrainConfig& config);

struct F1Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
};

// Binary scores for `positive` plus the mean of both per-class F1 values.
// Empty denominators yield 0. Throws EmptyInput / LengthMismatch.
F1Scores f1_score(std::span<const Label> predictions, std::span<const Label> labels,
                  Label positive = Label::kMisinformation);

// Scores of `model` on the labeled nodes of one split.
F1Scores evaluate_split(const GatModel& model, const InteractionGraph& graph,
                        const FeatureSet& features, Split split);

struct ModeResult {
  Mode mode = Mode::kMultimodal;
  std::vector<std::uint64_t> seeds;
  std::vector<double> f1;
  std::vector<double> macro_f1;
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation, 0 when n == 1
  bool single_run = false;
};

struct RunReport {
  std::vector<ModeResult> modes;
};

double sample_std(std::span<const double> values);

// Aggregates per-seed scores into mean and sample std.
ModeResult summarize(Mode mode, std::vector<std::uint64_t> seeds, std::vector<double> f1,
                     std::vector<double> macro_f1);

// Trains one model per (mode, seed) and scores its test split.
RunReport run_ablation(const InteractionGraph& graph, const FeatureSet& features,
                       std::span<const Mode> modes, std::span<const std::uint64_t> seeds,
                       const TrainConfig& base);

// {"<Mode>": {"seeds": [...], "f1": [...], "mean": x, "std": x,
//             "macro_f1": [...], "n": k}}
std::string run_report_json(const RunReport& report);
RunReport parse_run_report_json(const std::string& text);
// Aligned two-column table: input representation and "mean ± std".
std::string format_run_report_table(const RunReport& report);
std::string format_mean_std(double mean, double std);
// Row label for one input representation, e.g. "Multimodal features".
std::string mode_label(Mode mode);

std::string history_json(const TrainHistory& history);

}  // namespace modex
