#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "modex/autodiff.hpp"
#include "modex/features.hpp"
#include "modex/graph.hpp"

namespace modex {

inline constexpr std::size_t kTextProjectionDim = 3;
inline constexpr std::size_t kHiddenDim = 16;
inline constexpr std::size_t kMultimodalDim = kShallowDim + kTextProjectionDim;

enum class Mode : std::uint8_t { kGraphOnly, kTextOnly, kMultimodal };

std::string_view to_string(Mode mode);
// Accepts "GraphOnly"/"graph", "TextOnly"/"text", "Multimodal"/"multi".
std::optional<Mode> parse_mode(std::string_view text);
std::size_t input_dim(Mode mode);

struct GatLayerParams {
  Tensor weight;   // in x out
  Tensor att_src;  // out x 1, scores the aggregating node
  Tensor att_dst;  // out x 1, scores the neighbour

  bool operator==(const GatLayerParams&) const = default;
};

struct GatModel {
  Mode mode = Mode::kMultimodal;
  Tensor proj_weight;  // 768 x 3
  Tensor proj_bias;    // 1 x 3
  GatLayerParams layer1;
  GatLayerParams layer2;

  bool operator==(const GatModel&) const = default;

  // Fixed order shared by the optimiser and the checkpoint format.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
};

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))) and zero bias,
// fully determined by `seed`.
GatModel init_model(Mode mode, std::uint64_t seed);

enum class Activation { kIdentity, kElu, kSigmoid };

struct ForwardOptions {
  Activation hidden = Activation::kElu;
  Activation output = Activation::kSigmoid;
};

// Edges of an InteractionGraph ordered by (target, source) so that every
// target's neighbourhood is one contiguous softmax segment.
struct EdgeIndex {
  std::size_t node_count = 0;
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

// Throws MissingSelfLoop(node) if some node lacks its self-loop.
EdgeIndex make_edge_index(const InteractionGraph& graph);

// Tape handles for every model parameter.
struct ModelVars {
  Var proj_weight, proj_bias;
  Var w1, att_src1, att_dst1;
  Var w2, att_src2, att_dst2;

  std::vector<Var> all() const {
    return {proj_weight, proj_bias, w1, att_src1, att_dst1, w2, att_src2, att_dst2};
  }
};

// Records the parameters as leaves (trainable) or constants (frozen).
ModelVars bind_model(Tape& tape, const GatModel& model, bool trainable);

// Mode-dependent layer-1 input: [shallow | text * W + b], shallow only, or
// projected text only. Throws ModeFeatureMismatch.
Var project_and_fuse(Tape& tape, const GatModel& model, const ModelVars& vars, Var shallow,
                     Var text_pooled);

// h'_i = act(sum_j alpha_ij W h_j) with
// alpha_ij = softmax_j(LeakyReLU(att_src . W h_i + att_dst . W h_j)) over j in N(i).
// When `attention` is given it receives alpha in EdgeIndex order.
Var gat_layer_forward(Tape& tape, Var weight, Var att_src, Var att_dst, const EdgeIndex& edges,
                      Var h, Activation activation, std::vector<double>* attention = nullptr);

struct ForwardTrace {
  std::vector<double> attention1;
  std::vector<double> attention2;
};

// Per-node probability of Misinformation (n x 1) recorded on `tape`.
// `text_pooled` may be any Var, e.g. one with a row replaced for attribution.
Var model_forward(Tape& tape, const GatModel& model, const ModelVars& vars,
                  const EdgeIndex& edges, Var shallow, Var text_pooled,
                  const ForwardOptions& options = {}, ForwardTrace* trace = nullptr);

// Convenience wrapper: frozen forward pass returning one probability per node.
std::vector<double> predict_proba(const GatModel& model, const EdgeIndex& edges,
                                  const FeatureSet& features, const ForwardOptions& options = {},
                                  ForwardTrace* trace = nullptr);

// n x 6 [shallow | projected text] matrix under the model's frozen projection.
Tensor multimodal_features(const GatModel& model, const FeatureSet& features);

// p > threshold -> Misinformation, otherwise Factual.
std::vector<Label> predict(std::span<const double> probabilities, double threshold = 0.5);

// Versioned container: "MMCK1" | u8 version | u8 mode | u32 tensor count |
// per tensor (u16 name_len, name, u32 rows, u32 cols, rows*cols f64).
void save_checkpoint(const std::filesystem::path& path, const GatModel& model);
void save_checkpoint(std::ostream& out, const GatModel& model);
GatModel load_checkpoint(const std::filesystem::path& path);
GatModel load_checkpoint(std::istream& in);

}  // namespace modex
