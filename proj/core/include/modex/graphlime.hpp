#pragma once

// Local nonnegative HSIC-Lasso explanation of one node's prediction over the
// six fused features (replies, quotes, retweets, text_1, text_2, text_3).

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "modex/autodiff.hpp"
#include "modex/features.hpp"
#include "modex/gat.hpp"
#include "modex/graph.hpp"

namespace modex {

inline constexpr std::array<std::string_view, kMultimodalDim> kFeatureNames = {
    "replies", "quotes", "retweets", "text_1", "text_2", "text_3"};
inline constexpr std::array<std::string_view, 4> kGroupedNames = {"replies", "quotes", "retweets",
                                                                  "text"};

struct GraphLimeConfig {
  std::size_t hops = 2;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
  double rho = 0.1;
  std::size_t min_samples = 5;
  double tolerance = 1e-10;
  std::size_t max_sweeps = 10000;
};

struct ExplanationSample {
  std::vector<std::size_t> nodes;  // ascending node indices
  Tensor x;                        // n x 6, columns standardised
  std::vector<double> y;           // model probabilities, raw
};

// Column-wise (v - mean) / max(std, 1e-8) with population std.
void standardize_columns(Tensor& x);
std::vector<double> standardize(std::span<const double> values);

// Rows of `multimodal` and `probabilities` for every node within `hops`.
// Throws NeighborhoodTooSmall(n, min_samples).
ExplanationSample collect_neighborhood(const Tensor& multimodal,
                                       std::span<const double> probabilities,
                                       const InteractionGraph& graph, std::size_t node,
                                       std::size_t hops, std::size_t min_samples);
ExplanationSample collect_neighborhood(const GatModel& model, const InteractionGraph& graph,
                                       const FeatureSet& features, std::size_t node,
                                       std::size_t hops = 2, std::size_t min_samples = 5);

// K[j,k] = exp(-(x_j - x_k)^2 / (2 sigma^2)). Throws NonpositiveSigma.
Tensor gaussian_kernel_matrix(std::span<const double> column, double sigma);

struct CenteredKernel {
  Tensor k;
  bool constant = false;  // centred kernel had Frobenius norm < 1e-12 and was zeroed
};

// HKH / ||HKH||_F with H = I - 11^T / n.
CenteredKernel center_normalize(const Tensor& k);

struct LassoResult {
  std::vector<double> beta;
  bool converged = false;
  std::size_t sweeps = 0;
  std::vector<double> objective;  // after each sweep
};

// 0.5 * ||vec(L) - sum_d beta_d vec(K_d)||^2 + rho * ||beta||_1
double hsic_lasso_objective(std::span<const Tensor> feature_kernels, const Tensor& output_kernel,
                            std::span<const double> beta, double rho);

// Cyclic coordinate descent with the nonnegative soft-threshold update
// beta_d <- max(0, (c_d - rho) / a_d); stops when the largest coordinate change
// is below `tolerance` or after `max_sweeps` sweeps (converged = false).
LassoResult hsic_lasso_solve(std::span<const Tensor> feature_kernels, const Tensor& output_kernel,
                             double rho, double tolerance = 1e-10, std::size_t max_sweeps = 10000);

struct FeatureImportance {
  std::array<double, kMultimodalDim> beta{};
  std::array<double, 4> grouped{};  // replies, quotes, retweets, text (= beta_3 + beta_4 + beta_5)
  std::vector<std::string> ranking;  // grouped names, most important first
  std::vector<std::string> flags;
  std::size_t hops = 0;
  std::size_t sample_size = 0;
};

// Groups the text betas and ranks the four grouped scores (ties keep the
// replies, quotes, retweets, text order).
FeatureImportance group_importance(std::span<const double> beta);

FeatureImportance explain_sample(const ExplanationSample& sample, const GraphLimeConfig& config);

// collect_neighborhood -> per-feature kernels -> output kernel -> centring ->
// HSIC Lasso -> grouping. Throws NeighborhoodTooSmall.
FeatureImportance explain_node(const GatModel& model, const InteractionGraph& graph,
                               const FeatureSet& features, std::size_t node,
                               const GraphLimeConfig& config = {});

// Retries explain_node with hops + 1 until the neighbourhood is large enough or
// stops growing; rethrows NeighborhoodTooSmall in the latter case.
FeatureImportance explain_node_expanding(const GatModel& model, const InteractionGraph& graph,
                                         const FeatureSet& features, std::size_t node,
                                         const GraphLimeConfig& config = {});

}  // namespace modex
