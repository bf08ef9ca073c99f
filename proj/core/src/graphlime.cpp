#include "modex/graphlime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "modex/error.hpp"

namespace modex {
namespace {

constexpr double kConstantKernelNorm = 1e-12;

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> standardize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double n = static_cast<double>(out.size());
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / n), kStdFloor);
  for (double& v : out) v = (v - mean) / sd;
  return out;
}

void standardize_columns(Tensor& x) {
  std::vector<double> column(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t r = 0; r < x.rows(); ++r) column[r] = x(r, c);
    const auto z = standardize(column);
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) = z[r];
  }
}

ExplanationSample collect_neighborhood(const Tensor& multimodal,
                                       std::span<const double> probabilities,
                                       const InteractionGraph& graph, std::size_t node,
                                       std::size_t hops, std::size_t min_samples) {
  if (multimodal.rows() != graph.node_count() || probabilities.size() != graph.node_count()) {
    throw Error(ErrorCode::kShapeMismatch, "features/probabilities do not match the graph");
  }
  ExplanationSample sample;
  sample.nodes = k_hop_neighborhood(graph, node, hops);
  const std::size_t n = sample.nodes.size();
  if (n < min_samples) {
    throw Error(ErrorCode::kNeighborhoodTooSmall, "NeighborhoodTooSmall(" + std::to_string(n) +
                                                      ", " + std::to_string(min_samples) + ")");
  }
  sample.x = Tensor(n, multimodal.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const auto src = multimodal.row(sample.nodes[r]);
    std::copy(src.begin(), src.end(), sample.x.row(r).begin());
    sample.y.push_back(probabilities[sample.nodes[r]]);
  }
  standardize_columns(sample.x);
  return sample;
}

ExplanationSample collect_neighborhood(const GatModel& model, const InteractionGraph& graph,
                                       const FeatureSet& features, std::size_t node,
                                       std::size_t hops, std::size_t min_samples) {
  const auto probs = predict_proba(model, make_edge_index(graph), features);
  return collect_neighborhood(multimodal_features(model, features), probs, graph, node, hops,
                              min_samples);
}

Tensor gaussian_kernel_matrix(std::span<const double> column, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::kNonpositiveSigma, "kernel bandwidth must be > 0");
  const std::size_t n = column.size();
  const double scale = 1.0 / (2.0 * sigma * sigma);
  Tensor k(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (std::size_t l = j + 1; l < n; ++l) {
      const double d = column[j] - column[l];
      const double v = std::exp(-d * d * scale);
      k(j, l) = v;
      k(l, j) = v;
    }
  }
  return k;
}

CenteredKernel center_normalize(const Tensor& k) {
  if (k.rows() != k.cols()) throw Error(ErrorCode::kShapeMismatch, "kernel must be square");
  const std::size_t n = k.rows();
  std::vector<double> row_mean(n, 0.0);
  std::vector<double> col_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      row_mean[i] += k(i, j);
      col_mean[j] += k(i, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    grand += row_mean[i];
    row_mean[i] /= static_cast<double>(n);
    col_mean[i] /= static_cast<double>(n);
  }
  grand /= static_cast<double>(n * n);

  CenteredKernel out{Tensor(n, n), false};
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = k(i, j) - row_mean[i] - col_mean[j] + grand;
      out.k(i, j) = v;
      norm += v * v;
    }
  }
  norm = std::sqrt(norm);
  if (norm < kConstantKernelNorm) {
    out.k = Tensor(n, n);
    out.constant = true;
    return out;
  }
  for (double& v : out.k.data()) v /= norm;
  return out;
}

double hsic_lasso_objective(std::span<const Tensor> feature_kernels, const Tensor& output_kernel,
                            std::span<const double> beta, double rho) {
  Tensor residual = output_kernel;
  double l1 = 0.0;
  for (std::size_t d = 0; d < feature_kernels.size(); ++d) {
    for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= beta[d] * feature_kernels[d][i];
    l1 += std::abs(beta[d]);
  }
  return 0.5 * dot(residual, residual) + rho * l1;
}

LassoResult hsic_lasso_solve(std::span<const Tensor> feature_kernels, const Tensor& output_kernel,
                             double rho, double tolerance, std::size_t max_sweeps) {
  if (rho < 0.0) throw Error(ErrorCode::kInvalidArgument, "rho must be >= 0");
  for (const Tensor& k : feature_kernels) {
    if (!k.same_shape(output_kernel)) {
      throw Error(ErrorCode::kShapeMismatch, "feature and output kernels differ in size");
    }
  }
  const std::size_t dims = feature_kernels.size();
  LassoResult result;
  result.beta.assign(dims, 0.0);
  std::vector<double> sq_norm(dims);
  for (std::size_t d = 0; d < dims; ++d) sq_norm[d] = dot(feature_kernels[d], feature_kernels[d]);

  Tensor residual = output_kernel;
  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const Tensor& kd = feature_kernels[d];
      const double old = result.beta[d];
      double updated = 0.0;
      if (sq_norm[d] > 0.0) {
        const double c = dot(kd, residual) + old * sq_norm[d];
        updated = std::max(0.0, (c - rho) / sq_norm[d]);
      }
      const double delta = old - updated;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < residual.size(); ++i) residual[i] += delta * kd[i];
        result.beta[d] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    double l1 = 0.0;
    for (double b : result.beta) l1 += b;
    result.objective.push_back(0.5 * dot(residual, residual) + rho * l1);
    result.sweeps = sweep;
    if (max_change < tolerance) {
      result.converged = true;
      break;
    }
  }
  return result;
}

FeatureImportance group_importance(std::span<const double> beta) {
  if (beta.size() != kMultimodalDim) {
    throw Error(ErrorCode::kLengthMismatch, "expected 6 feature weights");
  }
  FeatureImportance fi;
  std::copy(beta.begin(), beta.end(), fi.beta.begin());
  fi.grouped = {beta[0], beta[1], beta[2], beta[3] + beta[4] + beta[5]};
  std::array<std::size_t, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fi.grouped[a] > fi.grouped[b]; });
  for (std::size_t g : order) fi.ranking.emplace_back(kGroupedNames[g]);
  return fi;
}

FeatureImportance explain_sample(const ExplanationSample& sample, const GraphLimeConfig& config) {
  const std::size_t n = sample.nodes.size();
  std::vector<Tensor> kernels;
  std::vector<std::string> flags;
  std::vector<double> column(n);
  for (std::size_t d = 0; d < sample.x.cols(); ++d) {
    for (std::size_t r = 0; r < n; ++r) column[r] = sample.x(r, d);
    CenteredKernel ck = center_normalize(gaussian_kernel_matrix(column, config.sigma_x));
    if (ck.constant) flags.push_back("ConstantFeature:" + std::string(kFeatureNames[d]));
    kernels.push_back(std::move(ck.k));
  }
  const auto y = standardize(sample.y);
  CenteredKernel output = center_normalize(gaussian_kernel_matrix(y, config.sigma_y));
  if (output.constant) flags.push_back("ConstantFeature:output");

  const LassoResult fit =
      hsic_lasso_solve(kernels, output.k, config.rho, config.tolerance, config.max_sweeps);
  if (!fit.converged) flags.push_back("DidNotConverge");

  FeatureImportance fi = group_importance(fit.beta);
  fi.flags = std::move(flags);
  fi.sample_size = n;
  return fi;
}

FeatureImportance explain_node(const GatModel& model, const InteractionGraph& graph,
                               const FeatureSet& features, std::size_t node,
                               const GraphLimeConfig& config) {
  const ExplanationSample sample =
      collect_neighborhood(model, graph, features, node, config.hops, config.min_samples);
  FeatureImportance fi = explain_sample(sample, config);
  fi.hops = config.hops;
  return fi;
}

FeatureImportance explain_node_expanding(const GatModel& model, const InteractionGraph& graph,
                                         const FeatureSet& features, std::size_t node,
                                         const GraphLimeConfig& config) {
  const auto probs = predict_proba(model, make_edge_index(graph), features);
  const Tensor fused = multimodal_features(model, features);
  GraphLimeConfig attempt = config;
  std::size_t previous = 0;
  while (true) {
    try {
      const ExplanationSample sample =
          collect_neighborhood(fused, probs, graph, node, attempt.hops, attempt.min_samples);
      FeatureImportance fi = explain_sample(sample, attempt);
      fi.hops = attempt.hops;
      if (attempt.hops != config.hops) fi.flags.push_back("HopsExpanded");
      return fi;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNeighborhoodTooSmall) throw;
      const std::size_t reached = k_hop_neighborhood(graph, node, attempt.hops).size();
      if (attempt.hops > config.hops && reached == previous) throw;
      previous = reached;
      ++attempt.hops;
    }
  }
}

}  // namespace modex
