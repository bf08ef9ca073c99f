#pragma once

// Small fixtures and independent reference implementations shared by the
// unit tests and the acceptance driver.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "modex/autodiff.hpp"
#include "modex/dataset.hpp"
#include "modex/features.hpp"
#include "modex/gat.hpp"
#include "modex/graph.hpp"
#include "modex/random.hpp"
#include "modex/synth.hpp"

namespace modex::testkit {

inline Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("modex_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random weights that make a scalar out of any op output, so every output
// entry contributes a distinct gradient.
inline Var weighted_sum(Tape& tape, Var y, Rng& rng) {
  const Tensor& v = tape.value(y);
  return sum(tape, mul(tape, y, tape.constant(random_tensor(v.rows(), v.cols(), rng))));
}

struct OpCase {
  const char* name;
  std::size_t rows, cols;
  std::function<Var(Tape&, Var, Rng&)> op;
};

inline std::vector<OpCase> op_cases() {
  static const std::vector<std::size_t> segs = {0, 0, 1, 1, 1, 3};
  return {
      {"matmul_left", 4, 5, [](Tape& t, Var x, Rng& r) { return matmul(t, x, t.constant(random_tensor(5, 3, r))); }},
      {"matmul_right", 5, 3, [](Tape& t, Var x, Rng& r) { return matmul(t, t.constant(random_tensor(4, 5, r)), x); }},
      {"add", 3, 4, [](Tape& t, Var x, Rng& r) { return add(t, x, t.constant(random_tensor(3, 4, r))); }},
      {"add_row_matrix", 3, 4, [](Tape& t, Var x, Rng& r) { return add_row(t, x, t.constant(random_tensor(1, 4, r))); }},
      {"add_row_bias", 1, 4, [](Tape& t, Var x, Rng& r) { return add_row(t, t.constant(random_tensor(3, 4, r)), x); }},
      {"mul", 3, 4, [](Tape& t, Var x, Rng& r) { return mul(t, x, t.constant(random_tensor(3, 4, r))); }},
      {"mul_self", 3, 4, [](Tape& t, Var x, Rng&) { return mul(t, x, x); }},
      {"scale_rows_m", 4, 3, [](Tape& t, Var x, Rng& r) { return scale_rows(t, x, t.constant(random_tensor(4, 1, r))); }},
      {"scale_rows_v", 4, 1, [](Tape& t, Var x, Rng& r) { return scale_rows(t, t.constant(random_tensor(4, 3, r)), x); }},
      {"leaky_relu", 4, 4, [](Tape& t, Var x, Rng&) { return leaky_relu(t, x); }},
      {"elu", 4, 4, [](Tape& t, Var x, Rng&) { return elu(t, x); }},
      {"sigmoid", 4, 4, [](Tape& t, Var x, Rng&) { return sigmoid(t, x); }},
      {"concat_cols", 3, 3, [](Tape& t, Var x, Rng& r) {
         const Var parts[] = {x, t.constant(random_tensor(3, 3, r)), x};
         return concat(t, parts, 1);
       }},
      {"concat_rows", 2, 3, [](Tape& t, Var x, Rng& r) {
         const Var parts[] = {t.constant(random_tensor(1, 3, r)), x};
         return concat(t, parts, 0);
       }},
      {"gather_rows", 4, 3, [](Tape& t, Var x, Rng&) {
         const std::size_t rows[] = {3, 0, 0, 2};
         return gather_rows(t, x, rows);
       }},
      {"segment_sum", 6, 2, [](Tape& t, Var x, Rng&) { return segment_sum(t, x, segs, 4); }},
      {"segment_softmax", 6, 1, [](Tape& t, Var x, Rng&) { return segment_softmax(t, x, segs); }},
      {"mean_rows", 5, 4, [](Tape& t, Var x, Rng&) { return mean_rows(t, x); }},
      {"replace_row_base", 4, 3, [](Tape& t, Var x, Rng& r) { return replace_row(t, x, 2, t.constant(random_tensor(1, 3, r))); }},
      {"replace_row_row", 1, 3, [](Tape& t, Var x, Rng& r) { return replace_row(t, t.constant(random_tensor(4, 3, r)), 1, x); }},
      {"pick", 3, 3, [](Tape& t, Var x, Rng&) { return pick(t, x, 1, 2); }},
      {"sum", 3, 3, [](Tape& t, Var x, Rng&) { return sum(t, x); }},
  };
}

// Plain BFS over the undirected version of the interaction edges.
inline std::vector<std::size_t> bfs_oracle(std::size_t n,
                                           const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                           std::size_t start, std::size_t k) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> depth(n, -1);
  std::deque<std::size_t> queue{start};
  depth[start] = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (static_cast<std::size_t>(depth[u]) == k) continue;
    for (std::size_t v : adj[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (depth[i] >= 0) out.push_back(i);
  }
  return out;
}

// Random interaction graph over `n` tweets: each node gets a self-loop and
// each unordered pair an edge in both directions with probability `p`.
inline InteractionGraph random_interaction_graph(std::size_t n, double p, Rng& rng) {
  InteractionGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.node_ids.push_back("n" + std::to_string(i));
    g.node_kinds.push_back(NodeKind::kTweet);
    g.labels.push_back(std::nullopt);
    g.splits.push_back(Split::kUnlabeled);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) {
        g.edges.push_back({i, j, EdgeOrigin::kReplyTo});
        g.edges.push_back({j, i, EdgeOrigin::kReplyTo});
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) g.edges.push_back({i, i, EdgeOrigin::kSelfLoop});
  return g;
}

// Random feature set with token matrices for every node.
inline FeatureSet random_features(std::size_t n, Rng& rng, std::size_t tokens = 4,
                                  double text_scale = 0.05) {
  FeatureSet f;
  f.shallow = random_tensor(n, kShallowDim, rng);
  f.text_pooled = Tensor(n, kEmbeddingDim);
  for (std::size_t i = 0; i < n; ++i) {
    TokenMatrix m;
    m.vectors = random_tensor(tokens, kEmbeddingDim, rng, text_scale);
    for (std::size_t t = 0; t < tokens; ++t) m.texts.push_back("w" + std::to_string(t));
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
      double s = 0.0;
      for (std::size_t t = 0; t < tokens; ++t) s += m.vectors(t, d);
      f.text_pooled(i, d) = s / static_cast<double>(tokens);
    }
    f.text_tokens.push_back(std::move(m));
  }
  return f;
}

// Straight-line dense reimplementation of one attention layer: materialises
// the full n x n attention matrix from an adjacency matrix.
inline Tensor dense_gat_layer(const Tensor& h, const GatLayerParams& p,
                              const std::vector<std::vector<bool>>& adj, bool elu_act,
                              Tensor* alpha_out = nullptr) {
  const std::size_t n = h.rows();
  const Tensor wh = matmul(h, p.weight);
  const std::size_t out = wh.cols();
  std::vector<double> s(n, 0.0), d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < out; ++c) {
      s[i] += p.att_src(c, 0) * wh(i, c);
      d[i] += p.att_dst(c, 0) * wh(i, c);
    }
  }
  Tensor alpha(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double peak = -1e300;
    for (std::size_t j = 0; j < n; ++j) {
      if (!adj[i][j]) continue;
      double e = s[i] + d[j];
      e = e > 0 ? e : 0.2 * e;
      alpha(i, j) = e;
      peak = std::max(peak, e);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!adj[i][j]) continue;
      alpha(i, j) = std::exp(alpha(i, j) - peak);
      z += alpha(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (adj[i][j]) alpha(i, j) /= z;
    }
  }
  Tensor y = matmul(alpha, wh);
  if (elu_act) {
    for (double& v : y.data()) v = v > 0 ? v : std::expm1(v);
  }
  if (alpha_out) *alpha_out = alpha;
  return y;
}

inline std::vector<std::vector<bool>> adjacency(const InteractionGraph& g) {
  std::vector<std::vector<bool>> adj(g.node_count(), std::vector<bool>(g.node_count(), false));
  for (const auto& e : g.edges) adj[e.target][e.source] = true;
  return adj;
}

// Full model forward without the tape.
inline std::vector<double> dense_forward(const GatModel& model, const InteractionGraph& g,
                                         const FeatureSet& f) {
  const std::size_t n = g.node_count();
  Tensor proj = matmul(f.text_pooled, model.proj_weight);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < kTextProjectionDim; ++c) proj(i, c) += model.proj_bias(0, c);
  }
  Tensor x;
  if (model.mode == Mode::kGraphOnly) {
    x = f.shallow;
  } else if (model.mode == Mode::kTextOnly) {
    x = proj;
  } else {
    x = Tensor(n, kMultimodalDim);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        x(i, c) = f.shallow(i, c);
        x(i, 3 + c) = proj(i, c);
      }
    }
  }
  const auto adj = adjacency(g);
  const Tensor h1 = dense_gat_layer(x, model.layer1, adj, true);
  const Tensor h2 = dense_gat_layer(h1, model.layer2, adj, false);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = 1.0 / (1.0 + std::exp(-h2(i, 0)));
  return p;
}

// 0.5 * ||l - sum_d beta_d k_d||^2 + rho * sum beta, minimised over beta >= 0 by
// accelerated projected gradient descent (FISTA) with step 1 / L.
inline std::vector<double> pgd_lasso_oracle(const std::vector<Tensor>& kernels, const Tensor& l,
                                            double rho, std::size_t iterations = 200000) {
  const std::size_t d = kernels.size();
  std::vector<std::vector<double>> gram(d, std::vector<double>(d, 0.0));
  std::vector<double> c(d, 0.0);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t i = 0; i < l.size(); ++i) c[a] += kernels[a][i] * l[i];
    for (std::size_t b = 0; b < d; ++b) {
      for (std::size_t i = 0; i < l.size(); ++i) gram[a][b] += kernels[a][i] * kernels[b][i];
    }
  }
  // Lipschitz bound: Gershgorin on the Gram matrix.
  double lip = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    double row = 0.0;
    for (std::size_t b = 0; b < d; ++b) row += std::abs(gram[a][b]);
    lip = std::max(lip, row);
  }
  if (lip <= 0.0) return std::vector<double>(d, 0.0);
  std::vector<double> beta(d, 0.0), y(d, 0.0), prev(d, 0.0);
  double t = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    prev = beta;
    for (std::size_t a = 0; a < d; ++a) {
      double g = -c[a] + rho;
      for (std::size_t b = 0; b < d; ++b) g += gram[a][b] * y[b];
      beta[a] = std::max(0.0, y[a] - g / lip);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double change = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      y[a] = beta[a] + ((t - 1.0) / t_next) * (beta[a] - prev[a]);
      change = std::max(change, std::abs(beta[a] - prev[a]));
    }
    t = t_next;
    if (change < 1e-15 && it > 100) break;
  }
  return beta;
}

// Small nonlinear model and graph used by the integrated-gradients checks.
struct IgFixture {
  InteractionGraph graph;
  EdgeIndex edges;
  FeatureSet features;
  GatModel model;
};

inline IgFixture ig_fixture(std::uint64_t seed, Mode mode = Mode::kMultimodal) {
  Rng rng(seed);
  IgFixture f;
  f.graph = random_interaction_graph(7, 0.4, rng);
  f.edges = make_edge_index(f.graph);
  f.features = random_features(7, rng, 5, 0.5);
  f.model = init_model(mode, seed);
  return f;
}

inline Dataset synth_dataset(const SynthSpec& spec) {
  SynthBundle bundle = synth_generate(spec);
  EmbeddingTable table;
  for (auto& r : bundle.embeddings) table.emplace(r.id, r);
  return build_dataset(std::move(bundle.graph), std::move(bundle.splits), table);
}

}  // namespace modex::testkit
