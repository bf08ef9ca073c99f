#include <benchmark/benchmark.h>

#include "modex/autodiff.hpp"
#include "modex/gat.hpp"
#include "modex/graphlime.hpp"
#include "modex/random.hpp"

using namespace modex;

namespace {

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

InteractionGraph ring_graph(std::size_t n) {
  InteractionGraph g;
  for (std::size_t i = 0; i < n; ++i) {
    g.node_ids.push_back("n" + std::to_string(i));
    g.node_kinds.push_back(NodeKind::kTweet);
    g.labels.push_back(std::nullopt);
    g.splits.push_back(Split::kUnlabeled);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t step : {1u, 7u}) {
      const std::size_t j = (i + step) % n;
      if (j == i) continue;
      g.edges.push_back({i, j, EdgeOrigin::kReplyTo});
      g.edges.push_back({j, i, EdgeOrigin::kReplyTo});
    }
    g.edges.push_back({i, i, EdgeOrigin::kSelfLoop});
  }
  return g;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(0);
  const Tensor a = random_tensor(n, 768, rng);
  const Tensor b = random_tensor(768, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(BM_Matmul)->Arg(100)->Arg(500);

static void BM_GatForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const InteractionGraph g = ring_graph(n);
  const EdgeIndex edges = make_edge_index(g);
  FeatureSet f;
  f.shallow = random_tensor(n, kShallowDim, rng);
  f.text_pooled = random_tensor(n, kEmbeddingDim, rng);
  const GatModel m = init_model(Mode::kMultimodal, 0);
  for (auto _ : state) benchmark::DoNotOptimize(predict_proba(m, edges, f));
}
BENCHMARK(BM_GatForward)->Arg(100)->Arg(500);

static void BM_TrainingStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const InteractionGraph g = ring_graph(n);
  const EdgeIndex edges = make_edge_index(g);
  const Tensor shallow = random_tensor(n, kShallowDim, rng);
  const Tensor text = random_tensor(n, kEmbeddingDim, rng);
  std::vector<double> targets(n), mask(n, 1.0);
  for (auto& t : targets) t = rng.bernoulli(0.5) ? 1.0 : 0.0;
  const GatModel m = init_model(Mode::kMultimodal, 0);
  for (auto _ : state) {
    Tape tape;
    const ModelVars vars = bind_model(tape, m, true);
    const Var p = model_forward(tape, m, vars, edges, tape.constant(shallow), tape.constant(text));
    benchmark::DoNotOptimize(tape.backward(bce_loss(tape, p, targets, mask)));
  }
}
BENCHMARK(BM_TrainingStep)->Arg(100)->Arg(500);

static void BM_HsicLasso(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> col(n);
  std::vector<Tensor> kernels;
  for (std::size_t d = 0; d < kMultimodalDim; ++d) {
    for (double& v : col) v = rng.normal();
    kernels.push_back(center_normalize(gaussian_kernel_matrix(standardize(col), 1.0)).k);
  }
  for (double& v : col) v = rng.normal();
  const Tensor out = center_normalize(gaussian_kernel_matrix(standardize(col), 1.0)).k;
  for (auto _ : state) benchmark::DoNotOptimize(hsic_lasso_solve(kernels, out, 0.1));
}
BENCHMARK(BM_HsicLasso)->Arg(10)->Arg(50);

// The packaged benchmark_main archive is built with a different LTO version.
BENCHMARK_MAIN();
