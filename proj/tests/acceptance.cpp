// Acceptance driver: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "modex/attribution.hpp"
#include "modex/error.hpp"
#include "modex/graphlime.hpp"
#include "modex/trainer.hpp"
#include "test_support.hpp"

using namespace modex;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %s  (%s)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

// --- ablation ordering -------------------------------------------------------

void ablation_ordering() {
  const auto start = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.nodes = 400;
  spec.placement = SignalPlacement::kBoth;
  const Dataset d = testkit::synth_dataset(spec);
  const Mode modes[] = {Mode::kGraphOnly, Mode::kTextOnly, Mode::kMultimodal};
  const std::uint64_t seeds[] = {0, 1, 2, 3, 4};
  const RunReport r = run_ablation(d.interaction, d.features, modes, seeds, TrainConfig{});
  const double g = r.modes[0].mean, t = r.modes[1].mean, m = r.modes[2].mean;
  const double elapsed = seconds_since(start);
  const bool ok = m >= g + 0.01 && m >= t + 0.01 && std::min({g, t, m}) >= 0.75 && elapsed <= 600;
  report("ablation ordering", ok,
         fmt("graph %.4f, text %.4f, multimodal %.4f, %.0f s", g, t, m, elapsed));
}

// --- gradient correctness ----------------------------------------------------

void gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& c : testkit::op_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng setup(seed * 101 + 7);
      const Tensor x = testkit::random_tensor(c.rows, c.cols, setup);
      const std::uint64_t op_seed = seed * 31 + 1;
      worst = std::max(worst, grad_check(
                                  [&](Tape& t, Var v) {
                                    Rng rng(op_seed);
                                    return testkit::weighted_sum(t, c.op(t, v, rng), rng);
                                  },
                                  x));
    }
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    Tensor p(8, 1);
    std::vector<double> tg(8), mask(8, 1.0);
    for (std::size_t i = 0; i < 8; ++i) {
      p[i] = rng.uniform(0.05, 0.95);
      tg[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    worst = std::max(worst, grad_check([&](Tape& t, Var v) { return bce_loss(t, v, tg, mask); }, p));
  }
  // Full model forward + loss, one parameter tensor at a time.
  for (Mode mode : {Mode::kGraphOnly, Mode::kTextOnly, Mode::kMultimodal}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed);
      InteractionGraph g = testkit::random_interaction_graph(6, 0.4, rng);
      FeatureSet f = testkit::random_features(6, rng, 2);
      GatModel m = init_model(mode, seed);
      for (Tensor* prm : m.parameters()) {
        for (double& v : prm->data()) v = 0.7 * rng.normal();
      }
      for (double& v : m.proj_weight.data()) v *= 0.5;
      const EdgeIndex edges = make_edge_index(g);
      std::vector<double> targets(6), mask(6, 1.0);
      for (auto& t : targets) t = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const auto params = m.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (mode == Mode::kGraphOnly && k < 2) continue;
        worst = std::max(worst, grad_check(
                                    [&](Tape& t, Var x) {
                                      ModelVars vars = bind_model(t, m, false);
                                      Var* slots[] = {&vars.proj_weight, &vars.proj_bias, &vars.w1,
                                                      &vars.att_src1,    &vars.att_dst1,  &vars.w2,
                                                      &vars.att_src2,    &vars.att_dst2};
                                      *slots[k] = x;
                                      const Var prob = model_forward(t, m, vars, edges,
                                                                     t.constant(f.shallow),
                                                                     t.constant(f.text_pooled));
                                      return bce_loss(t, prob, targets, mask);
                                    },
                                    *params[k]));
      }
    }
  }
  const double elapsed = seconds_since(start);
  report("gradient correctness", worst < 1e-5 && elapsed <= 60,
         fmt("max relative error %.2e, %.1f s", worst, elapsed));
}

// --- attention normalisation -------------------------------------------------

void attention_normalization() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(20);
    InteractionGraph g = testkit::random_interaction_graph(n, rng.uniform(0.0, 0.6), rng);
    FeatureSet f = testkit::random_features(n, rng, 2);
    const GatModel m = init_model(Mode::kMultimodal, seed);
    const EdgeIndex edges = make_edge_index(g);
    ForwardTrace trace;
    predict_proba(m, edges, f, {}, &trace);
    for (const auto* att : {&trace.attention1, &trace.attention2}) {
      std::vector<double> sums(n, 0.0);
      for (std::size_t e = 0; e < att->size(); ++e) sums[edges.target[e]] += (*att)[e];
      for (double s : sums) worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  report("attention normalization", worst <= 1e-10, fmt("max |sum - 1| %.2e over 50 graphs", worst));
}

// --- HSIC Lasso oracle -------------------------------------------------------

void lasso_oracle() {
  const auto start = std::chrono::steady_clock::now();
  double worst_gap = 0.0, min_beta = 0.0, worst_rise = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n = 5 + rng.below(6);
    std::vector<Tensor> kernels;
    std::vector<double> col(n);
    for (std::size_t d = 0; d < 6; ++d) {
      for (double& v : col) v = rng.normal();
      kernels.push_back(center_normalize(gaussian_kernel_matrix(standardize(col), 1.0)).k);
    }
    for (double& v : col) v = rng.normal();
    const Tensor out = center_normalize(gaussian_kernel_matrix(standardize(col), 1.0)).k;
    const LassoResult r = hsic_lasso_solve(kernels, out, 0.1);
    const auto oracle = testkit::pgd_lasso_oracle(kernels, out, 0.1);
    worst_gap = std::max(worst_gap, std::abs(hsic_lasso_objective(kernels, out, r.beta, 0.1) -
                                             hsic_lasso_objective(kernels, out, oracle, 0.1)));
    for (double b : r.beta) min_beta = std::min(min_beta, b);
    for (std::size_t s = 1; s < r.objective.size(); ++s) {
      worst_rise = std::max(worst_rise, r.objective[s] - r.objective[s - 1]);
    }
  }
  const double elapsed = seconds_since(start);
  // Rises below 1e-13 are rounding in the running residual, not ascent.
  const bool ok = worst_gap <= 1e-8 && min_beta >= 0.0 && worst_rise <= 1e-13 && elapsed <= 60;
  report("HSIC-Lasso oracle equivalence", ok,
         fmt("objective gap %.2e, min beta %.1e, max sweep rise %.1e, %.1f s", worst_gap, min_beta,
             worst_rise, elapsed));
}

// --- GraphLime planted-signal recovery ---------------------------------------

// Grouped importances summed over the first ten test tweets of a bundle whose
// signal sits in one modality, for a Multimodal model trained on it.
std::string aggregate_top_feature(SignalPlacement placement, std::uint64_t seed) {
  SynthSpec spec;
  spec.nodes = 400;
  spec.seed = seed;
  spec.placement = placement;
  const Dataset d = testkit::synth_dataset(spec);
  TrainConfig config;
  config.seed = seed;
  const GatModel m = train(d.interaction, d.features, config).model;
  std::array<double, 4> total{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < d.interaction.node_count() && used < 10; ++i) {
    if (!d.interaction.labels[i] || d.interaction.splits[i] != Split::kTest) continue;
    try {
      const FeatureImportance fi = explain_node_expanding(m, d.interaction, d.features, i);
      for (std::size_t g = 0; g < 4; ++g) total[g] += fi.grouped[g];
      ++used;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNeighborhoodTooSmall) throw;
    }
  }
  return group_importance(std::vector<double>{total[0], total[1], total[2], total[3], 0.0, 0.0})
      .ranking.front();
}

void graphlime_recovery() {
  int shallow_first = 0, text_first = 0;
  std::string graph_tops, text_tops;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::string g = aggregate_top_feature(SignalPlacement::kGraphOnly, seed);
    const std::string t = aggregate_top_feature(SignalPlacement::kTextOnly, seed);
    shallow_first += g != "text";
    text_first += t == "text";
    graph_tops += (seed ? "," : "") + g;
    text_tops += (seed ? "," : "") + t;
  }
  report("GraphLime planted-signal recovery", shallow_first >= 4 && text_first >= 4,
         "graph-planted top: " + graph_tops + "; text-planted top: " + text_tops);
}

// --- integrated gradients ----------------------------------------------------

void ig_diagnostics() {
  double linear_gap = 0.0;
  {
    testkit::IgFixture f = testkit::ig_fixture(2);
    for (GatLayerParams* layer : {&f.model.layer1, &f.model.layer2}) {
      std::fill(layer->att_src.data().begin(), layer->att_src.data().end(), 0.0);
      std::fill(layer->att_dst.data().begin(), layer->att_dst.data().end(), 0.0);
    }
    const ForwardOptions linear{Activation::kIdentity, Activation::kIdentity};
    for (std::size_t steps : {1u, 2u, 7u, 50u}) {
      const auto ig = integrated_gradients(f.model, f.edges, f.features, 4, steps, linear,
                                           Label::kMisinformation);
      linear_gap = std::max(linear_gap, completeness_gap(ig));
    }
  }
  const testkit::IgFixture f = testkit::ig_fixture(0);
  auto gap = [&](std::size_t m) {
    return completeness_gap(integrated_gradients(f.model, f.edges, f.features, 3, m));
  };
  bool monotone = true;
  for (std::size_t m : {8u, 64u, 256u}) monotone = monotone && gap(2 * m) <= gap(m) + 1e-9;
  const auto ig = integrated_gradients(f.model, f.edges, f.features, 3, 512);
  const double delta = std::abs(ig.output_input - ig.output_baseline);
  const double g512 = completeness_gap(ig);
  const bool ok = linear_gap <= 1e-12 && monotone && g512 <= 1e-4 * delta + 1e-8;
  report("integrated-gradients diagnostics", ok,
         fmt("linear gap %.1e, gap(512) %.2e vs bound %.2e, ", linear_gap, g512, 1e-4 * delta + 1e-8) +
             (monotone ? "gap non-increasing" : "gap increased"));
}

// --- CLI determinism ---------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
      why = rel.string() + " differs";
      return false;
    }
    ++files;
  }
  if (files == 0) {
    why = "no output files";
    return false;
  }
  return true;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MODEX_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

void cli_determinism() {
  const fs::path root = testkit::temp_dir("acceptance_cli");
  std::string detail;
  bool ok = true;
  auto stage = [&](const std::string& name, const std::string& args_template) {
    if (!ok) return;
    for (const char* run_id : {"a", "b"}) {
      std::string args = args_template;
      for (std::size_t pos; (pos = args.find("{run}")) != std::string::npos;) {
        args.replace(pos, 5, (root / run_id).string());
      }
      if (run(args) != 0) {
        ok = false;
        detail = name + " exited nonzero";
        return;
      }
    }
    std::string why;
    if (!same_tree(root / "a" / name, root / "b" / name, why)) {
      ok = false;
      detail = name + ": " + why;
    }
  };
  const std::string bundle = "--bundle {run}/synth";
  stage("synth", "synth --nodes 120 --seed 3 --out {run}/synth");
  stage("train", "train " + bundle + " --epochs 60 --seed 1 --out {run}/train");
  stage("evaluate", "evaluate " + bundle + " --epochs 30 --seeds 0,1 --out {run}/evaluate");
  stage("explain", "explain " + bundle +
                       " --checkpoint {run}/train/model.mmck --node t0002,t0005 --steps 16"
                       " --out {run}/explain");
  report("CLI determinism", ok, ok ? "synth, train, evaluate, explain byte-identical" : detail);
}

// --- metrics -----------------------------------------------------------------

void metric_suite() {
  const Label M = Label::kMisinformation, F = Label::kFactual;
  const std::vector<Label> pred{M, M, M, F, F}, truth{M, M, F, M, F};
  const double hand = f1_score(pred, truth).f1;
  const double perfect = f1_score(truth, truth).f1;
  const std::vector<Label> flipped{F, F, M, M, M}, flip_truth{M, M, F, F, F};
  const double wrong = f1_score(flipped, flip_truth).f1;
  const bool ok = std::abs(hand - 2.0 / 3.0) < 1e-15 && perfect == 1.0 && wrong == 0.0;
  report("metric unit suite", ok, fmt("hand %.6f, perfect %.1f, all-wrong %.1f", hand, perfect, wrong));
}

// --- mode isolation ----------------------------------------------------------

void mode_isolation() {
  SynthSpec spec;
  spec.nodes = 120;
  const Dataset d = testkit::synth_dataset(spec);
  const EdgeIndex edges = make_edge_index(d.interaction);
  TrainConfig config;
  config.epochs = 100;
  config.mode = Mode::kGraphOnly;
  const GatModel graph_model = train(d.interaction, d.features, config).model;
  config.mode = Mode::kTextOnly;
  const GatModel text_model = train(d.interaction, d.features, config).model;

  Rng rng(77);
  FeatureSet text_perturbed = d.features;
  for (double& v : text_perturbed.text_pooled.data()) v += rng.normal();
  FeatureSet shallow_perturbed = d.features;
  for (double& v : shallow_perturbed.shallow.data()) v += rng.normal();

  const bool graph_ok = predict_proba(graph_model, edges, d.features) ==
                        predict_proba(graph_model, edges, text_perturbed);
  const bool text_ok = predict_proba(text_model, edges, d.features) ==
                       predict_proba(text_model, edges, shallow_perturbed);
  report("mode isolation", graph_ok && text_ok,
         std::string("graph-only ") + (graph_ok ? "bitwise equal" : "changed") + ", text-only " +
             (text_ok ? "bitwise equal" : "changed"));
}

template <typename Fn>
void guarded(const char* name, Fn fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(name, false, std::string("threw: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("metric unit suite", metric_suite);
  guarded("gradient correctness", gradient_correctness);
  guarded("attention normalization", attention_normalization);
  guarded("HSIC-Lasso oracle equivalence", lasso_oracle);
  guarded("integrated-gradients diagnostics", ig_diagnostics);
  guarded("mode isolation", mode_isolation);
  guarded("CLI determinism", cli_determinism);
  guarded("GraphLime planted-signal recovery", graphlime_recovery);
  guarded("ablation ordering", ablation_ordering);
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
