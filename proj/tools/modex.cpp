// modex: ingest, synth, train, evaluate, explain, report.
//
// Exit codes: 0 success, 1 domain error ("<Code>: message" on stderr),
// 2 usage error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "modex/dataset.hpp"
#include "modex/error.hpp"
#include "modex/gat.hpp"
#include "modex/report.hpp"
#include "modex/synth.hpp"
#include "modex/trainer.hpp"

namespace fs = std::filesystem;
using namespace modex;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataArgs {
  fs::path bundle = ".";
  std::size_t couser_cap = kDefaultCoUserCap;
  std::string transform = "log1p_zscore";
  std::string conflict = "drop";
  bool no_fallback = false;
};

void add_data_args(CLI::App* app, DataArgs& a) {
  app->add_option("--bundle", a.bundle, "bundle directory (nodes.tsv, edges.tsv, splits.tsv, embeddings.mmeb)")
      ->capture_default_str();
  app->add_option("--couser-cap", a.couser_cap, "co-user edge pairs per user")->capture_default_str();
  app->add_option("--transform", a.transform, "shallow transform: raw | log1p_zscore")
      ->capture_default_str();
  app->add_option("--conflict", a.conflict, "claim verdict conflicts: drop | majority")
      ->capture_default_str();
  app->add_flag("--no-fallback", a.no_fallback, "fail instead of hashing text without embeddings");
}

DatasetOptions dataset_options(const DataArgs& a) {
  DatasetOptions o;
  o.couser_cap = a.couser_cap;
  const auto t = parse_shallow_transform(a.transform);
  if (!t) throw UsageError("unknown transform '" + a.transform + "'");
  o.transform = *t;
  if (a.conflict == "drop") {
    o.conflict_policy = ConflictPolicy::kDrop;
  } else if (a.conflict == "majority") {
    o.conflict_policy = ConflictPolicy::kMajority;
  } else {
    throw UsageError("unknown conflict policy '" + a.conflict + "'");
  }
  o.use_fallback = !a.no_fallback;
  return o;
}

struct TrainArgs {
  double lr = 0.005;
  std::size_t epochs = 800;
};

void add_train_args(CLI::App* app, TrainArgs& a) {
  app->add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--epochs", a.epochs, "full-batch epochs")->capture_default_str();
}

Mode mode_arg(const std::string& s) {
  const auto m = parse_mode(s);
  if (!m) throw UsageError("unknown mode '" + s + "' (graph, text, multi)");
  return *m;
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << content;
  if (!f) throw Error(ErrorCode::kWriteFailure, "WriteFailure: cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kReadFailure, "ReadFailure: cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  s = s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

// CLI11 only reads config files on the root app, and the file here is shared
// by every subcommand. So "--config FILE" is replaced by one "--key value"
// pair per line whose key is an option of the chosen subcommand, placed before
// the remaining arguments so that explicit flags win. Other keys are ignored.
void expand_config(CLI::App& app, std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return;
  const auto name = std::find_if(args.begin(), args.end(),
                                 [](const std::string& a) { return !a.starts_with("-"); });
  if (name == args.end()) throw CLI::RequiredError("subcommand");
  CLI::App* sub = app.get_subcommand_no_throw(*name);
  if (sub == nullptr) return;  // let the parser report it

  std::ifstream in(*path);
  if (!in) throw CLI::FileError::Missing(*path);
  std::vector<std::string> injected;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "on" || value == "yes") injected.push_back("--" + key);
    } else {
      injected.push_back("--" + key);
      injected.push_back(value);
    }
  }
  args.insert(name + 1, injected.begin(), injected.end());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modality-level explainable misinformation classification"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // Only listed for --help; the file itself is expanded by expand_config.
  auto with_config = [](CLI::App* sub) {
    sub->add_option("--config", "flat key=value file; command-line flags override it");
    return sub;
  };

  // ingest
  auto* ingest = with_config(app.add_subcommand("ingest", "validate raw files and write a normalized bundle"));
  fs::path in_nodes, in_edges, in_splits, in_embeddings, ingest_out;
  DataArgs ingest_data;
  ingest->add_option("--nodes", in_nodes, "nodes TSV")->required();
  ingest->add_option("--edges", in_edges, "edges TSV")->required();
  ingest->add_option("--splits", in_splits, "splits TSV")->required();
  ingest->add_option("--embeddings", in_embeddings, "MMEB1 embeddings");
  ingest->add_option("--out", ingest_out, "output bundle directory")->required();
  ingest->add_option("--couser-cap", ingest_data.couser_cap)->capture_default_str();
  ingest->add_option("--conflict", ingest_data.conflict)->capture_default_str();
  ingest->add_flag("--no-fallback", ingest_data.no_fallback);

  // synth
  auto* synth = with_config(app.add_subcommand("synth", "generate a planted-signal bundle"));
  SynthSpec spec;
  std::string signal = "both";
  fs::path synth_out = "bundle";
  synth->add_option("--nodes", spec.nodes, "labeled tweets")->capture_default_str();
  synth->add_option("--edge-density", spec.edge_density)->capture_default_str();
  synth->add_option("--signal", signal, "graph | text | both")->capture_default_str();
  synth->add_option("--class-balance", spec.class_balance, "fraction of misinformation")
      ->capture_default_str();
  synth->add_option("--seed", spec.seed)->capture_default_str();
  synth->add_option("--signal-strength", spec.signal_strength)->capture_default_str();
  synth->add_option("--homophily", spec.homophily)->capture_default_str();
  synth->add_option("--out", synth_out)->capture_default_str();

  // train
  auto* train_cmd = with_config(app.add_subcommand("train", "train one model"));
  DataArgs train_data;
  TrainArgs train_args;
  std::string train_mode = "multi";
  std::uint64_t train_seed = 0;
  fs::path train_out = "model";
  add_data_args(train_cmd, train_data);
  add_train_args(train_cmd, train_args);
  train_cmd->add_option("--mode", train_mode, "graph | text | multi")->capture_default_str();
  train_cmd->add_option("--seed", train_seed)->capture_default_str();
  train_cmd->add_option("--out", train_out, "writes model.mmck and history.json")
      ->capture_default_str();

  // evaluate
  auto* evaluate = with_config(app.add_subcommand("evaluate", "ablation over modes and seeds"));
  DataArgs eval_data;
  TrainArgs eval_args;
  std::vector<std::string> eval_modes = {"graph", "text", "multi"};
  std::vector<std::uint64_t> eval_seeds = {0, 1, 2, 3, 4};
  fs::path eval_out = ".";
  add_data_args(evaluate, eval_data);
  add_train_args(evaluate, eval_args);
  evaluate->add_option("--modes", eval_modes)->delimiter(',')->capture_default_str();
  evaluate->add_option("--seeds", eval_seeds)->delimiter(',')->capture_default_str();
  evaluate->add_option("--out", eval_out, "writes run_report.json and run_report.txt")
      ->capture_default_str();

  // explain
  auto* explain = with_config(app.add_subcommand("explain", "GraphLime and word importance per node"));
  DataArgs explain_data;
  fs::path checkpoint = "model/model.mmck";
  std::vector<std::string> explain_nodes;
  GraphLimeConfig lime;
  std::size_t steps = kDefaultIgSteps;
  fs::path explain_out = ".";
  add_data_args(explain, explain_data);
  explain->add_option("--checkpoint", checkpoint)->capture_default_str();
  explain->add_option("--node", explain_nodes, "tweet ids (repeatable or comma separated)")
      ->delimiter(',')
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  explain->add_option("--hops", lime.hops)->capture_default_str();
  explain->add_option("--sigma-x", lime.sigma_x)->capture_default_str();
  explain->add_option("--sigma-y", lime.sigma_y)->capture_default_str();
  explain->add_option("--rho", lime.rho)->capture_default_str();
  explain->add_option("--steps", steps, "integrated-gradients steps")->capture_default_str();
  explain->add_option("--out", explain_out, "writes explanations/<id>.json")->capture_default_str();

  // report
  auto* report = with_config(app.add_subcommand("report", "render the HTML report"));
  fs::path explanations_dir = "explanations";
  fs::path run_report_path;
  fs::path report_out = "report";
  report->add_option("--explanations", explanations_dir)->capture_default_str();
  report->add_option("--run-report", run_report_path, "run_report.json");
  report->add_option("--out", report_out)->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    expand_config(app, args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      DataArgs a = ingest_data;
      HeteroGraph graph = load_dataset(in_nodes, in_edges);
      auto splits = load_splits(in_splits);
      EmbeddingTable table;
      if (!in_embeddings.empty()) table = load_embeddings(in_embeddings);
      const Dataset ds = build_dataset(graph, splits, table, dataset_options(a));
      fs::create_directories(ingest_out);
      const BundlePaths out = BundlePaths::in(ingest_out);
      {
        std::ofstream f(out.nodes, std::ios::binary | std::ios::trunc);
        write_nodes_tsv(ds.graph, f);
      }
      {
        std::ofstream f(out.edges, std::ios::binary | std::ios::trunc);
        write_edges_tsv(ds.graph, f);
      }
      {
        std::ofstream f(out.splits, std::ios::binary | std::ios::trunc);
        write_splits_tsv(ds.splits, f);
      }
      if (!in_embeddings.empty()) {
        std::vector<EmbeddingRecord> records;
        for (const auto& [id, r] : table) records.push_back(r);
        write_embeddings(out.embeddings, records);
      }
      std::cout << ds.graph.nodes().size() << " nodes, " << ds.graph.edges().size() << " edges, "
                << ds.labels.size() << " labeled tweets, " << ds.interaction.edges.size()
                << " interaction edges\n";
    } else if (*synth) {
      const auto placement = parse_signal_placement(signal);
      if (!placement) throw UsageError("unknown signal placement '" + signal + "'");
      spec.placement = *placement;
      write_bundle(synth_generate(spec), synth_out);
    } else if (*train_cmd) {
      const Dataset ds = load_bundle(BundlePaths::in(train_data.bundle), dataset_options(train_data));
      TrainConfig cfg;
      cfg.learning_rate = train_args.lr;
      cfg.epochs = train_args.epochs;
      cfg.seed = train_seed;
      cfg.mode = mode_arg(train_mode);
      const TrainResult result = train(ds.interaction, ds.features, cfg);
      fs::create_directories(train_out);
      save_checkpoint(train_out / "model.mmck", result.model);
      write_text(train_out / "history.json", history_json(result.history));
      const F1Scores test = evaluate_split(result.model, ds.interaction, ds.features, Split::kTest);
      std::cout << "test F1 " << test.f1 << ", macro-F1 " << test.macro_f1 << '\n';
    } else if (*evaluate) {
      const Dataset ds = load_bundle(BundlePaths::in(eval_data.bundle), dataset_options(eval_data));
      std::vector<Mode> modes;
      for (const auto& m : eval_modes) modes.push_back(mode_arg(m));
      TrainConfig cfg;
      cfg.learning_rate = eval_args.lr;
      cfg.epochs = eval_args.epochs;
      const RunReport rr = run_ablation(ds.interaction, ds.features, modes, eval_seeds, cfg);
      write_text(eval_out / "run_report.json", run_report_json(rr));
      const std::string table = format_run_report_table(rr);
      write_text(eval_out / "run_report.txt", table);
      std::cout << table;
    } else if (*explain) {
      const Dataset ds =
          load_bundle(BundlePaths::in(explain_data.bundle), dataset_options(explain_data));
      for (const auto& id : explain_nodes) {
        if (!ds.interaction.find(id)) {
          throw Error(ErrorCode::kUnknownNode, "UnknownNode: node " + id + " not found in bundle");
        }
      }
      const GatModel model = load_checkpoint(checkpoint);
      for (const auto& id : explain_nodes) {
        const NodeExplanation e = explain_tweet(model, ds, id, lime, steps);
        write_text(explain_out / "explanations" / (id + ".json"), explanation_json(e));
      }
    } else if (*report) {
      std::vector<NodeExplanation> explanations;
      if (fs::exists(explanations_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(explanations_dir)) {
          if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) explanations.push_back(parse_explanation_json(read_text(f)));
      }
      std::optional<RunReport> rr;
      if (!run_report_path.empty()) rr = parse_run_report_json(read_text(run_report_path));
      render_report(explanations, rr, report_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    const std::string what = e.what();
    const std::string name(error_code_name(e.code()));
    std::cerr << (what.rfind(name, 0) == 0 ? what : name + ": " + what) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
