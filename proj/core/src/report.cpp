#include "modex/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "modex/error.hpp"

namespace modex {
namespace {

using nlohmann::json;

constexpr const char* kStyle =
    "body{font-family:sans-serif;margin:2em;max-width:60em}"
    "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 8px}"
    ".bar{background:#4a78b5;height:1em;display:inline-block}"
    ".tok{padding:2px 3px;margin:1px;display:inline-block;border-radius:3px}";

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string page(const std::string& title, const std::string& body) {
  return "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" + escape(title) +
         "</title><style>" + kStyle + "</style></head>\n<body>\n" + body + "</body></html>\n";
}

std::string html_file_name(const std::string& id) { return "node_" + id + ".html"; }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kWriteFailure, "WriteFailure: cannot open " + path.string());
  f << content;
  f.flush();
  if (!f) throw Error(ErrorCode::kWriteFailure, "WriteFailure: cannot write " + path.string());
}

}  // namespace

NodeExplanation explain_tweet(const GatModel& model, const Dataset& dataset,
                              std::string_view node_id, const GraphLimeConfig& config,
                              std::size_t ig_steps) {
  const auto index = dataset.interaction.find(node_id);
  if (!index) {
    throw Error(ErrorCode::kUnknownNode,
                "UnknownNode: " + std::string(node_id) + " is not a tweet or reply in the bundle");
  }
  const std::size_t i = *index;
  const auto& record =
      std::get<TweetRecord>(dataset.graph.node(*dataset.graph.find(node_id)).payload);

  NodeExplanation e;
  e.node_id = std::string(node_id);
  e.text = record.text;
  e.reply_count = record.reply_count;
  e.quote_count = record.quote_count;
  e.retweet_count = record.retweet_count;

  const EdgeIndex edges = make_edge_index(dataset.interaction);
  const std::vector<double> probs = predict_proba(model, edges, dataset.features);
  e.probability = probs[i];
  e.predicted = e.probability > 0.5 ? Label::kMisinformation : Label::kFactual;
  e.importance = explain_node_expanding(model, dataset.interaction, dataset.features, i, config);

  const auto& tokens = dataset.features.text_tokens[i];
  if (model.mode != Mode::kGraphOnly && tokens && !tokens->texts.empty()) {
    const IntegratedGradients ig =
        integrated_gradients(model, edges, dataset.features, i, ig_steps, {}, e.predicted);
    TokenAttribution a = word_importance(ig.attributions, ig.tokens);
    a.completeness_gap = completeness_gap(ig);
    e.attribution = std::move(a);
    e.ig_steps = ig_steps;
  }
  return e;
}

std::string explanation_json(const NodeExplanation& e) {
  json node{{"id", e.node_id},
            {"text", e.text},
            {"reply_count", e.reply_count},
            {"quote_count", e.quote_count},
            {"retweet_count", e.retweet_count}};
  const std::vector<double> beta(e.importance.beta.begin(), e.importance.beta.end());
  json grouped = json::object();
  for (std::size_t g = 0; g < kGroupedNames.size(); ++g) {
    grouped[std::string(kGroupedNames[g])] = e.importance.grouped[g];
  }
  json explanation{{"node_id", e.node_id},
                   {"label", std::string(to_string(e.predicted))},
                   {"probability", e.probability},
                   {"beta", beta},
                   {"grouped", grouped},
                   {"ranking", e.importance.ranking},
                   {"flags", e.importance.flags},
                   {"hops", e.importance.hops},
                   {"sample_size", e.importance.sample_size}};
  json attribution = nullptr;
  if (e.attribution) {
    attribution = json{{"node_id", e.node_id},
                       {"tokens", e.attribution->tokens},
                       {"scores", e.attribution->scores},
                       {"normalized", e.attribution->normalized},
                       {"steps", e.ig_steps},
                       {"completeness_gap", e.attribution->completeness_gap}};
  }
  return json{{"node", node}, {"explanation", explanation}, {"attribution", attribution}}.dump(2) +
         "\n";
}

NodeExplanation parse_explanation_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    NodeExplanation e;
    const json& node = doc.at("node");
    e.node_id = node.at("id").get<std::string>();
    e.text = node.at("text").get<std::string>();
    e.reply_count = node.at("reply_count").get<std::uint64_t>();
    e.quote_count = node.at("quote_count").get<std::uint64_t>();
    e.retweet_count = node.at("retweet_count").get<std::uint64_t>();
    const json& ex = doc.at("explanation");
    const auto label = ex.at("label").get<std::string>();
    if (label == "Misinformation") {
      e.predicted = Label::kMisinformation;
    } else if (label == "Factual") {
      e.predicted = Label::kFactual;
    } else {
      throw Error(ErrorCode::kReadFailure, "unknown label " + label);
    }
    e.probability = ex.at("probability").get<double>();
    const auto beta = ex.at("beta").get<std::vector<double>>();
    if (beta.size() != e.importance.beta.size()) {
      throw Error(ErrorCode::kReadFailure, "beta must hold 6 values");
    }
    std::copy(beta.begin(), beta.end(), e.importance.beta.begin());
    for (std::size_t g = 0; g < kGroupedNames.size(); ++g) {
      e.importance.grouped[g] = ex.at("grouped").at(std::string(kGroupedNames[g])).get<double>();
    }
    e.importance.ranking = ex.at("ranking").get<std::vector<std::string>>();
    e.importance.flags = ex.at("flags").get<std::vector<std::string>>();
    e.importance.hops = ex.at("hops").get<std::size_t>();
    e.importance.sample_size = ex.at("sample_size").get<std::size_t>();
    const json& at = doc.at("attribution");
    if (!at.is_null()) {
      TokenAttribution a;
      a.tokens = at.at("tokens").get<std::vector<std::string>>();
      a.scores = at.at("scores").get<std::vector<double>>();
      a.normalized = at.at("normalized").get<std::vector<double>>();
      a.completeness_gap = at.at("completeness_gap").get<double>();
      if (a.scores.size() != a.tokens.size() || a.normalized.size() != a.tokens.size()) {
        throw Error(ErrorCode::kReadFailure, "attribution arrays differ in length");
      }
      e.ig_steps = at.at("steps").get<std::size_t>();
      e.attribution = std::move(a);
    }
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kReadFailure, std::string("malformed explanation: ") + ex.what());
  }
}

std::string render_node_html(const NodeExplanation& e) {
  std::ostringstream b;
  b << "<h1>Tweet " << escape(e.node_id) << "</h1>\n";
  b << "<p><a href=\"index.html\">back to summary</a></p>\n";
  b << "<blockquote>" << escape(e.text) << "</blockquote>\n";

  b << "<h2>Engagement metadata</h2>\n<table>\n"
    << "<tr><td>reply count</td><td>" << e.reply_count << "</td></tr>\n"
    << "<tr><td>quote count</td><td>" << e.quote_count << "</td></tr>\n"
    << "<tr><td>retweet count</td><td>" << e.retweet_count << "</td></tr>\n</table>\n";

  b << "<h2>Classification</h2>\n<p><b>" << to_string(e.predicted)
    << "</b>, probability of misinformation " << fixed(e.probability, 4) << "</p>\n";

  b << "<h2>Feature importance</h2>\n<table>\n";
  const double peak = *std::max_element(e.importance.grouped.begin(), e.importance.grouped.end());
  for (std::size_t g = 0; g < kGroupedDisplayNames.size(); ++g) {
    const double v = e.importance.grouped[g];
    const double width = peak > 0.0 ? 100.0 * v / peak : 0.0;
    b << "<tr><td>" << kGroupedDisplayNames[g] << "</td><td>" << fixed(v, 4)
      << "</td><td style=\"width:20em\"><span class=\"bar\" style=\"width:" << fixed(width, 1)
      << "%\"></span></td></tr>\n";
  }
  b << "</table>\n";
  if (!e.importance.flags.empty()) {
    b << "<p>flags:";
    for (const auto& f : e.importance.flags) b << ' ' << escape(f);
    b << "</p>\n";
  }

  b << "<h2>Word importance</h2>\n";
  if (e.attribution) {
    b << "<div>";
    for (std::size_t t = 0; t < e.attribution->tokens.size(); ++t) {
      const double n = e.attribution->normalized[t];
      const char* rgb = n < 0.0 ? "200,30,30" : "30,150,60";
      b << "<span class=\"tok\" title=\"" << fixed(e.attribution->scores[t], 6)
        << "\" style=\"background-color:rgba(" << rgb << ',' << fixed(std::abs(n), 3) << ")\">"
        << escape(e.attribution->tokens[t]) << "</span>";
    }
    b << "</div>\n<p>integrated gradients, " << e.ig_steps << " steps, completeness gap "
      << fixed(e.attribution->completeness_gap, 8) << "</p>\n";
  } else {
    b << "<p>no token vectors for this node</p>\n";
  }
  return page("Explanation " + e.node_id, b.str());
}

std::string render_index_html(const std::optional<RunReport>& report,
                              const std::vector<NodeExplanation>& explanations) {
  std::ostringstream b;
  b << "<h1>Misinformation classification report</h1>\n";
  if (report) {
    b << "<h2>Ablation</h2>\n<table>\n<tr><th>GAT's input tweet representation</th>"
      << "<th>F1-score</th><th>runs</th></tr>\n";
    for (const auto& m : report->modes) {
      b << "<tr><td>" << escape(mode_label(m.mode)) << "</td><td>"
        << escape(format_mean_std(m.mean, m.std)) << "</td><td>" << m.f1.size() << "</td></tr>\n";
    }
    b << "</table>\n";
  }
  if (!explanations.empty()) {
    b << "<h2>Explained tweets</h2>\n<table>\n<tr><th>tweet</th><th>classification</th>"
      << "<th>probability</th><th>top feature</th></tr>\n";
    for (const auto& e : explanations) {
      b << "<tr><td><a href=\"" << escape(html_file_name(e.node_id)) << "\">" << escape(e.node_id)
        << "</a></td><td>" << to_string(e.predicted) << "</td><td>" << fixed(e.probability, 4)
        << "</td><td>"
        << escape(e.importance.ranking.empty() ? std::string("-") : e.importance.ranking.front())
        << "</td></tr>\n";
    }
    b << "</table>\n";
  }
  return page("Report", b.str());
}

void render_report(const std::vector<NodeExplanation>& explanations,
                   const std::optional<RunReport>& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kWriteFailure, "WriteFailure: " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "index.html", render_index_html(report, explanations));
  for (const auto& e : explanations) {
    write_file(out_dir / html_file_name(e.node_id), render_node_html(e));
  }
}

}  // namespace modex
