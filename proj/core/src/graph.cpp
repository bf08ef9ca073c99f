#include "modex/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "modex/error.hpp"

namespace modex {
namespace {

using nlohmann::json;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

[[noreturn]] void malformed(std::size_t line, const std::string& reason) {
  throw Error(ErrorCode::kMalformedRow,
              "line " + std::to_string(line) + ": " + reason);
}

std::uint64_t read_count(const json& payload, const char* key, std::size_t line) {
  if (!payload.contains(key)) return 0;
  const json& value = payload.at(key);
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    if (v < 0) malformed(line, std::string("negative ") + key);
    return static_cast<std::uint64_t>(v);
  }
  malformed(line, std::string(key) + " is not an integer");
}

NodePayload parse_payload(NodeKind kind, std::string_view text, std::size_t line) {
  json payload;
  try {
    payload = text.empty() ? json::object() : json::parse(text);
  } catch (const json::parse_error& e) {
    malformed(line, std::string("payload is not valid JSON: ") + e.what());
  }
  if (!payload.is_object()) malformed(line, "payload must be a JSON object");

  switch (kind) {
    case NodeKind::kTweet:
    case NodeKind::kReply: {
      TweetRecord record;
      if (payload.contains("text")) {
        if (!payload["text"].is_string()) malformed(line, "text must be a string");
        record.text = payload["text"].get<std::string>();
      }
      record.reply_count = read_count(payload, "reply_count", line);
      record.quote_count = read_count(payload, "quote_count", line);
      record.retweet_count = read_count(payload, "retweet_count", line);
      if (payload.contains("language")) {
        if (!payload["language"].is_string()) malformed(line, "language must be a string");
        record.language = payload["language"].get<std::string>();
      }
      return record;
    }
    case NodeKind::kClaim: {
      if (!payload.contains("verdict")) malformed(line, "claim without verdict");
      const json& v = payload["verdict"];
      ClaimRecord record;
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "misinformation") {
          record.verdict = Label::kMisinformation;
        } else if (s == "factual" || s == "fact") {
          record.verdict = Label::kFactual;
        } else {
          malformed(line, "unknown verdict '" + s + "'");
        }
      } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
        record.verdict = static_cast<Label>(v.get<int>());
      } else {
        malformed(line, "verdict must be 'misinformation', 'factual', 0 or 1");
      }
      return record;
    }
    case NodeKind::kUser:
      return UserRecord{};
  }
  malformed(line, "unreachable node kind");
}

json payload_to_json(const Node& node) {
  return std::visit(
      [](const auto& record) -> json {
        using T = std::decay_t<decltype(record)>;
        if constexpr (std::is_same_v<T, TweetRecord>) {
          json j;
          j["text"] = record.text;
          j["reply_count"] = record.reply_count;
          j["quote_count"] = record.quote_count;
          j["retweet_count"] = record.retweet_count;
          j["language"] = record.language;
          return j;
        } else if constexpr (std::is_same_v<T, ClaimRecord>) {
          return json{{"verdict", record.verdict == Label::kMisinformation ? "misinformation"
                                                                            : "factual"}};
        } else {
          return json::object();
        }
      },
      node.payload);
}

bool payload_matches(NodeKind kind, const NodePayload& payload) {
  switch (kind) {
    case NodeKind::kTweet:
    case NodeKind::kReply: return std::holds_alternative<TweetRecord>(payload);
    case NodeKind::kClaim: return std::holds_alternative<ClaimRecord>(payload);
    case NodeKind::kUser: return std::holds_alternative<UserRecord>(payload);
  }
  return false;
}

}  // namespace

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kClaim: return "Claim";
    case NodeKind::kTweet: return "Tweet";
    case NodeKind::kReply: return "Reply";
    case NodeKind::kUser: return "User";
  }
  return "?";
}

std::string_view to_string(RelationKind kind) {
  switch (kind) {
    case RelationKind::kPosted: return "Posted";
    case RelationKind::kMentions: return "Mentions";
    case RelationKind::kRetweeted: return "Retweeted";
    case RelationKind::kQuoteOf: return "QuoteOf";
    case RelationKind::kReplyTo: return "ReplyTo";
    case RelationKind::kDiscusses: return "Discusses";
  }
  return "?";
}

std::string_view to_string(Label label) {
  return label == Label::kMisinformation ? "Misinformation" : "Factual";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnlabeled: return "unlabeled";
  }
  return "?";
}

std::string_view to_string(EdgeOrigin origin) {
  switch (origin) {
    case EdgeOrigin::kReplyTo: return "ReplyTo";
    case EdgeOrigin::kQuoteOf: return "QuoteOf";
    case EdgeOrigin::kCoUser: return "CoUser";
    case EdgeOrigin::kSelfLoop: return "SelfLoop";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) {
  if (text == "Claim") return NodeKind::kClaim;
  if (text == "Tweet") return NodeKind::kTweet;
  if (text == "Reply") return NodeKind::kReply;
  if (text == "User") return NodeKind::kUser;
  return std::nullopt;
}

std::optional<RelationKind> parse_relation_kind(std::string_view text) {
  if (text == "Posted") return RelationKind::kPosted;
  if (text == "Mentions") return RelationKind::kMentions;
  if (text == "Retweeted") return RelationKind::kRetweeted;
  if (text == "QuoteOf" || text == "Quote_Of") return RelationKind::kQuoteOf;
  if (text == "ReplyTo" || text == "Reply_To") return RelationKind::kReplyTo;
  if (text == "Discusses") return RelationKind::kDiscusses;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  return std::nullopt;
}

bool relation_allows(RelationKind relation, NodeKind source, NodeKind target) {
  switch (relation) {
    case RelationKind::kPosted:
      return source == NodeKind::kUser && (target == NodeKind::kTweet || target == NodeKind::kReply);
    case RelationKind::kMentions:
      return source == NodeKind::kTweet && target == NodeKind::kUser;
    case RelationKind::kRetweeted:
      return source == NodeKind::kUser && target == NodeKind::kTweet;
    case RelationKind::kQuoteOf:
    case RelationKind::kReplyTo:
      return source == NodeKind::kReply && target == NodeKind::kTweet;
    case RelationKind::kDiscusses:
      return source == NodeKind::kTweet && target == NodeKind::kClaim;
  }
  return false;
}

std::size_t HeteroGraph::add_node(Node node) {
  if (index_.contains(node.id)) {
    throw Error(ErrorCode::kDuplicateNode, "duplicate node id '" + node.id + "'");
  }
  if (!payload_matches(node.kind, node.payload)) {
    throw Error(ErrorCode::kMalformedRow,
                "payload does not match kind " + std::string(to_string(node.kind)) +
                    " for node '" + node.id + "'");
  }
  const std::size_t index = nodes_.size();
  index_.emplace(node.id, index);
  by_kind_[static_cast<std::size_t>(node.kind)].push_back(index);
  nodes_.push_back(std::move(node));
  return index;
}

void HeteroGraph::add_edge(std::string_view source, RelationKind relation,
                           std::string_view target) {
  const auto s = find(source);
  const auto t = find(target);
  if (!s || !t) {
    std::string missing;
    if (!s) missing += "'" + std::string(source) + "'";
    if (!t) missing += std::string(missing.empty() ? "" : ", ") + "'" + std::string(target) + "'";
    throw Error(ErrorCode::kDanglingEdge, "edge references unknown node(s) " + missing);
  }
  if (!relation_allows(relation, nodes_[*s].kind, nodes_[*t].kind)) {
    throw Error(ErrorCode::kMalformedRow,
                std::string(to_string(relation)) + " cannot connect " +
                    std::string(to_string(nodes_[*s].kind)) + " -> " +
                    std::string(to_string(nodes_[*t].kind)));
  }
  if (!edge_set_.emplace(*s, relation, *t).second) {
    throw Error(ErrorCode::kMalformedRow,
                "duplicate edge (" + std::string(source) + ", " +
                    std::string(to_string(relation)) + ", " + std::string(target) + ")");
  }
  edges_.push_back(Edge{*s, relation, *t});
}

std::optional<std::size_t> HeteroGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> HeteroGraph::nodes_of_kind(NodeKind kind) const {
  return by_kind_[static_cast<std::size_t>(kind)];
}

HeteroGraph load_dataset(std::istream& nodes, std::istream& edges) {
  HeteroGraph graph;
  std::string raw;
  std::size_t line_no = 0;

  bool header = false;
  while (std::getline(nodes, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (!header) {
      const auto cols = split_tabs(line);
      if (cols.size() != 3 || cols[0] != "id" || cols[1] != "kind") {
        malformed(line_no, "nodes header must be 'id<TAB>kind<TAB>payload_json'");
      }
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 3) malformed(line_no, "expected 3 columns, got " + std::to_string(cols.size()));
    if (cols[0].empty()) malformed(line_no, "empty node id");
    const auto kind = parse_node_kind(cols[1]);
    if (!kind) malformed(line_no, "unknown node kind '" + std::string(cols[1]) + "'");
    Node node{std::string(cols[0]), *kind, parse_payload(*kind, cols[2], line_no)};
    try {
      graph.add_node(std::move(node));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDuplicateNode) throw;
      malformed(line_no, e.what());
    }
  }

  line_no = 0;
  header = false;
  while (std::getline(edges, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (!header) {
      const auto cols = split_tabs(line);
      if (cols.size() != 3 || cols[0] != "src" || cols[1] != "relation") {
        malformed(line_no, "edges header must be 'src<TAB>relation<TAB>dst'");
      }
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 3) malformed(line_no, "expected 3 columns, got " + std::to_string(cols.size()));
    const auto relation = parse_relation_kind(cols[1]);
    if (!relation) malformed(line_no, "unknown relation '" + std::string(cols[1]) + "'");
    try {
      graph.add_edge(cols[0], *relation, cols[2]);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDanglingEdge) throw;
      malformed(line_no, e.what());
    }
  }
  return graph;
}

HeteroGraph load_dataset(const std::filesystem::path& node_file,
                         const std::filesystem::path& edge_file) {
  std::ifstream nodes(node_file, std::ios::binary);
  if (!nodes) throw Error(ErrorCode::kReadFailure, "cannot open " + node_file.string());
  std::ifstream edges(edge_file, std::ios::binary);
  if (!edges) throw Error(ErrorCode::kReadFailure, "cannot open " + edge_file.string());
  return load_dataset(nodes, edges);
}

void write_nodes_tsv(const HeteroGraph& graph, std::ostream& out) {
  out << "id\tkind\tpayload_json\n";
  for (const Node& node : graph.nodes()) {
    out << node.id << '\t' << to_string(node.kind) << '\t' << payload_to_json(node).dump()
        << '\n';
  }
}

void write_edges_tsv(const HeteroGraph& graph, std::ostream& out) {
  out << "src\trelation\tdst\n";
  for (const Edge& edge : graph.edges()) {
    out << graph.node(edge.source).id << '\t' << to_string(edge.relation) << '\t'
        << graph.node(edge.target).id << '\n';
  }
}

std::map<std::string, Split> load_splits(std::istream& in) {
  std::map<std::string, Split> splits;
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (!header) {
      const auto cols = split_tabs(line);
      if (cols.size() != 2 || cols[0] != "id" || cols[1] != "split") {
        malformed(line_no, "splits header must be 'id<TAB>split'");
      }
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 2) malformed(line_no, "expected 2 columns");
    const auto split = parse_split(cols[1]);
    if (!split) malformed(line_no, "unknown split '" + std::string(cols[1]) + "'");
    if (!splits.emplace(std::string(cols[0]), *split).second) {
      malformed(line_no, "id '" + std::string(cols[0]) + "' listed twice");
    }
  }
  return splits;
}

std::map<std::string, Split> load_splits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kReadFailure, "cannot open " + path.string());
  return load_splits(in);
}

void write_splits_tsv(const std::map<std::string, Split>& splits, std::ostream& out) {
  out << "id\tsplit\n";
  for (const auto& [id, split] : splits) {
    if (split == Split::kUnlabeled) continue;
    out << id << '\t' << to_string(split) << '\n';
  }
}

std::map<std::string, Label> derive_tweet_labels(const HeteroGraph& graph,
                                                 ConflictPolicy policy) {
  // Verdict tallies per tweet: [misinformation, factual].
  std::map<std::size_t, std::array<std::size_t, 2>> votes;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& edge : graph.edges()) {
    if (edge.relation != RelationKind::kDiscusses) continue;
    if (!seen.emplace(edge.source, edge.target).second) continue;
    const auto& claim = std::get<ClaimRecord>(graph.node(edge.target).payload);
    ++votes[edge.source][static_cast<std::size_t>(claim.verdict)];
  }

  std::map<std::string, Label> labels;
  for (const auto& [tweet, count] : votes) {
    const auto& id = graph.node(tweet).id;
    if (count[0] > 0 && count[1] == 0) {
      labels.emplace(id, Label::kMisinformation);
    } else if (count[1] > 0 && count[0] == 0) {
      labels.emplace(id, Label::kFactual);
    } else if (policy == ConflictPolicy::kMajority && count[0] != count[1]) {
      labels.emplace(id, count[0] > count[1] ? Label::kMisinformation : Label::kFactual);
    }
  }
  return labels;
}

std::optional<std::size_t> InteractionGraph::find(std::string_view id) const {
  const auto it = std::find(node_ids.begin(), node_ids.end(), id);
  if (it == node_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids.begin());
}

InteractionGraph build_interaction_graph(const HeteroGraph& graph,
                                         const std::map<std::string, Label>& labels,
                                         const std::map<std::string, Split>& splits,
                                         std::size_t couser_cap) {
  InteractionGraph out;
  std::vector<std::optional<std::size_t>> local(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Node& node = graph.node(i);
    if (node.kind != NodeKind::kTweet && node.kind != NodeKind::kReply) continue;
    local[i] = out.node_ids.size();
    out.node_ids.push_back(node.id);
    out.node_kinds.push_back(node.kind);
  }
  const std::size_t n = out.node_ids.size();
  out.labels.assign(n, std::nullopt);
  out.splits.assign(n, Split::kUnlabeled);

  for (const auto& [id, label] : labels) {
    const auto index = graph.find(id);
    if (!index) throw Error(ErrorCode::kUnknownNode, "label for unknown node '" + id + "'");
    if (graph.node(*index).kind != NodeKind::kTweet) {
      throw Error(ErrorCode::kInvalidArgument, "label attached to non-tweet node '" + id + "'");
    }
    out.labels[*local[*index]] = label;
  }
  for (const auto& [id, split] : splits) {
    const auto index = graph.find(id);
    if (!index) throw Error(ErrorCode::kUnknownNode, "split for unknown node '" + id + "'");
    if (local[*index]) out.splits[*local[*index]] = split;
  }

  std::set<std::pair<std::size_t, std::size_t>> present;
  auto add_pair = [&](std::size_t a, std::size_t b, EdgeOrigin origin) {
    if (present.emplace(a, b).second) out.edges.push_back({a, b, origin});
    if (present.emplace(b, a).second) out.edges.push_back({b, a, origin});
  };

  for (const Edge& edge : graph.edges()) {
    if (edge.relation != RelationKind::kReplyTo && edge.relation != RelationKind::kQuoteOf) {
      continue;
    }
    add_pair(*local[edge.source], *local[edge.target],
             edge.relation == RelationKind::kReplyTo ? EdgeOrigin::kReplyTo
                                                     : EdgeOrigin::kQuoteOf);
  }

  if (couser_cap > 0) {
    // Users are visited in id order; each user's items are paired in sorted-id order.
    std::map<std::string, std::set<std::string>> items_by_user;
    for (const Edge& edge : graph.edges()) {
      if (edge.relation != RelationKind::kPosted && edge.relation != RelationKind::kRetweeted) {
        continue;
      }
      items_by_user[graph.node(edge.source).id].insert(graph.node(edge.target).id);
    }
    for (const auto& [user, items] : items_by_user) {
      const std::vector<std::string> sorted(items.begin(), items.end());
      std::size_t taken = 0;
      for (std::size_t i = 0; i < sorted.size() && taken < couser_cap; ++i) {
        for (std::size_t j = i + 1; j < sorted.size() && taken < couser_cap; ++j) {
          add_pair(*local[*graph.find(sorted[i])], *local[*graph.find(sorted[j])],
                   EdgeOrigin::kCoUser);
          ++taken;
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) out.edges.push_back({i, i, EdgeOrigin::kSelfLoop});
  return out;
}

std::string serialize_edges(const InteractionGraph& graph) {
  std::ostringstream out;
  for (const InteractionEdge& e : graph.edges) {
    out << e.source << '\t' << e.target << '\t' << to_string(e.origin) << '\n';
  }
  return out.str();
}

std::vector<std::size_t> k_hop_neighborhood(const InteractionGraph& graph, std::size_t node,
                                            std::size_t k) {
  const std::size_t n = graph.node_count();
  if (node >= n) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "node index " + std::to_string(node) + " out of range (" + std::to_string(n) + ")");
  }
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const InteractionEdge& e : graph.edges) {
    if (e.source == e.target) continue;
    adjacency[e.source].push_back(e.target);
    adjacency[e.target].push_back(e.source);
  }
  std::vector<std::size_t> depth(n, static_cast<std::size_t>(-1));
  std::deque<std::size_t> queue{node};
  depth[node] = 0;
  std::vector<std::size_t> reached{node};
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (depth[u] == k) continue;
    for (std::size_t v : adjacency[u]) {
      if (depth[v] != static_cast<std::size_t>(-1)) continue;
      depth[v] = depth[u] + 1;
      reached.push_back(v);
      queue.push_back(v);
    }
  }
  std::sort(reached.begin(), reached.end());
  return reached;
}

}  // namespace modex
