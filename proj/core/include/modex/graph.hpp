#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <variant>
#include <vector>

namespace modex {

enum class NodeKind : std::uint8_t { kClaim, kTweet, kReply, kUser };

enum class RelationKind : std::uint8_t {
  kPosted,     // User -> Tweet | Reply
  kMentions,   // Tweet -> User
  kRetweeted,  // User -> Tweet
  kQuoteOf,    // Reply -> Tweet
  kReplyTo,    // Reply -> Tweet
  kDiscusses,  // Tweet -> Claim
};

// External encoding is fixed: misinformation = 0, fact = 1.
enum class Label : int { kMisinformation = 0, kFactual = 1 };

enum class Split : std::uint8_t { kTrain, kVal, kTest, kUnlabeled };

enum class ConflictPolicy { kDrop, kMajority };

std::string_view to_string(NodeKind kind);
std::string_view to_string(RelationKind kind);
std::string_view to_string(Label label);
std::string_view to_string(Split split);

std::optional<NodeKind> parse_node_kind(std::string_view text);
// Accepts the canonical names plus the "Quote_Of" / "Reply_To" spellings.
std::optional<RelationKind> parse_relation_kind(std::string_view text);
std::optional<Split> parse_split(std::string_view text);

// Whether `relation` may connect a `source` node to a `target` node.
bool relation_allows(RelationKind relation, NodeKind source, NodeKind target);

// Payload of Tweet and Reply nodes.
struct TweetRecord {
  std::string text;
  std::uint64_t reply_count = 0;
  std::uint64_t quote_count = 0;
  std::uint64_t retweet_count = 0;
  std::string language = "en";

  bool operator==(const TweetRecord&) const = default;
};

struct ClaimRecord {
  Label verdict = Label::kMisinformation;

  bool operator==(const ClaimRecord&) const = default;
};

struct UserRecord {
  bool operator==(const UserRecord&) const = default;
};

using NodePayload = std::variant<TweetRecord, ClaimRecord, UserRecord>;

struct Node {
  std::string id;
  NodeKind kind;
  NodePayload payload;
};

struct Edge {
  std::size_t source;
  RelationKind relation;
  std::size_t target;

  bool operator==(const Edge&) const = default;
};

// Typed social graph. Nodes keep insertion order; every mutation validates the
// endpoint and kind constraints, so a constructed graph is always consistent.
class HeteroGraph {
 public:
  // Throws DuplicateNode, or MalformedRow when the payload does not fit the kind.
  std::size_t add_node(Node node);
  // Throws DanglingEdge for unknown ids and MalformedRow for kind violations
  // or a repeated (source, relation, target) triple.
  void add_edge(std::string_view source, RelationKind relation, std::string_view target);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Node& node(std::size_t index) const { return nodes_.at(index); }
  std::optional<std::size_t> find(std::string_view id) const;

  // Node indices of one kind, in insertion order.
  std::span<const std::size_t> nodes_of_kind(NodeKind kind) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::size_t> by_kind_[4];
  std::set<std::tuple<std::size_t, RelationKind, std::size_t>> edge_set_;
};

// Reads nodes.tsv / edges.tsv (header row required in both).
// Errors: MalformedRow(line, reason), DanglingEdge(ids), DuplicateNode(id).
HeteroGraph load_dataset(const std::filesystem::path& node_file,
                         const std::filesystem::path& edge_file);
HeteroGraph load_dataset(std::istream& nodes, std::istream& edges);

void write_nodes_tsv(const HeteroGraph& graph, std::ostream& out);
void write_edges_tsv(const HeteroGraph& graph, std::ostream& out);

std::map<std::string, Split> load_splits(const std::filesystem::path& path);
std::map<std::string, Split> load_splits(std::istream& in);
void write_splits_tsv(const std::map<std::string, Split>& splits, std::ostream& out);

// Tweet labels inherited from the verdicts of the claims each tweet discusses.
std::map<std::string, Label> derive_tweet_labels(const HeteroGraph& graph,
                                                 ConflictPolicy policy = ConflictPolicy::kDrop);

enum class EdgeOrigin : std::uint8_t { kReplyTo, kQuoteOf, kCoUser, kSelfLoop };

std::string_view to_string(EdgeOrigin origin);

// Directed message edge: `target` aggregates from `source`.
struct InteractionEdge {
  std::size_t source;
  std::size_t target;
  EdgeOrigin origin;

  bool operator==(const InteractionEdge&) const = default;
};

// Homogeneous projection over Tweet and Reply nodes used for message passing.
struct InteractionGraph {
  std::vector<std::string> node_ids;
  std::vector<NodeKind> node_kinds;
  std::vector<InteractionEdge> edges;
  std::vector<std::optional<Label>> labels;
  std::vector<Split> splits;

  std::size_t node_count() const { return node_ids.size(); }
  std::optional<std::size_t> find(std::string_view id) const;
};

inline constexpr std::size_t kDefaultCoUserCap = 10;

InteractionGraph build_interaction_graph(const HeteroGraph& graph,
                                         const std::map<std::string, Label>& labels,
                                         const std::map<std::string, Split>& splits,
                                         std::size_t couser_cap = kDefaultCoUserCap);

// One "source<TAB>target<TAB>origin" line per edge, in stored order.
std::string serialize_edges(const InteractionGraph& graph);

// Nodes reachable within k undirected hops (self-loops ignored), sorted
// ascending and including `node`. Throws IndexOutOfRange.
std::vector<std::size_t> k_hop_neighborhood(const InteractionGraph& graph, std::size_t node,
                                            std::size_t k);

}  // namespace modex
