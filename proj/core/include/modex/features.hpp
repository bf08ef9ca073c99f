#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modex/autodiff.hpp"
#include "modex/graph.hpp"

namespace modex {

inline constexpr std::size_t kEmbeddingDim = 768;
inline constexpr std::size_t kShallowDim = 3;
inline constexpr double kStdFloor = 1e-8;
inline constexpr double kPoolingTolerance = 1e-5;

// Column order of every shallow vector.
inline constexpr std::array<std::string_view, kShallowDim> kShallowNames = {
    "replies", "quotes", "retweets"};

enum class ShallowTransform { kRaw, kLog1pZscore };

std::string_view to_string(ShallowTransform transform);
std::optional<ShallowTransform> parse_shallow_transform(std::string_view text);

// Per-dimension statistics of ln(1 + count), fitted on training nodes.
struct ShallowStats {
  std::array<double, kShallowDim> mean{};
  std::array<double, kShallowDim> stddev{1.0, 1.0, 1.0};
};

struct ShallowVector {
  std::array<double, kShallowDim> values{};
  ShallowTransform transform = ShallowTransform::kRaw;
};

// Raw counts in (reply, quote, retweet) order, or (ln(1+c) - mean) / max(std, 1e-8).
// Throws MissingStats when z-scoring without statistics.
ShallowVector encode_shallow(const TweetRecord& record, ShallowTransform transform,
                             const std::optional<ShallowStats>& stats = std::nullopt);

// Population mean/std of ln(1 + count) over `records`. Throws EmptyInput.
ShallowStats fit_shallow_stats(std::span<const TweetRecord* const> records);

struct TokenEmbedding {
  std::string text;
  std::vector<float> vector;

  bool operator==(const TokenEmbedding&) const = default;
};

struct EmbeddingRecord {
  std::string id;
  std::vector<TokenEmbedding> tokens;
  std::vector<float> pooled;

  bool operator==(const EmbeddingRecord&) const = default;
};

using EmbeddingTable = std::map<std::string, EmbeddingRecord>;

// MMEB1 container, little-endian:
//   "MMEB1" | u8 version=1 | u32 dim | u64 count
//   per record: u16 id_len, id | u32 n_tokens |
//               n_tokens x (u16 text_len, text, dim x f32) | dim x f32 pooled
// Loading verifies the magic, the header dim against `expected_dim`, and that
// every pooled vector is the token mean within 1e-5.
// Errors: BadMagic, DimensionMismatch(expected, got), PoolingMismatch(id), ReadFailure.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               std::size_t expected_dim = kEmbeddingDim);
EmbeddingTable load_embeddings(std::istream& in, std::size_t expected_dim = kEmbeddingDim);

// Throws DimensionMismatch(dim, got) for any vector of the wrong length.
void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      std::size_t dim = kEmbeddingDim);
void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records,
                      std::size_t dim = kEmbeddingDim);

// Componentwise mean. Throws EmptyTokenList.
std::vector<double> pool_tokens(std::span<const std::vector<double>> tokens);

// Deterministic bag-of-words stand-in for the transformer encoder: each
// lowercased whitespace token goes to bucket fnv1a64(token) % dim and the
// count vector is L2-normalised.
class HashedEncoder {
 public:
  explicit HashedEncoder(std::size_t dim = kEmbeddingDim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t bucket(std::string_view token) const;
  static std::vector<std::string> tokenize(std::string_view text);

  std::vector<double> encode(std::string_view text) const;
  // Token-level view whose row mean equals encode(text). Empty for empty text.
  EmbeddingRecord encode_record(std::string_view id, std::string_view text) const;

 private:
  std::size_t dim_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Token texts and their vectors (one row per token) for one node.
struct TokenMatrix {
  std::vector<std::string> texts;
  Tensor vectors;
};

struct FeatureSet {
  Tensor shallow;      // n x 3
  Tensor text_pooled;  // n x 768
  std::vector<std::optional<TokenMatrix>> text_tokens;
  std::optional<Tensor> multimodal;  // n x 6, filled from a trained model

  std::size_t node_count() const { return shallow.rows(); }
};

// Stacks per-node features in InteractionGraph order. Nodes without an
// embedding record are encoded by `fallback`; pooled text is recomputed as the
// token mean in double precision whenever tokens are present.
// Errors: MissingEmbedding(id) when no fallback is given, UnknownNode.
FeatureSet assemble_features(const InteractionGraph& graph,
                             const std::map<std::string, ShallowVector>& shallow,
                             const EmbeddingTable& embeddings,
                             const HeteroGraph& source,
                             const HashedEncoder* fallback = nullptr);

}  // namespace modex
