#include "modex/features.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "modex/error.hpp"

namespace modex {
namespace {

static_assert(std::endian::native == std::endian::little,
              "MMEB1 I/O assumes a little-endian host");

constexpr char kMagic[5] = {'M', 'M', 'E', 'B', '1'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorCode::kReadFailure, "unexpected end of embedding file");
  }
  return value;
}

std::string get_string(std::istream& in, std::size_t length) {
  std::string s(length, '\0');
  if (length > 0 && !in.read(s.data(), static_cast<std::streamsize>(length))) {
    throw Error(ErrorCode::kReadFailure, "unexpected end of embedding file");
  }
  return s;
}

std::vector<float> get_floats(std::istream& in, std::size_t n) {
  std::vector<float> v(n);
  if (n > 0 && !in.read(reinterpret_cast<char*>(v.data()),
                        static_cast<std::streamsize>(n * sizeof(float)))) {
    throw Error(ErrorCode::kReadFailure, "unexpected end of embedding file");
  }
  return v;
}

void put_string16(std::ostream& out, const std::string& s) {
  if (s.size() > 0xFFFF) throw Error(ErrorCode::kInvalidArgument, "string longer than 65535 bytes");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw Error(ErrorCode::kDimensionMismatch, "DimensionMismatch(" + std::to_string(expected) +
                                                   ", " + std::to_string(got) + ")");
  }
}

TokenMatrix token_matrix(const EmbeddingRecord& record) {
  TokenMatrix m;
  const std::size_t dim = record.pooled.size();
  m.vectors = Tensor(record.tokens.size(), dim);
  for (std::size_t t = 0; t < record.tokens.size(); ++t) {
    m.texts.push_back(record.tokens[t].text);
    auto row = m.vectors.row(t);
    for (std::size_t d = 0; d < dim; ++d) row[d] = record.tokens[t].vector[d];
  }
  return m;
}

// Row mean accumulated in row order; matches mean_rows on the tape bit for bit.
std::vector<double> row_mean(const Tensor& rows) {
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(rows.rows());
  for (double& v : mean) v *= inv;
  return mean;
}

}  // namespace

std::string_view to_string(ShallowTransform transform) {
  return transform == ShallowTransform::kRaw ? "raw" : "log1p_zscore";
}

std::optional<ShallowTransform> parse_shallow_transform(std::string_view text) {
  if (text == "raw") return ShallowTransform::kRaw;
  if (text == "log1p_zscore") return ShallowTransform::kLog1pZscore;
  return std::nullopt;
}

ShallowVector encode_shallow(const TweetRecord& record, ShallowTransform transform,
                             const std::optional<ShallowStats>& stats) {
  const std::array<double, kShallowDim> counts = {static_cast<double>(record.reply_count),
                                                  static_cast<double>(record.quote_count),
                                                  static_cast<double>(record.retweet_count)};
  ShallowVector out;
  out.transform = transform;
  if (transform == ShallowTransform::kRaw) {
    out.values = counts;
    return out;
  }
  if (!stats) throw Error(ErrorCode::kMissingStats, "log1p_zscore requires training statistics");
  for (std::size_t d = 0; d < kShallowDim; ++d) {
    out.values[d] = (std::log1p(counts[d]) - stats->mean[d]) / std::max(stats->stddev[d], kStdFloor);
  }
  return out;
}

ShallowStats fit_shallow_stats(std::span<const TweetRecord* const> records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "no training records for shallow statistics");
  ShallowStats stats;
  const double n = static_cast<double>(records.size());
  for (std::size_t d = 0; d < kShallowDim; ++d) {
    auto value = [d](const TweetRecord* r) {
      const std::uint64_t c = d == 0 ? r->reply_count : d == 1 ? r->quote_count : r->retweet_count;
      return std::log1p(static_cast<double>(c));
    };
    double mean = 0.0;
    for (const TweetRecord* r : records) mean += value(r);
    mean /= n;
    double var = 0.0;
    for (const TweetRecord* r : records) {
      const double diff = value(r) - mean;
      var += diff * diff;
    }
    stats.mean[d] = mean;
    stats.stddev[d] = std::sqrt(var / n);
  }
  return stats;
}

EmbeddingTable load_embeddings(std::istream& in, std::size_t expected_dim) {
  char magic[5];
  if (!in.read(magic, 5) || !std::equal(magic, magic + 5, kMagic)) {
    throw Error(ErrorCode::kBadMagic, "not an MMEB1 embedding file");
  }
  const auto version = get<std::uint8_t>(in);
  if (version != kVersion) {
    throw Error(ErrorCode::kBadMagic, "unsupported MMEB version " + std::to_string(version));
  }
  const std::size_t dim = get<std::uint32_t>(in);
  check_dim(expected_dim, dim);
  const std::uint64_t count = get<std::uint64_t>(in);

  EmbeddingTable table;
  for (std::uint64_t r = 0; r < count; ++r) {
    EmbeddingRecord record;
    record.id = get_string(in, get<std::uint16_t>(in));
    const std::uint32_t n_tokens = get<std::uint32_t>(in);
    record.tokens.reserve(n_tokens);
    for (std::uint32_t t = 0; t < n_tokens; ++t) {
      TokenEmbedding token;
      token.text = get_string(in, get<std::uint16_t>(in));
      token.vector = get_floats(in, dim);
      record.tokens.push_back(std::move(token));
    }
    record.pooled = get_floats(in, dim);

    if (!record.tokens.empty()) {
      for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const auto& token : record.tokens) mean += token.vector[d];
        mean /= static_cast<double>(record.tokens.size());
        if (std::abs(mean - static_cast<double>(record.pooled[d])) > kPoolingTolerance) {
          throw Error(ErrorCode::kPoolingMismatch,
                      "PoolingMismatch(" + record.id + "): pooled vector is not the token mean");
        }
      }
    }
    const std::string id = record.id;
    if (!table.emplace(id, std::move(record)).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate embedding id '" + id + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kReadFailure, "trailing bytes after the last embedding record");
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kReadFailure, "cannot open " + path.string());
  return load_embeddings(in, expected_dim);
}

void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records,
                      std::size_t dim) {
  for (const auto& record : records) {
    check_dim(dim, record.pooled.size());
    for (const auto& token : record.tokens) check_dim(dim, token.vector.size());
  }
  out.write(kMagic, 5);
  put<std::uint8_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put<std::uint64_t>(out, records.size());
  for (const auto& record : records) {
    put_string16(out, record.id);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(record.tokens.size()));
    for (const auto& token : record.tokens) {
      put_string16(out, token.text);
      out.write(reinterpret_cast<const char*>(token.vector.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
    }
    out.write(reinterpret_cast<const char*>(record.pooled.data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::kWriteFailure, "failed writing embedding stream");
}

void write_embeddings(const std::filesystem::path& path, std::span<const EmbeddingRecord> records,
                      std::size_t dim) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kWriteFailure, "cannot open " + path.string() + " for writing");
  write_embeddings(out, records, dim);
}

std::vector<double> pool_tokens(std::span<const std::vector<double>> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyTokenList, "cannot pool an empty token list");
  const std::size_t dim = tokens.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& token : tokens) {
    check_dim(dim, token.size());
    for (std::size_t d = 0; d < dim; ++d) mean[d] += token[d];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : mean) v *= inv;
  return mean;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::size_t HashedEncoder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(fnv1a64(token) % dim_);
}

std::vector<std::string> HashedEncoder::tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> HashedEncoder::encode(std::string_view text) const {
  std::vector<double> counts(dim_, 0.0);
  for (const auto& token : tokenize(text)) counts[bucket(token)] += 1.0;
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& c : counts) c /= norm;
  }
  return counts;
}

EmbeddingRecord HashedEncoder::encode_record(std::string_view id, std::string_view text) const {
  EmbeddingRecord record;
  record.id = std::string(id);
  const auto pooled = encode(text);
  record.pooled.assign(pooled.begin(), pooled.end());
  const auto tokens = tokenize(text);
  if (tokens.empty()) return record;
  std::vector<double> counts(dim_, 0.0);
  for (const auto& token : tokens) counts[bucket(token)] += 1.0;
  double norm = 0.0;
  for (double c : counts) norm += c * c;
  const double scale = static_cast<double>(tokens.size()) / std::sqrt(norm);
  for (const auto& token : tokens) {
    TokenEmbedding t;
    t.text = token;
    t.vector.assign(dim_, 0.0f);
    t.vector[bucket(token)] = static_cast<float>(scale);
    record.tokens.push_back(std::move(t));
  }
  return record;
}

FeatureSet assemble_features(const InteractionGraph& graph,
                             const std::map<std::string, ShallowVector>& shallow,
                             const EmbeddingTable& embeddings, const HeteroGraph& source,
                             const HashedEncoder* fallback) {
  const std::size_t n = graph.node_count();
  FeatureSet features;
  features.shallow = Tensor(n, kShallowDim);
  features.text_pooled = Tensor(n, kEmbeddingDim);
  features.text_tokens.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = graph.node_ids[i];
    const auto sv = shallow.find(id);
    if (sv == shallow.end()) {
      throw Error(ErrorCode::kMissingEmbedding, "no shallow features for node '" + id + "'");
    }
    std::copy(sv->second.values.begin(), sv->second.values.end(), features.shallow.row(i).begin());

    const EmbeddingRecord* record = nullptr;
    EmbeddingRecord generated;
    if (const auto it = embeddings.find(id); it != embeddings.end()) {
      record = &it->second;
      check_dim(kEmbeddingDim, record->pooled.size());
    } else if (fallback != nullptr) {
      const auto index = source.find(id);
      if (!index) throw Error(ErrorCode::kUnknownNode, "node '" + id + "' not in source graph");
      const auto& tweet = std::get<TweetRecord>(source.node(*index).payload);
      if (fallback->dim() != kEmbeddingDim) check_dim(kEmbeddingDim, fallback->dim());
      generated = fallback->encode_record(id, tweet.text);
      record = &generated;
    } else {
      throw Error(ErrorCode::kMissingEmbedding, "MissingEmbedding(" + id + ")");
    }

    auto pooled = features.text_pooled.row(i);
    if (record->tokens.empty()) {
      for (std::size_t d = 0; d < kEmbeddingDim; ++d) pooled[d] = record->pooled[d];
      continue;
    }
    TokenMatrix tokens = token_matrix(*record);
    const auto mean = row_mean(tokens.vectors);
    std::copy(mean.begin(), mean.end(), pooled.begin());
    features.text_tokens[i] = std::move(tokens);
  }
  return features;
}

}  // namespace modex
