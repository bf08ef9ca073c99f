#include <gtest/gtest.h>

#include <sstream>

#include "modex/dataset.hpp"
#include "modex/error.hpp"
#include "modex/features.hpp"
#include "test_support.hpp"

using namespace modex;

namespace {

std::vector<float> random_floats(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return v;
}

EmbeddingRecord record_of(const std::string& id, std::vector<std::vector<float>> tokens) {
  EmbeddingRecord r;
  r.id = id;
  r.pooled.assign(tokens.empty() ? kEmbeddingDim : tokens[0].size(), 0.0f);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    for (std::size_t d = 0; d < tokens[t].size(); ++d) r.pooled[d] += tokens[t][d];
  }
  for (float& v : r.pooled) v = tokens.empty() ? 0.0f : v / static_cast<float>(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    r.tokens.push_back({"tok" + std::to_string(t), std::move(tokens[t])});
  }
  return r;
}

EmbeddingTable round_trip(const std::vector<EmbeddingRecord>& records) {
  std::stringstream buf;
  write_embeddings(buf, records);
  return load_embeddings(buf);
}

}  // namespace

TEST(EncodeShallow, RawCountsInFixedOrder) {
  const TweetRecord first{"", 42, 7, 26, "en"};
  EXPECT_EQ(encode_shallow(first, ShallowTransform::kRaw).values,
            (std::array<double, 3>{42.0, 7.0, 26.0}));
  const TweetRecord second{"", 9, 2, 11, "en"};
  EXPECT_EQ(encode_shallow(second, ShallowTransform::kRaw).values,
            (std::array<double, 3>{9.0, 2.0, 11.0}));
}

TEST(EncodeShallow, ZscoreOfZeroCounts) {
  ShallowStats stats;
  const auto v = encode_shallow(TweetRecord{}, ShallowTransform::kLog1pZscore, stats);
  EXPECT_EQ(v.values, (std::array<double, 3>{0.0, 0.0, 0.0}));
}

TEST(EncodeShallow, ZscoreNeedsStats) {
  try {
    encode_shallow(TweetRecord{}, ShallowTransform::kLog1pZscore);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingStats);
  }
}

TEST(EncodeShallow, FittedTransformIsStandardisedOnTrainingSet) {
  Rng rng(11);
  std::vector<TweetRecord> records(200);
  for (auto& r : records) {
    r.reply_count = rng.poisson(4.0);
    r.quote_count = rng.poisson(1.0);
    r.retweet_count = rng.poisson(20.0);
  }
  std::vector<const TweetRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const ShallowStats stats = fit_shallow_stats(ptrs);
  std::array<double, 3> mean{}, sq{};
  for (const auto& r : records) {
    const auto v = encode_shallow(r, ShallowTransform::kLog1pZscore, stats).values;
    for (int d = 0; d < 3; ++d) {
      mean[d] += v[d];
      sq[d] += v[d] * v[d];
    }
  }
  for (int d = 0; d < 3; ++d) {
    mean[d] /= records.size();
    EXPECT_LE(std::abs(mean[d]), 1e-6);
    EXPECT_NEAR(std::sqrt(sq[d] / records.size() - mean[d] * mean[d]), 1.0, 1e-6);
  }
}

TEST(EncodeShallow, ConstantColumnUsesStdFloor) {
  std::vector<TweetRecord> records(3, TweetRecord{"", 5, 5, 5, "en"});
  std::vector<const TweetRecord*> ptrs;
  for (const auto& r : records) ptrs.push_back(&r);
  const ShallowStats stats = fit_shallow_stats(ptrs);
  const auto v = encode_shallow(records[0], ShallowTransform::kLog1pZscore, stats).values;
  for (double x : v) EXPECT_TRUE(std::isfinite(x));
  EXPECT_THROW(fit_shallow_stats({}), Error);
}

TEST(Embeddings, SingleTokenPooledIsThatToken) {
  Rng rng(1);
  const auto v = random_floats(kEmbeddingDim, rng);
  EmbeddingRecord r{"a", {{"hello", v}}, v};
  const auto table = round_trip({r});
  EXPECT_EQ(table.at("a").pooled, v);
}

TEST(Embeddings, RoundTripIsBitwise) {
  Rng rng(2);
  std::vector<EmbeddingRecord> records = {
      record_of("x", {random_floats(kEmbeddingDim, rng)}),
      record_of("y", {random_floats(kEmbeddingDim, rng), random_floats(kEmbeddingDim, rng)}),
      record_of("z", {})};
  const auto table = round_trip(records);
  ASSERT_EQ(table.size(), 3u);
  for (const auto& r : records) EXPECT_EQ(table.at(r.id), r);
}

TEST(Embeddings, WrongTokenDimension) {
  Rng rng(3);
  auto r = record_of("a", {random_floats(512, rng)});
  std::stringstream buf;
  try {
    write_embeddings(buf, std::vector<EmbeddingRecord>{r});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
    EXPECT_NE(std::string(e.what()).find("DimensionMismatch(768, 512)"), std::string::npos);
  }
  // A 512-dim file read where 768 is expected.
  std::stringstream small;
  write_embeddings(small, std::vector<EmbeddingRecord>{r}, 512);
  try {
    load_embeddings(small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Embeddings, BadMagicAndPoolingMismatch) {
  std::stringstream junk("MMEB2xxxxxxxxxxxxxxx");
  try {
    load_embeddings(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadMagic);
  }
  Rng rng(4);
  auto r = record_of("p", {random_floats(kEmbeddingDim, rng), random_floats(kEmbeddingDim, rng)});
  r.pooled[5] += 1e-3f;
  std::stringstream buf;
  write_embeddings(buf, std::vector<EmbeddingRecord>{r});
  try {
    load_embeddings(buf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPoolingMismatch);
    EXPECT_NE(std::string(e.what()).find("p"), std::string::npos);
  }
}

TEST(Embeddings, TruncatedFile) {
  Rng rng(5);
  std::stringstream buf;
  write_embeddings(buf, std::vector<EmbeddingRecord>{record_of("a", {random_floats(kEmbeddingDim, rng)})});
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 10);
  std::stringstream cut(bytes);
  EXPECT_THROW(load_embeddings(cut), Error);
}

TEST(PoolTokens, Cases) {
  Rng rng(6);
  std::vector<double> v(kEmbeddingDim);
  for (double& x : v) x = rng.normal();
  EXPECT_EQ(pool_tokens(std::vector<std::vector<double>>{v}), v);
  std::vector<double> neg = v;
  for (double& x : neg) x = -x;
  for (double x : pool_tokens(std::vector<std::vector<double>>{v, neg})) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(pool_tokens(std::vector<std::vector<double>>{}), Error);

  std::vector<std::vector<double>> five(5, std::vector<double>(kEmbeddingDim));
  for (auto& t : five) {
    for (double& x : t) x = rng.normal();
  }
  const auto pooled = pool_tokens(five);
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
    long double s = 0.0L;
    for (const auto& t : five) s += t[d];
    EXPECT_NEAR(pooled[d], static_cast<double>(s / 5.0L), 1e-15);
  }
}

TEST(HashedEncoder, EmptyAndDeterministic) {
  const HashedEncoder enc;
  for (double x : enc.encode("")) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(enc.encode("Vaccines work"), enc.encode("Vaccines work"));
  EXPECT_EQ(enc.encode("Vaccines WORK"), enc.encode("vaccines work"));
}

TEST(HashedEncoder, TwoBucketsUnitNorm) {
  const HashedEncoder enc;
  // Independent FNV-1a 64: offset basis 0xcbf29ce484222325, prime 0x100000001b3.
  auto fnv = [](const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  };
  const std::size_t ba = fnv("a") % kEmbeddingDim;
  const std::size_t bb = fnv("b") % kEmbeddingDim;
  ASSERT_NE(ba, bb);
  EXPECT_EQ(enc.bucket("a"), ba);
  const auto v = enc.encode("a b a");
  std::size_t nonzero = 0;
  double norm = 0.0;
  for (double x : v) {
    nonzero += x != 0.0;
    norm += x * x;
  }
  EXPECT_EQ(nonzero, 2u);
  EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-6);
  EXPECT_NEAR(v[ba], 2.0 / std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(v[bb], 1.0 / std::sqrt(5.0), 1e-12);
}

TEST(HashedEncoder, TokenMeanEqualsEncoding) {
  const HashedEncoder enc;
  const auto rec = enc.encode_record("id", "the cure is a hoax the end");
  ASSERT_EQ(rec.tokens.size(), 7u);
  const auto v = enc.encode("the cure is a hoax the end");
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
    double s = 0.0;
    for (const auto& t : rec.tokens) s += t.vector[d];
    EXPECT_NEAR(s / 7.0, v[d], 1e-6);
  }
}

TEST(AssembleFeatures, FallbackAndMissingEmbedding) {
  HeteroGraph g;
  g.add_node({"t1", NodeKind::kTweet, TweetRecord{"", 1, 2, 3, "en"}});
  g.add_node({"t2", NodeKind::kTweet, TweetRecord{"same words", 0, 0, 0, "en"}});
  g.add_node({"t3", NodeKind::kTweet, TweetRecord{"same words", 0, 0, 0, "en"}});
  const auto ig = build_interaction_graph(g, {}, {});
  std::map<std::string, ShallowVector> shallow;
  for (const auto& id : ig.node_ids) {
    shallow[id] = encode_shallow(std::get<TweetRecord>(g.node(*g.find(id)).payload), ShallowTransform::kRaw);
  }
  const HashedEncoder enc;
  const FeatureSet f = assemble_features(ig, shallow, {}, g, &enc);
  ASSERT_EQ(f.node_count(), 3u);
  EXPECT_EQ(f.shallow(0, 2), 3.0);
  for (double x : f.text_pooled.row(0)) EXPECT_EQ(x, 0.0);
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) EXPECT_EQ(f.text_pooled(1, d), f.text_pooled(2, d));
  EXPECT_FALSE(f.multimodal.has_value());

  try {
    assemble_features(ig, shallow, {}, g, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingEmbedding);
    EXPECT_NE(std::string(e.what()).find("t1"), std::string::npos);
  }
}

TEST(AssembleFeatures, UsesProvidedEmbeddings) {
  HeteroGraph g;
  g.add_node({"t", NodeKind::kTweet, TweetRecord{"x y", 0, 0, 0, "en"}});
  const auto ig = build_interaction_graph(g, {}, {});
  Rng rng(8);
  EmbeddingTable table;
  table["t"] = record_of("t", {random_floats(kEmbeddingDim, rng), random_floats(kEmbeddingDim, rng)});
  std::map<std::string, ShallowVector> shallow{{"t", ShallowVector{}}};
  const FeatureSet f = assemble_features(ig, shallow, table, g, nullptr);
  ASSERT_TRUE(f.text_tokens[0].has_value());
  EXPECT_EQ(f.text_tokens[0]->texts.size(), 2u);
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
    const double mean = (static_cast<double>(table["t"].tokens[0].vector[d]) +
                         static_cast<double>(table["t"].tokens[1].vector[d])) / 2.0;
    EXPECT_DOUBLE_EQ(f.text_pooled(0, d), mean);
  }
}
