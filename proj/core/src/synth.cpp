#include "modex/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "modex/error.hpp"
#include "modex/random.hpp"

namespace modex {
namespace {

constexpr std::array<const char*, 16> kMisinfoWords = {
    "miracle", "cure",     "hoax",    "exposed", "banned",  "secret",   "wakeup",    "censored",
    "shocking", "coverup", "bioweapon", "microchip", "plandemic", "suppressed", "leaked", "truth"};
constexpr std::array<const char*, 16> kFactWords = {
    "study",   "report",  "official", "data",     "confirmed", "research",  "authorities", "trial",
    "experts", "analysis", "guidance", "published", "cases",    "hospital", "measures",   "update"};
constexpr std::array<const char*, 24> kNeutralWords = {
    "the",  "people", "today", "news",  "covid", "virus",   "world",  "says",
    "new",  "week",   "city",  "video", "watch", "now",     "time",   "year",
    "via",  "country", "share", "#coronavirus", "#covid19", "this", "about", "after"};

// Word identity and per-token context live on a much smaller scale than the
// class direction; otherwise a 768 -> 3 projection trained for a fixed 800
// epochs memorises the training tweets through them.
constexpr double kPolarityScale = 2.5;
constexpr double kBaseScale = 0.005;
constexpr double kContextNoise = 0.0005;

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%04zu", prefix, i);
  return buf;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Fixed word vectors: a random base plus polarity * scale * u along one shared
// unit direction u (+1 misinformation lexicon, -1 fact lexicon, 0 neutral).
class Vocabulary {
 public:
  explicit Vocabulary(Rng& rng) {
    std::vector<double> u(kEmbeddingDim);
    double norm = 0.0;
    for (double& v : u) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;
    auto add = [&](const char* word, double polarity) {
      std::vector<double> vec(kEmbeddingDim);
      for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
        vec[d] = kBaseScale * rng.normal() + polarity * kPolarityScale * u[d];
      }
      vectors_.emplace(word, std::move(vec));
    };
    for (const char* w : kMisinfoWords) add(w, 1.0);
    for (const char* w : kFactWords) add(w, -1.0);
    for (const char* w : kNeutralWords) add(w, 0.0);
  }

  const std::vector<double>& operator[](const std::string& word) const { return vectors_.at(word); }

 private:
  std::map<std::string, std::vector<double>> vectors_;
};

EmbeddingRecord embed(const std::string& id, const std::vector<std::string>& words,
                      const Vocabulary& vocab, Rng& rng) {
  EmbeddingRecord record;
  record.id = id;
  std::vector<double> mean(kEmbeddingDim, 0.0);
  for (const auto& w : words) {
    TokenEmbedding token;
    token.text = w;
    token.vector.resize(kEmbeddingDim);
    const auto& base = vocab[w];
    for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
      token.vector[d] = static_cast<float>(base[d] + kContextNoise * rng.normal());
      mean[d] += token.vector[d];
    }
    record.tokens.push_back(std::move(token));
  }
  record.pooled.resize(kEmbeddingDim);
  for (std::size_t d = 0; d < kEmbeddingDim; ++d) {
    record.pooled[d] =
        words.empty() ? 0.0f : static_cast<float>(mean[d] / static_cast<double>(words.size()));
  }
  return record;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::string_view to_string(SignalPlacement placement) {
  switch (placement) {
    case SignalPlacement::kGraphOnly: return "graph";
    case SignalPlacement::kTextOnly: return "text";
    case SignalPlacement::kBoth: return "both";
  }
  return "?";
}

std::optional<SignalPlacement> parse_signal_placement(std::string_view text) {
  if (text == "graph" || text == "GraphOnly") return SignalPlacement::kGraphOnly;
  if (text == "text" || text == "TextOnly") return SignalPlacement::kTextOnly;
  if (text == "both" || text == "Both") return SignalPlacement::kBoth;
  return std::nullopt;
}

SynthBundle synth_generate(const SynthSpec& spec) {
  if (spec.nodes < 20) {
    throw Error(ErrorCode::kSpecTooSmall,
                "SpecTooSmall: need at least 20 nodes, got " + std::to_string(spec.nodes));
  }
  if (!(spec.class_balance > 0.0 && spec.class_balance < 1.0) || spec.edge_density < 0.0 ||
      spec.homophily < 0.0 || spec.homophily > 1.0 || spec.signal_strength < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "synth ratios out of range");
  }
  Rng rng(spec.seed);
  const Vocabulary vocab(rng);
  const bool graph_signal = spec.placement != SignalPlacement::kTextOnly;
  const bool text_signal = spec.placement != SignalPlacement::kGraphOnly;
  const double half_gap = 0.5 * spec.signal_strength;

  SynthBundle out;
  HeteroGraph& g = out.graph;

  const std::size_t n_tweets = spec.nodes;
  const std::size_t n_claims = std::max<std::size_t>(2, n_tweets / 20);
  const std::size_t n_users = std::max<std::size_t>(4, n_tweets / 8);
  const std::size_t n_replies = n_tweets / 4;

  std::vector<Label> claim_verdict(n_claims);
  for (std::size_t c = 0; c < n_claims; ++c) {
    claim_verdict[c] = c % 2 == 0 ? Label::kMisinformation : Label::kFactual;
    g.add_node({make_id('c', c), NodeKind::kClaim, ClaimRecord{claim_verdict[c]}});
  }

  std::vector<Label> leaning(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    leaning[u] = rng.bernoulli(spec.class_balance) ? Label::kMisinformation : Label::kFactual;
    g.add_node({make_id('u', u), NodeKind::kUser, UserRecord{}});
  }
  auto pick_user = [&](Label cls) {
    std::vector<std::size_t> pool;
    if (rng.bernoulli(spec.homophily)) {
      for (std::size_t u = 0; u < n_users; ++u) {
        if (leaning[u] == cls) pool.push_back(u);
      }
    }
    if (pool.empty()) return static_cast<std::size_t>(rng.below(n_users));
    return pool[rng.below(pool.size())];
  };

  std::vector<Label> tweet_label(n_tweets);
  std::vector<std::vector<std::string>> tweet_words(n_tweets);
  for (std::size_t t = 0; t < n_tweets; ++t) {
    const Label y = rng.bernoulli(spec.class_balance) ? Label::kMisinformation : Label::kFactual;
    tweet_label[t] = y;
    const double sign = y == Label::kMisinformation ? 1.0 : -1.0;

    const double g_latent = (graph_signal ? sign * half_gap : 0.0) + rng.normal();
    TweetRecord record;
    record.reply_count = rng.poisson(std::exp(1.2 + 0.7 * g_latent + 0.15 * rng.normal()));
    record.quote_count = rng.poisson(std::exp(0.3 + 0.7 * g_latent + 0.15 * rng.normal()));
    record.retweet_count = rng.poisson(std::exp(2.0 + 0.7 * g_latent + 0.15 * rng.normal()));

    const double t_latent = (text_signal ? sign * half_gap : 0.0) + rng.normal();
    const double p_misinfo_word = 1.0 / (1.0 + std::exp(-1.7 * t_latent));
    const std::size_t length = 6 + rng.below(7);
    const std::size_t lexical = 3 + rng.below(3);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < length; ++k) {
      if (k < lexical) {
        words.emplace_back(rng.bernoulli(p_misinfo_word) ? kMisinfoWords[rng.below(kMisinfoWords.size())]
                                                         : kFactWords[rng.below(kFactWords.size())]);
      } else {
        words.emplace_back(kNeutralWords[rng.below(kNeutralWords.size())]);
      }
    }
    shuffle(words, rng);
    record.text = join(words);
    tweet_words[t] = std::move(words);
    g.add_node({make_id('t', t), NodeKind::kTweet, std::move(record)});
  }

  std::vector<std::vector<std::string>> reply_words(n_replies);
  std::vector<std::size_t> reply_parent(n_replies);
  for (std::size_t r = 0; r < n_replies; ++r) {
    TweetRecord record;
    record.reply_count = rng.poisson(0.5);
    record.quote_count = rng.poisson(0.2);
    record.retweet_count = rng.poisson(0.8);
    const std::size_t length = 3 + rng.below(4);
    for (std::size_t k = 0; k < length; ++k) {
      reply_words[r].emplace_back(kNeutralWords[rng.below(kNeutralWords.size())]);
    }
    record.text = join(reply_words[r]);
    reply_parent[r] = rng.below(n_tweets);
    g.add_node({make_id('r', r), NodeKind::kReply, std::move(record)});
  }

  // Discusses: each tweet points at one claim carrying its own verdict.
  for (std::size_t t = 0; t < n_tweets; ++t) {
    std::vector<std::size_t> matching;
    for (std::size_t c = 0; c < n_claims; ++c) {
      if (claim_verdict[c] == tweet_label[t]) matching.push_back(c);
    }
    g.add_edge(make_id('t', t), RelationKind::kDiscusses, make_id('c', matching[rng.below(matching.size())]));
    out.labels.emplace(make_id('t', t), tweet_label[t]);
  }
  for (std::size_t t = 0; t < n_tweets; ++t) {
    g.add_edge(make_id('u', pick_user(tweet_label[t])), RelationKind::kPosted, make_id('t', t));
  }
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t t = 0; t < n_tweets; ++t) {
    by_class[static_cast<std::size_t>(tweet_label[t])].push_back(t);
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    const std::uint64_t count = rng.poisson(spec.edge_density * static_cast<double>(n_tweets));
    std::set<std::size_t> chosen;
    for (std::uint64_t k = 0; k < count; ++k) {
      const auto& own = by_class[static_cast<std::size_t>(leaning[u])];
      const std::size_t t = (rng.bernoulli(spec.homophily) && !own.empty())
                                ? own[rng.below(own.size())]
                                : static_cast<std::size_t>(rng.below(n_tweets));
      chosen.insert(t);
    }
    for (std::size_t t : chosen) {
      g.add_edge(make_id('u', u), RelationKind::kRetweeted, make_id('t', t));
    }
  }
  for (std::size_t t = 0; t < n_tweets; ++t) {
    if (rng.bernoulli(0.2)) {
      g.add_edge(make_id('t', t), RelationKind::kMentions, make_id('u', rng.below(n_users)));
    }
  }
  for (std::size_t r = 0; r < n_replies; ++r) {
    const RelationKind rel = rng.bernoulli(0.2) ? RelationKind::kQuoteOf : RelationKind::kReplyTo;
    g.add_edge(make_id('r', r), rel, make_id('t', reply_parent[r]));
    g.add_edge(make_id('u', rng.below(n_users)), RelationKind::kPosted, make_id('r', r));
  }

  std::vector<std::size_t> order(n_tweets);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  const std::size_t n_train = n_tweets * 6 / 10;
  const std::size_t n_val = n_tweets * 2 / 10;
  for (std::size_t k = 0; k < n_tweets; ++k) {
    const Split s = k < n_train ? Split::kTrain : k < n_train + n_val ? Split::kVal : Split::kTest;
    out.splits.emplace(make_id('t', order[k]), s);
  }

  for (std::size_t t = 0; t < n_tweets; ++t) {
    out.embeddings.push_back(embed(make_id('t', t), tweet_words[t], vocab, rng));
  }
  for (std::size_t r = 0; r < n_replies; ++r) {
    out.embeddings.push_back(embed(make_id('r', r), reply_words[r], vocab, rng));
  }
  return out;
}

void write_bundle(const SynthBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::kWriteFailure, "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("nodes.tsv");
    write_nodes_tsv(bundle.graph, f);
  }
  {
    auto f = open("edges.tsv");
    write_edges_tsv(bundle.graph, f);
  }
  {
    auto f = open("splits.tsv");
    write_splits_tsv(bundle.splits, f);
  }
  {
    auto f = open("labels.tsv");
    f << "id\tlabel\n";
    for (const auto& [id, label] : bundle.labels) f << id << '\t' << static_cast<int>(label) << '\n';
  }
  write_embeddings(dir / "embeddings.mmeb", bundle.embeddings);
}

}  // namespace modex
