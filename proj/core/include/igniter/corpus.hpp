#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "igniter/errors.hpp"

namespace igniter {

using UserId = std::int32_t;
using NewsId = std::int32_t;
using Timestamp = std::int64_t;  // seconds since epoch

/// Sentinel for padded slots in fixed-size sequences.
inline constexpr UserId kPadUser = -1;

/// Directed follower graph with external ids remapped to dense [0, n).
/// Edge (a, b) means "a follows b".
struct FollowerGraph {
  int node_count = 0;
  std::vector<std::pair<UserId, UserId>> edges;       // deduplicated, sorted
  std::vector<std::int64_t> external_ids;             // dense -> external
  std::unordered_map<std::int64_t, UserId> user_id_index;  // external -> dense

  // CSR over `edges` for O(log deg) membership tests.
  std::vector<std::int64_t> adj_offsets;
  std::vector<UserId> adj;

  bool has_edge(UserId follower, UserId followee) const;
  UserId intern(std::int64_t external_id);  // registers id if unseen
  void finalize();                          // sorts/dedups edges, builds CSR
};

/// Time-ordered adoption sequence of one news item; events[0] is the initiator.
struct Cascade {
  NewsId news_id = -1;
  std::vector<std::pair<UserId, Timestamp>> events;  // sorted by time, unique users

  UserId initiator() const { return events.front().first; }
  Timestamp start_time() const { return events.front().second; }
};

struct NewsItem {
  NewsId news_id = -1;
  std::vector<std::int32_t> title_tokens;  // padded/truncated to n_max
  Timestamp publish_time = 0;
};

/// Per-time-unit adoption counts since publication.
struct AdoptionHistogram {
  std::vector<std::int64_t> bucket_counts;
  Timestamp t0 = 0;
  std::int64_t unit_seconds = 3600;
};

struct Adoption {
  NewsId news = -1;
  Timestamp t = 0;
};

/// Adoption history of one (pseudo-)user inside one observation window.
struct UserHistory {
  UserId user_id = -1;       // dense id; shared by all pseudo-users of a source user
  std::vector<Adoption> adoptions;  // time-ordered
  Timestamp window_start = 0;
  Timestamp window_end = 0;
};

/// Reference to one positive adoption event: histories[history_idx].adoptions[adoption_idx].
struct AdoptionRef {
  std::int32_t history_idx = -1;
  std::int32_t adoption_idx = -1;
  Timestamp t = 0;
};

struct DatasetSplit {
  std::vector<AdoptionRef> train;
  std::vector<AdoptionRef> validation;
  std::vector<AdoptionRef> test;
  int window_days = 90;
};

/// Snapshot of a news item as seen at one moment: title, diffusion prefix,
/// adoption histogram.
struct NewsState {
  NewsId news_id = -1;
  std::vector<std::int32_t> title_tokens;
  std::vector<UserId> diffusion;  // users adopted up to observe_until, cascade order
  AdoptionHistogram hist;
  Timestamp observe_until = 0;
};

struct LoadStats {
  std::int64_t skipped_cascades = 0;   // empty or fully-dropped event lists
  std::int64_t dropped_events = 0;     // unknown user ids
  std::int64_t dropped_duplicates = 0; // repeat users within one cascade
  std::int64_t skipped_news = 0;       // cascade lines whose news id has no title
};

// ---------------------------------------------------------------------------
// Vocabulary / word vectors
// ---------------------------------------------------------------------------

struct TokenIndex {
  std::unordered_map<std::string, std::int32_t> map;
  std::int32_t pad_id = 0;
  std::int32_t oov_id = 0;

  std::int32_t lookup(const std::string& token) const {
    auto it = map.find(token);
    return it == map.end() ? oov_id : it->second;
  }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Parses "follower followee" lines ('#' comments allowed); drops self-loops,
/// dedups edges, assigns dense ids in order of first appearance.
FollowerGraph load_follower_graph(const std::string& path);

/// Parses JSON-lines cascades {"news_id": int, "events": [{"u": int, "t": int}]}.
/// External ids are remapped through graph/news indices; events are sorted by
/// time and deduplicated per user (earliest kept). Lines for the same news id
/// are merged.
std::vector<Cascade> load_cascades(const std::string& path, const FollowerGraph& graph,
                                   const std::unordered_map<std::int64_t, NewsId>& news_index,
                                   LoadStats* stats = nullptr);

struct RawNews {
  std::int64_t external_id = 0;
  Timestamp publish_time = 0;
  std::string title;  // space-joined tokens
};

/// Parses tab-separated "news_id<TAB>publish_time<TAB>tokens".
std::vector<RawNews> load_raw_news(const std::string& path);

std::vector<std::int32_t> tokenize_title(const std::string& title, const TokenIndex& index,
                                         int n_max);

/// Collects every user's adoptions (initiator included) from the cascades.
std::vector<UserHistory> build_histories(const std::vector<Cascade>& cascades);

/// Splits each history into pseudo-users over rolling windows aligned to the
/// user's first unassigned adoption. Each window keeps at most s_max most
/// recent adoptions (s_max == 0 disables the cap).
std::vector<UserHistory> window_users(const std::vector<UserHistory>& histories, int window_days,
                                      int s_max);

/// Buckets cascade events into unit-sized bins covering [t0, observe_until],
/// at most d_max buckets.
AdoptionHistogram build_adoption_histogram(const Cascade& cascade, Timestamp observe_until,
                                           std::int64_t unit_seconds, int d_max = 120);

/// Timeline split at the global timestamp quantile `train_frac`; the last
/// `valid_frac` fraction of train-side events becomes validation.
DatasetSplit split_timeline(const std::vector<UserHistory>& histories, double train_frac,
                            double valid_frac);

/// State of `item` at time t. Diffusion keeps events with time <= t in cascade
/// order; `exclude_user` (pass kPadUser to keep everyone) is removed from the
/// diffusion sequence but not from the histogram counts.
NewsState snapshot_news_state(const NewsItem& item, const Cascade& cascade, Timestamp t,
                              UserId exclude_user, std::int64_t unit_seconds, int d_max);

// ---------------------------------------------------------------------------
// Normalized corpus
// ---------------------------------------------------------------------------

struct CorpusStats {
  std::int64_t user_count = 0;
  std::int64_t news_count = 0;
  std::int64_t cascade_count = 0;
  std::int64_t retweet_event_count = 0;  // non-initiator events
  double avg_title_words = 0.0;
  double median_chain_length = 0.0;
  std::int64_t max_chain_length = 0;
};

struct Corpus {
  FollowerGraph graph;
  std::vector<NewsItem> news;            // dense news id == index
  std::vector<std::string> title_text;   // raw tokens per news
  std::vector<std::int64_t> news_external_ids;
  std::vector<Cascade> cascades;
  std::vector<std::int32_t> cascade_of_news;  // dense news id -> cascade index or -1
  std::vector<UserHistory> histories;         // windowed pseudo-users
  std::vector<std::int64_t> source_adoption_count;  // per dense user, pre-window totals
  LoadStats load_stats;

  const Cascade* cascade_for(NewsId news_id) const {
    const std::int32_t c = cascade_of_news[static_cast<std::size_t>(news_id)];
    return c < 0 ? nullptr : &cascades[static_cast<std::size_t>(c)];
  }

  CorpusStats stats() const;
};

struct IngestConfig {
  int window_days = 90;
  int s_max = 20;
  int n_max = 20;
  int min_history = 1;
};

/// Raw files -> normalized in-memory corpus (filtering + windowing applied).
Corpus ingest_corpus(const std::string& graph_path, const std::string& cascades_path,
                     const std::string& news_path, const TokenIndex& tokens,
                     const IngestConfig& cfg);

void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir, const TokenIndex& tokens, int n_max);

std::string corpus_stats_json(const CorpusStats& stats);

}  // namespace igniter
