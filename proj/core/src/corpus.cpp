#include "igniter/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace igniter {
namespace {

using json = nlohmann::json;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  return out;
}

bool parse_i64(std::string_view sv, std::int64_t& out) {
  const char* first = sv.data();
  const char* last = sv.data() + sv.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

void sort_and_dedup_cascade(Cascade& c, LoadStats* stats) {
  std::stable_sort(c.events.begin(), c.events.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  std::vector<std::pair<UserId, Timestamp>> kept;
  kept.reserve(c.events.size());
  std::unordered_set<UserId> seen;
  seen.reserve(c.events.size());
  for (const auto& ev : c.events) {
    if (seen.insert(ev.first).second) {
      kept.push_back(ev);
    } else if (stats) {
      ++stats->dropped_duplicates;
    }
  }
  c.events = std::move(kept);
}

}  // namespace

// ---------------------------------------------------------------------------
// FollowerGraph
// ---------------------------------------------------------------------------

UserId FollowerGraph::intern(std::int64_t external_id) {
  auto it = user_id_index.find(external_id);
  if (it != user_id_index.end()) return it->second;
  if (node_count == std::numeric_limits<std::int32_t>::max()) {
    throw error("user id space overflow");
  }
  const UserId dense = node_count++;
  user_id_index.emplace(external_id, dense);
  external_ids.push_back(external_id);
  return dense;
}

void FollowerGraph::finalize() {
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  adj_offsets.assign(static_cast<std::size_t>(node_count) + 1, 0);
  adj.resize(edges.size());
  for (const auto& e : edges) ++adj_offsets[static_cast<std::size_t>(e.first) + 1];
  for (std::size_t i = 1; i < adj_offsets.size(); ++i) adj_offsets[i] += adj_offsets[i - 1];
  std::vector<std::int64_t> cursor(adj_offsets.begin(), adj_offsets.end() - 1);
  for (const auto& e : edges) {
    adj[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.first)]++)] = e.second;
  }
}

bool FollowerGraph::has_edge(UserId follower, UserId followee) const {
  if (follower < 0 || follower >= node_count) return false;
  const auto begin = adj.begin() + adj_offsets[static_cast<std::size_t>(follower)];
  const auto end = adj.begin() + adj_offsets[static_cast<std::size_t>(follower) + 1];
  return std::binary_search(begin, end, followee);
}

FollowerGraph load_follower_graph(const std::string& path) {
  std::ifstream in = open_input(path);
  FollowerGraph g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
    const auto fields = split_ws(sv);
    if (fields.empty()) continue;
    std::int64_t a = 0;
    std::int64_t b = 0;
    if (fields.size() != 2 || !parse_i64(fields[0], a) || !parse_i64(fields[1], b)) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": expected 'follower followee'");
    }
    const UserId da = g.intern(a);
    const UserId db = g.intern(b);
    if (da != db) g.edges.emplace_back(da, db);
  }
  g.finalize();
  return g;
}

// ---------------------------------------------------------------------------
// Cascades
// ---------------------------------------------------------------------------

std::vector<Cascade> load_cascades(const std::string& path, const FollowerGraph& graph,
                                   const std::unordered_map<std::int64_t, NewsId>& news_index,
                                   LoadStats* stats) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<Cascade> cascades;
  std::unordered_map<NewsId, std::size_t> slot_of_news;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw parse_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("news_id") || !row.contains("events")) {
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": expected {\"news_id\", \"events\"}");
    }
    const std::int64_t ext_news = row["news_id"].get<std::int64_t>();
    const auto news_it = news_index.find(ext_news);
    if (news_it == news_index.end()) {
      if (stats) ++stats->skipped_news;
      continue;
    }
    std::vector<std::pair<UserId, Timestamp>> events;
    for (const auto& ev : row["events"]) {
      const std::int64_t ext_user = ev.at("u").get<std::int64_t>();
      const Timestamp t = ev.at("t").get<std::int64_t>();
      const auto user_it = graph.user_id_index.find(ext_user);
      if (user_it == graph.user_id_index.end()) {
        if (stats) ++stats->dropped_events;
        continue;
      }
      events.emplace_back(user_it->second, t);
    }
    if (events.empty()) {
      if (stats) ++stats->skipped_cascades;
      continue;
    }
    auto slot = slot_of_news.find(news_it->second);
    if (slot == slot_of_news.end()) {
      Cascade c;
      c.news_id = news_it->second;
      c.events = std::move(events);
      slot_of_news.emplace(news_it->second, cascades.size());
      cascades.push_back(std::move(c));
    } else {
      auto& dst = cascades[slot->second].events;
      dst.insert(dst.end(), events.begin(), events.end());
    }
  }
  for (auto& c : cascades) sort_and_dedup_cascade(c, stats);
  return cascades;
}

// ---------------------------------------------------------------------------
// News
// ---------------------------------------------------------------------------

std::vector<RawNews> load_raw_news(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<RawNews> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    RawNews n;
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        !parse_i64(std::string_view(line).substr(0, tab1), n.external_id) ||
        !parse_i64(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1), n.publish_time)) {
      throw parse_error(path + ":" + std::to_string(line_no) +
                        ": expected 'news_id<TAB>publish_time<TAB>tokens'");
    }
    n.title = line.substr(tab2 + 1);
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::int32_t> tokenize_title(const std::string& title, const TokenIndex& index,
                                         int n_max) {
  std::vector<std::int32_t> ids;
  ids.reserve(static_cast<std::size_t>(n_max));
  for (const auto tok : split_ws(title)) {
    if (ids.size() == static_cast<std::size_t>(n_max)) break;
    ids.push_back(index.lookup(std::string(tok)));
  }
  ids.resize(static_cast<std::size_t>(n_max), index.pad_id);
  return ids;
}

// ---------------------------------------------------------------------------
// Histories and windows
// ---------------------------------------------------------------------------

std::vector<UserHistory> build_histories(const std::vector<Cascade>& cascades) {
  std::unordered_map<UserId, std::vector<Adoption>> per_user;
  for (const auto& c : cascades) {
    for (const auto& [user, t] : c.events) {
      per_user[user].push_back(Adoption{c.news_id, t});
    }
  }
  std::vector<UserId> users;
  users.reserve(per_user.size());
  for (const auto& [user, _] : per_user) users.push_back(user);
  std::sort(users.begin(), users.end());

  std::vector<UserHistory> histories;
  histories.reserve(users.size());
  for (const UserId user : users) {
    UserHistory h;
    h.user_id = user;
    h.adoptions = std::move(per_user[user]);
    std::sort(h.adoptions.begin(), h.adoptions.end(), [](const Adoption& a, const Adoption& b) {
      return a.t != b.t ? a.t < b.t : a.news < b.news;
    });
    h.window_start = h.adoptions.front().t;
    h.window_end = h.adoptions.back().t + 1;
    histories.push_back(std::move(h));
  }
  return histories;
}

std::vector<UserHistory> window_users(const std::vector<UserHistory>& histories, int window_days,
                                      int s_max) {
  if (window_days <= 0) throw config_error("window_days must be positive");
  const std::int64_t span = static_cast<std::int64_t>(window_days) * 86400;
  std::vector<UserHistory> out;
  for (const auto& h : histories) {
    std::size_t i = 0;
    while (i < h.adoptions.size()) {
      const Timestamp start = h.adoptions[i].t;
      UserHistory w;
      w.user_id = h.user_id;
      w.window_start = start;
      w.window_end = start + span;
      while (i < h.adoptions.size() && h.adoptions[i].t < start + span) {
        w.adoptions.push_back(h.adoptions[i]);
        ++i;
      }
      if (s_max > 0 && w.adoptions.size() > static_cast<std::size_t>(s_max)) {
        w.adoptions.erase(w.adoptions.begin(),
                          w.adoptions.end() - static_cast<std::ptrdiff_t>(s_max));
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adoption histogram
// ---------------------------------------------------------------------------

AdoptionHistogram build_adoption_histogram(const Cascade& cascade, Timestamp observe_until,
                                           std::int64_t unit_seconds, int d_max) {
  if (unit_seconds <= 0) throw config_error("unit_seconds must be positive");
  if (d_max <= 0) throw config_error("d_max must be positive");
  const Timestamp t0 = cascade.start_time();
  if (observe_until < t0) {
    throw error("observe_until precedes cascade start (" + std::to_string(observe_until) + " < " +
                std::to_string(t0) + ")");
  }
  const std::int64_t span = observe_until - t0;
  std::int64_t buckets = span == 0 ? 1 : (span + unit_seconds - 1) / unit_seconds;
  buckets = std::min<std::int64_t>(buckets, d_max);

  AdoptionHistogram hist;
  hist.t0 = t0;
  hist.unit_seconds = unit_seconds;
  hist.bucket_counts.assign(static_cast<std::size_t>(buckets), 0);
  for (const auto& [user, t] : cascade.events) {
    if (t > observe_until) break;  // events sorted
    const std::int64_t idx = (t - t0) / unit_seconds;
    if (idx < buckets) ++hist.bucket_counts[static_cast<std::size_t>(idx)];
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Timeline split
// ---------------------------------------------------------------------------

DatasetSplit split_timeline(const std::vector<UserHistory>& histories, double train_frac,
                            double valid_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw config_error("train_frac must be in (0,1)");
  if (!(valid_frac >= 0.0 && valid_frac < 1.0)) throw config_error("valid_frac must be in [0,1)");
  std::vector<AdoptionRef> refs;
  for (std::size_t h = 0; h < histories.size(); ++h) {
    for (std::size_t a = 0; a < histories[h].adoptions.size(); ++a) {
      refs.push_back(AdoptionRef{static_cast<std::int32_t>(h), static_cast<std::int32_t>(a),
                                 histories[h].adoptions[a].t});
    }
  }
  if (refs.size() < 2) throw error("timeline split needs at least two adoption events");
  std::sort(refs.begin(), refs.end(), [](const AdoptionRef& a, const AdoptionRef& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.history_idx != b.history_idx) return a.history_idx < b.history_idx;
    return a.adoption_idx < b.adoption_idx;
  });
  if (refs.front().t == refs.back().t) {
    throw error("degenerate timeline: all adoption events share one timestamp");
  }
  const auto n = refs.size();
  const auto n_train_side = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(n)));
  if (n_train_side == 0 || n_train_side == n) throw error("timeline split leaves one side empty");
  const auto n_valid =
      static_cast<std::size_t>(std::llround(valid_frac * static_cast<double>(n_train_side)));

  DatasetSplit split;
  split.train.assign(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(n_train_side - n_valid));
  split.validation.assign(refs.begin() + static_cast<std::ptrdiff_t>(n_train_side - n_valid),
                          refs.begin() + static_cast<std::ptrdiff_t>(n_train_side));
  split.test.assign(refs.begin() + static_cast<std::ptrdiff_t>(n_train_side), refs.end());
  return split;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

NewsState snapshot_news_state(const NewsItem& item, const Cascade& cascade, Timestamp t,
                              UserId exclude_user, std::int64_t unit_seconds, int d_max) {
  NewsState state;
  state.news_id = item.news_id;
  state.title_tokens = item.title_tokens;
  state.observe_until = t;
  state.hist = build_adoption_histogram(cascade, t, unit_seconds, d_max);
  for (const auto& [user, et] : cascade.events) {
    if (et > t) break;
    if (user != exclude_user) state.diffusion.push_back(user);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Corpus assembly, stats, persistence
// ---------------------------------------------------------------------------

CorpusStats Corpus::stats() const {
  CorpusStats s;
  s.user_count = graph.node_count;
  s.news_count = static_cast<std::int64_t>(news.size());
  s.cascade_count = static_cast<std::int64_t>(cascades.size());
  std::vector<std::int64_t> lengths;
  lengths.reserve(cascades.size());
  for (const auto& c : cascades) {
    const auto len = static_cast<std::int64_t>(c.events.size());
    lengths.push_back(len);
    s.retweet_event_count += len - 1;
    s.max_chain_length = std::max(s.max_chain_length, len);
  }
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    const std::size_t mid = lengths.size() / 2;
    s.median_chain_length = lengths.size() % 2 == 1
                                ? static_cast<double>(lengths[mid])
                                : 0.5 * static_cast<double>(lengths[mid - 1] + lengths[mid]);
  }
  std::int64_t words = 0;
  for (const auto& title : title_text) {
    words += static_cast<std::int64_t>(split_ws(title).size());
  }
  if (!title_text.empty()) {
    s.avg_title_words = static_cast<double>(words) / static_cast<double>(title_text.size());
  }
  return s;
}

Corpus ingest_corpus(const std::string& graph_path, const std::string& cascades_path,
                     const std::string& news_path, const TokenIndex& tokens,
                     const IngestConfig& cfg) {
  Corpus corpus;
  corpus.graph = load_follower_graph(graph_path);

  const auto raw_news = load_raw_news(news_path);
  std::unordered_map<std::int64_t, NewsId> news_index;
  corpus.news.reserve(raw_news.size());
  for (const auto& rn : raw_news) {
    if (news_index.count(rn.external_id)) {
      throw parse_error(news_path + ": duplicate news id " + std::to_string(rn.external_id));
    }
    const NewsId dense = static_cast<NewsId>(corpus.news.size());
    news_index.emplace(rn.external_id, dense);
    NewsItem item;
    item.news_id = dense;
    item.publish_time = rn.publish_time;
    item.title_tokens = tokenize_title(rn.title, tokens, cfg.n_max);
    corpus.news.push_back(std::move(item));
    corpus.title_text.push_back(rn.title);
    corpus.news_external_ids.push_back(rn.external_id);
  }

  corpus.cascades = load_cascades(cascades_path, corpus.graph, news_index, &corpus.load_stats);
  corpus.cascade_of_news.assign(corpus.news.size(), -1);
  for (std::size_t i = 0; i < corpus.cascades.size(); ++i) {
    corpus.cascade_of_news[static_cast<std::size_t>(corpus.cascades[i].news_id)] =
        static_cast<std::int32_t>(i);
  }

  const auto raw_histories = build_histories(corpus.cascades);
  corpus.source_adoption_count.assign(static_cast<std::size_t>(corpus.graph.node_count), 0);
  for (const auto& h : raw_histories) {
    corpus.source_adoption_count[static_cast<std::size_t>(h.user_id)] =
        static_cast<std::int64_t>(h.adoptions.size());
  }

  auto windowed = window_users(raw_histories, cfg.window_days, cfg.s_max);
  corpus.histories.reserve(windowed.size());
  for (auto& w : windowed) {
    if (w.adoptions.size() >= static_cast<std::size_t>(std::max(1, cfg.min_history))) {
      corpus.histories.push_back(std::move(w));
    }
  }
  return corpus;
}

std::string corpus_stats_json(const CorpusStats& stats) {
  json j;
  j["user_count"] = stats.user_count;
  j["news_count"] = stats.news_count;
  j["cascade_count"] = stats.cascade_count;
  j["retweet_event_count"] = stats.retweet_event_count;
  j["avg_title_words"] = stats.avg_title_words;
  j["median_chain_length"] = stats.median_chain_length;
  j["max_chain_length"] = stats.max_chain_length;
  return j.dump(2);
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
  {
    auto out = open_output(dir + "/graph.txt");
    out << "# follower followee (dense ids)\n";
    for (const auto& [a, b] : corpus.graph.edges) out << a << ' ' << b << '\n';
  }
  {
    auto out = open_output(dir + "/news.tsv");
    for (std::size_t i = 0; i < corpus.news.size(); ++i) {
      out << i << '\t' << corpus.news[i].publish_time << '\t' << corpus.title_text[i] << '\n';
    }
  }
  {
    auto out = open_output(dir + "/cascades.jsonl");
    for (const auto& c : corpus.cascades) {
      json row;
      row["news_id"] = c.news_id;
      json events = json::array();
      for (const auto& [u, t] : c.events) events.push_back({{"t", t}, {"u", u}});
      row["events"] = std::move(events);
      out << row.dump() << '\n';
    }
  }
  {
    auto out = open_output(dir + "/histories.jsonl");
    for (const auto& h : corpus.histories) {
      json row;
      row["user"] = h.user_id;
      row["window_start"] = h.window_start;
      row["window_end"] = h.window_end;
      json adoptions = json::array();
      for (const auto& a : h.adoptions) adoptions.push_back({{"news", a.news}, {"t", a.t}});
      row["adoptions"] = std::move(adoptions);
      out << row.dump() << '\n';
    }
  }
  {
    json meta;
    meta["format"] = "igniter-corpus-v1";
    meta["user_external_ids"] = corpus.graph.external_ids;
    meta["news_external_ids"] = corpus.news_external_ids;
    meta["source_adoption_count"] = corpus.source_adoption_count;
    meta["load_stats"] = {{"skipped_cascades", corpus.load_stats.skipped_cascades},
                          {"dropped_events", corpus.load_stats.dropped_events},
                          {"dropped_duplicates", corpus.load_stats.dropped_duplicates},
                          {"skipped_news", corpus.load_stats.skipped_news}};
    auto out = open_output(dir + "/meta.json");
    out << meta.dump(2) << '\n';
  }
  {
    auto out = open_output(dir + "/stats.json");
    out << corpus_stats_json(corpus.stats()) << '\n';
  }
}

Corpus load_corpus(const std::string& dir, const TokenIndex& tokens, int n_max) {
  Corpus corpus;
  json meta;
  {
    auto in = open_input(dir + "/meta.json");
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw parse_error(dir + "/meta.json: " + std::string(e.what()));
    }
  }
  if (meta.value("format", "") != "igniter-corpus-v1") {
    throw parse_error(dir + "/meta.json: unknown corpus format");
  }
  const auto user_ext = meta.at("user_external_ids").get<std::vector<std::int64_t>>();
  corpus.graph.node_count = static_cast<int>(user_ext.size());
  corpus.graph.external_ids = user_ext;
  for (std::size_t i = 0; i < user_ext.size(); ++i) {
    corpus.graph.user_id_index.emplace(user_ext[i], static_cast<UserId>(i));
  }
  {
    auto in = open_input(dir + "/graph.txt");
    std::string line;
    while (std::getline(in, line)) {
      std::string_view sv(line);
      if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
      const auto fields = split_ws(sv);
      if (fields.empty()) continue;
      std::int64_t a = 0;
      std::int64_t b = 0;
      if (fields.size() != 2 || !parse_i64(fields[0], a) || !parse_i64(fields[1], b)) {
        throw parse_error(dir + "/graph.txt: malformed edge line");
      }
      corpus.graph.edges.emplace_back(static_cast<UserId>(a), static_cast<UserId>(b));
    }
    corpus.graph.finalize();
  }
  corpus.news_external_ids = meta.at("news_external_ids").get<std::vector<std::int64_t>>();
  corpus.source_adoption_count = meta.at("source_adoption_count").get<std::vector<std::int64_t>>();
  const auto& ls = meta.at("load_stats");
  corpus.load_stats.skipped_cascades = ls.at("skipped_cascades").get<std::int64_t>();
  corpus.load_stats.dropped_events = ls.at("dropped_events").get<std::int64_t>();
  corpus.load_stats.dropped_duplicates = ls.at("dropped_duplicates").get<std::int64_t>();
  corpus.load_stats.skipped_news = ls.at("skipped_news").get<std::int64_t>();

  for (const auto& rn : load_raw_news(dir + "/news.tsv")) {
    NewsItem item;
    item.news_id = static_cast<NewsId>(corpus.news.size());
    item.publish_time = rn.publish_time;
    item.title_tokens = tokenize_title(rn.title, tokens, n_max);
    corpus.news.push_back(std::move(item));
    corpus.title_text.push_back(rn.title);
  }

  {
    auto in = open_input(dir + "/cascades.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json row = json::parse(line);
      Cascade c;
      c.news_id = row.at("news_id").get<NewsId>();
      for (const auto& ev : row.at("events")) {
        c.events.emplace_back(ev.at("u").get<UserId>(), ev.at("t").get<Timestamp>());
      }
      corpus.cascades.push_back(std::move(c));
    }
  }
  corpus.cascade_of_news.assign(corpus.news.size(), -1);
  for (std::size_t i = 0; i < corpus.cascades.size(); ++i) {
    corpus.cascade_of_news[static_cast<std::size_t>(corpus.cascades[i].news_id)] =
        static_cast<std::int32_t>(i);
  }

  {
    auto in = open_input(dir + "/histories.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json row = json::parse(line);
      UserHistory h;
      h.user_id = row.at("user").get<UserId>();
      h.window_start = row.at("window_start").get<Timestamp>();
      h.window_end = row.at("window_end").get<Timestamp>();
      for (const auto& a : row.at("adoptions")) {
        h.adoptions.push_back(Adoption{a.at("news").get<NewsId>(), a.at("t").get<Timestamp>()});
      }
      corpus.histories.push_back(std::move(h));
    }
  }
  return corpus;
}

}  // namespace igniter
