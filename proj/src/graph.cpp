#include "glmkit/graph.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

namespace glmkit {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string mask_sentinel_surface(std::size_t k) {
  if (k >= kMaxMaskSentinels) {
    throw std::out_of_range("mask sentinel index " + std::to_string(k) +
                            " exceeds supply of " + std::to_string(kMaxMaskSentinels));
  }
  return "<extra_id_" + std::to_string(k) + ">";
}

std::optional<std::size_t> parse_mask_sentinel(std::string_view text) {
  constexpr std::string_view prefix = "<extra_id_";
  if (text.size() < prefix.size() + 2 || text.substr(0, prefix.size()) != prefix ||
      text.back() != '>') {
    return std::nullopt;
  }
  std::string_view digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
  if (digits.empty()) return std::nullopt;
  std::size_t value = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<std::size_t>(c - '0');
    if (value >= kMaxMaskSentinels) return std::nullopt;
  }
  return value;
}

GraphOfTriplets GraphOfTriplets::from_triplets(std::vector<Triplet> triplets,
                                               std::optional<std::size_t> target) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (auto& t : triplets) {
    t.head = trim(t.head);
    t.relation = trim(t.relation);
    t.tail = trim(t.tail);
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw std::invalid_argument("triplet has an empty field after trimming: (" + t.head +
                                  "; " + t.relation + "; " + t.tail + ")");
    }
    if (!seen.insert({t.head, t.relation, t.tail}).second) {
      throw std::invalid_argument("duplicate triplet: (" + t.head + "; " + t.relation + "; " +
                                  t.tail + ")");
    }
  }
  if (target) {
    if (*target >= triplets.size()) {
      throw std::out_of_range("target index " + std::to_string(*target) +
                              " out of range for " + std::to_string(triplets.size()) +
                              " triplets");
    }
    if (triplets[*target].relation != mask_sentinel_surface(0)) {
      throw std::invalid_argument("target triplet's relation must be the first mask sentinel " +
                                  mask_sentinel_surface(0) + ", got \"" +
                                  triplets[*target].relation + "\"");
    }
  }
  return GraphOfTriplets(std::move(triplets), target);
}

std::size_t LeviGraph::concept_count() const {
  std::size_t n = 0;
  for (const auto& u : units)
    if (u.kind == LeviUnit::Kind::Concept) ++n;
  return n;
}

std::size_t LeviGraph::relation_count() const {
  return units.size() - concept_count();
}

LeviGraph to_levi(const GraphOfTriplets& g) {
  if (g.size() == 0) {
    throw std::invalid_argument("cannot build a Levi graph from an empty graph of triplets");
  }
  LeviGraph levi;
  std::unordered_map<std::string, std::size_t> concept_index;
  auto concept_unit = [&](const std::string& text, std::size_t origin) {
    auto it = concept_index.find(text);
    if (it == concept_index.end()) {
      it = concept_index.emplace(text, levi.units.size()).first;
      levi.units.push_back({LeviUnit::Kind::Concept, text, {}});
    }
    levi.units[it->second].origins.push_back(origin);
    return it->second;
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Triplet& t = g.triplets()[i];
    std::size_t h = concept_unit(t.head, i);
    std::size_t r = levi.units.size();
    levi.units.push_back({LeviUnit::Kind::Relation, t.relation, {i}});
    std::size_t tl = concept_unit(t.tail, i);
    levi.edges.emplace_back(h, r);
    levi.edges.emplace_back(r, tl);
    levi.triplet_units.push_back({h, r, tl});
  }
  return levi;
}

std::vector<int> ExtendedLeviGraph::token_ids() const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.id);
  return ids;
}

ExtendedLeviGraph tokenize_levi(const LeviGraph& levi, const Tokenizer& tok) {
  ExtendedLeviGraph elg;
  elg.unit_token_ranges.reserve(levi.units.size());
  for (std::size_t u = 0; u < levi.units.size(); ++u) {
    auto pieces = tok.tokenize(levi.units[u].text);
    if (pieces.empty()) {
      throw std::invalid_argument("unit \"" + levi.units[u].text +
                                  "\" tokenizes to zero tokens");
    }
    std::size_t first = elg.tokens.size();
    for (std::size_t o = 0; o < pieces.size(); ++o) {
      if (o > 0) elg.edges.emplace_back(elg.tokens.size() - 1, elg.tokens.size());
      elg.tokens.push_back({pieces[o].id, std::move(pieces[o].text), u, o});
    }
    elg.unit_token_ranges.emplace_back(first, elg.tokens.size());
  }
  for (const auto& [h, r, t] : levi.triplet_units) {
    std::vector<std::size_t> span;
    for (std::size_t u : {h, r, t}) {
      auto [first, last] = elg.unit_token_ranges[u];
      for (std::size_t i = first; i < last; ++i) span.push_back(i);
    }
    elg.triplet_spans.push_back(std::move(span));
    elg.edges.emplace_back(elg.unit_token_ranges[h].second - 1, elg.unit_token_ranges[r].first);
    elg.edges.emplace_back(elg.unit_token_ranges[r].second - 1, elg.unit_token_ranges[t].first);
  }
  return elg;
}

GraphOfTriplets mask_target_relation(const GraphOfTriplets& g, std::size_t i) {
  if (i >= g.size()) {
    throw std::out_of_range("triplet index " + std::to_string(i) + " out of range for " +
                            std::to_string(g.size()) + " triplets");
  }
  if (parse_mask_sentinel(g.triplets()[i].relation)) {
    throw std::invalid_argument("triplet " + std::to_string(i) + " is already masked");
  }
  std::vector<Triplet> triplets = g.triplets();
  triplets[i].relation = mask_sentinel_surface(0);
  return GraphOfTriplets::from_triplets(std::move(triplets), i);
}

namespace {

// Sorted undirected unit adjacency, so BFS order is deterministic.
std::vector<std::vector<std::size_t>> unit_adjacency(const LeviGraph& levi) {
  std::vector<std::vector<std::size_t>> adj(levi.units.size());
  for (auto [a, b] : levi.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

std::vector<int> bfs_from_unit(const LeviGraph& levi, std::size_t start) {
  auto adj = unit_adjacency(levi);
  std::vector<int> dist(levi.units.size(), -1);
  std::deque<std::size_t> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<int> levi_distances_from_target(const GraphOfTriplets& g) {
  if (!g.target()) throw std::invalid_argument("graph has no target triplet");
  LeviGraph levi = to_levi(g);
  return bfs_from_unit(levi, levi.triplet_units[*g.target()][1]);
}

GraphOfTriplets mask_subgraph(const GraphOfTriplets& g, int m) {
  if (!g.target()) throw std::invalid_argument("mask_subgraph requires a target triplet");
  if (m < 0) throw std::invalid_argument("mask level m must be non-negative");
  if (m == 0) return g;

  LeviGraph levi = to_levi(g);
  std::size_t target_rel = levi.triplet_units[*g.target()][1];
  std::vector<int> dist = bfs_from_unit(levi, target_rel);

  // Units at distance 1..m, in breadth-first order, get sentinels 1, 2, ...
  std::vector<std::size_t> order;
  for (int d = 1; d <= m; ++d) {
    for (std::size_t u = 0; u < levi.units.size(); ++u) {
      if (dist[u] == d) order.push_back(u);
    }
  }
  if (order.size() + 1 > kMaxMaskSentinels) {
    throw std::runtime_error("mask level " + std::to_string(m) + " needs " +
                             std::to_string(order.size() + 1) + " sentinels; only " +
                             std::to_string(kMaxMaskSentinels) + " available");
  }

  std::vector<Triplet> triplets = g.triplets();
  std::size_t next_sentinel = 1;
  for (std::size_t u : order) {
    const LeviUnit& unit = levi.units[u];
    std::string sentinel = mask_sentinel_surface(next_sentinel++);
    if (unit.kind == LeviUnit::Kind::Relation) {
      triplets[unit.origins.front()].relation = sentinel;
    } else {
      for (auto& t : triplets) {
        if (t.head == unit.text) t.head = sentinel;
        if (t.tail == unit.text) t.tail = sentinel;
      }
    }
  }
  return GraphOfTriplets::from_triplets(std::move(triplets), g.target());
}

struct WhitespaceTokenizer::Impl {
  mutable std::mutex mu;
  mutable std::unordered_map<std::string, int> table;
  mutable int next_id = 101;  // 0..99 sentinels, 100 = </s>
  std::vector<int> sentinel_ids;
};

WhitespaceTokenizer::WhitespaceTokenizer() : impl_(std::make_unique<Impl>()) {
  for (std::size_t k = 0; k < kMaxMaskSentinels; ++k) {
    impl_->table.emplace(mask_sentinel_surface(k), static_cast<int>(k));
    impl_->sentinel_ids.push_back(static_cast<int>(k));
  }
  impl_->table.emplace("</s>", 100);
}

WhitespaceTokenizer::~WhitespaceTokenizer() = default;

std::vector<TokenPiece> WhitespaceTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenPiece> out;
  for (auto& word : split_whitespace(text)) {
    std::lock_guard<std::mutex> lock(impl_->mu);
    auto it = impl_->table.find(word);
    if (it == impl_->table.end()) {
      it = impl_->table.emplace(word, impl_->next_id++).first;
    }
    out.push_back({it->second, word});
  }
  return out;
}

int WhitespaceTokenizer::vocab_size() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->next_id;
}

std::span<const int> WhitespaceTokenizer::mask_sentinel_ids() const {
  return impl_->sentinel_ids;
}

VocabTokenizer::VocabTokenizer(std::vector<std::pair<std::string, int>> words,
                               std::vector<int> sentinel_ids, std::optional<int> eos)
    : words_(std::move(words)), sentinel_ids_(std::move(sentinel_ids)), eos_(eos) {
  int max_id = -1;
  for (const auto& [w, id] : words_) max_id = std::max(max_id, id);
  for (int id : sentinel_ids_) max_id = std::max(max_id, id);
  if (eos_) max_id = std::max(max_id, *eos_);
  vocab_size_ = max_id + 1;
}

VocabTokenizer VocabTokenizer::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary file " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<std::pair<std::string, int>> words;
  for (auto& [word, id] : doc.at("words").items()) {
    words.emplace_back(word, id.get<int>());
  }
  std::vector<int> sentinels = doc.at("sentinels").get<std::vector<int>>();
  std::optional<int> eos;
  if (doc.contains("eos") && !doc["eos"].is_null()) eos = doc["eos"].get<int>();
  return VocabTokenizer(std::move(words), std::move(sentinels), eos);
}

std::vector<TokenPiece> VocabTokenizer::tokenize(std::string_view text) const {
  std::vector<TokenPiece> out;
  for (auto& word : split_whitespace(text)) {
    auto it = std::find_if(words_.begin(), words_.end(),
                           [&](const auto& p) { return p.first == word; });
    if (it == words_.end()) {
      if (auto k = parse_mask_sentinel(word); k && *k < sentinel_ids_.size()) {
        out.push_back({sentinel_ids_[*k], word});
        continue;
      }
      throw std::invalid_argument("word \"" + word + "\" not in vocabulary");
    }
    out.push_back({it->second, word});
  }
  return out;
}

namespace {

const std::vector<std::pair<std::string, std::string>>& verbalization_table() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      // Relation label classes.
      {"Antonym", "is an antonym of"},
      {"AtLocation", "is in"},
      {"CapableOf", "is capable of"},
      {"Causes", "causes"},
      {"CausesDesire", "causes desire"},
      {"DistinctFrom", "is distinct from"},
      {"FormOf", "is a form of"},
      {"HasContext", "has context"},
      {"HasPrerequisite", "has prerequisite"},
      {"HasProperty", "is"},
      {"HasSubevent", "has subevent"},
      {"IsA", "is a"},
      {"MannerOf", "is a manner of"},
      {"MotivatedByGoal", "is motivated by"},
      {"PartOf", "is a part of"},
      {"Synonym", "is a synonym of"},
      {"UsedFor", "is used for"},
      // Context-only relations.
      {"CreatedBy", "is created by"},
      {"DefinedAs", "is defined as"},
      {"Desires", "desires"},
      {"Entails", "entails"},
      {"HasA", "has"},
      {"HasFirstSubevent", "starts with"},
      {"HasLastSubevent", "ends with"},
      {"InstanceOf", "is an instance of"},
      {"LocatedNear", "is near"},
      {"MadeOf", "is made of"},
      {"NotCapableOf", "is not capable of"},
      {"NotDesires", "does not desire"},
      {"NotHasProperty", "is not"},
      {"ReceivesAction", "receives action"},
      {"RelatedTo", "is related to"},
      {"SymbolOf", "is a symbol of"},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& relation_label_set() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < 17; ++i) out.push_back(verbalization_table()[i].first);
    return out;
  }();
  return labels;
}

const std::vector<std::string>& verbalizable_relations() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [key, value] : verbalization_table()) out.push_back(key);
    return out;
  }();
  return names;
}

bool has_verbalization(std::string_view name) {
  for (const auto& [key, value] : verbalization_table()) {
    if (key == name) return true;
  }
  return false;
}

std::string verbalize_relation(std::string_view name) {
  for (const auto& [key, value] : verbalization_table()) {
    if (key == name) return value;
  }
  std::string known;
  for (const auto& [key, value] : verbalization_table()) {
    if (!known.empty()) known += ", ";
    known += key;
  }
  throw std::invalid_argument("unknown relation \"" + std::string(name) +
                              "\"; known relations: " + known);
}

std::vector<Triplet> load_triplets_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open TSV file " + path);
  std::vector<Triplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 3 tab-separated fields, got " +
                               std::to_string(fields.size()));
    }
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

void save_triplets_tsv(const std::string& path, std::span<const Triplet> triplets) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write TSV file " + path);
  for (const auto& t : triplets) {
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  }
}

GraphDocument load_graph_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<Triplet> triplets;
  for (const auto& t : doc.at("triplets")) {
    triplets.push_back({t.at("head").get<std::string>(), t.at("relation").get<std::string>(),
                        t.at("tail").get<std::string>()});
  }
  std::optional<std::size_t> target;
  if (doc.contains("target") && !doc["target"].is_null()) {
    target = doc["target"].get<std::size_t>();
  }
  std::optional<int> mask_level;
  if (doc.contains("mask_level") && !doc["mask_level"].is_null()) {
    mask_level = doc["mask_level"].get<int>();
  }
  return GraphDocument{GraphOfTriplets::from_triplets(std::move(triplets), target), mask_level};
}

std::string graph_to_json_string(const GraphOfTriplets& g, std::optional<int> mask_level) {
  nlohmann::json doc;
  doc["triplets"] = nlohmann::json::array();
  for (const auto& t : g.triplets()) {
    doc["triplets"].push_back({{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}});
  }
  doc["target"] = g.target() ? nlohmann::json(*g.target()) : nlohmann::json(nullptr);
  if (mask_level) doc["mask_level"] = *mask_level;
  return doc.dump();
}

}  // namespace glmkit
