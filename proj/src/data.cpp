#include "glmkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace glmkit {

namespace {

std::string other_endpoint(const Triplet& t, const std::string& entity) {
  return t.head == entity ? t.tail : t.head;
}

double mean_of(const std::vector<double>& xs) {
  double sum = 0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Population standard deviation; a constant collection gives exactly 0.
double std_of(const std::vector<double>& xs, double mean) {
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

TripletStore TripletStore::from_triplets(std::vector<Triplet> triplets) {
  TripletStore store;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (auto& t : triplets) {
    if (!has_verbalization(t.relation)) {
      ++store.dropped_unknown_;
      continue;
    }
    if (!seen.insert({t.head, t.relation, t.tail}).second) {
      ++store.dropped_duplicates_;
      continue;
    }
    std::size_t index = store.triplets_.size();
    for (const std::string& entity : {t.head, t.tail}) {
      auto [it, inserted] = store.incident_.try_emplace(entity);
      if (inserted) store.entities_.push_back(entity);
      if (it->second.empty() || it->second.back() != index) it->second.push_back(index);
    }
    store.triplets_.push_back(std::move(t));
  }
  return store;
}

TripletStore TripletStore::load_tsv(const std::string& path) {
  return from_triplets(load_triplets_tsv(path));
}

std::span<const std::size_t> TripletStore::incident(const std::string& entity) const {
  auto it = incident_.find(entity);
  if (it == incident_.end()) return {};
  return it->second;
}

int TripletStore::connections(const std::string& a, const std::string& b) const {
  int count = 0;
  for (std::size_t idx : incident(a)) {
    const Triplet& t = triplets_[idx];
    if ((t.head == a && t.tail == b) || (t.head == b && t.tail == a)) ++count;
  }
  return count;
}

void validate(const SamplerConfig& config) {
  if (config.radius < 1) throw std::invalid_argument("sampler radius must be >= 1");
  if (config.mask_level < 0) throw std::invalid_argument("mask level must be >= 0");
  if (config.triplets_per_frontier < 1) {
    throw std::invalid_argument("triplets_per_frontier must be >= 1");
  }
  if (config.train_per_class < 1 || config.dev_per_class < 1 || config.test_per_class < 1) {
    throw std::invalid_argument("per-class split counts must be positive");
  }
}

std::optional<std::vector<GraphOfTriplets>> sample_subgraph(const TripletStore& kg,
                                                            std::size_t seed_triplet, int radius,
                                                            int triplets_per_frontier,
                                                            SeededRng& rng,
                                                            std::string* skip_reason) {
  if (seed_triplet >= kg.triplets().size()) {
    throw std::out_of_range("seed triplet index " + std::to_string(seed_triplet) +
                            " out of range");
  }
  if (radius < 1) throw std::invalid_argument("radius must be >= 1");
  const Triplet& seed = kg.triplets()[seed_triplet];
  auto skip = [&](const std::string& reason) {
    if (skip_reason) *skip_reason = reason;
    return std::nullopt;
  };
  if (seed.head == seed.tail) return skip("seed head equals tail");
  int conn = kg.connections(seed.head, seed.tail);
  if (conn != 1) {
    return skip(std::to_string(conn) + " triplets connect the seed's head and tail");
  }

  std::vector<std::size_t> chosen{seed_triplet};
  std::unordered_set<std::size_t> chosen_set{seed_triplet};
  std::unordered_set<std::string> entity_set{seed.head, seed.tail};
  std::vector<std::string> frontier{seed.head, seed.tail};

  std::vector<GraphOfTriplets> family;
  auto snapshot = [&] {
    std::vector<Triplet> triplets;
    triplets.reserve(chosen.size());
    for (std::size_t idx : chosen) triplets.push_back(kg.triplets()[idx]);
    family.push_back(GraphOfTriplets::from_triplets(std::move(triplets)));
  };
  snapshot();  // G1 = seed alone

  for (int k = 2; k <= radius; ++k) {
    std::vector<std::string> next_frontier;
    for (const std::string& entity : frontier) {
      for (int draw = 0; draw < triplets_per_frontier; ++draw) {
        // Admissible: unused triplet whose far endpoint is a new entity
        // (it extends the radius). Re-filtered per draw because earlier
        // draws grow the entity set.
        std::vector<std::size_t> candidates;
        for (std::size_t idx : kg.incident(entity)) {
          if (chosen_set.count(idx)) continue;
          if (entity_set.count(other_endpoint(kg.triplets()[idx], entity))) continue;
          candidates.push_back(idx);
        }
        if (candidates.empty()) break;
        std::size_t pick = candidates[rng.uniform_index(candidates.size())];
        chosen.push_back(pick);
        chosen_set.insert(pick);
        std::string endpoint = other_endpoint(kg.triplets()[pick], entity);
        entity_set.insert(endpoint);
        next_frontier.push_back(endpoint);
      }
    }
    frontier = std::move(next_frontier);
    snapshot();
  }
  return family;
}

namespace {

// Grow a radius-r subgraph around the seed, verbalize every relation,
// mask the target, then apply the subgraph mask level.
LabeledInstance make_cn_instance(const TripletStore& kg,
                                 const std::vector<GraphOfTriplets>& family,
                                 int relation_label, const SamplerConfig& config) {
  const GraphOfTriplets& raw = family.back();
  std::vector<Triplet> verbalized;
  verbalized.reserve(raw.size());
  for (const Triplet& t : raw.triplets()) {
    verbalized.push_back({t.head, verbalize_relation(t.relation), t.tail});
  }
  GraphOfTriplets g = GraphOfTriplets::from_triplets(std::move(verbalized));
  g = mask_target_relation(g, 0);  // the seed is element 0 of every family member
  if (config.mask_level > 0) g = mask_subgraph(g, config.mask_level);

  LabeledInstance instance;
  instance.graph = std::move(g);
  instance.relation_label = relation_label;
  instance.radius = config.radius;
  instance.mask_level = config.mask_level;
  (void)kg;
  return instance;
}

}  // namespace

DatasetSplits build_cn_dataset(const TripletStore& kg, const SamplerConfig& config_in) {
  SamplerConfig config = config_in;
  if (config.label_set.empty()) config.label_set = relation_label_set();
  validate(config);

  DatasetSplits splits;
  splits.label_names = config.label_set;
  splits.task = "cn";
  splits.radius = config.radius;
  splits.mask_level = config.mask_level;
  splits.seed = config.seed;

  SeededRng master(config.seed);
  const int need =
      config.train_per_class + config.dev_per_class + config.test_per_class;

  for (std::size_t c = 0; c < config.label_set.size(); ++c) {
    const std::string& label = config.label_set[c];
    if (!has_verbalization(label)) {
      throw std::invalid_argument("label \"" + label + "\" has no verbalization template");
    }
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < kg.triplets().size(); ++i) {
      if (kg.triplets()[i].relation == label) eligible.push_back(i);
    }
    SeededRng class_rng = master.derive(c);
    class_rng.shuffle(eligible);

    std::vector<LabeledInstance> made;
    for (std::size_t i = 0; i < eligible.size() && made.size() < static_cast<std::size_t>(need);
         ++i) {
      auto family = sample_subgraph(kg, eligible[i], config.radius,
                                    config.triplets_per_frontier, class_rng);
      if (!family) continue;
      made.push_back(make_cn_instance(kg, *family, static_cast<int>(c), config));
    }
    if (made.size() < static_cast<std::size_t>(need)) {
      throw std::runtime_error("class \"" + label + "\": need " + std::to_string(need) +
                               " instances but only " + std::to_string(made.size()) +
                               " eligible seeds produced samples (shortfall " +
                               std::to_string(need - static_cast<int>(made.size())) + ")");
    }
    auto take = [&](std::vector<LabeledInstance>& dst, int count, std::size_t offset) {
      for (int i = 0; i < count; ++i) dst.push_back(made[offset + static_cast<std::size_t>(i)]);
    };
    take(splits.train, config.train_per_class, 0);
    take(splits.dev, config.dev_per_class, static_cast<std::size_t>(config.train_per_class));
    take(splits.test, config.test_per_class,
         static_cast<std::size_t>(config.train_per_class + config.dev_per_class));
  }
  master.shuffle(splits.train);
  return splits;
}

namespace {

constexpr int kSynthClasses = 4;
constexpr int kSynthEntityVocab = 40;
constexpr int kSynthNoiseRelations = 10;

std::string synth_entity(std::size_t i) { return "ent" + std::to_string(i); }

// Distinct entity draws for one instance.
std::vector<std::string> draw_entities(SeededRng& rng, std::size_t count) {
  std::vector<std::size_t> picked;
  while (picked.size() < count) {
    std::size_t e = rng.uniform_index(kSynthEntityVocab);
    if (std::find(picked.begin(), picked.end(), e) == picked.end()) picked.push_back(e);
  }
  std::vector<std::string> out;
  for (std::size_t e : picked) out.push_back(synth_entity(e));
  return out;
}

LabeledInstance make_synth_instance(SynthTask task, int label, SeededRng& rng) {
  std::string noise_rel = "reln" + std::to_string(rng.uniform_index(kSynthNoiseRelations));
  std::vector<Triplet> triplets;
  int radius;
  if (task == SynthTask::OneHop) {
    // Label readable from a token inside the target triplet (the tail).
    auto e = draw_entities(rng, 2);
    triplets = {{e[0], "pending", "cue" + std::to_string(label)},
                {e[0], noise_rel, e[1]}};
    radius = 1;
  } else {
    // Label carried ONLY by the relation of a neighbor triplet at the
    // target's head: Levi distance 2 from the mask. Target-span tokens are
    // drawn independently of the label.
    auto e = draw_entities(rng, 4);
    triplets = {{e[0], "pending", e[1]},
                {e[0], "lab" + std::to_string(label), e[2]},
                {e[1], noise_rel, e[3]}};
    radius = 2;
  }
  LabeledInstance instance;
  instance.graph = mask_target_relation(GraphOfTriplets::from_triplets(std::move(triplets)), 0);
  instance.relation_label = label;
  instance.radius = radius;
  instance.mask_level = 0;
  return instance;
}

std::vector<LabeledInstance> make_synth_split(SynthTask task, int size, SeededRng& rng) {
  int per_class = size / kSynthClasses;
  std::vector<LabeledInstance> out;
  for (int label = 0; label < kSynthClasses; ++label) {
    for (int i = 0; i < per_class; ++i) out.push_back(make_synth_instance(task, label, rng));
  }
  rng.shuffle(out);
  return out;
}

}  // namespace

DatasetSplits synth_graph_task(SynthTask task, int train_size, SeededRng& rng) {
  if (train_size < kSynthClasses * 10) {
    throw std::invalid_argument("synthetic task needs at least " +
                                std::to_string(kSynthClasses * 10) + " training instances");
  }
  DatasetSplits splits;
  splits.task = task == SynthTask::OneHop ? "1hop" : "2hop";
  for (int label = 0; label < kSynthClasses; ++label) {
    splits.label_names.push_back("lab" + std::to_string(label));
  }
  splits.radius = task == SynthTask::OneHop ? 1 : 2;
  splits.mask_level = 0;
  int eval_size = std::max(kSynthClasses, train_size / 5);
  splits.train = make_synth_split(task, train_size, rng);
  splits.dev = make_synth_split(task, eval_size, rng);
  splits.test = make_synth_split(task, eval_size, rng);
  return splits;
}

namespace {

std::string joint_filler(SeededRng& rng) {
  std::string text;
  std::size_t words = 3 + rng.uniform_index(4);
  for (std::size_t w = 0; w < words; ++w) {
    if (w) text += " ";
    text += "filler" + std::to_string(rng.uniform_index(20));
  }
  return text;
}

LabeledInstance make_joint_relation_instance(int label, bool entailed, SeededRng& rng) {
  auto e = draw_entities(rng, 4);
  std::string cue = "r" + std::to_string(label) + "cue";
  std::string ctx_rel = "ctxrel" + std::to_string(rng.uniform_index(kSynthNoiseRelations));
  std::vector<Triplet> triplets{{e[0], "pending", e[1]}};
  std::string text;
  if (entailed) {
    // Relation stated in the text only; the graph context is noise.
    triplets.push_back({e[0], ctx_rel, e[2]});
    text = e[0] + " " + cue + " " + e[1] + " " + joint_filler(rng);
  } else {
    // Relation exposed only through a parallel graph edge at the head.
    triplets.push_back({e[0], cue, e[2]});
    triplets.push_back({e[1], ctx_rel, e[3]});
    text = joint_filler(rng);
  }
  LabeledInstance instance;
  instance.graph = mask_target_relation(GraphOfTriplets::from_triplets(std::move(triplets)), 0);
  instance.text = text;
  instance.relation_label = label;
  instance.source_label = entailed ? kEntailed : kNotEntailed;
  instance.radius = 1;
  instance.mask_level = 0;
  return instance;
}

LabeledInstance make_joint_norelation_instance(int num_relations, SeededRng& rng) {
  auto e = draw_entities(rng, 6);
  std::string ctx_a = "ctxrel" + std::to_string(rng.uniform_index(kSynthNoiseRelations));
  std::string ctx_b = "ctxrel" + std::to_string(rng.uniform_index(kSynthNoiseRelations));
  // A masked edge newly inserted between the previously unconnected heads
  // of two independent triplets.
  std::vector<Triplet> triplets{{e[0], "pending", e[2]},
                                {e[0], ctx_a, e[1]},
                                {e[2], ctx_b, e[3]}};
  LabeledInstance instance;
  instance.graph = mask_target_relation(GraphOfTriplets::from_triplets(std::move(triplets)), 0);
  instance.text = joint_filler(rng);
  instance.relation_label = num_relations;  // trailing "no-relation" class
  instance.source_label = kNoRelationSource;
  instance.radius = 1;
  instance.mask_level = 0;
  return instance;
}

std::vector<LabeledInstance> make_joint_split(int size, int num_relations, SeededRng& rng) {
  std::vector<LabeledInstance> out;
  int norel = size / 10;  // "for 10% of the graphs"
  int per_class = (size - norel) / num_relations;
  for (int label = 0; label < num_relations; ++label) {
    for (int i = 0; i < per_class; ++i) {
      out.push_back(make_joint_relation_instance(label, i % 2 == 0, rng));
    }
  }
  for (int i = 0; i < norel; ++i) out.push_back(make_joint_norelation_instance(num_relations, rng));
  rng.shuffle(out);
  return out;
}

}  // namespace

DatasetSplits synth_joint_task(int train_size, int num_relations, SeededRng& rng) {
  if (num_relations < 2) throw std::invalid_argument("joint task needs >= 2 relations");
  if (train_size < (num_relations + 1) * 10) {
    throw std::invalid_argument("joint task needs at least " +
                                std::to_string((num_relations + 1) * 10) +
                                " training instances");
  }
  DatasetSplits splits;
  splits.task = "joint";
  for (int r = 0; r < num_relations; ++r) splits.label_names.push_back("R" + std::to_string(r));
  splits.label_names.push_back("no-relation");
  splits.source_classes = kNumSourceClasses;
  int eval_size = std::max(num_relations + 1, train_size / 5);
  splits.train = make_joint_split(train_size, num_relations, rng);
  splits.dev = make_joint_split(eval_size, num_relations, rng);
  splits.test = make_joint_split(eval_size, num_relations, rng);
  return splits;
}

GraphStats stats(std::span<const GraphOfTriplets> graphs) {
  if (graphs.empty()) throw std::invalid_argument("stats over an empty graph collection");
  std::vector<double> nodes, edges, degrees;
  for (const auto& g : graphs) {
    std::set<std::string> entities;
    for (const Triplet& t : g.triplets()) {
      entities.insert(t.head);
      entities.insert(t.tail);
    }
    double v = static_cast<double>(entities.size());
    double e = static_cast<double>(g.size());
    nodes.push_back(v);
    edges.push_back(e);
    degrees.push_back(v > 0 ? 2.0 * e / v : 0.0);
  }
  GraphStats out;
  out.count = graphs.size();
  out.nodes_mean = mean_of(nodes);
  out.nodes_std = std_of(nodes, out.nodes_mean);
  out.edges_mean = mean_of(edges);
  out.edges_std = std_of(edges, out.edges_mean);
  out.degree_mean = mean_of(degrees);
  out.degree_std = std_of(degrees, out.degree_mean);
  return out;
}

TripletStore synthetic_kg(int num_entities, int num_triplets, SeededRng& rng) {
  if (num_entities < 2 || num_triplets < 1) {
    throw std::invalid_argument("synthetic KG needs >= 2 entities and >= 1 triplet");
  }
  const auto& relations = verbalizable_relations();
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::vector<Triplet> triplets;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 50 * static_cast<std::size_t>(num_triplets);
  while (triplets.size() < static_cast<std::size_t>(num_triplets)) {
    if (++attempts > max_attempts) {
      throw std::runtime_error("could not place " + std::to_string(num_triplets) +
                               " unique triplets over " + std::to_string(num_entities) +
                               " entities");
    }
    std::size_t h = rng.uniform_index(static_cast<std::size_t>(num_entities));
    std::size_t t = rng.uniform_index(static_cast<std::size_t>(num_entities));
    if (h == t) continue;
    std::string head = "e" + std::to_string(h);
    std::string tail = "e" + std::to_string(t);
    std::string rel = relations[rng.uniform_index(relations.size())];
    if (!seen.insert({head, rel, tail}).second) continue;
    triplets.push_back({head, rel, tail});
  }
  return TripletStore::from_triplets(std::move(triplets));
}

CompiledInstance compile_instance(const LabeledInstance& instance, const Tokenizer& tokenizer,
                                  const CompileOptions& options) {
  if (tokenizer.mask_sentinel_ids().empty()) {
    throw std::invalid_argument("tokenizer provides no mask sentinel ids");
  }
  ExtendedLeviGraph elg = tokenize_levi(to_levi(instance.graph), tokenizer);
  std::vector<int> tokens = elg.token_ids();

  std::vector<int> text_ids;
  if (instance.text && !instance.text->empty()) {
    for (const TokenPiece& piece : tokenizer.tokenize(*instance.text)) {
      text_ids.push_back(piece.id);
    }
    if (options.text_eos && tokenizer.eos_id()) text_ids.push_back(*tokenizer.eos_id());
  }

  CompiledInstance compiled;
  if (options.variant == CompileVariant::Sequence) {
    tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());
    compiled.plan = sequence_plan(tokens.size());
  } else {
    PlanVariant variant =
        options.variant == CompileVariant::LGlm ? PlanVariant::Local : PlanVariant::Global;
    if (text_ids.empty()) {
      compiled.plan = variant == PlanVariant::Local ? build_local(elg) : build_global(elg);
    } else {
      compiled.plan = build_joint(elg, text_ids, variant);
      tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());
    }
  }

  int mask_id = tokenizer.mask_sentinel_ids()[0];
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == mask_id) compiled.readout_candidates.push_back(i);
  }
  compiled.tokens = std::move(tokens);
  compiled.relation_label = instance.relation_label;
  compiled.source_label = instance.source_label;
  return compiled;
}

std::vector<CompiledInstance> compile_dataset(std::span<const LabeledInstance> instances,
                                              const Tokenizer& tokenizer,
                                              const CompileOptions& options) {
  std::vector<CompiledInstance> out;
  out.reserve(instances.size());
  for (const auto& instance : instances) {
    out.push_back(compile_instance(instance, tokenizer, options));
  }
  return out;
}

namespace {

nlohmann::json instance_to_json(const LabeledInstance& instance) {
  nlohmann::json graph;
  graph["triplets"] = nlohmann::json::array();
  for (const Triplet& t : instance.graph.triplets()) {
    graph["triplets"].push_back(
        {{"head", t.head}, {"relation", t.relation}, {"tail", t.tail}});
  }
  graph["target"] =
      instance.graph.target() ? nlohmann::json(*instance.graph.target()) : nlohmann::json(nullptr);
  nlohmann::json doc{{"graph", std::move(graph)},
                     {"relation_label", instance.relation_label},
                     {"r", instance.radius},
                     {"m", instance.mask_level}};
  doc["text"] = instance.text ? nlohmann::json(*instance.text) : nlohmann::json(nullptr);
  doc["source_label"] =
      instance.source_label ? nlohmann::json(*instance.source_label) : nlohmann::json(nullptr);
  return doc;
}

LabeledInstance instance_from_json(const nlohmann::json& doc) {
  LabeledInstance instance;
  std::vector<Triplet> triplets;
  for (const auto& t : doc.at("graph").at("triplets")) {
    triplets.push_back({t.at("head").get<std::string>(), t.at("relation").get<std::string>(),
                        t.at("tail").get<std::string>()});
  }
  std::optional<std::size_t> target;
  if (!doc.at("graph").at("target").is_null()) {
    target = doc["graph"]["target"].get<std::size_t>();
  }
  instance.graph = GraphOfTriplets::from_triplets(std::move(triplets), target);
  if (doc.contains("text") && !doc["text"].is_null()) {
    instance.text = doc["text"].get<std::string>();
  }
  instance.relation_label = doc.at("relation_label").get<int>();
  if (doc.contains("source_label") && !doc["source_label"].is_null()) {
    instance.source_label = doc["source_label"].get<int>();
  }
  instance.radius = doc.at("r").get<int>();
  instance.mask_level = doc.at("m").get<int>();
  return instance;
}

void validate_instances(const DatasetSplits& splits, std::span<const LabeledInstance> instances,
                        const std::string& split_name) {
  const int num_classes = static_cast<int>(splits.label_names.size());
  std::optional<int> norel_index;
  for (int c = 0; c < num_classes; ++c) {
    if (splits.label_names[static_cast<std::size_t>(c)] == "no-relation") norel_index = c;
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const LabeledInstance& instance = instances[i];
    auto fail = [&](const std::string& why) {
      throw std::runtime_error(split_name + " instance " + std::to_string(i) + ": " + why);
    };
    if (instance.relation_label < 0 || instance.relation_label >= num_classes) {
      fail("relation label " + std::to_string(instance.relation_label) + " outside " +
           std::to_string(num_classes) + " classes");
    }
    if (!instance.graph.target()) fail("graph has no masked target triplet");
    if (splits.source_classes) {
      if (!instance.source_label) fail("joint dataset instance lacks a source label");
      if (*instance.source_label < 0 || *instance.source_label >= *splits.source_classes) {
        fail("source label outside range");
      }
      if (norel_index) {
        bool rel_norel = instance.relation_label == *norel_index;
        bool src_norel = *instance.source_label == kNoRelationSource;
        if (rel_norel != src_norel) {
          fail("no-relation labels inconsistent: relation says " +
               std::to_string(rel_norel) + ", source says " + std::to_string(src_norel));
        }
      }
    }
  }
}

}  // namespace

void save_dataset(const std::string& dir, const DatasetSplits& splits) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"task", splits.task},
                      {"label_names", splits.label_names},
                      {"radius", splits.radius},
                      {"mask_level", splits.mask_level},
                      {"seed", splits.seed},
                      {"counts",
                       {{"train", splits.train.size()},
                        {"dev", splits.dev.size()},
                        {"test", splits.test.size()}}}};
  meta["source_classes"] =
      splits.source_classes ? nlohmann::json(*splits.source_classes) : nlohmann::json(nullptr);
  {
    std::ofstream out(dir + "/meta.json");
    if (!out) throw std::runtime_error("cannot write " + dir + "/meta.json");
    out << meta.dump(2) << "\n";
  }
  auto write_split = [&](const char* name, std::span<const LabeledInstance> instances) {
    std::string path = dir + "/" + name + ".jsonl";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& instance : instances) out << instance_to_json(instance).dump() << "\n";
  };
  write_split("train", splits.train);
  write_split("dev", splits.dev);
  write_split("test", splits.test);
}

DatasetSplits load_dataset(const std::string& dir) {
  std::ifstream meta_in(dir + "/meta.json");
  if (!meta_in) throw std::runtime_error("cannot open " + dir + "/meta.json");
  nlohmann::json meta = nlohmann::json::parse(meta_in);

  DatasetSplits splits;
  splits.task = meta.at("task").get<std::string>();
  splits.label_names = meta.at("label_names").get<std::vector<std::string>>();
  splits.radius = meta.at("radius").get<int>();
  splits.mask_level = meta.at("mask_level").get<int>();
  splits.seed = meta.at("seed").get<std::uint64_t>();
  if (meta.contains("source_classes") && !meta["source_classes"].is_null()) {
    splits.source_classes = meta["source_classes"].get<int>();
  }

  auto read_split = [&](const char* name) {
    std::string path = dir + "/" + name + ".jsonl";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<LabeledInstance> instances;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        instances.push_back(instance_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return instances;
  };
  splits.train = read_split("train");
  splits.dev = read_split("dev");
  splits.test = read_split("test");
  validate_instances(splits, splits.train, "train");
  validate_instances(splits, splits.dev, "dev");
  validate_instances(splits, splits.test, "test");
  return splits;
}

}  // namespace glmkit
