#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "glmkit/graph.hpp"
#include "glmkit/rng.hpp"
#include "glmkit/training.hpp"

namespace glmkit {

// Source-task classes for the joint text+graph task.
enum SourceLabel : int { kEntailed = 0, kNotEntailed = 1, kNoRelationSource = 2 };
inline constexpr int kNumSourceClasses = 3;

// One classification example before tokenization/plan compilation.
struct LabeledInstance {
  GraphOfTriplets graph;  // target triplet's relation already masked
  std::optional<std::string> text;
  int relation_label = 0;
  std::optional<int> source_label;  // SourceLabel values
  int radius = 1;
  int mask_level = 0;
};

struct DatasetSplits {
  std::vector<LabeledInstance> train, dev, test;
  std::vector<std::string> label_names;  // relation classes, index = label
  std::optional<int> source_classes;     // 3 for the joint task
  std::string task;                      // "cn" | "1hop" | "2hop" | "joint"
  int radius = 1;
  int mask_level = 0;
  std::uint64_t seed = 0;

  TaskShape shape() const {
    return {static_cast<int>(label_names.size()), source_classes};
  }
};

// Knowledge-graph triplet store with per-entity incidence lists. Relations
// are kept as raw identifiers (e.g. "IsA"); verbalization happens when
// instances are built. Duplicate triplets are dropped; triplets whose
// relation has no verbalization template are dropped and counted.
class TripletStore {
 public:
  static TripletStore from_triplets(std::vector<Triplet> triplets);
  static TripletStore load_tsv(const std::string& path);

  const std::vector<Triplet>& triplets() const { return triplets_; }
  const std::vector<std::string>& entities() const { return entities_; }
  // Indices of triplets incident to the entity, ascending.
  std::span<const std::size_t> incident(const std::string& entity) const;
  // Number of triplets connecting the two entities in either orientation.
  int connections(const std::string& a, const std::string& b) const;
  std::size_t dropped_duplicates() const { return dropped_duplicates_; }
  std::size_t dropped_unknown_relations() const { return dropped_unknown_; }

 private:
  std::vector<Triplet> triplets_;
  std::vector<std::string> entities_;
  std::unordered_map<std::string, std::vector<std::size_t>> incident_;
  std::size_t dropped_duplicates_ = 0;
  std::size_t dropped_unknown_ = 0;
};

struct SamplerConfig {
  int radius = 1;
  int mask_level = 0;
  int triplets_per_frontier = 2;  // adjacent triplets drawn per frontier entity
  int train_per_class = 800;
  int dev_per_class = 100;
  int test_per_class = 100;
  std::vector<std::string> label_set;  // defaults to the 17 relation classes
  std::uint64_t seed = 0;
};

void validate(const SamplerConfig& config);

// Nested subgraph family {G1 ⊆ ... ⊆ Gr}; the seed triplet is element 0 of
// every member. Each expansion adds up to triplets_per_frontier adjacent
// triplets per frontier entity, admitting only triplets whose far endpoint
// is new (they extend the radius). Returns nullopt with a reason when the
// seed violates the uniqueness precondition (exactly one triplet connecting
// head and tail, head != tail).
std::optional<std::vector<GraphOfTriplets>> sample_subgraph(const TripletStore& kg,
                                                            std::size_t seed_triplet, int radius,
                                                            int triplets_per_frontier,
                                                            SeededRng& rng,
                                                            std::string* skip_reason = nullptr);

// Balanced relation-classification splits: per class, train/dev/test seeds
// are sampled, radius-r subgraphs grown, relations verbalized, the target
// masked, and mask level m applied.
DatasetSplits build_cn_dataset(const TripletStore& kg, const SamplerConfig& config);

// Synthetic graph-only tasks over 4 balanced classes. 1hop: the label is
// readable from a token inside the target triplet. 2hop: the label-bearing
// token is the relation of a triplet adjacent to the target's head — Levi
// distance 2 from the mask — and target-span tokens carry no label signal.
// dev/test sizes are train_size / 5.
enum class SynthTask { OneHop, TwoHop };
DatasetSplits synth_graph_task(SynthTask task, int train_size, SeededRng& rng);

// Synthetic joint text+graph task: num_relations relation classes plus a
// trailing "no-relation" class (10% of instances, realized as a masked edge
// between previously unconnected entities). Entailed instances state the
// relation in the text only; not-entailed instances expose it through a
// parallel graph edge only.
DatasetSplits synth_joint_task(int train_size, int num_relations, SeededRng& rng);

// Structural statistics over original (non-Levi) graphs.
struct GraphStats {
  double nodes_mean = 0, nodes_std = 0;
  double edges_mean = 0, edges_std = 0;
  double degree_mean = 0, degree_std = 0;  // per-graph mean degree 2E/V
  std::size_t count = 0;
};
GraphStats stats(std::span<const GraphOfTriplets> graphs);

// Random KG over the full verbalization-table relation vocabulary, for
// desk-scale sampler runs: "e{i}" entities, unique triplets, no self-loops.
TripletStore synthetic_kg(int num_entities, int num_triplets, SeededRng& rng);

// Tokenization + plan compilation of one instance.
enum class CompileVariant { LGlm, GGlm, Sequence };
struct CompileOptions {
  CompileVariant variant = CompileVariant::LGlm;
  bool text_eos = true;  // append the tokenizer's EOS to the text segment
};
CompiledInstance compile_instance(const LabeledInstance& instance, const Tokenizer& tokenizer,
                                  const CompileOptions& options);
std::vector<CompiledInstance> compile_dataset(std::span<const LabeledInstance> instances,
                                              const Tokenizer& tokenizer,
                                              const CompileOptions& options);

// Dataset directory layout: train.jsonl / dev.jsonl / test.jsonl + meta.json.
// Loading re-validates labels, including the no-relation consistency rule
// (source is no-relation iff the relation label is).
void save_dataset(const std::string& dir, const DatasetSplits& splits);
DatasetSplits load_dataset(const std::string& dir);

}  // namespace glmkit
