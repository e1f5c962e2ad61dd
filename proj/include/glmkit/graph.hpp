#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glmkit {

// Mask sentinel convention shared by all tokenizers: "<extra_id_k>".
// Every tokenizer must map each sentinel to exactly one token id.
inline constexpr std::size_t kMaxMaskSentinels = 100;
std::string mask_sentinel_surface(std::size_t k);
std::optional<std::size_t> parse_mask_sentinel(std::string_view text);

struct Triplet {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triplet&) const = default;
};

// An ordered set of (head, relation, tail) facts, optionally with one
// triplet marked as the prediction target (its relation masked).
class GraphOfTriplets {
 public:
  GraphOfTriplets() = default;  // empty graph; to_levi and friends reject it
  static GraphOfTriplets from_triplets(std::vector<Triplet> triplets,
                                       std::optional<std::size_t> target = std::nullopt);

  const std::vector<Triplet>& triplets() const { return triplets_; }
  std::optional<std::size_t> target() const { return target_; }
  std::size_t size() const { return triplets_.size(); }

 private:
  GraphOfTriplets(std::vector<Triplet> t, std::optional<std::size_t> tgt)
      : triplets_(std::move(t)), target_(tgt) {}

  std::vector<Triplet> triplets_;
  std::optional<std::size_t> target_;
};

struct LeviUnit {
  enum class Kind { Concept, Relation };
  Kind kind;
  std::string text;
  std::vector<std::size_t> origins;  // triplet indices this unit belongs to
};

// Levi transformation of a GraphOfTriplets: relations become units wired
// head -> relation -> tail with original edge direction preserved.
struct LeviGraph {
  std::vector<LeviUnit> units;
  std::vector<std::pair<std::size_t, std::size_t>> edges;   // directed unit pairs
  std::vector<std::array<std::size_t, 3>> triplet_units;    // (head, relation, tail) per triplet

  std::size_t concept_count() const;
  std::size_t relation_count() const;
};

struct TokenNode {
  int id;
  std::string surface;
  std::size_t unit;    // owning Levi unit
  std::size_t offset;  // 0..k-1 position within the unit
};

// Token-level graph: one node per token, per-triplet token spans in
// head ++ relation ++ tail order, and consecutive-token edges.
struct ExtendedLeviGraph {
  std::vector<TokenNode> tokens;
  std::vector<std::vector<std::size_t>> triplet_spans;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::pair<std::size_t, std::size_t>> unit_token_ranges;  // [first, last) per unit

  std::size_t size() const { return tokens.size(); }
  std::vector<int> token_ids() const;
};

struct TokenPiece {
  int id;
  std::string text;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  // Deterministic: the same text always yields the same piece sequence.
  virtual std::vector<TokenPiece> tokenize(std::string_view text) const = 0;
  virtual int vocab_size() const = 0;
  virtual std::span<const int> mask_sentinel_ids() const = 0;
  virtual std::optional<int> eos_id() const { return std::nullopt; }
};

// Test and desk-scale tokenizer: splits on whitespace, assigns ids in
// first-seen order. Ids 0..99 are the mask sentinels, 100 is "</s>",
// ordinary words start at 101. Lazy assignment is thread-safe.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  WhitespaceTokenizer();
  ~WhitespaceTokenizer() override;
  WhitespaceTokenizer(const WhitespaceTokenizer&) = delete;
  WhitespaceTokenizer& operator=(const WhitespaceTokenizer&) = delete;

  std::vector<TokenPiece> tokenize(std::string_view text) const override;
  int vocab_size() const override;
  std::span<const int> mask_sentinel_ids() const override;
  std::optional<int> eos_id() const override { return 100; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Fixed word -> id table loaded from JSON; unknown words are an error.
class VocabTokenizer final : public Tokenizer {
 public:
  VocabTokenizer(std::vector<std::pair<std::string, int>> words,
                 std::vector<int> sentinel_ids, std::optional<int> eos);
  static VocabTokenizer load_json(const std::string& path);

  std::vector<TokenPiece> tokenize(std::string_view text) const override;
  int vocab_size() const override { return vocab_size_; }
  std::span<const int> mask_sentinel_ids() const override { return sentinel_ids_; }
  std::optional<int> eos_id() const override { return eos_; }

 private:
  std::vector<std::pair<std::string, int>> words_;
  std::vector<int> sentinel_ids_;
  std::optional<int> eos_;
  int vocab_size_;
};

LeviGraph to_levi(const GraphOfTriplets& g);
ExtendedLeviGraph tokenize_levi(const LeviGraph& levi, const Tokenizer& tok);

GraphOfTriplets mask_target_relation(const GraphOfTriplets& g, std::size_t i);
GraphOfTriplets mask_subgraph(const GraphOfTriplets& g, int m);

// Undirected unit-level BFS distances from the target relation unit.
// Index -1 means unreachable.
std::vector<int> levi_distances_from_target(const GraphOfTriplets& g);

const std::vector<std::string>& relation_label_set();      // the 17 class names
const std::vector<std::string>& verbalizable_relations();  // all 33 template names
std::string verbalize_relation(std::string_view name);
bool has_verbalization(std::string_view name);

// Line-based TSV: head <tab> relation <tab> tail.
std::vector<Triplet> load_triplets_tsv(const std::string& path);
void save_triplets_tsv(const std::string& path, std::span<const Triplet> triplets);

// JSON schema: {"triplets": [{"head","relation","tail"}...],
//               "target": int|null, "mask_level": int|null}
struct GraphDocument {
  GraphOfTriplets graph;
  std::optional<int> mask_level;
};
GraphDocument load_graph_json(const std::string& path);
std::string graph_to_json_string(const GraphOfTriplets& g,
                                 std::optional<int> mask_level = std::nullopt);

}  // namespace glmkit
