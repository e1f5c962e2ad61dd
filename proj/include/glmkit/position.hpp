#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glmkit/graph.hpp"

namespace glmkit {

// Relative position of key token j as seen from query token i.
struct RelPos {
  enum class Kind : std::uint8_t {
    None = 0,        // masked pair, no position defined
    SignedDistance,  // within-span or within-text token distance
    G2G,             // graph-to-graph, outside any shared span
    T2G,             // text query attending a graph key
    G2T,             // graph query attending a text key
  };

  Kind kind = Kind::None;
  std::int32_t distance = 0;  // meaningful only for SignedDistance

  static constexpr RelPos none() { return {}; }
  static constexpr RelPos dist(std::int32_t d) { return {Kind::SignedDistance, d}; }
  static constexpr RelPos g2g() { return {Kind::G2G, 0}; }
  static constexpr RelPos t2g() { return {Kind::T2G, 0}; }
  static constexpr RelPos g2t() { return {Kind::G2T, 0}; }

  bool operator==(const RelPos&) const = default;
};

enum class PlanVariant : std::uint32_t { Local = 0, Global = 1 };

// The additive mask's "-inf": large enough that float32 softmax underflows
// the masked weight to exactly 0, small enough to stay finite.
inline constexpr float kMaskValue = -1e9f;

// Compiled attention recipe: pairwise relative positions P, the 0/-inf
// attendance pattern M, and which tokens are graph vs. text.
struct PositionPlan {
  std::size_t n = 0;
  PlanVariant variant = PlanVariant::Local;
  std::vector<RelPos> rel;            // n*n row-major, [query * n + key]
  std::vector<std::uint8_t> attend;   // n*n row-major, 1 = may attend
  std::vector<std::uint8_t> segment;  // per token, 0 = graph, 1 = text
  bool joint_text_missing = false;    // joint plan requested with empty text

  const RelPos& at(std::size_t i, std::size_t j) const { return rel[i * n + j]; }
  bool can_attend(std::size_t i, std::size_t j) const { return attend[i * n + j] != 0; }
  float mask(std::size_t i, std::size_t j) const {
    return can_attend(i, j) ? 0.0f : kMaskValue;
  }

  std::size_t graph_token_count() const;
  std::size_t text_token_count() const;
  // [first, last) ranges; throw if the segment is not contiguous
  // (possible after an arbitrary permutation).
  std::pair<std::size_t, std::size_t> graph_range() const;
  std::pair<std::size_t, std::size_t> text_range() const;
};

// Signed within-span distances for every token pair sharing >= 1 span.
// Conflicts (pair in several spans with different offsets) resolve to the
// smallest absolute distance, ties to the positive sign.
using SpanDistanceMap = std::map<std::pair<std::size_t, std::size_t>, std::int32_t>;
SpanDistanceMap triplet_relative_positions(const ExtendedLeviGraph& elg);

// lGLM: attention restricted to same-span pairs (plus the diagonal).
PositionPlan build_local(const ExtendedLeviGraph& elg);
// gGLM: everything attends everything; off-span pairs get the G2G sentinel.
PositionPlan build_global(const ExtendedLeviGraph& elg);
// Joint graph+text plan: graph block per `variant`, text block = sequence
// distances, cross blocks = T2G / G2T, all non-graph blocks fully attended.
// Empty text degrades to the graph-only plan with joint_text_missing set;
// an empty graph degrades to a pure sequence plan.
PositionPlan build_joint(const ExtendedLeviGraph& elg, std::span<const int> text_tokens,
                         PlanVariant variant);
// Pure text plan: P[i][j] = j - i, M all zero.
PositionPlan sequence_plan(std::size_t n_tokens);

// T5-style bidirectional log bucketing plus three appended sentinel buckets.
struct BucketTable {
  int num_distance_buckets = 32;
  int max_distance = 128;

  int num_buckets() const { return num_distance_buckets + 3; }
  int g2g_bucket() const { return num_distance_buckets; }
  int t2g_bucket() const { return num_distance_buckets + 1; }
  int g2t_bucket() const { return num_distance_buckets + 2; }
};

// Total over non-None RelPos; None -> error.
int bucketize(RelPos rp, const BucketTable& table);
// n*n bucket indices, -1 where the plan masks the pair.
std::vector<std::int32_t> plan_buckets(const PositionPlan& plan, const BucketTable& table);

// Reindex both axes: result.at(a, b) = plan.at(perm[a], perm[b]).
// perm must be a bijection on [0, n).
PositionPlan permute_plan(const PositionPlan& plan, std::span<const std::size_t> perm);

// JSON export: P as bucket indices with sentinel tags spelled out, M as a
// 0/1 attendance matrix, plus layout and bucket-table parameters.
std::string plan_to_json_string(const PositionPlan& plan, const BucketTable& table);

// Flat little-endian binary layout for external runtimes:
//   magic "GLMP", u32 version = 1, u32 n, u32 variant, u32 graph_len,
//   n*n i32 bucket indices (-1 masked), n*n u8 attendance.
// Requires graph tokens contiguous before text tokens (true for all builders).
void save_plan_binary(const std::string& path, const PositionPlan& plan,
                      const BucketTable& table);

struct PlanBinary {
  std::uint32_t version = 0;
  std::uint32_t n = 0;
  std::uint32_t variant = 0;
  std::uint32_t graph_len = 0;
  std::vector<std::int32_t> buckets;
  std::vector<std::uint8_t> attend;
};
PlanBinary load_plan_binary(const std::string& path);

}  // namespace glmkit
