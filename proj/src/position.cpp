#include "glmkit/position.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace glmkit {

namespace {

std::pair<std::size_t, std::size_t> contiguous_range(const std::vector<std::uint8_t>& segment,
                                                     std::uint8_t wanted, const char* what) {
  std::size_t first = segment.size(), last = 0;
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] == wanted) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  if (first >= last) return {0, 0};
  for (std::size_t i = first; i < last; ++i) {
    if (segment[i] != wanted) {
      throw std::logic_error(std::string(what) + " tokens are not contiguous in this plan");
    }
  }
  return {first, last};
}

PositionPlan empty_plan(std::size_t n, PlanVariant variant) {
  PositionPlan plan;
  plan.n = n;
  plan.variant = variant;
  plan.rel.assign(n * n, RelPos::none());
  plan.attend.assign(n * n, 0);
  plan.segment.assign(n, 0);
  return plan;
}

// Graph block of a plan whose first `n_g` tokens are the graph tokens.
void fill_graph_block(PositionPlan& plan, const ExtendedLeviGraph& elg, PlanVariant variant) {
  const std::size_t n = plan.n;
  const std::size_t n_g = elg.size();
  SpanDistanceMap dist = triplet_relative_positions(elg);
  for (std::size_t i = 0; i < n_g; ++i) {
    for (std::size_t j = 0; j < n_g; ++j) {
      RelPos& rp = plan.rel[i * n + j];
      std::uint8_t& att = plan.attend[i * n + j];
      if (i == j) {
        rp = RelPos::dist(0);
        att = 1;
      } else if (auto it = dist.find({i, j}); it != dist.end()) {
        rp = RelPos::dist(it->second);
        att = 1;
      } else if (variant == PlanVariant::Global) {
        rp = RelPos::g2g();
        att = 1;
      }  // Local off-span pairs stay None / masked.
    }
  }
}

template <typename T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace

std::size_t PositionPlan::graph_token_count() const {
  return static_cast<std::size_t>(std::count(segment.begin(), segment.end(), 0));
}

std::size_t PositionPlan::text_token_count() const {
  return n - graph_token_count();
}

std::pair<std::size_t, std::size_t> PositionPlan::graph_range() const {
  return contiguous_range(segment, 0, "graph");
}

std::pair<std::size_t, std::size_t> PositionPlan::text_range() const {
  return contiguous_range(segment, 1, "text");
}

SpanDistanceMap triplet_relative_positions(const ExtendedLeviGraph& elg) {
  SpanDistanceMap out;
  for (const auto& span : elg.triplet_spans) {
    for (std::size_t p = 0; p < span.size(); ++p) {
      for (std::size_t q = 0; q < span.size(); ++q) {
        std::int32_t d = static_cast<std::int32_t>(q) - static_cast<std::int32_t>(p);
        auto [it, inserted] = out.try_emplace({span[p], span[q]}, d);
        if (inserted) continue;
        // Pair shared by several spans: keep the smallest |d|, tie -> positive.
        std::int32_t best = it->second;
        if (std::abs(d) < std::abs(best) || (std::abs(d) == std::abs(best) && d > best)) {
          it->second = d;
        }
      }
    }
  }
  return out;
}

PositionPlan build_local(const ExtendedLeviGraph& elg) {
  PositionPlan plan = empty_plan(elg.size(), PlanVariant::Local);
  fill_graph_block(plan, elg, PlanVariant::Local);
  return plan;
}

PositionPlan build_global(const ExtendedLeviGraph& elg) {
  PositionPlan plan = empty_plan(elg.size(), PlanVariant::Global);
  fill_graph_block(plan, elg, PlanVariant::Global);
  return plan;
}

PositionPlan sequence_plan(std::size_t n_tokens) {
  PositionPlan plan = empty_plan(n_tokens, PlanVariant::Local);
  plan.segment.assign(n_tokens, 1);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    for (std::size_t j = 0; j < n_tokens; ++j) {
      plan.rel[i * n_tokens + j] =
          RelPos::dist(static_cast<std::int32_t>(j) - static_cast<std::int32_t>(i));
      plan.attend[i * n_tokens + j] = 1;
    }
  }
  return plan;
}

PositionPlan build_joint(const ExtendedLeviGraph& elg, std::span<const int> text_tokens,
                         PlanVariant variant) {
  const std::size_t n_g = elg.size();
  const std::size_t n_t = text_tokens.size();
  if (n_g == 0 && n_t == 0) {
    throw std::invalid_argument("joint plan needs at least one graph or text token");
  }
  if (n_g == 0) return sequence_plan(n_t);
  if (n_t == 0) {
    PositionPlan plan =
        variant == PlanVariant::Local ? build_local(elg) : build_global(elg);
    plan.joint_text_missing = true;
    return plan;
  }

  const std::size_t n = n_g + n_t;
  PositionPlan plan = empty_plan(n, variant);
  for (std::size_t i = n_g; i < n; ++i) plan.segment[i] = 1;
  fill_graph_block(plan, elg, variant);
  for (std::size_t i = n_g; i < n; ++i) {
    for (std::size_t j = n_g; j < n; ++j) {
      plan.rel[i * n + j] =
          RelPos::dist(static_cast<std::int32_t>(j) - static_cast<std::int32_t>(i));
      plan.attend[i * n + j] = 1;
    }
  }
  for (std::size_t i = n_g; i < n; ++i) {    // text query, graph key
    for (std::size_t j = 0; j < n_g; ++j) {
      plan.rel[i * n + j] = RelPos::t2g();
      plan.attend[i * n + j] = 1;
    }
  }
  for (std::size_t i = 0; i < n_g; ++i) {    // graph query, text key
    for (std::size_t j = n_g; j < n; ++j) {
      plan.rel[i * n + j] = RelPos::g2t();
      plan.attend[i * n + j] = 1;
    }
  }
  return plan;
}

int bucketize(RelPos rp, const BucketTable& table) {
  switch (rp.kind) {
    case RelPos::Kind::G2G:
      return table.g2g_bucket();
    case RelPos::Kind::T2G:
      return table.t2g_bucket();
    case RelPos::Kind::G2T:
      return table.g2t_bucket();
    case RelPos::Kind::None:
      throw std::invalid_argument("cannot bucketize a masked (None) relative position");
    case RelPos::Kind::SignedDistance:
      break;
  }
  // Bidirectional scheme: half the buckets per sign, exact below
  // half/2, logarithmic up to max_distance beyond that.
  const int half = table.num_distance_buckets / 2;
  const int max_exact = half / 2;
  int bucket = rp.distance > 0 ? half : 0;
  const int ad = std::abs(rp.distance);
  if (ad < max_exact) {
    bucket += ad;
  } else {
    int log_scaled =
        max_exact + static_cast<int>(std::log(static_cast<double>(ad) / max_exact) /
                                     std::log(static_cast<double>(table.max_distance) / max_exact) *
                                     (half - max_exact));
    bucket += std::min(log_scaled, half - 1);
  }
  return bucket;
}

std::vector<std::int32_t> plan_buckets(const PositionPlan& plan, const BucketTable& table) {
  std::vector<std::int32_t> out(plan.n * plan.n, -1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (plan.attend[k]) out[k] = bucketize(plan.rel[k], table);
  }
  return out;
}

PositionPlan permute_plan(const PositionPlan& plan, std::span<const std::size_t> perm) {
  const std::size_t n = plan.n;
  if (perm.size() != n) {
    throw std::invalid_argument("permutation length " + std::to_string(perm.size()) +
                                " does not match plan size " + std::to_string(n));
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) throw std::invalid_argument("permutation is not a bijection on [0, n)");
    seen[p] = 1;
  }
  PositionPlan out = empty_plan(n, plan.variant);
  out.joint_text_missing = plan.joint_text_missing;
  for (std::size_t a = 0; a < n; ++a) {
    out.segment[a] = plan.segment[perm[a]];
    for (std::size_t b = 0; b < n; ++b) {
      out.rel[a * n + b] = plan.rel[perm[a] * n + perm[b]];
      out.attend[a * n + b] = plan.attend[perm[a] * n + perm[b]];
    }
  }
  return out;
}

std::string plan_to_json_string(const PositionPlan& plan, const BucketTable& table) {
  nlohmann::json doc;
  doc["n"] = plan.n;
  doc["variant"] = plan.variant == PlanVariant::Local ? "local" : "global";
  auto [gf, gl] = plan.graph_range();
  auto [tf, tl] = plan.text_range();
  doc["graph_tokens"] = {gf, gl};
  doc["text_tokens"] = {tf, tl};
  doc["num_distance_buckets"] = table.num_distance_buckets;
  doc["max_distance"] = table.max_distance;
  if (plan.joint_text_missing) doc["joint_text_missing"] = true;

  nlohmann::json p_rows = nlohmann::json::array();
  nlohmann::json m_rows = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.n; ++i) {
    nlohmann::json p_row = nlohmann::json::array();
    nlohmann::json m_row = nlohmann::json::array();
    for (std::size_t j = 0; j < plan.n; ++j) {
      const RelPos& rp = plan.at(i, j);
      switch (rp.kind) {
        case RelPos::Kind::None:
          p_row.push_back(nullptr);
          break;
        case RelPos::Kind::SignedDistance:
          p_row.push_back(bucketize(rp, table));
          break;
        case RelPos::Kind::G2G:
          p_row.push_back("G2G");
          break;
        case RelPos::Kind::T2G:
          p_row.push_back("T2G");
          break;
        case RelPos::Kind::G2T:
          p_row.push_back("G2T");
          break;
      }
      m_row.push_back(plan.can_attend(i, j) ? 1 : 0);
    }
    p_rows.push_back(std::move(p_row));
    m_rows.push_back(std::move(m_row));
  }
  doc["P"] = std::move(p_rows);
  doc["M"] = std::move(m_rows);
  return doc.dump(2);
}

void save_plan_binary(const std::string& path, const PositionPlan& plan,
                      const BucketTable& table) {
  auto [gf, gl] = plan.graph_range();  // throws on non-contiguous layouts
  if (gf != 0) {
    throw std::logic_error("binary plan export expects graph tokens first");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write plan file " + path);
  out.write("GLMP", 4);
  write_raw(out, std::uint32_t{1});
  write_raw(out, static_cast<std::uint32_t>(plan.n));
  write_raw(out, static_cast<std::uint32_t>(plan.variant));
  write_raw(out, static_cast<std::uint32_t>(gl - gf));
  for (std::int32_t b : plan_buckets(plan, table)) write_raw(out, b);
  out.write(reinterpret_cast<const char*>(plan.attend.data()),
            static_cast<std::streamsize>(plan.attend.size()));
  if (!out) throw std::runtime_error("short write on plan file " + path);
}

PlanBinary load_plan_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open plan file " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "GLMP") {
    throw std::runtime_error(path + " is not a plan file (bad magic)");
  }
  PlanBinary bin;
  read_raw(in, bin.version);
  if (bin.version != 1) {
    throw std::runtime_error("unsupported plan file version " + std::to_string(bin.version));
  }
  read_raw(in, bin.n);
  read_raw(in, bin.variant);
  read_raw(in, bin.graph_len);
  bin.buckets.resize(static_cast<std::size_t>(bin.n) * bin.n);
  in.read(reinterpret_cast<char*>(bin.buckets.data()),
          static_cast<std::streamsize>(bin.buckets.size() * sizeof(std::int32_t)));
  bin.attend.resize(static_cast<std::size_t>(bin.n) * bin.n);
  in.read(reinterpret_cast<char*>(bin.attend.data()),
          static_cast<std::streamsize>(bin.attend.size()));
  if (!in) throw std::runtime_error("truncated plan file " + path);
  return bin;
}

}  // namespace glmkit
