// Acceptance checks for the toolkit. Each numbered criterion prints exactly
// one [PASS]/[FAIL] line with its measured values; criterion 10 is optional
// (driven by external assets via environment variables) and prints [SKIP]
// when not configured. The process exits nonzero if a required criterion
// fails.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glmkit/data.hpp"
#include "glmkit/encoder.hpp"
#include "glmkit/graph.hpp"
#include "glmkit/manifest.hpp"
#include "glmkit/position.hpp"
#include "glmkit/rng.hpp"
#include "glmkit/training.hpp"

using namespace glmkit;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int index, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %2d. %s — %s\n", ok ? "PASS" : "FAIL", index, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void report_skip(int index, const char* name, const std::string& detail) {
  std::printf("[SKIP] %2d. %s — %s\n", index, name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
  char buffer[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return buffer;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
  }
  return worst;
}

std::string join_words(std::span<const std::string> words, std::size_t first, std::size_t last) {
  std::string out;
  for (std::size_t i = first; i < last; ++i) {
    if (i > first) out += " ";
    out += words[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// 1. A sentence packed into a single triplet span encodes exactly like the
//    plain sequence model.

void criterion_1() {
  Timer timer;
  SeededRng rng(101);
  WhitespaceTokenizer tok;
  EncoderConfig config;
  ParameterSet params = init_params(config, 1);

  // Word pool of 40 so every 5-40 token sentence fits the default vocab.
  std::vector<std::string> pool;
  for (int i = 0; i < 40; ++i) pool.push_back("v" + std::to_string(i));

  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 5 + rng.uniform_index(36);
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.push_back(pool[order[i]]);

    // Split the sentence into head / relation / tail chunks.
    std::size_t a = 1 + rng.uniform_index(n - 2);
    std::size_t b = a + 1 + rng.uniform_index(n - a - 1);
    GraphOfTriplets g = GraphOfTriplets::from_triplets(
        {{join_words(words, 0, a), join_words(words, a, b), join_words(words, b, n)}});
    ExtendedLeviGraph elg = tokenize_levi(to_levi(g), tok);
    std::vector<int> ids = elg.token_ids();
    if (ids.size() != n) {
      report(1, "single-span graph encoding equals sequence encoding", false,
             fmt("tokenization drifted: %zu tokens from a %zu-word sentence", ids.size(), n));
      return;
    }

    std::vector<float> graph_out = encode<float>(ids, build_local(elg), params, config);
    std::vector<float> seq_out = encode<float>(ids, sequence_plan(ids.size()), params, config);
    worst = std::max(worst, max_abs_diff(graph_out, seq_out));
  }
  double elapsed = timer.seconds();
  report(1, "single-span graph encoding equals sequence encoding",
         worst < 1e-5 && elapsed < 30.0,
         fmt("50 sentences, max |delta| = %.2e, %.1f s", worst, elapsed));
}

// ---------------------------------------------------------------------------
// 2. Permuting the token axis of the plan permutes the embeddings.

void criterion_2() {
  Timer timer;
  SeededRng rng(202);
  WhitespaceTokenizer tok;
  EncoderConfig config;
  ParameterSet params = init_params(config, 2);
  const auto dm = static_cast<std::size_t>(config.d_model);

  std::vector<std::string> entities{"ape",  "bee",   "cat",      "dog",      "elk",
                                    "fox",  "gnu",   "tall oak", "wet moss", "old stone"};
  std::vector<std::string> relations{"eats", "fears", "lives near", "looks like"};

  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t count = 1 + rng.uniform_index(4);
    std::vector<Triplet> triplets;
    for (std::size_t t = 0; t < count; ++t) {
      std::string head = entities[rng.uniform_index(entities.size())];
      std::string tail = entities[rng.uniform_index(entities.size())];
      while (tail == head) tail = entities[rng.uniform_index(entities.size())];
      triplets.push_back({head, relations[rng.uniform_index(relations.size())], tail});
    }
    ExtendedLeviGraph elg =
        tokenize_levi(to_levi(GraphOfTriplets::from_triplets(std::move(triplets))), tok);
    std::vector<int> tokens = elg.token_ids();

    PositionPlan plan;
    if (trial % 2 == 0) {
      plan = build_global(elg);
    } else {
      std::vector<int> text_ids;
      for (const auto& piece : tok.tokenize("the animals met quietly")) {
        text_ids.push_back(piece.id);
      }
      plan = build_joint(elg, text_ids, PlanVariant::Global);
      tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());
    }
    if (tokens.size() > 40) continue;

    std::vector<std::size_t> perm(tokens.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(perm);

    PositionPlan permuted_plan = permute_plan(plan, perm);
    std::vector<int> permuted_tokens(tokens.size());
    for (std::size_t i = 0; i < perm.size(); ++i) permuted_tokens[i] = tokens[perm[i]];

    std::vector<float> base = encode<float>(tokens, plan, params, config);
    std::vector<float> moved = encode<float>(permuted_tokens, permuted_plan, params, config);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      std::span<const float> got(moved.data() + i * dm, dm);
      std::span<const float> want(base.data() + perm[i] * dm, dm);
      worst = std::max(worst, max_abs_diff(got, want));
    }
  }
  report(2, "token permutations permute the embeddings", worst < 1e-5,
         fmt("50 graphs, max |delta| = %.2e, %.1f s", worst, timer.seconds()));
}

// ---------------------------------------------------------------------------
// 3. One local layer: the readout token ignores out-of-triplet tokens; the
//    global variant does not.

void criterion_3() {
  GraphOfTriplets g = mask_target_relation(
      GraphOfTriplets::from_triplets(
          {{"alpha", "linked to", "beta"}, {"gamma", "tied to", "delta"}}),
      0);
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg = tokenize_levi(to_levi(g), tok);
  std::vector<int> tokens = elg.token_ids();

  EncoderConfig config;
  config.num_layers = 1;
  ParameterSet params = init_params(config, 3);
  const auto dm = static_cast<std::size_t>(config.d_model);

  std::size_t readout = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == tok.mask_sentinel_ids()[0]) readout = i;
  }
  std::set<std::size_t> in_span(elg.triplet_spans[0].begin(), elg.triplet_spans[0].end());
  std::vector<std::size_t> outside;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!in_span.count(i)) outside.push_back(i);
  }

  PositionPlan local = build_local(elg);
  PositionPlan global = build_global(elg);
  std::vector<float> base_local = encode<float>(tokens, local, params, config);
  std::vector<float> base_global = encode<float>(tokens, global, params, config);
  std::span<const float> row_local(base_local.data() + readout * dm, dm);
  std::span<const float> row_global(base_global.data() + readout * dm, dm);

  SeededRng rng(303);
  double worst_local = 0;
  double min_global = 1e9;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> mutated = tokens;
    std::size_t pos = outside[rng.uniform_index(outside.size())];
    int fresh = 101 + static_cast<int>(rng.uniform_index(800));
    while (fresh == mutated[pos]) fresh = 101 + static_cast<int>(rng.uniform_index(800));
    mutated[pos] = fresh;

    std::vector<float> out_local = encode<float>(mutated, local, params, config);
    std::vector<float> out_global = encode<float>(mutated, global, params, config);
    worst_local = std::max(
        worst_local,
        max_abs_diff({out_local.data() + readout * dm, dm}, row_local));
    min_global = std::min(
        min_global,
        max_abs_diff({out_global.data() + readout * dm, dm}, row_global));
  }
  report(3, "one local layer: readout blind to out-of-triplet tokens",
         worst_local < 1e-6 && min_global > 0.0,
         fmt("100 perturbations, local max |delta| = %.2e, global min |delta| = %.2e",
             worst_local, min_global));
}

// ---------------------------------------------------------------------------
// 4. Two local layers propagate information across shared concepts.

void criterion_4() {
  GraphOfTriplets g = GraphOfTriplets::from_triplets({{"black poodle", "is a", "dog"},
                                                      {"dog", "is a", "animal"},
                                                      {"cat", "is a", "animal"}});
  WhitespaceTokenizer tok;
  ExtendedLeviGraph elg = tokenize_levi(to_levi(g), tok);
  std::vector<int> tokens = elg.token_ids();

  std::size_t pos_black = 0, pos_animal = 0;
  for (std::size_t i = 0; i < elg.tokens.size(); ++i) {
    if (elg.tokens[i].surface == "black") pos_black = i;
    if (elg.tokens[i].surface == "animal") pos_animal = i;
  }

  EncoderConfig config;  // two layers by default
  ParameterSet params = init_params(config, 4);
  const auto dm = static_cast<std::size_t>(config.d_model);
  PositionPlan plan = build_local(elg);

  std::vector<float> base = encode<float>(tokens, plan, params, config);
  std::vector<int> mutated = tokens;
  mutated[pos_black] = tok.tokenize("white")[0].id;
  std::vector<float> out = encode<float>(mutated, plan, params, config);

  double delta = max_abs_diff({out.data() + pos_animal * dm, dm},
                              {base.data() + pos_animal * dm, dm});
  report(4, "two local layers: \"animal\" reacts to replacing \"black\"", delta > 1e-6,
         fmt("|delta| = %.2e at the \"animal\" token", delta));
}

// ---------------------------------------------------------------------------
// 5. Sentinel bias rows start as copies of the farthest-distance row and
//    then learn independently.

void criterion_5() {
  EncoderConfig config;
  ParameterSet params = init_params(config, 5, /*with_sentinel_rows=*/false);
  extend_sentinel_buckets(params, config);
  const auto nh = static_cast<std::size_t>(config.num_heads);
  const std::size_t far_row = 31;

  bool seeded_equal = true;
  for (std::size_t row : {std::size_t{32}, std::size_t{33}, std::size_t{34}}) {
    for (std::size_t h = 0; h < nh; ++h) {
      if (params.bias_table[row * nh + h] != params.bias_table[far_row * nh + h]) {
        seeded_equal = false;
      }
    }
  }

  // A short training run on joint instances (all three sentinel relations
  // appear in their plans) must pull the sentinel rows away from row 31.
  // Two instances at batch size 1: heads start at zero, so the first step
  // moves only the heads; the second pushes gradient into the encoder.
  LabeledInstance first;
  first.graph = mask_target_relation(
      GraphOfTriplets::from_triplets(
          {{"black poodle", "is a", "dog"}, {"cat", "is a", "animal"}}),
      0);
  first.text = "a dog chased the cat";
  first.relation_label = 0;
  first.source_label = kEntailed;
  LabeledInstance second;
  second.graph = mask_target_relation(
      GraphOfTriplets::from_triplets(
          {{"old pug", "is a", "dog"}, {"bird", "is a", "animal"}}),
      0);
  second.text = "the pug slept all day";
  second.relation_label = 1;
  second.source_label = kNotEntailed;

  WhitespaceTokenizer tok;
  CompileOptions options;
  options.variant = CompileVariant::GGlm;
  std::vector<CompiledInstance> split{compile_instance(first, tok, options),
                                      compile_instance(second, tok, options)};
  TrainConfig tc = TrainConfig::finetune_defaults();
  tc.learning_rate = 1e-3;
  tc.batch_size = 1;
  tc.max_epochs = 1;
  tc.patience = 1;
  tc.relation_weight = 0.9;
  tc.source_weight = 0.1;
  TaskShape shape{2, 3};
  (void)train(split, split, params, config, shape, tc);

  bool diverged = true;
  for (std::size_t row : {std::size_t{32}, std::size_t{33}, std::size_t{34}}) {
    bool differs = false;
    for (std::size_t h = 0; h < nh; ++h) {
      if (params.bias_table[row * nh + h] != params.bias_table[far_row * nh + h]) differs = true;
    }
    diverged = diverged && differs;
  }
  report(5, "sentinel bias rows: seeded from the +inf row, then diverge",
         seeded_equal && diverged,
         fmt("seeded bitwise-equal: %s; all three rows moved after one epoch: %s",
             seeded_equal ? "yes" : "no", diverged ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 6. Learning separation: the 2-hop cue is learnable with two local layers
//    and out of reach for one.

void criterion_6() {
  Timer timer;
  SeededRng rng(17);
  DatasetSplits splits = synth_graph_task(SynthTask::TwoHop, 2000, rng);

  WhitespaceTokenizer tok;
  CompileOptions options;
  options.variant = CompileVariant::LGlm;
  std::vector<CompiledInstance> train_c = compile_dataset(splits.train, tok, options);
  std::vector<CompiledInstance> dev_c = compile_dataset(splits.dev, tok, options);
  std::vector<CompiledInstance> test_c = compile_dataset(splits.test, tok, options);

  auto run_once = [&](int layers) {
    EncoderConfig config;
    config.num_layers = layers;
    config.vocab_size = std::max(config.vocab_size, tok.vocab_size());
    ParameterSet params = init_params(config, 7);
    TrainConfig tc = TrainConfig::finetune_defaults();
    tc.learning_rate = 1e-3;
    tc.seed = 7;
    TrainResult result = train(train_c, dev_c, params, config, splits.shape(), tc);
    return evaluate(test_c, params, config, result.heads, Metric::Accuracy);
  };

  double acc2 = run_once(2);
  double acc1 = run_once(1);
  double elapsed = timer.seconds();
  report(6, "2-hop task: two layers learn it, one layer cannot",
         acc2 >= 0.90 && acc1 <= 0.30 && elapsed < 600.0,
         fmt("test accuracy 2-layer %.3f (>= 0.90), 1-layer %.3f (<= 0.30), %.0f s",
             acc2, acc1, elapsed));
}

// ---------------------------------------------------------------------------
// 7. Analytic gradients match central finite differences.

void criterion_7() {
  EncoderConfig config;
  // Two layers so the T2G pairs (non-readout query rows) carry gradient.
  config.num_layers = 2;
  config.d_model = 6;
  config.num_heads = 2;
  config.d_head = 3;
  config.d_ff = 8;
  config.vocab_size = 40;
  config.activation = EncoderConfig::Activation::Gated;

  // Three tokens; the hand-assembled plan routes pairs through signed
  // distances and all three sentinel relations.
  CompiledInstance inst;
  inst.tokens = {3, 7, 11};
  PositionPlan plan;
  plan.n = 3;
  plan.rel = {RelPos::dist(0),  RelPos::g2g(),   RelPos::g2t(),
              RelPos::dist(-1), RelPos::dist(0), RelPos::g2t(),
              RelPos::t2g(),    RelPos::t2g(),   RelPos::dist(0)};
  plan.attend.assign(9, 1);
  plan.segment = {0, 0, 1};
  inst.plan = plan;
  inst.readout_candidates = {0};
  inst.relation_label = 2;
  inst.source_label = 1;

  TaskShape shape{4, 3};
  ParameterSetT<double> params = to_double(init_params(config, 7));
  Heads heads_f = make_heads(config, shape);
  SeededRng hrng(99);
  for (auto& v : heads_f.relation.weight) v = 0.05f * static_cast<float>(hrng.gaussian());
  for (auto& v : heads_f.relation.bias) v = 0.05f * static_cast<float>(hrng.gaussian());
  for (auto& v : heads_f.source->weight) v = 0.05f * static_cast<float>(hrng.gaussian());
  for (auto& v : heads_f.source->bias) v = 0.05f * static_cast<float>(hrng.gaussian());
  HeadsT<double> heads = heads_to_double(heads_f);

  ParameterSetT<double> grads = zero_like(params);
  HeadsT<double> head_grads = heads_to_double(make_heads(config, shape));
  (void)instance_backward<double>(inst, params, config, heads, 0.9, 0.1, grads, head_grads);

  auto loss_at = [&]() { return instance_loss<double>(inst, params, config, heads, 0.9, 0.1); };
  const double eps = 1e-5;
  double worst = 0;
  int compared = 0;
  auto check = [&](double& value, double analytic) {
    double orig = value;
    value = orig + eps;
    double lp = loss_at();
    value = orig - eps;
    double lm = loss_at();
    value = orig;
    double numeric = (lp - lm) / (2 * eps);
    if (std::abs(analytic) < 1e-12 && std::abs(numeric) < 1e-10) return;
    double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
    ++compared;
  };

  // Head weights and biases.
  for (std::size_t i = 0; i < heads.relation.weight.size(); i += 5) {
    check(heads.relation.weight[i], head_grads.relation.weight[i]);
  }
  for (std::size_t i = 0; i < heads.relation.bias.size(); ++i) {
    check(heads.relation.bias[i], head_grads.relation.bias[i]);
  }
  for (std::size_t i = 0; i < heads.source->weight.size(); i += 5) {
    check(heads.source->weight[i], head_grads.source->weight[i]);
  }
  // Sentinel bias rows (32 / 33 / 34), both heads.
  const auto nh = static_cast<std::size_t>(config.num_heads);
  for (std::size_t row : {std::size_t{32}, std::size_t{33}, std::size_t{34}}) {
    for (std::size_t h = 0; h < nh; ++h) {
      check(params.bias_table[row * nh + h], grads.bias_table[row * nh + h]);
    }
  }
  // One full Q projection.
  for (std::size_t i = 0; i < params.layers[0].wq.size(); ++i) {
    check(params.layers[0].wq[i], grads.layers[0].wq[i]);
  }

  report(7, "analytic gradients match finite differences", worst < 1e-3 && compared > 30,
         fmt("%d coordinates (heads, sentinel rows, full Q), worst rel err = %.2e",
             compared, worst));
}

// ---------------------------------------------------------------------------
// 8. Sampler statistics, family nesting, and mask-level soundness.

bool family_is_nested(const std::vector<GraphOfTriplets>& family) {
  for (std::size_t k = 0; k + 1 < family.size(); ++k) {
    const auto& small = family[k].triplets();
    const auto& big = family[k + 1].triplets();
    if (small.size() > big.size()) return false;
    for (std::size_t i = 0; i < small.size(); ++i) {
      if (!(small[i] == big[i])) return false;
    }
  }
  return true;
}

void criterion_8() {
  Timer timer;
  SeededRng kg_rng(88);
  TripletStore kg = synthetic_kg(400, 2000, kg_rng);

  SeededRng sample_rng(89);
  std::vector<GraphOfTriplets> radius1;
  std::size_t families = 0, nested = 0, seed_first = 0;
  for (std::size_t i = 0; i < kg.triplets().size() && families < 1000; ++i) {
    auto family = sample_subgraph(kg, i, 3, 2, sample_rng);
    if (!family) continue;
    ++families;
    radius1.push_back((*family)[0]);
    if (family_is_nested(*family)) ++nested;
    bool first = true;
    for (const auto& g : *family) {
      if (!(g.triplets()[0] == kg.triplets()[i])) first = false;
    }
    if (first) ++seed_first;
  }

  bool stats_ok = false;
  if (families == 1000) {
    GraphStats s = stats(radius1);
    stats_ok = s.nodes_mean == 2.0 && s.nodes_std == 0.0 && s.edges_mean == 1.0 &&
               s.edges_std == 0.0;
  }

  // Mask-level audit on a 7-link chain (unit eccentricity 7 from the middle
  // relation): for every m in 0..5 exactly the units within distance m wear
  // distinct sentinels.
  std::vector<Triplet> chain;
  for (int i = 0; i < 7; ++i) {
    chain.push_back({"node" + std::to_string(i), "step" + std::to_string(i),
                     "node" + std::to_string(i + 1)});
  }
  GraphOfTriplets base = mask_target_relation(GraphOfTriplets::from_triplets(chain), 3);
  std::vector<int> dist = levi_distances_from_target(base);
  LeviGraph base_levi = to_levi(base);

  bool audit_ok = true;
  for (int m = 0; m <= 5; ++m) {
    GraphOfTriplets masked = mask_subgraph(base, m);
    LeviGraph levi = to_levi(masked);
    if (levi.units.size() != base_levi.units.size()) {
      audit_ok = false;
      break;
    }
    std::set<std::string> sentinels;
    std::size_t masked_units = 0;
    for (std::size_t u = 0; u < levi.units.size(); ++u) {
      bool is_masked = parse_mask_sentinel(levi.units[u].text).has_value();
      bool expected = dist[u] >= 0 && dist[u] <= m;
      if (is_masked != expected) audit_ok = false;
      if (is_masked) {
        ++masked_units;
        sentinels.insert(levi.units[u].text);
      }
    }
    if (sentinels.size() != masked_units) audit_ok = false;  // sentinels stay distinct
  }

  report(8, "sampler: exact r=1 statistics, nesting, mask audit",
         families == 1000 && nested == 1000 && seed_first == 1000 && stats_ok && audit_ok,
         fmt("1000 families (nested %zu, seed-first %zu), r=1 nodes 2.00 +/- 0.00 and "
             "edges 1.00 +/- 0.00: %s, mask audit m=0..5: %s, %.0f s",
             nested, seed_first, stats_ok ? "yes" : "no", audit_ok ? "yes" : "no",
             timer.seconds()));
}

// ---------------------------------------------------------------------------
// 9. Loss arithmetic.

void criterion_9() {
  std::vector<float> uniform(17, 0.0f);
  double ln17_err = std::abs(cross_entropy<float>(uniform, 4) - std::log(17.0));

  std::vector<float> rel{0.4f, -0.9f, 1.3f, 0.2f};
  std::vector<float> src{0.1f, -0.5f, 0.8f};
  float single = cross_entropy<float>(rel, 2);
  bool boundary_bitwise =
      loss<float>(rel, src, 2, 1, 1.0, 0.0) == single &&
      loss<float>(rel, {}, 2, std::nullopt, 1.0, 0.0) == single;

  report(9, "loss arithmetic: ln 17 uniform loss, (1,0) weights bitwise",
         ln17_err < 1e-6 && boundary_bitwise,
         fmt("|loss - ln 17| = %.2e, boundary weights bitwise-equal: %s", ln17_err,
             boundary_bitwise ? "yes" : "no"));
}

// ---------------------------------------------------------------------------
// 10. Optional smoke run on external assets.

void criterion_10() {
  const char* weights = std::getenv("GLMKIT_PRETRAINED");
  const char* tsv = std::getenv("GLMKIT_CN_TSV");
  if (!weights || !tsv) {
    report_skip(10, "pretrained probe smoke run",
                "set GLMKIT_PRETRAINED (tensor container) and GLMKIT_CN_TSV "
                "(triplet dump) to enable; not a gating criterion");
    return;
  }
  try {
    Timer timer;
    TripletStore kg = TripletStore::load_tsv(tsv);
    SamplerConfig sampler;
    sampler.radius = 1;
    sampler.train_per_class = 100;  // 1,700 training instances over 17 classes
    sampler.dev_per_class = 12;
    sampler.test_per_class = 12;
    sampler.seed = 1234;
    DatasetSplits splits = build_cn_dataset(kg, sampler);

    WhitespaceTokenizer tok;
    CompileOptions options;
    options.variant = CompileVariant::LGlm;
    std::vector<CompiledInstance> train_c = compile_dataset(splits.train, tok, options);
    std::vector<CompiledInstance> dev_c = compile_dataset(splits.dev, tok, options);
    std::vector<CompiledInstance> test_c = compile_dataset(splits.test, tok, options);

    LoadedModel model = import_weights(weights);
    if (tok.vocab_size() > model.config.vocab_size) {
      std::printf("[FAIL] 10. pretrained probe smoke run — dataset vocabulary (%d ids) "
                  "exceeds the imported embedding table (%d rows); optional, not gating\n",
                  tok.vocab_size(), model.config.vocab_size);
      return;
    }

    TrainConfig tc = TrainConfig::linear_probe_defaults();
    tc.seed = 1234;
    TrainResult result =
        train(train_c, dev_c, model.params, model.config, splits.shape(), tc);
    double acc = evaluate(test_c, model.params, model.config, result.heads, Metric::Accuracy);
    double bar = 3.0 / 17.0;
    std::printf("[%s] 10. pretrained probe smoke run — test accuracy %.3f vs 3x-chance "
                "bar %.3f, %.0f s; optional, not gating\n",
                acc > bar ? "PASS" : "FAIL", acc, bar, timer.seconds());
  } catch (const std::exception& e) {
    std::printf("[FAIL] 10. pretrained probe smoke run — %s; optional, not gating\n", e.what());
  }
  std::fflush(stdout);
}

void guarded(int index, const char* name, void (*fn)()) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(index, name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  Eigen::setNbThreads(thread_cap());
  Timer total;

  guarded(1, "single-span graph encoding equals sequence encoding", criterion_1);
  guarded(2, "token permutations permute the embeddings", criterion_2);
  guarded(3, "one local layer: readout blind to out-of-triplet tokens", criterion_3);
  guarded(4, "two local layers: \"animal\" reacts to replacing \"black\"", criterion_4);
  guarded(5, "sentinel bias rows: seeded from the +inf row, then diverge", criterion_5);
  guarded(6, "2-hop task: two layers learn it, one layer cannot", criterion_6);
  guarded(7, "analytic gradients match finite differences", criterion_7);
  guarded(8, "sampler: exact r=1 statistics, nesting, mask audit", criterion_8);
  guarded(9, "loss arithmetic: ln 17 uniform loss, (1,0) weights bitwise", criterion_9);
  criterion_10();  // prints its own [SKIP]/[PASS]/non-gating [FAIL]

  std::printf("%d required criteria failed; total %.0f s\n", failures, total.seconds());
  return failures == 0 ? 0 : 1;
}
