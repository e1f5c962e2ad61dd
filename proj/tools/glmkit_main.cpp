// glmkit command-line tool: dataset building, plan inspection/export,
// training, evaluation, and one-off encoding.
//
// Exit codes: 0 success, 2 usage/config error, 1 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "glmkit/data.hpp"
#include "glmkit/encoder.hpp"
#include "glmkit/graph.hpp"
#include "glmkit/manifest.hpp"
#include "glmkit/position.hpp"
#include "glmkit/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --------------------------------------------------------------------------
// Shared plumbing

// Parse a JSON config file, reporting syntax errors with a line number.
json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line;
    }
    throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + e.what());
  }
}

// Atomically publish a staged file: write to <final>.tmp, then rename here.
void commit_file(const std::string& staged, const std::string& final_path) {
  fs::rename(staged, final_path);
}

void atomic_write_text(const std::string& path, const std::string& text) {
  std::string staged = path + ".tmp";
  {
    std::ofstream out(staged, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + staged);
    out << text;
  }
  commit_file(staged, path);
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string join_argv(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += " ";
    out += argv[i];
  }
  return out;
}

glmkit::CompileVariant parse_variant(const std::string& name) {
  if (name == "lglm") return glmkit::CompileVariant::LGlm;
  if (name == "gglm") return glmkit::CompileVariant::GGlm;
  if (name == "sequence") return glmkit::CompileVariant::Sequence;
  throw std::invalid_argument("unknown variant \"" + name + "\"");
}

// Applies a "train" config-file section over mode defaults.
void apply_train_section(const json& section, glmkit::TrainConfig& tc) {
  auto get_double = [&](const char* key, double& into) {
    if (section.contains(key)) into = section.at(key).get<double>();
  };
  auto get_int = [&](const char* key, int& into) {
    if (section.contains(key)) into = section.at(key).get<int>();
  };
  get_double("learning_rate", tc.learning_rate);
  get_int("batch_size", tc.batch_size);
  get_int("max_epochs", tc.max_epochs);
  get_int("patience", tc.patience);
  get_double("relation_weight", tc.relation_weight);
  get_double("source_weight", tc.source_weight);
  get_double("weight_decay", tc.weight_decay);
  get_double("dropout", tc.dropout);
  if (section.contains("seed")) tc.seed = section.at("seed").get<std::uint64_t>();
}

json train_config_to_json(const glmkit::TrainConfig& tc) {
  return json{{"mode", tc.mode == glmkit::TrainConfig::Mode::Finetune ? "finetune" : "probe"},
              {"learning_rate", tc.learning_rate},
              {"batch_size", tc.batch_size},
              {"max_epochs", tc.max_epochs},
              {"patience", tc.patience},
              {"relation_weight", tc.relation_weight},
              {"source_weight", tc.source_weight},
              {"weight_decay", tc.weight_decay},
              {"dropout", tc.dropout},
              {"seed", tc.seed}};
}

// --------------------------------------------------------------------------
// build-dataset

struct BuildDatasetArgs {
  std::string task;
  std::string kg_path;
  std::string out_dir;
  std::string config_path;
  int radius = 1;
  int mask_level = 0;
  int per_class = 0;  // 0 = keep config/default quotas
  int train_size = 2000;
  int num_relations = 4;
  std::uint64_t seed = 0;
};

int run_build_dataset(const BuildDatasetArgs& args, const std::string& command_line) {
  Timer timer;
  glmkit::RunManifest manifest;
  manifest.command = command_line;
  manifest.seeds = {args.seed};

  json config = json::object();
  if (!args.config_path.empty()) {
    config = parse_json_file(args.config_path);
    manifest.input_hashes.emplace_back(args.config_path, glmkit::hash_file(args.config_path));
  }

  glmkit::DatasetSplits splits;
  json effective{{"task", args.task}, {"seed", args.seed}};

  if (args.task == "cn") {
    if (args.kg_path.empty()) {
      throw std::invalid_argument("--task cn requires --kg <tsv file>");
    }
    glmkit::SamplerConfig sampler;
    if (config.contains("sampler")) {
      const json& s = config["sampler"];
      if (s.contains("triplets_per_frontier")) {
        sampler.triplets_per_frontier = s.at("triplets_per_frontier").get<int>();
      }
      if (s.contains("train_per_class")) sampler.train_per_class = s.at("train_per_class").get<int>();
      if (s.contains("dev_per_class")) sampler.dev_per_class = s.at("dev_per_class").get<int>();
      if (s.contains("test_per_class")) sampler.test_per_class = s.at("test_per_class").get<int>();
      if (s.contains("label_set")) {
        sampler.label_set = s.at("label_set").get<std::vector<std::string>>();
      }
    }
    sampler.radius = args.radius;
    sampler.mask_level = args.mask_level;
    sampler.seed = args.seed;
    if (args.per_class > 0) {
      sampler.train_per_class = args.per_class;
      sampler.dev_per_class = std::max(1, args.per_class / 8);
      sampler.test_per_class = sampler.dev_per_class;
    }

    glmkit::TripletStore kg = glmkit::TripletStore::load_tsv(args.kg_path);
    manifest.input_hashes.emplace_back(args.kg_path, glmkit::hash_file(args.kg_path));
    if (kg.dropped_duplicates() || kg.dropped_unknown_relations()) {
      std::cerr << "kg: dropped " << kg.dropped_duplicates() << " duplicate triplets, "
                << kg.dropped_unknown_relations() << " with unknown relations\n";
    }
    splits = glmkit::build_cn_dataset(kg, sampler);
    effective["sampler"] = {{"radius", sampler.radius},
                            {"mask_level", sampler.mask_level},
                            {"triplets_per_frontier", sampler.triplets_per_frontier},
                            {"train_per_class", sampler.train_per_class},
                            {"dev_per_class", sampler.dev_per_class},
                            {"test_per_class", sampler.test_per_class},
                            {"classes", sampler.label_set.empty()
                                            ? glmkit::relation_label_set().size()
                                            : sampler.label_set.size()}};
  } else if (args.task == "1hop" || args.task == "2hop") {
    glmkit::SeededRng rng(args.seed);
    splits = glmkit::synth_graph_task(
        args.task == "1hop" ? glmkit::SynthTask::OneHop : glmkit::SynthTask::TwoHop,
        args.train_size, rng);
    splits.seed = args.seed;
    effective["train_size"] = args.train_size;
  } else if (args.task == "joint") {
    glmkit::SeededRng rng(args.seed);
    splits = glmkit::synth_joint_task(args.train_size, args.num_relations, rng);
    splits.seed = args.seed;
    effective["train_size"] = args.train_size;
    effective["num_relations"] = args.num_relations;
  } else {
    throw std::invalid_argument("unknown task \"" + args.task + "\"");
  }

  // Stage the dataset, then publish each file with an atomic rename.
  fs::create_directories(args.out_dir);
  std::string stage = args.out_dir + "/.staging";
  glmkit::save_dataset(stage, splits);
  for (const char* name : {"meta.json", "train.jsonl", "dev.jsonl", "test.jsonl"}) {
    commit_file(stage + "/" + name, args.out_dir + "/" + name);
    manifest.outputs.push_back(args.out_dir + "/" + name);
  }
  fs::remove_all(stage);

  manifest.config_json = effective.dump();
  manifest.wall_clock_seconds = timer.seconds();
  glmkit::save_manifest(args.out_dir + "/manifest.json", manifest);

  std::cout << "task " << splits.task << ": " << splits.train.size() << " train / "
            << splits.dev.size() << " dev / " << splits.test.size() << " test instances, "
            << splits.label_names.size() << " classes -> " << args.out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// inspect

struct InspectArgs {
  std::string graph_path;
  std::string variant = "gglm";
  std::string text;
  std::string json_out;
  std::string plan_out;
};

std::string cell_for(const glmkit::PositionPlan& plan, std::size_t i, std::size_t j) {
  if (!plan.can_attend(i, j)) return "·";
  const glmkit::RelPos& rp = plan.at(i, j);
  switch (rp.kind) {
    case glmkit::RelPos::Kind::SignedDistance:
      return (rp.distance > 0 ? "+" : "") + std::to_string(rp.distance);
    case glmkit::RelPos::Kind::G2G: return "G2G";
    case glmkit::RelPos::Kind::T2G: return "T2G";
    case glmkit::RelPos::Kind::G2T: return "G2T";
    case glmkit::RelPos::Kind::None: return "·";
  }
  return "?";
}

void print_grid(std::ostream& os, const char* title, std::size_t n,
                const std::function<std::string(std::size_t, std::size_t)>& cell) {
  os << "\n" << title << "\n";
  std::size_t width = 3;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) width = std::max(width, cell(i, j).size());
  }
  auto pad = [&](const std::string& s) {
    return std::string(width + 1 - s.size(), ' ') + s;
  };
  os << "    ";
  for (std::size_t j = 0; j < n; ++j) os << pad(std::to_string(j));
  os << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    os << (i < 10 ? "  " : " ") << i << " ";
    for (std::size_t j = 0; j < n; ++j) os << pad(cell(i, j));
    os << "\n";
  }
}

int run_inspect(const InspectArgs& args) {
  glmkit::GraphDocument doc = glmkit::load_graph_json(args.graph_path);
  glmkit::GraphOfTriplets g = doc.graph;
  if (doc.mask_level && *doc.mask_level > 0) g = glmkit::mask_subgraph(g, *doc.mask_level);

  glmkit::WhitespaceTokenizer tokenizer;
  glmkit::ExtendedLeviGraph elg = glmkit::tokenize_levi(glmkit::to_levi(g), tokenizer);

  std::vector<int> text_ids;
  std::vector<std::string> text_surfaces;
  if (!args.text.empty()) {
    for (const auto& piece : tokenizer.tokenize(args.text)) {
      text_ids.push_back(piece.id);
      text_surfaces.push_back(piece.text);
    }
  }

  glmkit::CompileVariant variant = parse_variant(args.variant);
  glmkit::PositionPlan plan;
  if (variant == glmkit::CompileVariant::Sequence) {
    plan = glmkit::sequence_plan(elg.size() + text_ids.size());
  } else {
    glmkit::PlanVariant pv = variant == glmkit::CompileVariant::LGlm ? glmkit::PlanVariant::Local
                                                                     : glmkit::PlanVariant::Global;
    plan = text_ids.empty() ? (pv == glmkit::PlanVariant::Local ? glmkit::build_local(elg)
                                                                : glmkit::build_global(elg))
                            : glmkit::build_joint(elg, text_ids, pv);
  }

  std::ostream& os = std::cout;
  os << "graph: " << g.size() << " triplets, " << elg.size() << " graph tokens";
  if (!text_ids.empty()) os << " + " << text_ids.size() << " text tokens";
  os << " (variant " << args.variant << ")\n\ntokens:\n";
  for (std::size_t i = 0; i < elg.tokens.size(); ++i) {
    const auto& t = elg.tokens[i];
    os << "  " << i << "\t" << t.surface << "\t(unit " << t.unit << ")\n";
  }
  for (std::size_t i = 0; i < text_surfaces.size(); ++i) {
    os << "  " << elg.size() + i << "\t" << text_surfaces[i] << "\t(text)\n";
  }

  print_grid(os, "P (relative positions; · = masked pair):", plan.n,
             [&](std::size_t i, std::size_t j) { return cell_for(plan, i, j); });
  print_grid(os, "M (attendance; . = attend, x = -inf):", plan.n,
             [&](std::size_t i, std::size_t j) -> std::string {
               return plan.can_attend(i, j) ? "." : "x";
             });

  glmkit::BucketTable table;
  if (!args.json_out.empty()) {
    atomic_write_text(args.json_out, glmkit::plan_to_json_string(plan, table));
    os << "\nwrote " << args.json_out << "\n";
  }
  if (!args.plan_out.empty()) {
    std::string staged = args.plan_out + ".tmp";
    glmkit::save_plan_binary(staged, plan, table);
    commit_file(staged, args.plan_out);
    os << "wrote " << args.plan_out << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------------
// train / eval

struct TrainEvalArgs {
  std::string data_dir;
  std::string out_dir;
  std::string variant = "lglm";
  std::string mode = "finetune";
  std::string weights_path;
  std::string checkpoint_path;  // eval only
  std::string config_path;
  std::string metric = "accuracy";
  bool joint = false;
  int num_seeds = 1;
  std::uint64_t seed = 0;
  double lr = 0.0;  // 0 = mode default
  int batch_size = 0;
  int max_epochs = 0;
  int patience = -1;
};

struct PreparedRun {
  glmkit::DatasetSplits splits;
  std::vector<glmkit::CompiledInstance> train, dev, test;
  glmkit::EncoderConfig encoder_config;
  glmkit::ParameterSet params;
  glmkit::TrainConfig train_config;
  json effective_config;
};

// Loads the dataset, compiles every split with one shared tokenizer, and
// resolves the encoder + training configuration (config file < flags).
PreparedRun prepare_run(const TrainEvalArgs& args, glmkit::RunManifest& manifest) {
  PreparedRun run;
  run.splits = glmkit::load_dataset(args.data_dir);
  for (const char* name : {"meta.json", "train.jsonl", "dev.jsonl", "test.jsonl"}) {
    std::string path = args.data_dir + "/" + std::string(name);
    manifest.input_hashes.emplace_back(path, glmkit::hash_file(path));
  }

  json config = json::object();
  if (!args.config_path.empty()) {
    config = parse_json_file(args.config_path);
    manifest.input_hashes.emplace_back(args.config_path, glmkit::hash_file(args.config_path));
  }

  // Splits share one tokenizer; ids are assigned in first-seen order, so
  // compiling train -> dev -> test is part of the reproducibility contract.
  glmkit::WhitespaceTokenizer tokenizer;
  glmkit::CompileOptions options;
  options.variant = parse_variant(args.variant);
  run.train = glmkit::compile_dataset(run.splits.train, tokenizer, options);
  run.dev = glmkit::compile_dataset(run.splits.dev, tokenizer, options);
  run.test = glmkit::compile_dataset(run.splits.test, tokenizer, options);

  // Encoder: imported weights trump the config file; otherwise desk-scale
  // defaults patched by the config file, with the vocab sized to fit.
  if (!args.weights_path.empty()) {
    glmkit::LoadedModel model = glmkit::import_weights(args.weights_path);
    manifest.input_hashes.emplace_back(args.weights_path, glmkit::hash_file(args.weights_path));
    run.encoder_config = model.config;
    run.params = std::move(model.params);
    if (tokenizer.vocab_size() > run.encoder_config.vocab_size) {
      throw std::invalid_argument(
          "dataset vocabulary (" + std::to_string(tokenizer.vocab_size()) +
          " ids) exceeds the imported embedding table (" +
          std::to_string(run.encoder_config.vocab_size) + " rows)");
    }
  } else {
    if (config.contains("encoder")) {
      run.encoder_config = glmkit::config_from_json_string(config["encoder"].dump());
    }
    run.encoder_config.vocab_size =
        std::max(run.encoder_config.vocab_size, tokenizer.vocab_size());
    run.params = glmkit::init_params(run.encoder_config, args.seed);
  }

  // Training config: mode defaults, then the config file, then flags.
  run.train_config = args.mode == "probe" ? glmkit::TrainConfig::linear_probe_defaults()
                                          : glmkit::TrainConfig::finetune_defaults();
  if (config.contains("train")) apply_train_section(config["train"], run.train_config);
  if (args.lr > 0) run.train_config.learning_rate = args.lr;
  if (args.batch_size > 0) run.train_config.batch_size = args.batch_size;
  if (args.max_epochs > 0) run.train_config.max_epochs = args.max_epochs;
  if (args.patience >= 0) run.train_config.patience = args.patience;
  run.train_config.seed = args.seed;
  if (args.joint) {
    if (!run.splits.source_classes) {
      throw std::invalid_argument("--joint requires a dataset with source labels");
    }
    run.train_config.relation_weight = 0.9;
    run.train_config.source_weight = 0.1;
  }
  glmkit::validate(run.train_config);

  run.effective_config = {
      {"data", args.data_dir},
      {"variant", args.variant},
      {"mode", args.mode},
      {"joint", args.joint},
      {"encoder", json::parse(glmkit::config_to_json_string(run.encoder_config))},
      {"train", train_config_to_json(run.train_config)}};
  if (!args.weights_path.empty()) run.effective_config["weights"] = args.weights_path;
  return run;
}

int run_train(const TrainEvalArgs& args, const std::string& command_line) {
  Timer timer;
  glmkit::RunManifest manifest;
  manifest.command = command_line;
  manifest.seeds = {args.seed};

  PreparedRun run = prepare_run(args, manifest);
  glmkit::TrainResult result = glmkit::train(run.train, run.dev, run.params, run.encoder_config,
                                             run.splits.shape(), run.train_config);
  for (const auto& record : result.trace) {
    if (record.split == "dev") {
      std::cout << "epoch " << record.epoch << " dev-loss " << record.loss;
      if (record.metric) std::cout << " dev-acc " << *record.metric;
      std::cout << "\n";
    }
  }
  std::cout << "best epoch " << result.best_epoch << " (dev loss " << result.best_dev_loss
            << "), ran " << result.epochs_run << " epochs\n";

  fs::create_directories(args.out_dir);
  std::string checkpoint = args.out_dir + "/checkpoint.safetensors";
  glmkit::save_checkpoint(checkpoint + ".tmp", run.params, run.encoder_config, result.heads);
  commit_file(checkpoint + ".tmp", checkpoint);
  std::string metrics = args.out_dir + "/metrics.jsonl";
  glmkit::write_metrics_jsonl(metrics + ".tmp", result.trace);
  commit_file(metrics + ".tmp", metrics);
  manifest.outputs = {checkpoint, metrics};

  double test_acc = glmkit::evaluate(run.test, run.params, run.encoder_config, result.heads,
                                     glmkit::Metric::Accuracy);
  std::cout << "test accuracy " << test_acc << "\n";

  manifest.config_json = run.effective_config.dump();
  manifest.wall_clock_seconds = timer.seconds();
  glmkit::save_manifest(args.out_dir + "/manifest.json", manifest);
  return 0;
}

int run_eval(const TrainEvalArgs& args, const std::string& command_line) {
  Timer timer;
  glmkit::RunManifest manifest;
  manifest.command = command_line;

  glmkit::Metric metric;
  if (args.metric == "accuracy") {
    metric = glmkit::Metric::Accuracy;
  } else if (args.metric == "macro-f1") {
    metric = glmkit::Metric::MacroF1;
  } else {
    throw std::invalid_argument("unknown metric \"" + args.metric + "\"");
  }

  // Checkpoint path: score the test split once, no training.
  if (!args.checkpoint_path.empty()) {
    glmkit::Checkpoint checkpoint = glmkit::load_checkpoint(args.checkpoint_path);
    manifest.input_hashes.emplace_back(args.checkpoint_path,
                                       glmkit::hash_file(args.checkpoint_path));
    glmkit::DatasetSplits splits = glmkit::load_dataset(args.data_dir);
    glmkit::WhitespaceTokenizer tokenizer;
    glmkit::CompileOptions options;
    options.variant = parse_variant(args.variant);
    // Same compile order as training so the lazy tokenizer reproduces ids.
    auto train = glmkit::compile_dataset(splits.train, tokenizer, options);
    auto dev = glmkit::compile_dataset(splits.dev, tokenizer, options);
    auto test = glmkit::compile_dataset(splits.test, tokenizer, options);
    (void)train;
    (void)dev;
    double score =
        glmkit::evaluate(test, checkpoint.params, checkpoint.config, checkpoint.heads, metric);
    std::printf("%s: %.4f\n", args.metric.c_str(), score);
    manifest.config_json = json{{"data", args.data_dir},
                                {"variant", args.variant},
                                {"checkpoint", args.checkpoint_path},
                                {"metric", args.metric}}
                               .dump();
    manifest.wall_clock_seconds = timer.seconds();
    if (!args.out_dir.empty()) {
      fs::create_directories(args.out_dir);
      glmkit::save_manifest(args.out_dir + "/manifest.json", manifest);
    }
    return 0;
  }

  // Multi-seed path: independent train+eval per seed, mean ± std.
  if (args.num_seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  PreparedRun run = prepare_run(args, manifest);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < args.num_seeds; ++i) seeds.push_back(args.seed + static_cast<unsigned>(i));
  manifest.seeds = seeds;

  // Fresh encoder per seed unless the run starts from imported weights.
  bool reinit_encoder = args.weights_path.empty();
  glmkit::MultiSeedSummary summary =
      glmkit::run_multi_seed(run.train, run.dev, run.test, run.params, reinit_encoder,
                             run.encoder_config, run.splits.shape(), run.train_config, metric,
                             seeds);
  std::printf("%s: %.4f ± %.4f (%d seeds)\n", args.metric.c_str(), summary.mean, summary.stddev,
              args.num_seeds);
  for (std::size_t i = 0; i < summary.scores.size(); ++i) {
    std::printf("  seed %llu: %.4f\n", static_cast<unsigned long long>(seeds[i]),
                summary.scores[i]);
  }

  run.effective_config["metric"] = args.metric;
  run.effective_config["seeds"] = seeds;
  manifest.config_json = run.effective_config.dump();
  manifest.wall_clock_seconds = timer.seconds();
  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    std::string scores_path = args.out_dir + "/scores.json";
    json scores{{"metric", args.metric},
                {"mean", summary.mean},
                {"std", summary.stddev},
                {"scores", summary.scores}};
    atomic_write_text(scores_path, scores.dump(2) + "\n");
    manifest.outputs.push_back(scores_path);
    glmkit::save_manifest(args.out_dir + "/manifest.json", manifest);
  }
  return 0;
}

// --------------------------------------------------------------------------
// encode

struct EncodeArgs {
  std::string graph_path;
  std::string weights_path;
  std::string out_path;
  std::string variant = "gglm";
  std::string text;
  std::uint64_t seed = 0;
};

int run_encode(const EncodeArgs& args, const std::string& command_line) {
  Timer timer;
  glmkit::RunManifest manifest;
  manifest.command = command_line;
  manifest.seeds = {args.seed};

  glmkit::GraphDocument doc = glmkit::load_graph_json(args.graph_path);
  manifest.input_hashes.emplace_back(args.graph_path, glmkit::hash_file(args.graph_path));
  glmkit::GraphOfTriplets g = doc.graph;
  if (doc.mask_level && *doc.mask_level > 0) g = glmkit::mask_subgraph(g, *doc.mask_level);

  glmkit::LabeledInstance instance;
  instance.graph = g;
  if (!args.text.empty()) instance.text = args.text;

  glmkit::WhitespaceTokenizer tokenizer;
  glmkit::CompileOptions options;
  options.variant = parse_variant(args.variant);
  // compile_instance requires a readout token; encode does not, so compile
  // by hand here.
  glmkit::ExtendedLeviGraph elg = glmkit::tokenize_levi(glmkit::to_levi(g), tokenizer);
  std::vector<int> tokens = elg.token_ids();
  std::vector<int> text_ids;
  if (instance.text) {
    for (const auto& piece : tokenizer.tokenize(*instance.text)) text_ids.push_back(piece.id);
    if (tokenizer.eos_id()) text_ids.push_back(*tokenizer.eos_id());
  }
  glmkit::PositionPlan plan;
  if (options.variant == glmkit::CompileVariant::Sequence) {
    tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());
    plan = glmkit::sequence_plan(tokens.size());
  } else {
    glmkit::PlanVariant pv = options.variant == glmkit::CompileVariant::LGlm
                                 ? glmkit::PlanVariant::Local
                                 : glmkit::PlanVariant::Global;
    if (text_ids.empty()) {
      plan = pv == glmkit::PlanVariant::Local ? glmkit::build_local(elg)
                                              : glmkit::build_global(elg);
    } else {
      plan = glmkit::build_joint(elg, text_ids, pv);
      tokens.insert(tokens.end(), text_ids.begin(), text_ids.end());
    }
  }

  glmkit::EncoderConfig config;
  glmkit::ParameterSet params;
  if (!args.weights_path.empty()) {
    glmkit::LoadedModel model = glmkit::import_weights(args.weights_path);
    manifest.input_hashes.emplace_back(args.weights_path, glmkit::hash_file(args.weights_path));
    config = model.config;
    params = std::move(model.params);
    if (tokenizer.vocab_size() > config.vocab_size) {
      throw std::invalid_argument("input vocabulary exceeds the imported embedding table");
    }
  } else {
    config.vocab_size = std::max(config.vocab_size, tokenizer.vocab_size());
    params = glmkit::init_params(config, args.seed);
  }

  std::vector<float> out = glmkit::encode<float>(tokens, plan, params, config);
  std::string staged = args.out_path + ".tmp";
  glmkit::save_embeddings(staged, out, tokens.size(), static_cast<std::size_t>(config.d_model));
  commit_file(staged, args.out_path);
  commit_file(staged + ".json", args.out_path + ".json");
  manifest.outputs = {args.out_path, args.out_path + ".json"};

  std::cout << "encoded " << tokens.size() << " tokens -> " << args.out_path << "\n";
  manifest.config_json =
      json{{"variant", args.variant},
           {"encoder", json::parse(glmkit::config_to_json_string(config))}}
          .dump();
  manifest.wall_clock_seconds = timer.seconds();
  glmkit::save_manifest(args.out_path + ".manifest.json", manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(glmkit::thread_cap());

  CLI::App app{"graph language model toolkit"};
  app.require_subcommand(1);
  std::string command_line = join_argv(argc, argv);

  BuildDatasetArgs bd;
  CLI::App* build = app.add_subcommand("build-dataset", "sample and save a labeled dataset");
  build->add_option("--task", bd.task, "cn | 1hop | 2hop | joint")
      ->required()
      ->check(CLI::IsMember({"cn", "1hop", "2hop", "joint"}));
  build->add_option("--kg", bd.kg_path, "knowledge-graph TSV (head\\trelation\\ttail)");
  build->add_option("--out", bd.out_dir, "output dataset directory")->required();
  build->add_option("--config", bd.config_path, "JSON config file");
  build->add_option("--r", bd.radius, "subgraph radius");
  build->add_option("--m", bd.mask_level, "mask level");
  build->add_option("--per-class", bd.per_class, "train instances per class (dev/test = 1/8)");
  build->add_option("--train-size", bd.train_size, "synthetic task train-set size");
  build->add_option("--num-relations", bd.num_relations, "joint task relation count");
  build->add_option("--seed", bd.seed, "sampling seed");

  InspectArgs ia;
  CLI::App* inspect = app.add_subcommand("inspect", "dump a plan's P and M grids");
  inspect->add_option("--graph", ia.graph_path, "graph JSON file")->required();
  inspect->add_option("--variant", ia.variant, "lglm | gglm | sequence")
      ->check(CLI::IsMember({"lglm", "gglm", "sequence"}));
  inspect->add_option("--text", ia.text, "joint-input text segment");
  inspect->add_option("--json", ia.json_out, "also write the plan as JSON");
  inspect->add_option("--plan", ia.plan_out, "also write the binary plan");

  TrainEvalArgs ta;
  CLI::App* train = app.add_subcommand("train", "train classification heads (and encoder)");
  train->add_option("--data", ta.data_dir, "dataset directory")->required();
  train->add_option("--out", ta.out_dir, "output directory")->required();
  train->add_option("--variant", ta.variant, "lglm | gglm | sequence")
      ->check(CLI::IsMember({"lglm", "gglm", "sequence"}));
  train->add_option("--mode", ta.mode, "probe | finetune")
      ->check(CLI::IsMember({"probe", "finetune"}));
  train->add_flag("--joint", ta.joint, "dual-head loss weighted 0.9 / 0.1");
  train->add_option("--weights", ta.weights_path, "initialize from a tensor container");
  train->add_option("--config", ta.config_path, "JSON config file");
  train->add_option("--seed", ta.seed, "training seed");
  train->add_option("--lr", ta.lr, "learning-rate override");
  train->add_option("--batch-size", ta.batch_size, "batch-size override");
  train->add_option("--max-epochs", ta.max_epochs, "epoch-cap override");
  train->add_option("--patience", ta.patience, "early-stopping patience override");

  TrainEvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint or run seeded train+eval");
  eval->add_option("--data", ea.data_dir, "dataset directory")->required();
  eval->add_option("--checkpoint", ea.checkpoint_path, "score this checkpoint, no training");
  eval->add_option("--variant", ea.variant, "lglm | gglm | sequence")
      ->check(CLI::IsMember({"lglm", "gglm", "sequence"}));
  eval->add_option("--mode", ea.mode, "probe | finetune")
      ->check(CLI::IsMember({"probe", "finetune"}));
  eval->add_flag("--joint", ea.joint, "dual-head loss weighted 0.9 / 0.1");
  eval->add_option("--weights", ea.weights_path, "initialize from a tensor container");
  eval->add_option("--config", ea.config_path, "JSON config file");
  eval->add_option("--metric", ea.metric, "accuracy | macro-f1")
      ->check(CLI::IsMember({"accuracy", "macro-f1"}));
  eval->add_option("--seeds", ea.num_seeds, "number of independent runs");
  eval->add_option("--seed", ea.seed, "first seed");
  eval->add_option("--out", ea.out_dir, "write scores + manifest here");
  eval->add_option("--lr", ea.lr, "learning-rate override");
  eval->add_option("--batch-size", ea.batch_size, "batch-size override");
  eval->add_option("--max-epochs", ea.max_epochs, "epoch-cap override");
  eval->add_option("--patience", ea.patience, "early-stopping patience override");

  EncodeArgs ca;
  CLI::App* encode = app.add_subcommand("encode", "encode one graph (+text) to embeddings");
  encode->add_option("--graph", ca.graph_path, "graph JSON file")->required();
  encode->add_option("--out", ca.out_path, "output embeddings file")->required();
  encode->add_option("--weights", ca.weights_path, "tensor container (default: random init)");
  encode->add_option("--variant", ca.variant, "lglm | gglm | sequence")
      ->check(CLI::IsMember({"lglm", "gglm", "sequence"}));
  encode->add_option("--text", ca.text, "joint-input text segment");
  encode->add_option("--seed", ca.seed, "random-init seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (build->parsed()) return run_build_dataset(bd, command_line);
    if (inspect->parsed()) return run_inspect(ia);
    if (train->parsed()) return run_train(ta, command_line);
    if (eval->parsed()) return run_eval(ea, command_line);
    if (encode->parsed()) return run_encode(ca, command_line);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
