#include "glmkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace glmkit {

namespace {

ClassificationHead make_head(int d_model, int num_classes) {
  if (num_classes < 2) {
    throw std::invalid_argument("classification head needs >= 2 classes, got " +
                                std::to_string(num_classes));
  }
  ClassificationHead head;
  head.num_classes = num_classes;
  head.weight.assign(static_cast<std::size_t>(d_model) * num_classes, 0.0f);
  head.bias.assign(static_cast<std::size_t>(num_classes), 0.0f);
  return head;
}

// Decoupled-weight-decay Adam over a flat list of tensors.
class AdamW {
 public:
  AdamW(const TrainConfig& tc, const std::vector<std::vector<float>*>& tensors)
      : lr_(tc.learning_rate),
        beta1_(tc.beta1),
        beta2_(tc.beta2),
        eps_(tc.adam_eps),
        weight_decay_(tc.weight_decay) {
    m_.reserve(tensors.size());
    v_.reserve(tensors.size());
    for (const auto* t : tensors) {
      m_.emplace_back(t->size(), 0.0);
      v_.emplace_back(t->size(), 0.0);
    }
  }

  void step(const std::vector<std::vector<float>*>& params,
            const std::vector<std::vector<float>*>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      std::vector<float>& p = *params[k];
      const std::vector<float>& g = *grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        double gi = g[i];
        m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * gi;
        v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * gi * gi;
        double update = (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + eps_);
        double decayed = static_cast<double>(p[i]) -
                         lr_ * (update + weight_decay_ * static_cast<double>(p[i]));
        p[i] = static_cast<float>(decayed);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

std::vector<std::vector<float>*> head_tensors(Heads& heads) {
  std::vector<std::vector<float>*> out{&heads.relation.weight, &heads.relation.bias};
  if (heads.source) {
    out.push_back(&heads.source->weight);
    out.push_back(&heads.source->bias);
  }
  return out;
}

void zero_all(const std::vector<std::vector<float>*>& tensors) {
  for (auto* t : tensors) std::fill(t->begin(), t->end(), 0.0f);
}

double mean_dev_loss(std::span<const CompiledInstance> dev, const ParameterSet& params,
                     const EncoderConfig& config, const Heads& heads, const TrainConfig& tc) {
  double total = 0;
  for (const auto& instance : dev) {
    total += instance_loss<float>(instance, params, config, heads, tc.relation_weight,
                                  tc.source_weight);
  }
  return total / static_cast<double>(dev.size());
}

struct EarlyStopper {
  int patience;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  // Returns true when the new value improves on the best so far.
  bool observe(int epoch, double dev_loss) {
    if (dev_loss < best) {
      best = dev_loss;
      best_epoch = epoch;
      return true;
    }
    return false;
  }
  bool should_stop(int epoch) const { return epoch - best_epoch >= patience; }
};

void check_finite(double loss, int epoch, int batch, double lr) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error("loss became non-finite at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch) + " (lr " + std::to_string(lr) +
                             "); reduce the learning rate or check the data");
  }
}

// Cached readout features for the frozen-encoder regime.
std::vector<std::vector<float>> readout_features(std::span<const CompiledInstance> instances,
                                                 const ParameterSet& params,
                                                 const EncoderConfig& config) {
  std::vector<std::vector<float>> feats;
  feats.reserve(instances.size());
  const auto dm = static_cast<std::size_t>(config.d_model);
  for (const auto& instance : instances) {
    std::size_t readout = readout_index<float>(instance);
    std::vector<float> out = encode<float>(instance.tokens, instance.plan, params, config);
    feats.emplace_back(out.begin() + static_cast<std::ptrdiff_t>(readout * dm),
                       out.begin() + static_cast<std::ptrdiff_t>((readout + 1) * dm));
  }
  return feats;
}

double feature_loss(const std::vector<float>& z, const CompiledInstance& instance,
                    const Heads& heads, const EncoderConfig& config, const TrainConfig& tc) {
  std::vector<float> rel = head_logits(heads.relation, z.data(), config.d_model);
  std::vector<float> src;
  if (heads.source) src = head_logits(*heads.source, z.data(), config.d_model);
  return loss<float>(rel, src, instance.relation_label, instance.source_label,
                     tc.relation_weight, tc.source_weight);
}

double feature_backward(const std::vector<float>& z, const CompiledInstance& instance,
                        const Heads& heads, const EncoderConfig& config, const TrainConfig& tc,
                        Heads& head_grads, std::vector<float>& dz_scratch) {
  double total = 0;
  std::fill(dz_scratch.begin(), dz_scratch.end(), 0.0f);
  if (tc.relation_weight != 0.0) {
    std::vector<float> logits = head_logits(heads.relation, z.data(), config.d_model);
    total += tc.relation_weight * cross_entropy<float>(logits, instance.relation_label);
    detail::head_backward(heads.relation, logits, instance.relation_label, tc.relation_weight,
                          z.data(), config.d_model, head_grads.relation, dz_scratch);
  }
  if (tc.source_weight != 0.0) {
    if (!heads.source || !instance.source_label) {
      throw std::invalid_argument("source loss weighted but instance has no source head/label");
    }
    std::vector<float> logits = head_logits(*heads.source, z.data(), config.d_model);
    total += tc.source_weight * cross_entropy<float>(logits, *instance.source_label);
    detail::head_backward(*heads.source, logits, *instance.source_label, tc.source_weight,
                          z.data(), config.d_model, *head_grads.source, dz_scratch);
  }
  return total;
}

}  // namespace

Heads make_heads(const EncoderConfig& config, const TaskShape& shape) {
  Heads heads;
  heads.relation = make_head(config.d_model, shape.relation_classes);
  if (shape.source_classes) heads.source = make_head(config.d_model, *shape.source_classes);
  return heads;
}

HeadsT<double> heads_to_double(const Heads& heads) {
  auto widen_head = [](const ClassificationHead& h) {
    ClassificationHeadT<double> out;
    out.weight.assign(h.weight.begin(), h.weight.end());
    out.bias.assign(h.bias.begin(), h.bias.end());
    out.num_classes = h.num_classes;
    return out;
  };
  HeadsT<double> out;
  out.relation = widen_head(heads.relation);
  if (heads.source) out.source = widen_head(*heads.source);
  return out;
}

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig tc;
  tc.mode = Mode::Finetune;
  tc.learning_rate = 1e-4;
  return tc;
}

TrainConfig TrainConfig::linear_probe_defaults() {
  TrainConfig tc;
  tc.mode = Mode::LinearProbe;
  tc.learning_rate = 5e-3;
  return tc;
}

void validate(const TrainConfig& config) {
  if (config.learning_rate <= 0) throw std::invalid_argument("learning rate must be positive");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.max_epochs < 1) throw std::invalid_argument("max epochs must be >= 1");
  if (config.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (config.relation_weight < 0 || config.source_weight < 0 ||
      std::abs(config.relation_weight + config.source_weight - 1.0) > 1e-12) {
    throw std::invalid_argument("loss weights must be non-negative and sum to 1");
  }
  if (config.dropout < 0 || config.dropout >= 1) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
}

TrainResult train(std::span<const CompiledInstance> train_set,
                  std::span<const CompiledInstance> dev_set, ParameterSet& params,
                  const EncoderConfig& config, const TaskShape& shape,
                  const TrainConfig& train_config) {
  validate(train_config);
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  if (dev_set.empty()) throw std::invalid_argument("dev split is empty");

  TrainResult result;
  result.heads = make_heads(config, shape);
  SeededRng rng(train_config.seed);
  const bool probe = train_config.mode == TrainConfig::Mode::LinearProbe;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  Heads head_grads = make_heads(config, shape);
  std::vector<std::vector<float>*> head_params = head_tensors(result.heads);
  std::vector<std::vector<float>*> head_grad_tensors = head_tensors(head_grads);

  EarlyStopper stopper{train_config.patience};
  Heads best_heads = result.heads;
  ParameterSet best_params;  // finetune only

  if (probe) {
    // Frozen encoder: compute readout embeddings once, train the head alone.
    std::vector<std::vector<float>> train_feats = readout_features(train_set, params, config);
    std::vector<std::vector<float>> dev_feats = readout_features(dev_set, params, config);
    AdamW optimizer(train_config, head_params);
    std::vector<float> dz_scratch(static_cast<std::size_t>(config.d_model));

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
      rng.shuffle(order);
      double epoch_loss = 0;
      int batch_index = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(train_config.batch_size), ++batch_index) {
        std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
        zero_all(head_grad_tensors);
        double batch_loss = 0;
        for (std::size_t k = start; k < end; ++k) {
          batch_loss += feature_backward(train_feats[order[k]], train_set[order[k]],
                                         result.heads, config, train_config, head_grads,
                                         dz_scratch);
        }
        check_finite(batch_loss, epoch, batch_index, train_config.learning_rate);
        float inv = 1.0f / static_cast<float>(end - start);
        for (auto* g : head_grad_tensors) {
          for (auto& v : *g) v *= inv;
        }
        optimizer.step(head_params, head_grad_tensors);
        epoch_loss += batch_loss;
      }
      double dev_loss = 0;
      for (std::size_t i = 0; i < dev_set.size(); ++i) {
        dev_loss += feature_loss(dev_feats[i], dev_set[i], result.heads, config, train_config);
      }
      dev_loss /= static_cast<double>(dev_set.size());
      result.trace.push_back({epoch, "train", epoch_loss / static_cast<double>(order.size()), {}});
      result.trace.push_back({epoch, "dev", dev_loss, {}});
      result.epochs_run = epoch;
      if (stopper.observe(epoch, dev_loss)) best_heads = result.heads;
      if (stopper.should_stop(epoch)) break;
    }
    result.heads = best_heads;
  } else {
    ParameterSet grads = zero_like(params);
    std::vector<std::vector<float>*> all_params;
    std::vector<std::vector<float>*> all_grads;
    for (auto& nt : named_tensors(params, config)) all_params.push_back(nt.values);
    for (auto& nt : named_tensors(grads, config)) all_grads.push_back(nt.values);
    for (auto* h : head_params) all_params.push_back(h);
    for (auto* h : head_grad_tensors) all_grads.push_back(h);
    AdamW optimizer(train_config, all_params);
    best_params = params;

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
      rng.shuffle(order);
      double epoch_loss = 0;
      int batch_index = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(train_config.batch_size), ++batch_index) {
        std::size_t end =
            std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
        for (auto* g : all_grads) std::fill(g->begin(), g->end(), 0.0f);
        double batch_loss = 0;
        for (std::size_t k = start; k < end; ++k) {
          batch_loss += instance_backward<float>(
              train_set[order[k]], params, config, result.heads, train_config.relation_weight,
              train_config.source_weight, grads, head_grads, train_config.dropout, &rng);
        }
        check_finite(batch_loss, epoch, batch_index, train_config.learning_rate);
        float inv = 1.0f / static_cast<float>(end - start);
        for (auto* g : all_grads) {
          for (auto& v : *g) v *= inv;
        }
        optimizer.step(all_params, all_grads);
        epoch_loss += batch_loss;
      }
      double dev_loss = mean_dev_loss(dev_set, params, config, result.heads, train_config);
      check_finite(dev_loss, epoch, -1, train_config.learning_rate);
      result.trace.push_back({epoch, "train", epoch_loss / static_cast<double>(order.size()), {}});
      result.trace.push_back({epoch, "dev", dev_loss, {}});
      result.epochs_run = epoch;
      if (stopper.observe(epoch, dev_loss)) {
        best_heads = result.heads;
        best_params = params;
      }
      if (stopper.should_stop(epoch)) break;
    }
    result.heads = best_heads;
    params = best_params;
  }

  result.best_epoch = stopper.best_epoch;
  result.best_dev_loss = stopper.best;
  return result;
}

int argmax_class(std::span<const float> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

double macro_f1(std::span<const int> gold, std::span<const int> predicted, int num_classes) {
  if (gold.size() != predicted.size() || gold.empty()) {
    throw std::invalid_argument("macro-F1 needs equal-length non-empty label vectors");
  }
  std::vector<int> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes) {
      throw std::out_of_range("label outside [0, num_classes)");
    }
    if (gold[i] == predicted[i]) {
      ++tp[gold[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[gold[i]];
    }
  }
  double total = 0;
  for (int c = 0; c < num_classes; ++c) {
    int denom = 2 * tp[c] + fp[c] + fn[c];
    total += denom == 0 ? 0.0 : 2.0 * tp[c] / denom;
  }
  return total / num_classes;
}

double evaluate(std::span<const CompiledInstance> dataset, const ParameterSet& params,
                const EncoderConfig& config, const Heads& heads, Metric metric) {
  if (dataset.empty()) throw std::invalid_argument("evaluation split is empty");
  std::vector<int> gold, pred;
  gold.reserve(dataset.size());
  pred.reserve(dataset.size());
  for (const auto& instance : dataset) {
    LogitsT<float> logits = predict(instance, params, config, heads);
    gold.push_back(instance.relation_label);
    pred.push_back(argmax_class(logits.relation));
  }
  if (metric == Metric::Accuracy) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i] == pred[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(gold.size());
  }
  return macro_f1(gold, pred, heads.relation.num_classes);
}

MultiSeedSummary run_multi_seed(std::span<const CompiledInstance> train_set,
                                std::span<const CompiledInstance> dev_set,
                                std::span<const CompiledInstance> test_set,
                                const ParameterSet& base_params, bool reinit_encoder,
                                const EncoderConfig& config, const TaskShape& shape,
                                const TrainConfig& train_config, Metric metric,
                                std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("need at least one seed");
  MultiSeedSummary summary;
  for (std::uint64_t seed : seeds) {
    ParameterSet params = reinit_encoder ? init_params(config, seed) : base_params;
    TrainConfig tc = train_config;
    tc.seed = seed;
    TrainResult result = train(train_set, dev_set, params, config, shape, tc);
    summary.scores.push_back(evaluate(test_set, params, config, result.heads, metric));
  }
  double sum = std::accumulate(summary.scores.begin(), summary.scores.end(), 0.0);
  summary.mean = sum / static_cast<double>(summary.scores.size());
  if (summary.scores.size() > 1) {
    double ss = 0;
    for (double s : summary.scores) ss += (s - summary.mean) * (s - summary.mean);
    summary.stddev = std::sqrt(ss / static_cast<double>(summary.scores.size() - 1));
  }
  return summary;
}

void write_metrics_jsonl(const std::string& path, std::span<const MetricsRecord> trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics file " + path);
  for (const auto& record : trace) {
    nlohmann::json line{{"epoch", record.epoch}, {"split", record.split}, {"loss", record.loss}};
    if (record.metric) line["metric"] = *record.metric;
    out << line.dump() << "\n";
  }
}

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const EncoderConfig& config, const Heads& heads) {
  TensorContainer container;
  auto& mutable_params = const_cast<ParameterSet&>(params);
  for (const auto& nt : named_tensors(mutable_params, config)) {
    container.put(nt.name, nt.shape, *nt.values);
  }
  auto dm = static_cast<std::size_t>(config.d_model);
  container.put("head.relation.weight",
                {dm, static_cast<std::size_t>(heads.relation.num_classes)},
                heads.relation.weight);
  container.put("head.relation.bias", {static_cast<std::size_t>(heads.relation.num_classes)},
                heads.relation.bias);
  nlohmann::json shape_meta{{"relation_classes", heads.relation.num_classes}};
  if (heads.source) {
    container.put("head.source.weight", {dm, static_cast<std::size_t>(heads.source->num_classes)},
                  heads.source->weight);
    container.put("head.source.bias", {static_cast<std::size_t>(heads.source->num_classes)},
                  heads.source->bias);
    shape_meta["source_classes"] = heads.source->num_classes;
  }
  container.set_metadata("format", "glmkit-checkpoint-v1");
  container.set_metadata("config", config_to_json_string(config));
  container.set_metadata("task_shape", shape_meta.dump());
  container.save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  TensorContainer container = TensorContainer::load(path);
  const auto& meta = container.metadata();
  if (meta.find("config") == meta.end() || meta.find("task_shape") == meta.end()) {
    throw std::runtime_error(path + " is not a training checkpoint (missing metadata)");
  }
  Checkpoint ckpt;
  ckpt.config = config_from_json_string(meta.at("config"));
  nlohmann::json shape_meta = nlohmann::json::parse(meta.at("task_shape"));

  auto nb = static_cast<std::size_t>(ckpt.config.num_distance_buckets);
  const TensorView& bias = container.get("relative_bias.weight");
  std::size_t rows = bias.shape.empty() ? 0 : bias.shape[0];
  if (rows != nb + 3) {
    throw std::runtime_error("checkpoint bias table has " + std::to_string(rows) +
                             " rows; expected the extended " + std::to_string(nb + 3));
  }
  ckpt.params.bias_rows = rows;
  ckpt.params.layers.resize(static_cast<std::size_t>(ckpt.config.num_layers));
  for (auto& nt : named_tensors(ckpt.params, ckpt.config)) {
    if (!container.contains(nt.name)) {
      throw std::runtime_error("checkpoint is missing tensor \"" + nt.name + "\"");
    }
    *nt.values = container.get(nt.name).data;
  }

  TaskShape shape;
  shape.relation_classes = shape_meta.at("relation_classes").get<int>();
  if (shape_meta.contains("source_classes")) {
    shape.source_classes = shape_meta["source_classes"].get<int>();
  }
  ckpt.heads = make_heads(ckpt.config, shape);
  ckpt.heads.relation.weight = container.get("head.relation.weight").data;
  ckpt.heads.relation.bias = container.get("head.relation.bias").data;
  if (ckpt.heads.source) {
    ckpt.heads.source->weight = container.get("head.source.weight").data;
    ckpt.heads.source->bias = container.get("head.source.bias").data;
  }
  return ckpt;
}

}  // namespace glmkit
