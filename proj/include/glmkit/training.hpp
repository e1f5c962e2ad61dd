#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glmkit/encoder.hpp"
#include "glmkit/position.hpp"

namespace glmkit {

// One example ready for the encoder: token ids, the compiled plan, the
// positions of the first mask sentinel (the readout token), and labels.
struct CompiledInstance {
  std::vector<int> tokens;
  PositionPlan plan;
  std::vector<std::size_t> readout_candidates;  // positions of the <extra_id_0> token
  int relation_label = 0;
  std::optional<int> source_label;
};

template <typename S>
struct ClassificationHeadT {
  std::vector<S> weight;  // [d_model, num_classes]
  std::vector<S> bias;    // [num_classes]
  int num_classes = 0;
};

template <typename S>
struct HeadsT {
  ClassificationHeadT<S> relation;
  std::optional<ClassificationHeadT<S>> source;  // joint mode only
};

using ClassificationHead = ClassificationHeadT<float>;
using Heads = HeadsT<float>;

struct TaskShape {
  int relation_classes = 0;
  std::optional<int> source_classes;  // engaged for the joint task
};

// Zero-initialized heads (a zero head gives a uniform softmax).
Heads make_heads(const EncoderConfig& config, const TaskShape& shape);
HeadsT<double> heads_to_double(const Heads& heads);

struct TrainConfig {
  enum class Mode { Finetune, LinearProbe };
  Mode mode = Mode::Finetune;
  double learning_rate = 1e-4;
  int batch_size = 32;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;
  double relation_weight = 1.0;  // joint task: 0.9
  double source_weight = 0.0;    // joint task: 0.1
  double weight_decay = 0.0;     // decoupled; optimizer beta/eps below
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.0;

  static TrainConfig finetune_defaults();     // lr 1e-4, batch 32, 50 epochs, patience 5
  static TrainConfig linear_probe_defaults(); // lr 5e-3, encoder frozen
};

void validate(const TrainConfig& config);

// ---------------------------------------------------------------------------
// Prediction and loss (templated so gradients can be finite-difference
// checked in double precision).

template <typename S>
struct LogitsT {
  std::vector<S> relation;
  std::vector<S> source;  // empty without a source head
};

template <typename S>
std::size_t readout_index(const CompiledInstance& instance) {
  if (instance.readout_candidates.size() != 1) {
    throw std::invalid_argument("instance must mark exactly one readout token, found " +
                                std::to_string(instance.readout_candidates.size()));
  }
  return instance.readout_candidates[0];
}

template <typename S>
std::vector<S> head_logits(const ClassificationHeadT<S>& head, const S* z, int d_model) {
  std::vector<S> logits(head.bias.begin(), head.bias.end());
  for (int d = 0; d < d_model; ++d) {
    for (int c = 0; c < head.num_classes; ++c) {
      logits[static_cast<std::size_t>(c)] +=
          z[d] * head.weight[static_cast<std::size_t>(d) * head.num_classes + c];
    }
  }
  return logits;
}

// Logits are computed from the readout token's final embedding only.
template <typename S>
LogitsT<S> predict(const CompiledInstance& instance, const ParameterSetT<S>& params,
                   const EncoderConfig& config, const HeadsT<S>& heads) {
  std::size_t readout = readout_index<S>(instance);
  std::vector<S> out = encode<S>(instance.tokens, instance.plan, params, config);
  const S* z = out.data() + readout * static_cast<std::size_t>(config.d_model);
  LogitsT<S> logits;
  logits.relation = head_logits(heads.relation, z, config.d_model);
  if (heads.source) logits.source = head_logits(*heads.source, z, config.d_model);
  return logits;
}

template <typename S>
S cross_entropy(std::span<const S> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside " +
                            std::to_string(logits.size()) + " classes");
  }
  S maxv = logits[0];
  for (S v : logits) maxv = std::max(maxv, v);
  S denom = 0;
  for (S v : logits) denom += std::exp(v - maxv);
  return std::log(denom) - (logits[static_cast<std::size_t>(label)] - maxv);
}

// Joint loss: relation_weight * CE(relation) + source_weight * CE(source).
// A zero weight skips its term entirely, so weights (1.0, 0.0) reproduce the
// single-task loss bitwise.
template <typename S>
S loss(std::span<const S> relation_logits, std::span<const S> source_logits, int relation_label,
       std::optional<int> source_label, double relation_weight, double source_weight) {
  S total = 0;
  if (relation_weight != 0.0) {
    S ce = cross_entropy(relation_logits, relation_label);
    total += relation_weight == 1.0 ? ce : static_cast<S>(relation_weight) * ce;
  }
  if (source_weight != 0.0) {
    if (source_logits.empty() || !source_label) {
      throw std::invalid_argument("source loss weighted but instance has no source logits/label");
    }
    S ce = cross_entropy(source_logits, *source_label);
    total += source_weight == 1.0 ? ce : static_cast<S>(source_weight) * ce;
  }
  return total;
}

template <typename S>
S instance_loss(const CompiledInstance& instance, const ParameterSetT<S>& params,
                const EncoderConfig& config, const HeadsT<S>& heads, double relation_weight,
                double source_weight) {
  LogitsT<S> logits = predict(instance, params, config, heads);
  return loss<S>(logits.relation, logits.source, instance.relation_label, instance.source_label,
                 relation_weight, source_weight);
}

namespace detail {

// d_logits = weight * (softmax(logits) - onehot(label));
// accumulates head gradients and the readout-row gradient dz.
template <typename S>
void head_backward(const ClassificationHeadT<S>& head, const std::vector<S>& logits, int label,
                   double weight, const S* z, int d_model, ClassificationHeadT<S>& head_grad,
                   std::vector<S>& dz) {
  S maxv = logits[0];
  for (S v : logits) maxv = std::max(maxv, v);
  std::vector<S> p(logits.size());
  S denom = 0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - maxv);
    denom += p[c];
  }
  for (auto& v : p) v /= denom;
  p[static_cast<std::size_t>(label)] -= S(1);
  for (auto& v : p) v *= static_cast<S>(weight);
  for (std::size_t c = 0; c < p.size(); ++c) head_grad.bias[c] += p[c];
  for (int d = 0; d < d_model; ++d) {
    S acc = 0;
    for (std::size_t c = 0; c < p.size(); ++c) {
      head_grad.weight[static_cast<std::size_t>(d) * p.size() + c] += z[d] * p[c];
      acc += head.weight[static_cast<std::size_t>(d) * p.size() + c] * p[c];
    }
    dz[static_cast<std::size_t>(d)] += acc;
  }
}

}  // namespace detail

// Forward + backward for one instance; encoder gradients accumulate into
// enc_grads (zero_like-shaped), head gradients into head_grads. Returns the
// loss value.
template <typename S>
S instance_backward(const CompiledInstance& instance, const ParameterSetT<S>& params,
                    const EncoderConfig& config, const HeadsT<S>& heads, double relation_weight,
                    double source_weight, ParameterSetT<S>& enc_grads, HeadsT<S>& head_grads,
                    double dropout_rate = 0.0, SeededRng* rng = nullptr) {
  std::size_t readout = readout_index<S>(instance);
  EncodeTrace<S> trace =
      encode_traced<S>(instance.tokens, instance.plan, params, config, dropout_rate, rng);
  const auto dm = static_cast<std::size_t>(config.d_model);
  const S* z = trace.out.data() + readout * dm;

  S total = 0;
  std::vector<S> dz(dm, S(0));
  if (relation_weight != 0.0) {
    std::vector<S> logits = head_logits(heads.relation, z, config.d_model);
    S ce = cross_entropy<S>(logits, instance.relation_label);
    total += relation_weight == 1.0 ? ce : static_cast<S>(relation_weight) * ce;
    detail::head_backward(heads.relation, logits, instance.relation_label, relation_weight, z,
                          config.d_model, head_grads.relation, dz);
  }
  if (source_weight != 0.0) {
    if (!heads.source || !instance.source_label) {
      throw std::invalid_argument("source loss weighted but instance has no source head/label");
    }
    std::vector<S> logits = head_logits(*heads.source, z, config.d_model);
    S ce = cross_entropy<S>(logits, *instance.source_label);
    total += source_weight == 1.0 ? ce : static_cast<S>(source_weight) * ce;
    detail::head_backward(*heads.source, logits, *instance.source_label, source_weight, z,
                          config.d_model, *head_grads.source, dz);
  }

  std::vector<S> d_out(trace.out.size(), S(0));
  std::copy(dz.begin(), dz.end(), d_out.begin() + static_cast<std::ptrdiff_t>(readout * dm));
  encode_backward<S>(trace, params, config, d_out, enc_grads);
  return total;
}

// ---------------------------------------------------------------------------
// Training loop and evaluation (float production path).

struct MetricsRecord {
  int epoch = 0;
  std::string split;  // "train" | "dev"
  double loss = 0;
  std::optional<double> metric;  // accuracy / macro-F1 when computed
};

struct TrainResult {
  Heads heads;
  std::vector<MetricsRecord> trace;
  int best_epoch = 0;
  double best_dev_loss = 0;
  int epochs_run = 0;
};

// Trains heads (and, in finetune mode, the encoder in place). Linear-probe
// mode leaves `params` bitwise untouched: readout embeddings are computed
// once on the frozen encoder and only the head sees the optimizer.
TrainResult train(std::span<const CompiledInstance> train_set,
                  std::span<const CompiledInstance> dev_set, ParameterSet& params,
                  const EncoderConfig& config, const TaskShape& shape,
                  const TrainConfig& train_config);

enum class Metric { Accuracy, MacroF1 };

double evaluate(std::span<const CompiledInstance> dataset, const ParameterSet& params,
                const EncoderConfig& config, const Heads& heads, Metric metric);

// Confusion-free helpers exposed for tests.
int argmax_class(std::span<const float> logits);
double macro_f1(std::span<const int> gold, std::span<const int> predicted, int num_classes);

struct MultiSeedSummary {
  std::vector<double> scores;
  double mean = 0;
  double stddev = 0;  // sample standard deviation, 0 for a single run
};

// One independent train+eval per seed. reinit_encoder=true draws fresh
// encoder weights per seed; otherwise every run starts from base_params.
MultiSeedSummary run_multi_seed(std::span<const CompiledInstance> train_set,
                                std::span<const CompiledInstance> dev_set,
                                std::span<const CompiledInstance> test_set,
                                const ParameterSet& base_params, bool reinit_encoder,
                                const EncoderConfig& config, const TaskShape& shape,
                                const TrainConfig& train_config, Metric metric,
                                std::span<const std::uint64_t> seeds);

// Line-delimited JSON records: {"epoch", "split", "loss", "metric"?}.
void write_metrics_jsonl(const std::string& path, std::span<const MetricsRecord> trace);

// Checkpoints: encoder tensors + head tensors in one container, with the
// encoder config and task shape in the metadata.
void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const EncoderConfig& config, const Heads& heads);
struct Checkpoint {
  EncoderConfig config;
  ParameterSet params;
  Heads heads;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace glmkit
