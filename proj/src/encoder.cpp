#include "glmkit/encoder.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace glmkit {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

ParameterSet allocate_params(const EncoderConfig& config, std::size_t bias_rows) {
  ParameterSet params;
  params.bias_rows = bias_rows;
  params.layers.resize(static_cast<std::size_t>(config.num_layers));
  for (auto& nt : named_tensors(params, config)) {
    nt.values->assign(shape_product(nt.shape), 0.0f);
  }
  return params;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void validate(const EncoderConfig& config) {
  auto positive = [](int v, const char* name) {
    if (v <= 0) {
      throw std::invalid_argument(std::string("encoder config: ") + name + " must be positive");
    }
  };
  if (config.num_layers < 0) {
    throw std::invalid_argument("encoder config: num_layers must be non-negative");
  }
  positive(config.d_model, "d_model");
  positive(config.num_heads, "num_heads");
  positive(config.d_head, "d_head");
  positive(config.d_ff, "d_ff");
  positive(config.vocab_size, "vocab_size");
  positive(config.max_distance, "max_distance");
  if (config.num_distance_buckets < 4 || config.num_distance_buckets % 2 != 0) {
    throw std::invalid_argument(
        "encoder config: num_distance_buckets must be an even number >= 4");
  }
}

std::string config_to_json_string(const EncoderConfig& config) {
  nlohmann::json doc{
      {"num_layers", config.num_layers},
      {"d_model", config.d_model},
      {"num_heads", config.num_heads},
      {"d_head", config.d_head},
      {"d_ff", config.d_ff},
      {"vocab_size", config.vocab_size},
      {"num_distance_buckets", config.num_distance_buckets},
      {"max_distance", config.max_distance},
      {"attention_scaling", config.attention_scaling},
      {"activation", config.activation == EncoderConfig::Activation::Gated ? "gated" : "plain"},
      {"final_norm", config.final_norm},
  };
  return doc.dump();
}

EncoderConfig config_from_json_string(const std::string& json) {
  nlohmann::json doc = nlohmann::json::parse(json);
  EncoderConfig config;
  auto take = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc[key].template get<std::decay_t<decltype(field)>>();
  };
  take("num_layers", config.num_layers);
  take("d_model", config.d_model);
  take("num_heads", config.num_heads);
  take("d_head", config.d_head);
  take("d_ff", config.d_ff);
  take("vocab_size", config.vocab_size);
  take("num_distance_buckets", config.num_distance_buckets);
  take("max_distance", config.max_distance);
  take("attention_scaling", config.attention_scaling);
  take("final_norm", config.final_norm);
  if (doc.contains("activation")) {
    std::string act = doc["activation"].get<std::string>();
    if (act == "plain") {
      config.activation = EncoderConfig::Activation::Plain;
    } else if (act == "gated") {
      config.activation = EncoderConfig::Activation::Gated;
    } else {
      throw std::invalid_argument("unknown activation \"" + act + "\" (plain|gated)");
    }
  }
  validate(config);
  return config;
}

ParameterSet init_params(const EncoderConfig& config, std::uint64_t seed,
                         bool with_sentinel_rows) {
  validate(config);
  auto nb = static_cast<std::size_t>(config.num_distance_buckets);
  ParameterSet params = allocate_params(config, with_sentinel_rows ? nb + 3 : nb);
  SeededRng rng(seed);
  const float proj_sigma = 1.0f / std::sqrt(static_cast<float>(config.d_model));
  const float out_sigma = 1.0f / std::sqrt(static_cast<float>(config.inner_dim()));
  const float down_sigma = 1.0f / std::sqrt(static_cast<float>(config.d_ff));
  for (auto& nt : named_tensors(params, config)) {
    float sigma;
    if (ends_with(nt.name, "norm.weight")) {
      std::fill(nt.values->begin(), nt.values->end(), 1.0f);
      continue;
    } else if (nt.name == "embedding.weight") {
      sigma = 1.0f;
    } else if (nt.name == "relative_bias.weight") {
      sigma = 0.5f;
    } else if (ends_with(nt.name, "attn.o.weight")) {
      sigma = out_sigma;
    } else if (ends_with(nt.name, "ffn.wo.weight")) {
      sigma = down_sigma;
    } else {  // q, k, v, ffn.wi, ffn.wi_gate
      sigma = proj_sigma;
    }
    for (auto& v : *nt.values) v = sigma * static_cast<float>(rng.gaussian());
  }
  return params;
}

ParameterSetT<double> to_double(const ParameterSet& params) {
  ParameterSetT<double> out;
  auto widen = [](const std::vector<float>& src) {
    return std::vector<double>(src.begin(), src.end());
  };
  out.embedding = widen(params.embedding);
  out.bias_table = widen(params.bias_table);
  out.bias_rows = params.bias_rows;
  out.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParamsT<float>& in = params.layers[l];
    LayerParamsT<double>& lp = out.layers[l];
    lp.attn_norm = widen(in.attn_norm);
    lp.wq = widen(in.wq);
    lp.wk = widen(in.wk);
    lp.wv = widen(in.wv);
    lp.wo = widen(in.wo);
    lp.ffn_norm = widen(in.ffn_norm);
    lp.ffn_wi = widen(in.ffn_wi);
    lp.ffn_wi_gate = widen(in.ffn_wi_gate);
    lp.ffn_wo = widen(in.ffn_wo);
  }
  out.final_norm = widen(params.final_norm);
  return out;
}

void export_weights(const std::string& path, const ParameterSet& params,
                    const EncoderConfig& config) {
  TensorContainer container;
  // named_tensors wants a mutable reference; we only read through it.
  auto& mutable_params = const_cast<ParameterSet&>(params);
  for (const auto& nt : named_tensors(mutable_params, config)) {
    container.put(nt.name, nt.shape, *nt.values);
  }
  container.set_metadata("format", "glmkit-encoder-v1");
  container.set_metadata("config", config_to_json_string(config));
  container.save(path);
}

LoadedModel import_weights(const std::string& path) {
  TensorContainer container = TensorContainer::load(path);
  const auto& meta = container.metadata();

  EncoderConfig config;
  bool foreign = meta.find("config") == meta.end();
  if (foreign) {
    // No embedded config: treat as a pretrained checkpoint and infer the
    // architecture from tensor shapes.
    const TensorView& embedding = container.get("embedding.weight");
    const TensorView& bias = container.get("relative_bias.weight");
    const TensorView& q0 = container.get("layers.0.attn.q.weight");
    const TensorView& wi0 = container.get("layers.0.ffn.wi.weight");
    if (embedding.shape.size() != 2 || bias.shape.size() != 2 || q0.shape.size() != 2 ||
        wi0.shape.size() != 2) {
      throw std::runtime_error("pretrained container has non-matrix core tensors");
    }
    config.vocab_size = static_cast<int>(embedding.shape[0]);
    config.d_model = static_cast<int>(embedding.shape[1]);
    config.num_heads = static_cast<int>(bias.shape[1]);
    int inner = static_cast<int>(q0.shape[1]);
    if (inner % config.num_heads != 0) {
      throw std::runtime_error("projection width " + std::to_string(inner) +
                               " is not divisible by " + std::to_string(config.num_heads) +
                               " heads");
    }
    config.d_head = inner / config.num_heads;
    config.d_ff = static_cast<int>(wi0.shape[1]);
    config.num_layers = 0;
    while (container.contains("layers." + std::to_string(config.num_layers) + ".attn.q.weight")) {
      ++config.num_layers;
    }
    config.activation = container.contains("layers.0.ffn.wi_gate.weight")
                            ? EncoderConfig::Activation::Gated
                            : EncoderConfig::Activation::Plain;
    config.final_norm = container.contains("final_norm.weight");
    auto rows = static_cast<int>(bias.shape[0]);
    if (rows == config.num_distance_buckets || rows == config.num_distance_buckets + 3) {
      // standard 32-bucket layout, extended or not
    } else {
      throw std::runtime_error(
          "cannot infer bucket count from a bias table with " + std::to_string(rows) +
          " rows; re-export the container with embedded config metadata");
    }
    // Pretrained weight family bakes the scale into the weights.
    config.attention_scaling = false;
  } else {
    config = config_from_json_string(meta.at("config"));
  }
  validate(config);

  const TensorView& bias = container.get("relative_bias.weight");
  auto nb = static_cast<std::size_t>(config.num_distance_buckets);
  std::size_t rows = bias.shape.empty() ? 0 : bias.shape[0];
  if (rows != nb && rows != nb + 3) {
    throw std::runtime_error("bias table has " + std::to_string(rows) + " rows; expected " +
                             std::to_string(nb) + " or " + std::to_string(nb + 3));
  }

  LoadedModel model;
  model.config = config;
  model.params = allocate_params(config, rows);
  for (auto& nt : named_tensors(model.params, config)) {
    if (!container.contains(nt.name)) {
      throw std::runtime_error("container is missing tensor \"" + nt.name + "\"");
    }
    const TensorView& view = container.get(nt.name);
    if (view.shape != nt.shape) {
      auto fmt = [](const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (i) out += ", ";
          out += std::to_string(s[i]);
        }
        return out + "]";
      };
      throw std::runtime_error("tensor \"" + nt.name + "\": expected shape " + fmt(nt.shape) +
                               ", found " + fmt(view.shape));
    }
    *nt.values = view.data;
  }
  if (rows == nb) {
    extend_sentinel_buckets(model.params, config);
  }
  return model;
}

void save_embeddings(const std::string& path, const std::vector<float>& embeddings,
                     std::size_t n, std::size_t d_model) {
  if (embeddings.size() != n * d_model) {
    throw std::invalid_argument("embedding buffer size does not match n x d_model");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embeddings file " + path);
  out.write(reinterpret_cast<const char*>(embeddings.data()),
            static_cast<std::streamsize>(embeddings.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on embeddings file " + path);
  std::ofstream sidecar(path + ".json");
  if (!sidecar) throw std::runtime_error("cannot write sidecar for " + path);
  sidecar << nlohmann::json{{"n", n}, {"d_model", d_model}}.dump() << "\n";
}

}  // namespace glmkit
