#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "glmkit/position.hpp"
#include "glmkit/rng.hpp"
#include "glmkit/tensor_io.hpp"

namespace glmkit {

struct EncoderConfig {
  int num_layers = 2;
  int d_model = 64;
  int num_heads = 4;
  int d_head = 16;
  int d_ff = 128;
  int vocab_size = 1000;
  int num_distance_buckets = 32;
  int max_distance = 128;
  bool attention_scaling = true;  // forced off when importing pretrained weights
  enum class Activation { Plain, Gated } activation = Activation::Plain;
  bool final_norm = true;

  int inner_dim() const { return num_heads * d_head; }
  BucketTable bucket_table() const { return {num_distance_buckets, max_distance}; }
};

void validate(const EncoderConfig& config);
std::string config_to_json_string(const EncoderConfig& config);
EncoderConfig config_from_json_string(const std::string& json);

template <typename S>
struct LayerParamsT {
  std::vector<S> attn_norm;        // [d_model]
  std::vector<S> wq, wk, wv;       // [d_model, inner]
  std::vector<S> wo;               // [inner, d_model]
  std::vector<S> ffn_norm;         // [d_model]
  std::vector<S> ffn_wi;           // [d_model, d_ff] (gated: the linear branch)
  std::vector<S> ffn_wi_gate;      // [d_model, d_ff], gated activation only
  std::vector<S> ffn_wo;           // [d_ff, d_model]
};

// Full parameter set. The relative-bias table is the ONE table shared by
// every layer; its first num_distance_buckets rows are distance buckets,
// the 3 appended rows are the G2G / T2G / G2T sentinels.
template <typename S>
struct ParameterSetT {
  std::vector<S> embedding;   // [vocab_size, d_model]
  std::vector<S> bias_table;  // [bias_rows, num_heads]
  std::size_t bias_rows = 0;
  std::vector<LayerParamsT<S>> layers;
  std::vector<S> final_norm;  // [d_model], empty when config.final_norm is off
};

using ParameterSet = ParameterSetT<float>;

template <typename S>
struct NamedTensor {
  std::string name;
  std::vector<S>* values;
  std::vector<std::size_t> shape;
};

// Deterministic enumeration of every parameter tensor; the single source
// of truth for initialization order, optimizer state, and checkpoints.
template <typename S>
std::vector<NamedTensor<S>> named_tensors(ParameterSetT<S>& params, const EncoderConfig& config) {
  std::vector<NamedTensor<S>> out;
  auto dm = static_cast<std::size_t>(config.d_model);
  auto inner = static_cast<std::size_t>(config.inner_dim());
  auto dff = static_cast<std::size_t>(config.d_ff);
  out.push_back({"embedding.weight", &params.embedding,
                 {static_cast<std::size_t>(config.vocab_size), dm}});
  out.push_back({"relative_bias.weight", &params.bias_table,
                 {params.bias_rows, static_cast<std::size_t>(config.num_heads)}});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    std::string base = "layers." + std::to_string(l) + ".";
    LayerParamsT<S>& lp = params.layers[l];
    out.push_back({base + "attn_norm.weight", &lp.attn_norm, {dm}});
    out.push_back({base + "attn.q.weight", &lp.wq, {dm, inner}});
    out.push_back({base + "attn.k.weight", &lp.wk, {dm, inner}});
    out.push_back({base + "attn.v.weight", &lp.wv, {dm, inner}});
    out.push_back({base + "attn.o.weight", &lp.wo, {inner, dm}});
    out.push_back({base + "ffn_norm.weight", &lp.ffn_norm, {dm}});
    out.push_back({base + "ffn.wi.weight", &lp.ffn_wi, {dm, dff}});
    if (config.activation == EncoderConfig::Activation::Gated) {
      out.push_back({base + "ffn.wi_gate.weight", &lp.ffn_wi_gate, {dm, dff}});
    }
    out.push_back({base + "ffn.wo.weight", &lp.ffn_wo, {dff, dm}});
  }
  if (config.final_norm) {
    out.push_back({"final_norm.weight", &params.final_norm, {dm}});
  }
  return out;
}

// Random initialization; with_sentinel_rows=false leaves the bias table
// unextended (num_distance_buckets rows) for the pretrained-import flow.
ParameterSet init_params(const EncoderConfig& config, std::uint64_t seed,
                         bool with_sentinel_rows = true);

ParameterSetT<double> to_double(const ParameterSet& params);

// Append the 3 sentinel rows, each an exact copy of the maximal-positive-
// distance bucket row (the "+inf" bucket, last distance row).
template <typename S>
void extend_sentinel_buckets(ParameterSetT<S>& params, const EncoderConfig& config) {
  auto nb = static_cast<std::size_t>(config.num_distance_buckets);
  auto heads = static_cast<std::size_t>(config.num_heads);
  if (params.bias_rows == nb + 3) {
    throw std::logic_error("bias table already has its 3 sentinel rows");
  }
  if (params.bias_rows != nb) {
    throw std::logic_error("bias table has " + std::to_string(params.bias_rows) +
                           " rows; expected " + std::to_string(nb) + " (unextended)");
  }
  const S* last_row = params.bias_table.data() + (nb - 1) * heads;
  for (int s = 0; s < 3; ++s) {
    params.bias_table.insert(params.bias_table.end(), last_row, last_row + heads);
    last_row = params.bias_table.data() + (nb - 1) * heads;  // vector may reallocate
  }
  params.bias_rows = nb + 3;
}

template <typename S>
ParameterSetT<S> zero_like(const ParameterSetT<S>& params) {
  ParameterSetT<S> out;
  out.embedding.assign(params.embedding.size(), S(0));
  out.bias_table.assign(params.bias_table.size(), S(0));
  out.bias_rows = params.bias_rows;
  out.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParamsT<S>& in = params.layers[l];
    LayerParamsT<S>& lp = out.layers[l];
    lp.attn_norm.assign(in.attn_norm.size(), S(0));
    lp.wq.assign(in.wq.size(), S(0));
    lp.wk.assign(in.wk.size(), S(0));
    lp.wv.assign(in.wv.size(), S(0));
    lp.wo.assign(in.wo.size(), S(0));
    lp.ffn_norm.assign(in.ffn_norm.size(), S(0));
    lp.ffn_wi.assign(in.ffn_wi.size(), S(0));
    lp.ffn_wi_gate.assign(in.ffn_wi_gate.size(), S(0));
    lp.ffn_wo.assign(in.ffn_wo.size(), S(0));
  }
  out.final_norm.assign(params.final_norm.size(), S(0));
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward math. Row-major matrices over flat vectors.

inline constexpr double kNormEps = 1e-6;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<Mat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const Mat<S>>;

namespace detail {

template <typename S>
ConstMatMap<S> as_mat(const std::vector<S>& v, std::size_t rows, std::size_t cols) {
  return ConstMatMap<S>(v.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

template <typename S>
MatMap<S> as_mat(std::vector<S>& v, std::size_t rows, std::size_t cols) {
  return MatMap<S>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Scale-only normalization: y = x / sqrt(mean(x^2) + eps) .* g, no mean
// subtraction, no shift.
template <typename S>
Mat<S> rms_norm(const Eigen::Ref<const Mat<S>>& x, const std::vector<S>& g) {
  Mat<S> y(x.rows(), x.cols());
  const auto d = static_cast<S>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    S ms = x.row(r).squaredNorm() / d;
    S inv = S(1) / std::sqrt(ms + static_cast<S>(kNormEps));
    for (Eigen::Index c = 0; c < x.cols(); ++c) y(r, c) = x(r, c) * inv * g[c];
  }
  return y;
}

template <typename S>
void rms_norm_backward(const Eigen::Ref<const Mat<S>>& x, const std::vector<S>& g,
                       const Eigen::Ref<const Mat<S>>& dy, Mat<S>& dx, std::vector<S>& dg) {
  const auto d = static_cast<S>(x.cols());
  dx.resize(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    S ms = x.row(r).squaredNorm() / d;
    S inv = S(1) / std::sqrt(ms + static_cast<S>(kNormEps));
    S dot = 0;  // sum_k dy_k g_k x_k
    for (Eigen::Index c = 0; c < x.cols(); ++c) dot += dy(r, c) * g[c] * x(r, c);
    S coef = inv * inv * inv * dot / d;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      dx(r, c) = inv * dy(r, c) * g[c] - coef * x(r, c);
      dg[c] += dy(r, c) * x(r, c) * inv;
    }
  }
}

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

template <typename S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(kInvSqrt2)));
}

template <typename S>
S gelu_grad(S x) {
  S cdf = S(0.5) * (S(1) + std::erf(x * S(kInvSqrt2)));
  S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014326779);  // 1/sqrt(2*pi)
  return cdf + x * pdf;
}

}  // namespace detail

template <typename S>
struct LayerTrace {
  std::vector<S> x_in;          // [n, d_model] input to the block
  std::vector<S> attn_normed;   // [n, d_model]
  std::vector<S> q, k, v;       // [n, inner]
  std::vector<S> probs;         // [heads, n, n] softmax rows
  std::vector<S> ctx;           // [n, inner] weighted values, pre-output-proj
  std::vector<S> h_mid;         // [n, d_model] after attention residual
  std::vector<S> ffn_normed;    // [n, d_model]
  std::vector<S> ffn_lin;       // [n, d_ff] linear branch / pre-activation
  std::vector<S> ffn_gate_pre;  // [n, d_ff] gated only
  std::vector<S> ffn_act;       // [n, d_ff] input to the down-projection
  std::vector<S> drop_attn, drop_ffn;  // [n, d_model] masks, empty if no dropout
};

template <typename S>
struct EncodeTrace {
  std::vector<int> tokens;
  std::vector<std::int32_t> buckets;  // [n, n], -1 where masked
  std::vector<S> x0;                  // [n, d_model] embedding rows
  std::vector<LayerTrace<S>> layers;
  std::vector<S> pre_final;           // [n, d_model] input to the final norm
  std::vector<S> out;                 // [n, d_model]
};

namespace detail {

// Multi-head biased masked attention over already-normalized states.
// Returns the [n, inner] context; optionally records softmax rows / Q / K / V.
template <typename S>
std::vector<S> attention_core(const std::vector<S>& xn, const PositionPlan& plan,
                              const std::vector<std::int32_t>& buckets,
                              const ParameterSetT<S>& params, const EncoderConfig& config,
                              std::size_t layer, LayerTrace<S>* trace) {
  const std::size_t n = plan.n;
  const auto dm = static_cast<std::size_t>(config.d_model);
  const auto dh = static_cast<std::size_t>(config.d_head);
  const auto heads = static_cast<std::size_t>(config.num_heads);
  const std::size_t inner = heads * dh;
  const LayerParamsT<S>& lp = params.layers[layer];

  auto x = as_mat(xn, n, dm);
  Mat<S> q = x * as_mat(lp.wq, dm, inner);
  Mat<S> k = x * as_mat(lp.wk, dm, inner);
  Mat<S> v = x * as_mat(lp.wv, dm, inner);
  const S scale =
      config.attention_scaling ? S(1) / std::sqrt(static_cast<S>(config.d_head)) : S(1);

  std::vector<S> ctx(n * inner, S(0));
  auto ctx_m = as_mat(ctx, n, inner);
  if (trace) trace->probs.assign(heads * n * n, S(0));
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = q.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
    auto kh = k.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
    auto vh = v.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
    Mat<S> logits = (qh * kh.transpose()) * scale;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        std::int32_t b = buckets[i * n + j];
        if (b < 0) {
          logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
              static_cast<S>(kMaskValue);
        } else {
          logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
              params.bias_table[static_cast<std::size_t>(b) * heads + h];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto row = logits.row(static_cast<Eigen::Index>(i));
      S rowmax = row.maxCoeff();
      S denom = 0;
      for (std::size_t j = 0; j < n; ++j) {
        S e = std::exp(row(static_cast<Eigen::Index>(j)) - rowmax);
        row(static_cast<Eigen::Index>(j)) = e;
        denom += e;
      }
      row /= denom;
      if (trace) {
        for (std::size_t j = 0; j < n; ++j) {
          trace->probs[(h * n + i) * n + j] = row(static_cast<Eigen::Index>(j));
        }
      }
    }
    ctx_m.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)) =
        logits * vh;  // logits now holds the softmax rows
  }
  if (trace) {
    trace->q.assign(q.data(), q.data() + q.size());
    trace->k.assign(k.data(), k.data() + k.size());
    trace->v.assign(v.data(), v.data() + v.size());
  }
  return ctx;
}

template <typename S>
void check_encode_args(std::span<const int> tokens, const PositionPlan& plan,
                       const EncoderConfig& config) {
  if (tokens.empty()) throw std::invalid_argument("cannot encode an empty token sequence");
  if (tokens.size() != plan.n) {
    throw std::invalid_argument("token count " + std::to_string(tokens.size()) +
                                " does not match plan size " + std::to_string(plan.n));
  }
  for (int id : tokens) {
    if (id < 0 || id >= config.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(config.vocab_size));
    }
  }
}

}  // namespace detail

// Eq. 1 attention sublayer: softmax(Q K^T / sqrt(d) + B_P + M) V, multi-head,
// over raw token states x ([n, d_model], NOT pre-normalized here). Returns
// the [n, inner] head-concatenated context.
template <typename S>
std::vector<S> attention(const std::vector<S>& x, const PositionPlan& plan,
                         const ParameterSetT<S>& params, const EncoderConfig& config,
                         std::size_t layer) {
  if (x.size() != plan.n * static_cast<std::size_t>(config.d_model)) {
    throw std::invalid_argument("state matrix of " + std::to_string(x.size()) +
                                " values does not match plan size " + std::to_string(plan.n) +
                                " x d_model " + std::to_string(config.d_model));
  }
  if (layer >= params.layers.size()) throw std::out_of_range("layer index out of range");
  std::vector<std::int32_t> buckets = plan_buckets(plan, config.bucket_table());
  return detail::attention_core(x, plan, buckets, params, config, layer,
                                static_cast<LayerTrace<S>*>(nullptr));
}

// Full forward pass with every intermediate recorded for the backward pass.
// dropout_rate > 0 applies seeded inverted dropout to both residual branches.
template <typename S>
EncodeTrace<S> encode_traced(std::span<const int> tokens, const PositionPlan& plan,
                             const ParameterSetT<S>& params, const EncoderConfig& config,
                             double dropout_rate = 0.0, SeededRng* rng = nullptr) {
  detail::check_encode_args<S>(tokens, plan, config);
  if (params.bias_rows != static_cast<std::size_t>(config.num_distance_buckets) + 3) {
    throw std::logic_error("bias table is unextended; call extend_sentinel_buckets first");
  }
  if (dropout_rate > 0.0 && rng == nullptr) {
    throw std::invalid_argument("dropout requires an rng");
  }
  const std::size_t n = tokens.size();
  const auto dm = static_cast<std::size_t>(config.d_model);
  const std::size_t inner = static_cast<std::size_t>(config.inner_dim());
  const auto dff = static_cast<std::size_t>(config.d_ff);
  const bool gated = config.activation == EncoderConfig::Activation::Gated;

  EncodeTrace<S> trace;
  trace.tokens.assign(tokens.begin(), tokens.end());
  trace.buckets = plan_buckets(plan, config.bucket_table());
  trace.x0.resize(n * dm);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(params.embedding.begin() + static_cast<std::ptrdiff_t>(
                                               static_cast<std::size_t>(tokens[i]) * dm),
                dm, trace.x0.begin() + static_cast<std::ptrdiff_t>(i * dm));
  }

  auto draw_mask = [&](std::vector<S>& mask) {
    mask.resize(n * dm);
    const S keep_scale = S(1.0 / (1.0 - dropout_rate));
    for (auto& m : mask) m = rng->uniform() < dropout_rate ? S(0) : keep_scale;
  };

  std::vector<S> x = trace.x0;
  trace.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerTrace<S>& lt = trace.layers[l];
    lt.x_in = x;
    auto x_m = detail::as_mat(x, n, dm);
    Mat<S> normed = detail::rms_norm<S>(x_m, params.layers[l].attn_norm);
    lt.attn_normed.assign(normed.data(), normed.data() + normed.size());
    lt.ctx = detail::attention_core(lt.attn_normed, plan, trace.buckets, params, config, l, &lt);
    Mat<S> branch =
        detail::as_mat(lt.ctx, n, inner) * detail::as_mat(params.layers[l].wo, inner, dm);
    if (dropout_rate > 0.0) {
      draw_mask(lt.drop_attn);
      branch.array() *= detail::as_mat(lt.drop_attn, n, dm).array();
    }
    Mat<S> h_mid = x_m + branch;
    lt.h_mid.assign(h_mid.data(), h_mid.data() + h_mid.size());

    Mat<S> ffn_normed = detail::rms_norm<S>(h_mid, params.layers[l].ffn_norm);
    lt.ffn_normed.assign(ffn_normed.data(), ffn_normed.data() + ffn_normed.size());
    Mat<S> lin = ffn_normed * detail::as_mat(params.layers[l].ffn_wi, dm, dff);
    lt.ffn_lin.assign(lin.data(), lin.data() + lin.size());
    Mat<S> act;
    if (gated) {
      Mat<S> gate = ffn_normed * detail::as_mat(params.layers[l].ffn_wi_gate, dm, dff);
      lt.ffn_gate_pre.assign(gate.data(), gate.data() + gate.size());
      act = gate.unaryExpr([](S g) { return detail::gelu(g); }).cwiseProduct(lin);
    } else {
      act = lin.cwiseMax(S(0));
    }
    lt.ffn_act.assign(act.data(), act.data() + act.size());
    Mat<S> ffn_branch = act * detail::as_mat(params.layers[l].ffn_wo, dff, dm);
    if (dropout_rate > 0.0) {
      draw_mask(lt.drop_ffn);
      ffn_branch.array() *= detail::as_mat(lt.drop_ffn, n, dm).array();
    }
    Mat<S> h_out = h_mid + ffn_branch;
    x.assign(h_out.data(), h_out.data() + h_out.size());
  }

  trace.pre_final = x;
  if (config.final_norm) {
    Mat<S> out = detail::rms_norm<S>(detail::as_mat(x, n, dm), params.final_norm);
    trace.out.assign(out.data(), out.data() + out.size());
  } else {
    trace.out = x;
  }
  return trace;
}

// Final token embeddings, one row of width d_model per input token.
template <typename S>
std::vector<S> encode(std::span<const int> tokens, const PositionPlan& plan,
                      const ParameterSetT<S>& params, const EncoderConfig& config) {
  return encode_traced<S>(tokens, plan, params, config).out;
}

// Pure sequence path: P[i][j] = j - i, M all zero.
template <typename S>
std::vector<S> sequence_encode(std::span<const int> tokens, const ParameterSetT<S>& params,
                               const EncoderConfig& config) {
  if (tokens.empty()) throw std::invalid_argument("cannot encode an empty token sequence");
  return encode<S>(tokens, sequence_plan(tokens.size()), params, config);
}

// Backward pass: accumulates parameter gradients into `grads` (shaped via
// zero_like); embedding-row gradients land in grads.embedding.
template <typename S>
void encode_backward(const EncodeTrace<S>& trace, const ParameterSetT<S>& params,
                     const EncoderConfig& config, const std::vector<S>& d_out,
                     ParameterSetT<S>& grads) {
  const std::size_t n = trace.tokens.size();
  const auto dm = static_cast<std::size_t>(config.d_model);
  const auto dh = static_cast<std::size_t>(config.d_head);
  const auto heads = static_cast<std::size_t>(config.num_heads);
  const std::size_t inner = heads * dh;
  const auto dff = static_cast<std::size_t>(config.d_ff);
  const bool gated = config.activation == EncoderConfig::Activation::Gated;
  const S scale =
      config.attention_scaling ? S(1) / std::sqrt(static_cast<S>(config.d_head)) : S(1);

  Mat<S> dx;
  if (config.final_norm) {
    detail::rms_norm_backward<S>(detail::as_mat(trace.pre_final, n, dm), params.final_norm,
                                 detail::as_mat(d_out, n, dm), dx, grads.final_norm);
  } else {
    dx = detail::as_mat(d_out, n, dm);
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerTrace<S>& lt = trace.layers[l];
    const LayerParamsT<S>& lp = params.layers[l];
    LayerParamsT<S>& lg = grads.layers[l];

    // FFN sub-block: h_out = h_mid + drop .* (act(norm(h_mid)) wo)
    Mat<S> d_branch = dx;
    if (!lt.drop_ffn.empty()) {
      d_branch.array() *= detail::as_mat(lt.drop_ffn, n, dm).array();
    }
    auto act = detail::as_mat(lt.ffn_act, n, dff);
    detail::as_mat(lg.ffn_wo, dff, dm) += act.transpose() * d_branch;
    Mat<S> d_act = d_branch * detail::as_mat(lp.ffn_wo, dff, dm).transpose();
    auto lin = detail::as_mat(lt.ffn_lin, n, dff);
    Mat<S> d_ffn_normed;
    if (gated) {
      auto gate_pre = detail::as_mat(lt.ffn_gate_pre, n, dff);
      Mat<S> gate_act = gate_pre.unaryExpr([](S g) { return detail::gelu(g); });
      Mat<S> d_lin = d_act.cwiseProduct(gate_act);
      Mat<S> d_gate_pre = d_act.cwiseProduct(lin).cwiseProduct(
          gate_pre.unaryExpr([](S g) { return detail::gelu_grad(g); }));
      auto ffn_normed = detail::as_mat(lt.ffn_normed, n, dm);
      detail::as_mat(lg.ffn_wi, dm, dff) += ffn_normed.transpose() * d_lin;
      detail::as_mat(lg.ffn_wi_gate, dm, dff) += ffn_normed.transpose() * d_gate_pre;
      d_ffn_normed = d_lin * detail::as_mat(lp.ffn_wi, dm, dff).transpose() +
                     d_gate_pre * detail::as_mat(lp.ffn_wi_gate, dm, dff).transpose();
    } else {
      Mat<S> d_pre = d_act.cwiseProduct(
          lin.unaryExpr([](S x) { return x > S(0) ? S(1) : S(0); }));
      auto ffn_normed = detail::as_mat(lt.ffn_normed, n, dm);
      detail::as_mat(lg.ffn_wi, dm, dff) += ffn_normed.transpose() * d_pre;
      d_ffn_normed = d_pre * detail::as_mat(lp.ffn_wi, dm, dff).transpose();
    }
    Mat<S> d_h_mid;
    detail::rms_norm_backward<S>(detail::as_mat(lt.h_mid, n, dm), lp.ffn_norm, d_ffn_normed,
                                 d_h_mid, lg.ffn_norm);
    d_h_mid += dx;  // residual path

    // Attention sub-block: h_mid = x_in + drop .* (ctx wo)
    Mat<S> d_attn_branch = d_h_mid;
    if (!lt.drop_attn.empty()) {
      d_attn_branch.array() *= detail::as_mat(lt.drop_attn, n, dm).array();
    }
    auto ctx = detail::as_mat(lt.ctx, n, inner);
    detail::as_mat(lg.wo, inner, dm) += ctx.transpose() * d_attn_branch;
    Mat<S> d_ctx = d_attn_branch * detail::as_mat(lp.wo, inner, dm).transpose();

    auto q = detail::as_mat(lt.q, n, inner);
    auto k = detail::as_mat(lt.k, n, inner);
    auto v = detail::as_mat(lt.v, n, inner);
    Mat<S> dq(n, inner), dk(n, inner), dv(n, inner);
    for (std::size_t h = 0; h < heads; ++h) {
      auto cols = [&](auto& m) {
        return m.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh));
      };
      ConstMatMap<S> probs(lt.probs.data() + h * n * n, static_cast<Eigen::Index>(n),
                           static_cast<Eigen::Index>(n));
      Mat<S> d_probs = cols(d_ctx) * cols(v).transpose();
      dv.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)) =
          probs.transpose() * cols(d_ctx);
      // Softmax backward: dS = P .* (dP - rowsum(dP .* P)); masked entries
      // have P = 0 exactly, so their dS vanishes.
      Mat<S> d_logits(n, n);
      for (std::size_t i = 0; i < n; ++i) {
        S dot = probs.row(static_cast<Eigen::Index>(i))
                    .cwiseProduct(d_probs.row(static_cast<Eigen::Index>(i)))
                    .sum();
        for (std::size_t j = 0; j < n; ++j) {
          auto ii = static_cast<Eigen::Index>(i);
          auto jj = static_cast<Eigen::Index>(j);
          d_logits(ii, jj) = probs(ii, jj) * (d_probs(ii, jj) - dot);
          std::int32_t b = trace.buckets[i * n + j];
          if (b >= 0) {
            grads.bias_table[static_cast<std::size_t>(b) * heads + h] += d_logits(ii, jj);
          }
        }
      }
      dq.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)) =
          (d_logits * cols(k)) * scale;
      dk.middleCols(static_cast<Eigen::Index>(h * dh), static_cast<Eigen::Index>(dh)) =
          (d_logits.transpose() * cols(q)) * scale;
    }
    auto attn_normed = detail::as_mat(lt.attn_normed, n, dm);
    detail::as_mat(lg.wq, dm, inner) += attn_normed.transpose() * dq;
    detail::as_mat(lg.wk, dm, inner) += attn_normed.transpose() * dk;
    detail::as_mat(lg.wv, dm, inner) += attn_normed.transpose() * dv;
    Mat<S> d_attn_normed = dq * detail::as_mat(lp.wq, dm, inner).transpose() +
                           dk * detail::as_mat(lp.wk, dm, inner).transpose() +
                           dv * detail::as_mat(lp.wv, dm, inner).transpose();
    Mat<S> d_x_in;
    detail::rms_norm_backward<S>(detail::as_mat(lt.x_in, n, dm), lp.attn_norm, d_attn_normed,
                                 d_x_in, lg.attn_norm);
    dx = d_h_mid + d_x_in;
  }

  auto d_embed = detail::as_mat(grads.embedding, static_cast<std::size_t>(config.vocab_size), dm);
  for (std::size_t i = 0; i < n; ++i) {
    d_embed.row(trace.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));
  }
}

// Weight container I/O. Exports carry the full config as metadata so our
// own files round-trip bitwise. Foreign containers without metadata are
// treated as pretrained: bias table auto-extended when unextended, and
// attention scaling forced off.
struct LoadedModel {
  EncoderConfig config;
  ParameterSet params;
};

void export_weights(const std::string& path, const ParameterSet& params,
                    const EncoderConfig& config);
LoadedModel import_weights(const std::string& path);

// Row-major f32 matrix + JSON sidecar {"n": rows, "d_model": cols}.
void save_embeddings(const std::string& path, const std::vector<float>& embeddings,
                     std::size_t n, std::size_t d_model);

}  // namespace glmkit
