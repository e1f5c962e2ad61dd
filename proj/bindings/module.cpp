// Python bindings for the core operations: graph preprocessing, plan
// compilation, encoding, and head training. Mirrors the C++ surface thinly;
// matrices cross the boundary as numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "glmkit/data.hpp"
#include "glmkit/encoder.hpp"
#include "glmkit/graph.hpp"
#include "glmkit/position.hpp"
#include "glmkit/training.hpp"

namespace py = pybind11;
using namespace glmkit;

namespace {

GraphOfTriplets graph_from_tuples(
    const std::vector<std::tuple<std::string, std::string, std::string>>& triplets,
    std::optional<std::size_t> target) {
  std::vector<Triplet> converted;
  converted.reserve(triplets.size());
  for (const auto& [h, r, t] : triplets) converted.push_back({h, r, t});
  return GraphOfTriplets::from_triplets(std::move(converted), target);
}

// n*n plan fields as numpy: bucket indices (-1 masked) and attendance.
py::dict plan_arrays(const PositionPlan& plan, const BucketTable& table) {
  auto n = static_cast<py::ssize_t>(plan.n);
  std::vector<std::int32_t> buckets = plan_buckets(plan, table);
  py::array_t<std::int32_t> p({n, n});
  std::copy(buckets.begin(), buckets.end(), p.mutable_data());
  py::array_t<std::uint8_t> m({n, n});
  std::copy(plan.attend.begin(), plan.attend.end(), m.mutable_data());
  py::dict out;
  out["buckets"] = std::move(p);
  out["attend"] = std::move(m);
  out["graph_len"] = plan.graph_token_count();
  return out;
}

py::array_t<float> encode_to_numpy(const std::vector<int>& tokens, const PositionPlan& plan,
                                   const ParameterSet& params, const EncoderConfig& config) {
  std::vector<float> out = encode<float>(tokens, plan, params, config);
  py::array_t<float> arr({static_cast<py::ssize_t>(tokens.size()),
                          static_cast<py::ssize_t>(config.d_model)});
  std::copy(out.begin(), out.end(), arr.mutable_data());
  return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "graph language model core";

  py::class_<Triplet>(m, "Triplet")
      .def(py::init([](std::string h, std::string r, std::string t) {
             return Triplet{std::move(h), std::move(r), std::move(t)};
           }),
           py::arg("head"), py::arg("relation"), py::arg("tail"))
      .def_readonly("head", &Triplet::head)
      .def_readonly("relation", &Triplet::relation)
      .def_readonly("tail", &Triplet::tail)
      .def("__repr__", [](const Triplet& t) {
        return "Triplet(" + t.head + ", " + t.relation + ", " + t.tail + ")";
      });

  py::class_<GraphOfTriplets>(m, "GraphOfTriplets")
      .def(py::init(&graph_from_tuples), py::arg("triplets"),
           py::arg("target") = std::nullopt)
      .def_property_readonly("triplets", &GraphOfTriplets::triplets)
      .def_property_readonly("target", &GraphOfTriplets::target)
      .def("__len__", &GraphOfTriplets::size);

  py::class_<ExtendedLeviGraph>(m, "ExtendedLeviGraph")
      .def_property_readonly("token_ids", &ExtendedLeviGraph::token_ids)
      .def_property_readonly("surfaces",
                             [](const ExtendedLeviGraph& g) {
                               std::vector<std::string> out;
                               for (const auto& t : g.tokens) out.push_back(t.surface);
                               return out;
                             })
      .def_property_readonly("triplet_spans",
                             [](const ExtendedLeviGraph& g) { return g.triplet_spans; })
      .def_property_readonly("edges", [](const ExtendedLeviGraph& g) { return g.edges; })
      .def("__len__", &ExtendedLeviGraph::size);

  py::class_<WhitespaceTokenizer>(m, "WhitespaceTokenizer")
      .def(py::init<>())
      .def("tokenize",
           [](const WhitespaceTokenizer& t, const std::string& text) {
             std::vector<std::pair<int, std::string>> out;
             for (const auto& piece : t.tokenize(text)) out.emplace_back(piece.id, piece.text);
             return out;
           })
      .def_property_readonly("vocab_size", &WhitespaceTokenizer::vocab_size);

  m.def("mask_target_relation", &mask_target_relation, py::arg("graph"), py::arg("index"));
  m.def("mask_subgraph", &mask_subgraph, py::arg("graph"), py::arg("level"));
  m.def("verbalize_relation",
        [](const std::string& name) { return verbalize_relation(name); });
  m.def("relation_label_set", [] { return relation_label_set(); });
  m.def(
      "tokenize_graph",
      [](const GraphOfTriplets& g, const WhitespaceTokenizer& tok) {
        return tokenize_levi(to_levi(g), tok);
      },
      py::arg("graph"), py::arg("tokenizer"));

  py::enum_<PlanVariant>(m, "PlanVariant")
      .value("LOCAL", PlanVariant::Local)
      .value("GLOBAL", PlanVariant::Global);

  py::class_<PositionPlan>(m, "PositionPlan")
      .def_property_readonly("n", [](const PositionPlan& p) { return p.n; })
      .def("arrays", [](const PositionPlan& p) { return plan_arrays(p, BucketTable{}); });

  m.def("build_local", &build_local, py::arg("elg"));
  m.def("build_global", &build_global, py::arg("elg"));
  m.def(
      "build_joint",
      [](const ExtendedLeviGraph& elg, const std::vector<int>& text, PlanVariant variant) {
        return build_joint(elg, text, variant);
      },
      py::arg("elg"), py::arg("text_tokens"), py::arg("variant"));
  m.def("sequence_plan", &sequence_plan, py::arg("n_tokens"));
  m.def(
      "bucketize",
      [](std::int32_t distance) { return bucketize(RelPos::dist(distance), BucketTable{}); },
      py::arg("distance"), "bucket index of one signed relative distance");

  py::class_<EncoderConfig> config(m, "EncoderConfig");
  config.def(py::init<>())
      .def_readwrite("num_layers", &EncoderConfig::num_layers)
      .def_readwrite("d_model", &EncoderConfig::d_model)
      .def_readwrite("num_heads", &EncoderConfig::num_heads)
      .def_readwrite("d_head", &EncoderConfig::d_head)
      .def_readwrite("d_ff", &EncoderConfig::d_ff)
      .def_readwrite("vocab_size", &EncoderConfig::vocab_size)
      .def_readwrite("attention_scaling", &EncoderConfig::attention_scaling)
      .def_readwrite("final_norm", &EncoderConfig::final_norm);

  py::class_<ParameterSet>(m, "ParameterSet");

  m.def("init_params", &init_params, py::arg("config"), py::arg("seed"),
        py::arg("with_sentinel_rows") = true);
  m.def("encode", &encode_to_numpy, py::arg("tokens"), py::arg("plan"), py::arg("params"),
        py::arg("config"));
  m.def(
      "sequence_encode",
      [](const std::vector<int>& tokens, const ParameterSet& params,
         const EncoderConfig& config) {
        return encode_to_numpy(tokens, sequence_plan(tokens.size()), params, config);
      },
      py::arg("tokens"), py::arg("params"), py::arg("config"));
  m.def("export_weights", &export_weights, py::arg("path"), py::arg("params"),
        py::arg("config"));
  m.def(
      "import_weights",
      [](const std::string& path) {
        LoadedModel model = import_weights(path);
        return py::make_tuple(model.config, std::move(model.params));
      },
      py::arg("path"), "returns (config, params)");
}
