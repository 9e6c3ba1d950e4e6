// Copyright 2026 The weakguide Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "weakguide/codec.hpp"
#include "weakguide/config.hpp"
#include "weakguide/diffusion.hpp"
#include "weakguide/error.hpp"
#include "weakguide/experiments.hpp"
#include "weakguide/metrics.hpp"
#include "weakguide/stats.hpp"
#include "weakguide/world.hpp"

namespace py = pybind11;
using namespace weakguide;

namespace {

PromptSpec make_spec(const std::string& context, std::optional<std::string> qualifier,
                     std::vector<std::string> extra) {
  PromptSpec p;
  p.context = context;
  p.qualifier = std::move(qualifier);
  p.extra_tokens = std::move(extra);
  return p;
}

MaskMode mask_mode(const std::string& name) {
  if (name == "eos_masked") return MaskMode::kEosMasked;
  if (name == "every_position") return MaskMode::kEveryPosition;
  throw InvalidArgument("mask must be 'eos_masked' or 'every_position'");
}

stats::Alternative alternative(const std::string& name) {
  if (name == "two-sided") return stats::Alternative::kTwoSided;
  if (name == "greater") return stats::Alternative::kGreater;
  if (name == "less") return stats::Alternative::kLess;
  throw InvalidArgument("alternative must be 'two-sided', 'greater' or 'less'");
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["experiment"] = r.experiment;
  d["context"] = r.context;
  d["method"] = r.method;
  d["param_name"] = r.param_name;
  d["param_value"] = r.param_value;
  d["metric"] = r.metric;
  d["value"] = r.value;
  d["n"] = r.n;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian-mixture lab for attribute guidance in conditional diffusion.";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PromptSpec>(m, "Prompt")
      .def(py::init(&make_spec), py::arg("context"), py::arg("qualifier") = py::none(),
           py::arg("extra_tokens") = std::vector<std::string>{})
      .def_readwrite("context", &PromptSpec::context)
      .def_readwrite("qualifier", &PromptSpec::qualifier)
      .def_readwrite("extra_tokens", &PromptSpec::extra_tokens)
      .def("tokens", &PromptSpec::tokens)
      .def("__repr__", [](const PromptSpec& p) { return "Prompt('" + p.text() + "')"; });

  py::class_<CondEmbedding>(m, "Embedding")
      .def_readonly("matrix", &CondEmbedding::matrix)
      .def_readonly("eos_index", &CondEmbedding::eos_index)
      .def_property_readonly("shape",
                             [](const CondEmbedding& c) {
                               return py::make_tuple(c.length(), c.dim());
                             })
      .def("eos_mask", [](const CondEmbedding& c) {
        const auto mask = eos_mask(c);
        return std::vector<int>(mask.begin(), mask.end());
      });

  py::class_<CadsParams>(m, "CadsParams")
      .def(py::init([](double s, double tau1, double tau2) {
             CadsParams p{s, tau1, tau2};
             p.validate();
             return p;
           }),
           py::arg("noise_scale") = 0.25, py::arg("tau1") = 0.6, py::arg("tau2") = 0.9)
      .def_readonly("noise_scale", &CadsParams::noise_scale)
      .def_readonly("tau1", &CadsParams::tau1)
      .def_readonly("tau2", &CadsParams::tau2);

  m.def("cads_gamma", &cads_gamma, py::arg("t"), py::arg("params"));

  py::class_<World>(m, "World")
      .def_static("default", [] { return World::with_codec(default_world_spec()); })
      .def_static("from_file",
                  [](const std::filesystem::path& p) { return World::with_codec(load_world(p)); })
      .def_property_readonly("contexts",
                             [](const World& w) {
                               std::vector<std::string> out;
                               for (const auto& c : w.spec().contexts) out.push_back(c.name);
                               return out;
                             })
      .def_property_readonly("attributes",
                             [](const World& w) { return w.spec().attribute_tokens(); })
      .def("hash", &World::hash)
      .def("encode", [](const World& w, const PromptSpec& p) { return w.codec().encode(p); })
      .def("empty", [](const World& w) { return w.codec().empty(); })
      .def("attribute_direction",
           [](const World& w, const std::string& a) {
             return w.codec().attribute_direction(a).matrix;
           })
      .def("readout", [](const World& w, const CondEmbedding& c) { return w.codec().readout(c); })
      .def(
          "apply_weak",
          [](const World& w, const CondEmbedding& c, const std::vector<std::string>& attributes,
             const std::string& mask) {
            std::vector<AttributeDirection> dirs;
            for (const auto& a : attributes) dirs.push_back(w.codec().attribute_direction(a));
            return apply_weak(c, dirs, mask_mode(mask));
          },
          py::arg("condition"), py::arg("attributes"), py::arg("mask") = "eos_masked")
      .def(
          "cads_perturb",
          [](const World&, const CondEmbedding& c, double t, const CadsParams& params,
             std::uint64_t seed) {
            Rng rng(seed);
            return cads_perturb(c, t, params, rng);
          },
          py::arg("condition"), py::arg("t"), py::arg("params"), py::arg("seed") = 0)
      .def(
          "weights",
          [](const World& w, const CondEmbedding& c, const std::string& ctx) {
            return Vector(w.log_weights(c, ctx).array().exp());
          },
          py::arg("condition"), py::arg("context"))
      .def("score", &World::score, py::arg("z"), py::arg("abar"), py::arg("condition"),
           py::arg("context"))
      .def("eps", &World::eps_pred, py::arg("z"), py::arg("abar"), py::arg("condition"),
           py::arg("context"))
      .def("log_density", &World::log_density, py::arg("x"), py::arg("condition"),
           py::arg("context"))
      .def(
          "sample_oracle",
          [](const World& w, const PromptSpec& p, int n, std::uint64_t seed) {
            Rng rng(seed);
            const auto samples = w.sample_oracle(p, n, rng);
            RowMatrix out(n, w.spec().dim);
            for (int i = 0; i < n; ++i) out.row(i) = samples[i].x.transpose();
            return out;
          },
          py::arg("prompt"), py::arg("n"), py::arg("seed") = 0)
      .def(
          "classify",
          [](const World& w, const Vector& x, const std::string& ctx, int slot) {
            return w.classify(x, ctx, slot).name;
          },
          py::arg("x"), py::arg("context"), py::arg("slot") = 0)
      .def(
          "attribute_ratio",
          [](const World& w, const RowMatrix& samples, const std::string& ctx, int slot) {
            const auto r = attribute_ratio(w, samples, ctx, slot);
            py::dict d;
            for (std::size_t i = 0; i < r.attributes.size(); ++i) d[py::str(r.attributes[i])] = r.ratios[i];
            return d;
          },
          py::arg("samples"), py::arg("context"), py::arg("slot") = 0);

  py::class_<Schedule>(m, "Schedule")
      .def_static("linear", &Schedule::linear, py::arg("steps") = 1000)
      .def_property_readonly("steps", &Schedule::steps)
      .def("beta", &Schedule::beta)
      .def("abar", &Schedule::abar);

  m.def("cfg_combine", &cfg_combine, py::arg("eps_c"), py::arg("eps_u"), py::arg("alpha"));
  m.def("energy_distance", &energy_distance, py::arg("a"), py::arg("b"));

  m.def(
      "clopper_pearson",
      [](std::int64_t k, std::int64_t n, double confidence) {
        const auto ci = stats::clopper_pearson(k, n, confidence);
        return py::make_tuple(ci.low, ci.high);
      },
      py::arg("k"), py::arg("n"), py::arg("confidence") = 0.95);
  m.def(
      "sign_test",
      [](std::int64_t up, std::int64_t down, const std::string& alt) {
        return stats::sign_test(up, down, alternative(alt)).p_value;
      },
      py::arg("up"), py::arg("down"), py::arg("alternative") = "two-sided");

  m.attr("experiment_kinds") = kExperimentKinds;
  m.def(
      "run_experiment",
      [](const std::string& kind, const std::optional<std::filesystem::path>& config,
         std::optional<std::uint64_t> seed, std::optional<int> n, int workers) {
        ExperimentConfig c = config ? load_config(*config) : ExperimentConfig{};
        if (seed) c.seed = *seed;
        if (n) c.n = *n;
        c.workers = workers;
        c.validate();
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(kind, c);
        }
        py::list rows;
        for (const auto& r : result.rows) rows.append(row_dict(r));
        return rows;
      },
      py::arg("kind"), py::arg("config") = py::none(), py::arg("seed") = py::none(),
      py::arg("n") = py::none(), py::arg("workers") = 1,
      "Runs one experiment and returns its result rows as dicts.");
}
