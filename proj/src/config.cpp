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

#include "weakguide/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "weakguide/error.hpp"

namespace weakguide {

namespace {

// Typed access to one TOML table that remembers which keys were read, so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

  std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const toml::node* node(std::string_view key) {
    used_.insert(std::string(key));
    return table_.get(key);
  }

  std::optional<double> number(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return v;
    throw ConfigError(key_path(key), "expected a number");
  }

  std::optional<std::int64_t> integer(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_integer()) throw ConfigError(key_path(key), "expected an integer");
    return n->value<std::int64_t>();
  }

  std::optional<std::string> string(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    if (!n->is_string()) throw ConfigError(key_path(key), "expected a string");
    return n->value<std::string>();
  }

  std::optional<std::vector<double>> numbers(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError(key_path(key), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& item : *arr) {
      auto v = item.value<double>();
      if (!v) throw ConfigError(key_path(key), "expected an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  std::optional<std::vector<std::string>> strings(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError(key_path(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& item : *arr) {
      auto v = item.value<std::string>();
      if (!v) throw ConfigError(key_path(key), "expected an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  std::optional<Section> table(std::string_view key) {
    const toml::node* n = node(key);
    if (!n) return std::nullopt;
    const toml::table* t = n->as_table();
    if (!t) throw ConfigError(key_path(key), "expected a table");
    return Section(*t, key_path(key));
  }

  void finish() const {
    for (const auto& [k, _] : table_) {
      if (!used_.count(std::string(k.str()))) throw ConfigError(key_path(k.str()), "unknown key");
    }
  }

 private:
  const toml::table& table_;
  std::string path_;
  std::set<std::string> used_;
};

toml::table parse_toml(std::string_view text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    throw ConfigError(origin, fmt::format("line {}: {}", e.source().begin.line,
                                          std::string(e.description())));
  }
}

std::string read_file(const std::filesystem::path& path, const std::string& key) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key, "cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Matrix parse_matrix(const toml::node& node, int dim, const std::string& key) {
  const toml::array* rows = node.as_array();
  if (!rows || static_cast<int>(rows->size()) != dim) {
    throw ConfigError(key, fmt::format("expected a {0}x{0} matrix", dim));
  }
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const toml::array* row = rows->get(i)->as_array();
    if (!row || static_cast<int>(row->size()) != dim) {
      throw ConfigError(key, fmt::format("expected a {0}x{0} matrix", dim));
    }
    for (int j = 0; j < dim; ++j) {
      auto v = row->get(j)->value<double>();
      if (!v) throw ConfigError(key, "matrix entries must be numbers");
      m(i, j) = *v;
    }
  }
  return m;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ContextSpec parse_context(Section& s, const WorldSpec& world, double sigma) {
  ContextSpec ctx;
  const std::string name_key = s.key_path("name");
  ctx.name = s.string("name").value_or("");
  if (ctx.name.empty()) throw ConfigError(name_key, "context needs a name");

  const auto families = s.strings("families").value_or(std::vector<std::string>{});
  for (const auto& f : families) {
    try {
      ctx.families.push_back(world.family_index(f));
    } catch (const InvalidArgument&) {
      throw ConfigError(s.key_path("families"), "unknown family '" + f + "'");
    }
  }
  const double ctx_sigma = s.number("sigma").value_or(sigma);

  if (ctx.families.empty()) {
    const auto mean = s.numbers("mean");
    if (!mean || static_cast<int>(mean->size()) != world.dim) {
      throw ConfigError(s.key_path("mean"), fmt::format("object context needs a {}-vector", world.dim));
    }
    ComponentSpec comp;
    comp.mean = to_vector(*mean);
    if (const toml::node* cov = s.node("covariance")) {
      comp.cov = parse_matrix(*cov, world.dim, s.key_path("covariance"));
    } else {
      comp.cov = Matrix::Identity(world.dim, world.dim) * (ctx_sigma * ctx_sigma);
    }
    ctx.components = {std::move(comp)};
    s.finish();
    return ctx;
  }

  const toml::node* priors = s.node("priors");
  const toml::array* prior_rows = priors ? priors->as_array() : nullptr;
  if (!prior_rows || prior_rows->size() != ctx.families.size()) {
    throw ConfigError(s.key_path("priors"), "need one probability list per family");
  }
  int count = 1;
  for (std::size_t f = 0; f < ctx.families.size(); ++f) {
    const auto& attrs = world.families[ctx.families[f]].attributes;
    const toml::array* row = prior_rows->get(f)->as_array();
    if (!row || row->size() != attrs.size()) {
      throw ConfigError(s.key_path("priors"),
                        fmt::format("family {} needs {} probabilities", f, attrs.size()));
    }
    Vector logits(static_cast<Eigen::Index>(attrs.size()));
    double total = 0.0;
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      auto p = row->get(a)->value<double>();
      if (!p || !(*p > 0.0)) throw ConfigError(s.key_path("priors"), "probabilities must be > 0");
      total += *p;
      logits[a] = std::log(*p);
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ConfigError(s.key_path("priors"), "probabilities must sum to 1");
    }
    ctx.prior_logits.push_back(std::move(logits));
    count *= static_cast<int>(attrs.size());
  }

  if (const toml::node* means = s.node("means")) {
    const toml::array* arr = means->as_array();
    if (!arr || static_cast<int>(arr->size()) != count) {
      throw ConfigError(s.key_path("means"), fmt::format("need {} component means", count));
    }
    for (const auto& m : *arr) {
      const toml::array* row = m.as_array();
      if (!row || static_cast<int>(row->size()) != world.dim) {
        throw ConfigError(s.key_path("means"), fmt::format("means must be {}-vectors", world.dim));
      }
      ComponentSpec comp;
      comp.mean = Vector(world.dim);
      for (int i = 0; i < world.dim; ++i) comp.mean[i] = row->get(i)->value<double>().value_or(NAN);
      comp.cov = Matrix::Identity(world.dim, world.dim) * (ctx_sigma * ctx_sigma);
      ctx.components.push_back(std::move(comp));
    }
  } else {
    const double radius = s.number("radius").value_or(3.0);
    const double angle = s.number("angle").value_or(0.0);
    ctx.components = circle_components(world.dim, count, radius, angle, ctx_sigma);
  }
  // Cartesian product with the first family varying slowest.
  for (int k = 0; k < count; ++k) {
    int rest = k;
    std::vector<int> labels(ctx.families.size());
    for (int f = static_cast<int>(ctx.families.size()) - 1; f >= 0; --f) {
      const int size = static_cast<int>(world.families[ctx.families[f]].attributes.size());
      labels[f] = rest % size;
      rest /= size;
    }
    ctx.components[k].attributes = std::move(labels);
  }
  s.finish();
  return ctx;
}

void apply_world_overrides(Section& s, WorldSpec& world) {
  if (auto v = s.number("coupling")) world.coupling = *v;
}

}  // namespace

WorldSpec parse_world(std::string_view toml_text) {
  const toml::table root = parse_toml(toml_text, "world");
  Section s(root, "");
  WorldSpec world;
  world.families.clear();
  world.contexts.clear();
  world.dim = static_cast<int>(s.integer("dim").value_or(2));
  world.coupling = s.number("coupling").value_or(100.0);
  const double sigma = s.number("sigma").value_or(0.5);
  world.filler_tokens = s.strings("filler_tokens").value_or(std::vector<std::string>{});

  const toml::node* families = s.node("families");
  if (!families || !families->is_array_of_tables()) {
    throw ConfigError("families", "expected an array of tables");
  }
  int i = 0;
  for (const auto& f : *families->as_array()) {
    Section fs(*f.as_table(), fmt::format("families[{}]", i++));
    AttributeFamily family;
    family.name = fs.string("name").value_or("");
    family.attributes = fs.strings("attributes").value_or(std::vector<std::string>{});
    if (family.name.empty()) throw ConfigError(fs.key_path("name"), "family needs a name");
    fs.finish();
    world.families.push_back(std::move(family));
  }

  const toml::node* contexts = s.node("contexts");
  if (!contexts || !contexts->is_array_of_tables()) {
    throw ConfigError("contexts", "expected an array of tables");
  }
  i = 0;
  for (const auto& c : *contexts->as_array()) {
    Section cs(*c.as_table(), fmt::format("contexts[{}]", i++));
    world.contexts.push_back(parse_context(cs, world, sigma));
  }
  s.finish();
  try {
    world.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("world", e.what());
  }
  return world;
}

WorldSpec load_world(const std::filesystem::path& path) {
  return parse_world(read_file(path, "world.file"));
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(key, message);
  };
  auto require_context = [&](const std::string& name, const char* key, bool attributes) {
    require(world.has_context(name), key, "unknown context '" + name + "'");
    if (attributes) {
      require(!world.context(name).is_object(), key, "context '" + name + "' has no attributes");
    }
  };
  auto require_unit = [&](const std::vector<double>& v, const char* key) {
    require(!v.empty(), key, "must not be empty");
    for (double x : v) require(x >= 0.0 && x <= 1.0, key, "values must lie in [0, 1]");
  };
  require(n >= 1, "experiment.n", "must be >= 1");
  require(workers >= 1, "experiment.workers", "must be >= 1");
  require(steps >= 1, "schedule.steps", "must be >= 1");
  require(cfg_scale >= 0.0, "experiment.cfg_scale", "must be >= 0");
  require(permutations >= 19, "experiment.permutations", "must be >= 19");
  for (const auto& t : prompt_extras) {
    require(std::find(world.filler_tokens.begin(), world.filler_tokens.end(), t) !=
                world.filler_tokens.end(),
            "experiment.prompt_extras", "unknown filler token '" + t + "'");
  }

  for (const auto& c : mode_test.contexts) require_context(c, "experiment.mode_test.contexts", true);
  require_unit(mode_test.t_star, "experiment.mode_test.t_star");

  require_context(sweep_cfg.context, "experiment.sweep_cfg.context", true);
  require(!sweep_cfg.grid.empty(), "experiment.sweep_cfg.grid", "must not be empty");
  for (double a : sweep_cfg.grid) require(a >= 0.0, "experiment.sweep_cfg.grid", "scales must be >= 0");

  require_context(sweep_cads.context, "experiment.sweep_cads.context", true);
  require(!sweep_cads.noise_scales.empty(), "experiment.sweep_cads.noise_scales", "must not be empty");
  for (double s : sweep_cads.noise_scales) {
    require(s >= 0.0, "experiment.sweep_cads.noise_scales", "must be >= 0");
  }
  require_unit(sweep_cads.tau1, "experiment.sweep_cads.tau1");
  for (double t1 : sweep_cads.tau1) {
    require(t1 < sweep_cads.tau2 && sweep_cads.tau2 <= 1.0, "experiment.sweep_cads.tau2",
            "must exceed every tau1 and be <= 1");
  }

  require_context(sweep_swap.context, "experiment.sweep_swap.context", true);
  require_unit(sweep_swap.grid, "experiment.sweep_swap.grid");
  if (!sweep_swap.attribute.empty()) {
    const auto& ctx = world.context(sweep_swap.context);
    bool found = false;
    for (int f : ctx.families) {
      const auto& attrs = world.families[f].attributes;
      found = found || std::find(attrs.begin(), attrs.end(), sweep_swap.attribute) != attrs.end();
    }
    require(found, "experiment.sweep_swap.attribute",
            "'" + sweep_swap.attribute + "' is not an attribute of " + sweep_swap.context);
  }

  for (const auto& c : debias.contexts) {
    require_context(c, "experiment.debias.contexts", true);
    require(world.context(c).families.size() == 1, "experiment.debias.contexts",
            "context '" + c + "' must have exactly one attribute family");
  }
  for (const auto& c : debias.multi_contexts) {
    require_context(c, "experiment.debias.multi_contexts", true);
  }
  for (const auto& c : debias.object_contexts) {
    require_context(c, "experiment.debias.object_contexts", false);
    require(world.context(c).is_object(), "experiment.debias.object_contexts",
            "context '" + c + "' is not an object context");
  }
  for (const auto& m : debias.methods) {
    require(m == "vanilla" || m == "weak" || m == "every_position" || m == "prompt_append",
            "experiment.debias.methods", "unknown method '" + m + "'");
  }
  require(debias.tau >= 0.0 && debias.tau <= 1.0, "experiment.debias.tau", "must lie in [0, 1]");
  for (const auto& c : compliance.contexts) {
    require_context(c, "experiment.compliance.contexts", true);
  }
  require(compliance.tau >= 0.0 && compliance.tau <= 1.0, "experiment.compliance.tau",
          "must lie in [0, 1]");
}

ExperimentConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir) {
  const toml::table root = parse_toml(toml_text, "config");
  Section s(root, "");
  ExperimentConfig cfg;

  if (auto w = s.table("world")) {
    if (auto file = w->string("file")) {
      std::filesystem::path p(*file);
      if (p.is_relative()) p = base_dir / p;
      try {
        cfg.world = load_world(p);
      } catch (const ConfigError& e) {
        throw ConfigError("world.file", e.what());
      }
    }
    apply_world_overrides(*w, cfg.world);
    w->finish();
  }
  if (auto c = s.table("codec")) {
    if (auto v = c->integer("length")) cfg.codec.length = static_cast<int>(*v);
    if (auto v = c->integer("dim")) cfg.codec.dim = static_cast<int>(*v);
    if (auto v = c->number("post_eos_weight")) cfg.codec.post_eos_weight = *v;
    if (auto v = c->number("summary_strength")) cfg.codec.summary_strength = *v;
    if (auto v = c->integer("seed")) cfg.codec.seed = static_cast<std::uint64_t>(*v);
    c->finish();
    if (cfg.codec.length < 2) throw ConfigError("codec.length", "must be >= 2");
    if (cfg.codec.dim < 1) throw ConfigError("codec.dim", "must be >= 1");
    if (!(cfg.codec.post_eos_weight > 0.0)) throw ConfigError("codec.post_eos_weight", "must be > 0");
  }
  if (auto sc = s.table("schedule")) {
    if (auto v = sc->integer("steps")) cfg.steps = static_cast<int>(*v);
    if (auto v = sc->string("mode")) {
      if (*v == "ancestral") {
        cfg.mode = SamplerMode::kAncestral;
      } else if (*v == "deterministic") {
        cfg.mode = SamplerMode::kDeterministic;
      } else {
        throw ConfigError("schedule.mode", "expected 'ancestral' or 'deterministic'");
      }
    }
    sc->finish();
    try {
      (void)Schedule::linear(cfg.steps);
    } catch (const InvalidArgument& e) {
      throw ConfigError("schedule.steps", e.what());
    }
  }
  if (auto e = s.table("experiment")) {
    if (auto v = e->integer("seed")) cfg.seed = static_cast<std::uint64_t>(*v);
    if (auto v = e->integer("n")) cfg.n = static_cast<int>(*v);
    if (auto v = e->integer("workers")) cfg.workers = static_cast<int>(*v);
    if (auto v = e->number("cfg_scale")) cfg.cfg_scale = *v;
    if (auto v = e->integer("permutations")) cfg.permutations = static_cast<int>(*v);
    if (auto v = e->strings("prompt_extras")) cfg.prompt_extras = *v;
    if (auto t = e->table("mode_test")) {
      if (auto v = t->strings("contexts")) cfg.mode_test.contexts = *v;
      if (auto v = t->numbers("t_star")) cfg.mode_test.t_star = *v;
      t->finish();
    }
    if (auto t = e->table("sweep_cfg")) {
      if (auto v = t->string("context")) cfg.sweep_cfg.context = *v;
      if (auto v = t->numbers("grid")) cfg.sweep_cfg.grid = *v;
      t->finish();
    }
    if (auto t = e->table("sweep_cads")) {
      if (auto v = t->string("context")) cfg.sweep_cads.context = *v;
      if (auto v = t->numbers("noise_scales")) cfg.sweep_cads.noise_scales = *v;
      if (auto v = t->numbers("tau1")) cfg.sweep_cads.tau1 = *v;
      if (auto v = t->number("tau2")) cfg.sweep_cads.tau2 = *v;
      t->finish();
    }
    if (auto t = e->table("sweep_swap")) {
      if (auto v = t->string("context")) cfg.sweep_swap.context = *v;
      if (auto v = t->string("attribute")) cfg.sweep_swap.attribute = *v;
      if (auto v = t->numbers("grid")) cfg.sweep_swap.grid = *v;
      t->finish();
    }
    if (auto t = e->table("debias")) {
      if (auto v = t->strings("contexts")) cfg.debias.contexts = *v;
      if (auto v = t->strings("multi_contexts")) cfg.debias.multi_contexts = *v;
      if (auto v = t->strings("object_contexts")) cfg.debias.object_contexts = *v;
      if (auto v = t->strings("methods")) cfg.debias.methods = *v;
      if (auto v = t->number("tau")) cfg.debias.tau = *v;
      t->finish();
    }
    if (auto t = e->table("compliance")) {
      if (auto v = t->strings("contexts")) cfg.compliance.contexts = *v;
      if (auto v = t->number("tau")) cfg.compliance.tau = *v;
      t->finish();
    }
    e->finish();
  }
  s.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path, "--config"), path.parent_path());
}

}  // namespace weakguide
