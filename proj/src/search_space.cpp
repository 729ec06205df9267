#include "stride/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "stride/rng.hpp"
#include <json.hpp>

namespace stride {

using nlohmann::json;

std::string to_string(const ParamValue& v) {
  std::ostringstream os;
  if (const auto* d = std::get_if<double>(&v)) {
    os << *d;
  } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
    os << *i;
  } else if (const auto* s = std::get_if<std::string>(&v)) {
    os << *s;
  } else {
    const auto& t = std::get<std::vector<std::int64_t>>(v);
    os << "(";
    for (std::size_t i = 0; i < t.size(); ++i) {
      os << (i ? "," : "") << t[i];
    }
    os << ")";
  }
  return os.str();
}

namespace {

void validate_spec(const ParameterSpec& p) {
  if (p.name.empty()) throw SpaceError("parameter with empty name");
  if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
    if (!(c->lo < c->hi))
      throw SpaceError("parameter '" + p.name + "': lo must be < hi");
    if (c->log_scale && !(c->lo > 0.0))
      throw SpaceError("parameter '" + p.name + "': log scale requires lo > 0");
  } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
    if (!(i->lo < i->hi))
      throw SpaceError("parameter '" + p.name + "': lo must be < hi");
  } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
    if (cat->values.empty())
      throw SpaceError("parameter '" + p.name + "': empty categorical domain");
    std::set<std::string> seen(cat->values.begin(), cat->values.end());
    if (seen.size() != cat->values.size())
      throw SpaceError("parameter '" + p.name + "': duplicate categorical value");
  } else {
    const auto& t = std::get<IntTupleParam>(p.kind);
    if (t.lo.empty() || t.lo.size() != t.hi.size())
      throw SpaceError("parameter '" + p.name + "': malformed tuple bounds");
    for (std::size_t k = 0; k < t.lo.size(); ++k) {
      if (t.lo[k] > t.hi[k])
        throw SpaceError("parameter '" + p.name + "': tuple element lo > hi");
    }
  }
}

}  // namespace

void SearchSpace::validate() const {
  if (classes.empty()) throw SpaceError("search space has no classes");
  if (params.empty()) throw SpaceError("search space has no parameters");
  std::set<std::string> class_names;
  for (const auto& c : classes) {
    if (c.name.empty()) throw SpaceError("class with empty name");
    if (!class_names.insert(c.name).second)
      throw SpaceError("duplicate class name '" + c.name + "'");
  }
  std::set<std::string> param_names;
  for (const auto& p : params) {
    validate_spec(p);
    if (!param_names.insert(p.name).second)
      throw SpaceError("duplicate parameter name '" + p.name + "'");
  }
  for (const auto& [cls, specs] : overrides) {
    if (!class_names.count(cls))
      throw SpaceError("override for unknown class '" + cls + "'");
    for (const auto& p : specs) {
      validate_spec(p);
      if (!param_names.count(p.name))
        throw SpaceError("override for unknown parameter '" + p.name + "'");
    }
  }
}

std::vector<ParameterSpec> SearchSpace::params_for(
    const std::string& class_name) const {
  if (!has_class(class_name))
    throw SpaceError("unknown class '" + class_name + "'");
  std::vector<ParameterSpec> out = params;
  auto it = overrides.find(class_name);
  if (it != overrides.end()) {
    for (const auto& o : it->second) {
      for (auto& p : out) {
        if (p.name == o.name) p = o;
      }
    }
  }
  return out;
}

const ParameterSpec& SearchSpace::param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw SpaceError("unknown parameter '" + name + "'");
}

bool SearchSpace::has_class(const std::string& name) const {
  return std::any_of(classes.begin(), classes.end(),
                     [&](const ArchitectureClass& c) { return c.name == name; });
}

Configuration sample_random(const SearchSpace& space, std::mt19937_64& rng) {
  Configuration cfg;
  for (const auto& p : space.params) {
    if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      double t = u(rng);
      double v = c->log_scale
                     ? std::exp(std::log(c->lo) + t * (std::log(c->hi) - std::log(c->lo)))
                     : c->lo + t * (c->hi - c->lo);
      cfg.assignments[p.name] = std::clamp(v, c->lo, c->hi);
    } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
      std::uniform_int_distribution<std::int64_t> u(i->lo, i->hi);
      cfg.assignments[p.name] = u(rng);
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      std::uniform_int_distribution<std::size_t> u(0, cat->values.size() - 1);
      cfg.assignments[p.name] = cat->values[u(rng)];
    } else {
      const auto& t = std::get<IntTupleParam>(p.kind);
      std::vector<std::int64_t> tup(t.length());
      for (std::size_t k = 0; k < t.length(); ++k) {
        std::uniform_int_distribution<std::int64_t> u(t.lo[k], t.hi[k]);
        tup[k] = u(rng);
      }
      cfg.assignments[p.name] = std::move(tup);
    }
  }
  return cfg;
}

Configuration sample_random(const SearchSpace& space, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return sample_random(space, rng);
}

std::vector<std::string> validate_config(const SearchSpace& space,
                                         const Configuration& config) {
  std::vector<std::string> violations;
  for (const auto& p : space.params) {
    auto it = config.assignments.find(p.name);
    if (it == config.assignments.end()) {
      violations.push_back("missing parameter '" + p.name + "'");
      continue;
    }
    const ParamValue& v = it->second;
    if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
      const auto* d = std::get_if<double>(&v);
      if (!d) {
        violations.push_back("parameter '" + p.name + "' must be a real number");
      } else if (!std::isfinite(*d) || *d < c->lo || *d > c->hi) {
        violations.push_back("parameter '" + p.name + "' = " + to_string(v) +
                             " outside [" + std::to_string(c->lo) + ", " +
                             std::to_string(c->hi) + "]");
      }
    } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
      const auto* n = std::get_if<std::int64_t>(&v);
      if (!n) {
        violations.push_back("parameter '" + p.name + "' must be an integer");
      } else if (*n < i->lo || *n > i->hi) {
        violations.push_back("parameter '" + p.name + "' = " + to_string(v) +
                             " outside [" + std::to_string(i->lo) + ", " +
                             std::to_string(i->hi) + "]");
      }
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      const auto* s = std::get_if<std::string>(&v);
      if (!s) {
        violations.push_back("parameter '" + p.name + "' must be categorical");
      } else if (std::find(cat->values.begin(), cat->values.end(), *s) ==
                 cat->values.end()) {
        violations.push_back("parameter '" + p.name + "' = '" + *s +
                             "' not in the categorical domain");
      }
    } else {
      const auto& t = std::get<IntTupleParam>(p.kind);
      const auto* tup = std::get_if<std::vector<std::int64_t>>(&v);
      if (!tup || tup->size() != t.length()) {
        violations.push_back("parameter '" + p.name + "' must be a tuple of " +
                             std::to_string(t.length()) + " integers");
      } else {
        for (std::size_t k = 0; k < t.length(); ++k) {
          if ((*tup)[k] < t.lo[k] || (*tup)[k] > t.hi[k]) {
            violations.push_back("parameter '" + p.name + "' element " +
                                 std::to_string(k) + " = " +
                                 std::to_string((*tup)[k]) + " outside [" +
                                 std::to_string(t.lo[k]) + ", " +
                                 std::to_string(t.hi[k]) + "]");
          }
        }
      }
    }
  }
  for (const auto& [name, value] : config.assignments) {
    (void)value;
    bool known = std::any_of(space.params.begin(), space.params.end(),
                             [&](const ParameterSpec& p) { return p.name == name; });
    if (!known) violations.push_back("unknown parameter '" + name + "'");
  }
  return violations;
}

namespace {

// One grid axis of the discretized product. A tuple parameter contributes
// one axis per element.
struct GridAxis {
  const ParameterSpec* spec;
  int tuple_index;  // -1 unless this axis is a tuple element
  std::vector<ParamValue> points;  // scalar points; tuple axes store int64
};

std::vector<std::int64_t> integer_grid(std::int64_t lo, std::int64_t hi, int bins) {
  std::vector<std::int64_t> pts;
  const std::int64_t span = hi - lo;
  const std::int64_t count = std::min<std::int64_t>(bins, span + 1);
  for (std::int64_t k = 0; k < count; ++k) {
    double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    std::int64_t v = lo + static_cast<std::int64_t>(std::llround(t * span));
    if (pts.empty() || pts.back() != v) pts.push_back(v);
  }
  return pts;
}

std::vector<GridAxis> build_axes(const SearchSpace& space,
                                 const DiscretizeOptions& opts) {
  std::vector<GridAxis> axes;
  for (const auto& p : space.params) {
    if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
      GridAxis ax{&p, -1, {}};
      for (int k = 0; k < opts.bins_per_continuous; ++k) {
        double t = static_cast<double>(k) / (opts.bins_per_continuous - 1);
        double v = c->log_scale
                       ? std::exp(std::log(c->lo) + t * (std::log(c->hi) - std::log(c->lo)))
                       : c->lo + t * (c->hi - c->lo);
        ax.points.emplace_back(std::clamp(v, c->lo, c->hi));
      }
      axes.push_back(std::move(ax));
    } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
      GridAxis ax{&p, -1, {}};
      for (std::int64_t v : integer_grid(i->lo, i->hi, opts.bins_per_continuous))
        ax.points.emplace_back(v);
      axes.push_back(std::move(ax));
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      GridAxis ax{&p, -1, {}};
      for (const auto& v : cat->values) ax.points.emplace_back(v);
      axes.push_back(std::move(ax));
    } else {
      const auto& t = std::get<IntTupleParam>(p.kind);
      for (std::size_t e = 0; e < t.length(); ++e) {
        GridAxis ax{&p, static_cast<int>(e), {}};
        for (std::int64_t v : integer_grid(t.lo[e], t.hi[e], opts.bins_per_continuous))
          ax.points.emplace_back(v);
        axes.push_back(std::move(ax));
      }
    }
  }
  return axes;
}

Configuration config_from_indices(const std::vector<GridAxis>& axes,
                                  const std::vector<std::uint32_t>& idx) {
  Configuration cfg;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const GridAxis& ax = axes[a];
    const ParamValue& pt = ax.points[idx[a]];
    if (ax.tuple_index < 0) {
      cfg.assignments[ax.spec->name] = pt;
    } else {
      auto& slot = cfg.assignments[ax.spec->name];
      if (!std::holds_alternative<std::vector<std::int64_t>>(slot)) {
        slot = std::vector<std::int64_t>(
            std::get<IntTupleParam>(ax.spec->kind).length());
      }
      std::get<std::vector<std::int64_t>>(slot)[ax.tuple_index] =
          std::get<std::int64_t>(pt);
    }
  }
  return cfg;
}

}  // namespace

ActionSet discretize(const SearchSpace& space, const DiscretizeOptions& opts,
                     std::uint64_t seed) {
  space.validate();
  if (opts.bins_per_continuous < 2) throw SpaceError("bins must be >= 2");
  if (opts.max_actions == 0) throw SpaceError("max_actions must be >= 1");
  auto axes = build_axes(space, opts);

  long double total = 1.0L;
  for (const auto& ax : axes) total *= static_cast<long double>(ax.points.size());

  auto rng = make_rng(subseed(seed, "discretize"));
  ActionSet out;
  const long double enumerable =
      std::max<long double>(4.0L * opts.max_actions, 4096.0L);
  if (total <= enumerable) {
    // Row-major enumeration, first axis slowest.
    const auto n = static_cast<std::uint64_t>(total);
    std::vector<std::uint64_t> order(n);
    for (std::uint64_t k = 0; k < n; ++k) order[k] = k;
    if (n > opts.max_actions) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(opts.max_actions);
    }
    for (std::uint64_t flat : order) {
      std::vector<std::uint32_t> idx(axes.size());
      std::uint64_t rem = flat;
      for (std::size_t a = axes.size(); a-- > 0;) {
        idx[a] = static_cast<std::uint32_t>(rem % axes[a].points.size());
        rem /= axes[a].points.size();
      }
      out.actions.push_back(config_from_indices(axes, idx));
    }
  } else {
    // Product too large to enumerate: rejection-sample distinct index tuples.
    std::set<std::vector<std::uint32_t>> seen;
    std::uint64_t attempts = 0;
    const std::uint64_t max_attempts = 200ULL * opts.max_actions + 1000;
    while (seen.size() < opts.max_actions && attempts++ < max_attempts) {
      std::vector<std::uint32_t> idx(axes.size());
      for (std::size_t a = 0; a < axes.size(); ++a) {
        std::uniform_int_distribution<std::uint32_t> u(
            0, static_cast<std::uint32_t>(axes[a].points.size() - 1));
        idx[a] = u(rng);
      }
      if (seen.insert(idx).second) out.actions.push_back(config_from_indices(axes, idx));
    }
    if (out.actions.size() < opts.max_actions)
      throw SpaceError("failed to draw enough distinct grid points");
  }
  return out;
}

std::size_t encode_dim(const SearchSpace& space) {
  std::size_t d = 0;
  for (const auto& p : space.params) {
    if (std::holds_alternative<ContinuousParam>(p.kind) ||
        std::holds_alternative<IntegerParam>(p.kind)) {
      d += 1;
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      d += cat->values.size();
    } else {
      d += std::get<IntTupleParam>(p.kind).length();
    }
  }
  return d;
}

std::vector<double> encode_unit_cube(const SearchSpace& space,
                                     const Configuration& config) {
  auto violations = validate_config(space, config);
  if (!violations.empty())
    throw SpaceError("cannot encode invalid configuration: " + violations.front());
  std::vector<double> x;
  x.reserve(encode_dim(space));
  for (const auto& p : space.params) {
    const ParamValue& v = config.assignments.at(p.name);
    if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
      double val = std::get<double>(v);
      double u = c->log_scale
                     ? (std::log(val) - std::log(c->lo)) / (std::log(c->hi) - std::log(c->lo))
                     : (val - c->lo) / (c->hi - c->lo);
      x.push_back(std::clamp(u, 0.0, 1.0));
    } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
      double u = static_cast<double>(std::get<std::int64_t>(v) - i->lo) /
                 static_cast<double>(i->hi - i->lo);
      x.push_back(std::clamp(u, 0.0, 1.0));
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      const auto& s = std::get<std::string>(v);
      for (const auto& candidate : cat->values)
        x.push_back(candidate == s ? 1.0 : 0.0);
    } else {
      const auto& t = std::get<IntTupleParam>(p.kind);
      const auto& tup = std::get<std::vector<std::int64_t>>(v);
      for (std::size_t k = 0; k < t.length(); ++k) {
        double u = t.hi[k] == t.lo[k]
                       ? 0.0
                       : static_cast<double>(tup[k] - t.lo[k]) /
                             static_cast<double>(t.hi[k] - t.lo[k]);
        x.push_back(std::clamp(u, 0.0, 1.0));
      }
    }
  }
  return x;
}

Configuration decode_unit_cube(const SearchSpace& space,
                               const std::vector<double>& x) {
  if (x.size() != encode_dim(space))
    throw SpaceError("encoded vector has wrong dimension");
  Configuration cfg;
  std::size_t pos = 0;
  for (const auto& p : space.params) {
    if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
      double u = std::clamp(x[pos++], 0.0, 1.0);
      double v = c->log_scale
                     ? std::exp(std::log(c->lo) + u * (std::log(c->hi) - std::log(c->lo)))
                     : c->lo + u * (c->hi - c->lo);
      cfg.assignments[p.name] = std::clamp(v, c->lo, c->hi);
    } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
      double u = std::clamp(x[pos++], 0.0, 1.0);
      auto v = i->lo + static_cast<std::int64_t>(
                           std::llround(u * static_cast<double>(i->hi - i->lo)));
      cfg.assignments[p.name] = std::clamp(v, i->lo, i->hi);
    } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < cat->values.size(); ++k) {
        if (x[pos + k] > x[pos + best]) best = k;
      }
      cfg.assignments[p.name] = cat->values[best];
      pos += cat->values.size();
    } else {
      const auto& t = std::get<IntTupleParam>(p.kind);
      std::vector<std::int64_t> tup(t.length());
      for (std::size_t k = 0; k < t.length(); ++k) {
        double u = std::clamp(x[pos++], 0.0, 1.0);
        auto v = t.lo[k] + static_cast<std::int64_t>(std::llround(
                               u * static_cast<double>(t.hi[k] - t.lo[k])));
        tup[k] = std::clamp(v, t.lo[k], t.hi[k]);
      }
      cfg.assignments[p.name] = std::move(tup);
    }
  }
  return cfg;
}

namespace {

ParameterSpec spec_from_json(const json& j) {
  ParameterSpec p;
  p.name = j.at("name").get<std::string>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "continuous") {
    ContinuousParam c;
    c.lo = j.at("lo").get<double>();
    c.hi = j.at("hi").get<double>();
    c.log_scale = j.value("log", false);
    p.kind = c;
  } else if (type == "integer") {
    IntegerParam i;
    i.lo = j.at("lo").get<std::int64_t>();
    i.hi = j.at("hi").get<std::int64_t>();
    p.kind = i;
  } else if (type == "categorical") {
    CategoricalParam c;
    c.values = j.at("values").get<std::vector<std::string>>();
    p.kind = c;
  } else if (type == "int_tuple") {
    IntTupleParam t;
    if (j.at("lo").is_array()) {
      t.lo = j.at("lo").get<std::vector<std::int64_t>>();
      t.hi = j.at("hi").get<std::vector<std::int64_t>>();
    } else {
      auto len = j.at("length").get<std::size_t>();
      t.lo.assign(len, j.at("lo").get<std::int64_t>());
      t.hi.assign(len, j.at("hi").get<std::int64_t>());
    }
    p.kind = t;
  } else {
    throw SpaceError("unknown parameter type '" + type + "'");
  }
  return p;
}

json spec_to_json(const ParameterSpec& p) {
  json j;
  j["name"] = p.name;
  if (const auto* c = std::get_if<ContinuousParam>(&p.kind)) {
    j["type"] = "continuous";
    j["lo"] = c->lo;
    j["hi"] = c->hi;
    if (c->log_scale) j["log"] = true;
  } else if (const auto* i = std::get_if<IntegerParam>(&p.kind)) {
    j["type"] = "integer";
    j["lo"] = i->lo;
    j["hi"] = i->hi;
  } else if (const auto* cat = std::get_if<CategoricalParam>(&p.kind)) {
    j["type"] = "categorical";
    j["values"] = cat->values;
  } else {
    const auto& t = std::get<IntTupleParam>(p.kind);
    j["type"] = "int_tuple";
    j["lo"] = t.lo;
    j["hi"] = t.hi;
  }
  return j;
}

}  // namespace

SearchSpace space_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SpaceError(std::string("space file is not valid JSON: ") + e.what());
  }
  SearchSpace space;
  for (const auto& name : j.at("classes")) {
    space.classes.push_back({name.get<std::string>()});
  }
  for (const auto& pj : j.at("parameters")) {
    space.params.push_back(spec_from_json(pj));
  }
  if (j.contains("overrides")) {
    for (const auto& [cls, specs] : j.at("overrides").items()) {
      std::vector<ParameterSpec> list;
      for (const auto& pj : specs) list.push_back(spec_from_json(pj));
      space.overrides[cls] = std::move(list);
    }
  }
  space.validate();
  return space;
}

SearchSpace space_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpaceError("cannot open space file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return space_from_json_text(buf.str());
}

std::string space_to_json_text(const SearchSpace& space) {
  json j;
  j["classes"] = json::array();
  for (const auto& c : space.classes) j["classes"].push_back(c.name);
  j["parameters"] = json::array();
  for (const auto& p : space.params) j["parameters"].push_back(spec_to_json(p));
  if (!space.overrides.empty()) {
    json o = json::object();
    for (const auto& [cls, specs] : space.overrides) {
      json list = json::array();
      for (const auto& p : specs) list.push_back(spec_to_json(p));
      o[cls] = std::move(list);
    }
    j["overrides"] = std::move(o);
  }
  return j.dump(2);
}

}  // namespace stride
