#pragma once

// Closed-schema JSON configuration: every key is declared, defaults are
// materialised into the resolved document, and all violations are collected
// with their dotted path.

#include "svi/report.hpp"

#include <map>
#include <optional>

namespace svi::config {

enum class Type { number, integer, boolean, string, number_array, number_matrix, string_array, object };

struct Field {
  std::string name;
  Type type = Type::number;
  Json fallback;  // null: required (or no default for optional objects)
  std::optional<double> min, max;
  bool min_exclusive = false;
  std::vector<std::string> choices;
  std::vector<Field> children;  // object members shared by every variant
  std::string discriminator;    // object key selecting a variant
  std::map<std::string, std::vector<Field>> variants;
  bool required = false;

  Field& at_least(double v) { min = v; min_exclusive = false; return *this; }
  Field& above(double v) { min = v; min_exclusive = true; return *this; }
  Field& at_most(double v) { max = v; return *this; }
};

inline Field make(std::string name, Type type, Json fallback) {
  Field f;
  f.name = std::move(name);
  f.type = type;
  f.fallback = std::move(fallback);
  return f;
}

inline Field num(std::string name, double def) { return make(std::move(name), Type::number, def); }
inline Field integer(std::string name, long long def) { return make(std::move(name), Type::integer, def); }
inline Field boolean(std::string name, bool def) { return make(std::move(name), Type::boolean, def); }
inline Field str(std::string name, std::string def, std::vector<std::string> choices = {}) {
  Field f = make(std::move(name), Type::string, std::move(def));
  f.choices = std::move(choices);
  return f;
}
inline Field array(std::string name, std::vector<double> def) { return make(std::move(name), Type::number_array, def); }
inline Field matrix(std::string name) { return make(std::move(name), Type::number_matrix, Json::array()); }
inline Field strings(std::string name, std::vector<std::string> def, std::vector<std::string> choices = {}) {
  Field f = make(std::move(name), Type::string_array, std::move(def));
  f.choices = std::move(choices);
  return f;
}
inline Field object(std::string name, std::vector<Field> children) {
  Field f = make(std::move(name), Type::object, Json::object());
  f.children = std::move(children);
  return f;
}
inline Field tagged(std::string name, std::string tag, std::string def_tag,
                    std::map<std::string, std::vector<Field>> variants) {
  Field f = make(std::move(name), Type::object, Json::object());
  std::vector<std::string> tags;
  for (const auto& [k, _] : variants) tags.push_back(k);
  f.children.push_back(str(tag, std::move(def_tag), tags));
  f.discriminator = std::move(tag);
  f.variants = std::move(variants);
  return f;
}

struct ConfigError {
  std::string path;
  std::string message;
};

inline std::string describe(const std::vector<ConfigError>& errors) {
  std::string out;
  for (const auto& e : errors) out += e.path + ": " + e.message + "\n";
  return out;
}

/// Edit distance for did-you-mean hints.
inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::vector<std::string> suggestions(const std::string& key, const std::vector<std::string>& known) {
  std::vector<std::pair<std::size_t, std::string>> scored;
  for (const auto& k : known) {
    const std::size_t d = levenshtein(key, k);
    if (d <= std::max<std::size_t>(2, key.size() / 3)) scored.emplace_back(d, k);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> out;
  for (const auto& [_, k] : scored) out.push_back(k);
  return out;
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string type_name(Type t) {
  switch (t) {
    case Type::number: return "number";
    case Type::integer: return "integer";
    case Type::boolean: return "boolean";
    case Type::string: return "string";
    case Type::number_array: return "array of numbers";
    case Type::number_matrix: return "array of number arrays";
    case Type::string_array: return "array of strings";
    case Type::object: return "object";
  }
  return "?";
}

inline bool type_ok(const Json& v, Type t) {
  switch (t) {
    case Type::number: return v.is_number();
    case Type::integer: return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    case Type::boolean: return v.is_boolean();
    case Type::string: return v.is_string();
    case Type::number_array:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); });
    case Type::number_matrix:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& r) {
               return r.is_array() && std::all_of(r.begin(), r.end(), [](const Json& x) { return x.is_number(); });
             });
    case Type::string_array:
      return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_string(); });
    case Type::object: return v.is_object();
  }
  return false;
}

inline void check_bounds(const Field& f, double v, const std::string& path, std::vector<ConfigError>& errs) {
  const std::string leaf = f.name;
  if (f.min) {
    const bool bad = f.min_exclusive ? !(v > *f.min) : !(v >= *f.min);
    if (bad)
      errs.push_back({path, "value " + format_double(v) + " violates bound " + leaf + (f.min_exclusive ? " > " : " >= ") +
                                format_double(*f.min)});
  }
  if (f.max && !(v <= *f.max))
    errs.push_back({path, "value " + format_double(v) + " violates bound " + leaf + " <= " + format_double(*f.max)});
}

inline Json resolve_object(const std::vector<Field>& fields, const Json* given, const std::string& path,
                           std::vector<ConfigError>& errs, const Field* owner);

inline Json resolve_field(const Field& f, const Json* given, const std::string& path, std::vector<ConfigError>& errs) {
  if (f.type == Type::object) return resolve_object(f.children, given, path, errs, &f);
  if (!given) {
    if (f.required || f.fallback.is_null()) errs.push_back({path, "missing required " + type_name(f.type)});
    return f.fallback;
  }
  if (!type_ok(*given, f.type)) {
    errs.push_back({path, "expected " + type_name(f.type) + ", got " + std::string(given->type_name())});
    return f.fallback;
  }
  Json v = *given;
  if (f.type == Type::integer && v.is_number_float()) v = static_cast<long long>(v.get<double>());
  if (f.type == Type::number || f.type == Type::integer) check_bounds(f, v.get<double>(), path, errs);
  if (f.type == Type::number_array)
    for (std::size_t i = 0; i < v.size(); ++i)
      check_bounds(f, v[i].get<double>(), path + "[" + std::to_string(i) + "]", errs);
  if (!f.choices.empty()) {
    auto check_choice = [&](const std::string& s, const std::string& p) {
      if (std::find(f.choices.begin(), f.choices.end(), s) == f.choices.end()) {
        std::string msg = "unknown value '" + s + "'; expected one of";
        for (const auto& c : f.choices) msg += " " + c;
        const auto hints = suggestions(s, f.choices);
        if (!hints.empty()) msg += " (did you mean '" + hints.front() + "'?)";
        errs.push_back({p, msg});
      }
    };
    if (f.type == Type::string) check_choice(v.get<std::string>(), path);
    else
      for (std::size_t i = 0; i < v.size(); ++i) check_choice(v[i].get<std::string>(), path + "[" + std::to_string(i) + "]");
  }
  return v;
}

inline Json resolve_object(const std::vector<Field>& fields, const Json* given, const std::string& path,
                           std::vector<ConfigError>& errs, const Field* owner) {
  if (given && !given->is_object()) {
    errs.push_back({path, std::string("expected object, got ") + given->type_name()});
    given = nullptr;
  }
  std::vector<Field> all = fields;
  if (owner && !owner->discriminator.empty()) {
    // Pick the variant first so its keys join the closed key set.
    std::string tag = owner->children.front().fallback.get<std::string>();
    if (given && given->contains(owner->discriminator) && (*given)[owner->discriminator].is_string())
      tag = (*given)[owner->discriminator].get<std::string>();
    const auto it = owner->variants.find(tag);
    if (it != owner->variants.end()) all.insert(all.end(), it->second.begin(), it->second.end());
  }
  Json out = Json::object();
  std::vector<std::string> known;
  for (const auto& f : all) known.push_back(f.name);
  if (given) {
    for (const auto& [key, _] : given->items()) {
      if (std::find(known.begin(), known.end(), key) != known.end()) continue;
      std::string msg = "unknown key";
      const auto hints = suggestions(key, known);
      if (!hints.empty()) {
        msg += "; did you mean";
        for (std::size_t i = 0; i < hints.size(); ++i) msg += (i ? ", '" : " '") + hints[i] + "'";
        msg += "?";
      }
      errs.push_back({join_path(path, key), msg});
    }
  }
  for (const auto& f : all) {
    const Json* sub = given && given->contains(f.name) ? &(*given)[f.name] : nullptr;
    out[f.name] = resolve_field(f, sub, join_path(path, f.name), errs);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Schema

inline std::vector<std::string> commands() {
  return {"simulate", "converge-dt", "converge-yosida", "picard", "averaging-sweep", "spde", "particles", "proptest"};
}

inline Field set_schema() {
  auto radius = num("radius", 1.0);
  radius.above(0.0);
  auto gap = num("min_gap", 0.0);
  gap.at_least(0.0);
  return tagged("set", "shape", "halfline",
                {{"halfline", {array("lower", {0.0})}},
                 {"box", {array("lower", {-1.0}), array("upper", {1.0})}},
                 {"ball", {array("center", {0.0}), radius}},
                 {"ordered_cone", {gap}}});
}

inline Field potential_schema() {
  auto lambda = num("lambda", 1.0);
  lambda.above(0.0);
  auto strength = num("strength", 1.0);
  strength.above(0.0);
  auto exponent = num("exponent", 1.0);
  exponent.above(0.0);
  auto weights = array("weights", {1.0});
  weights.above(0.0);
  return tagged("potential", "kind", "zero",
                {{"zero", {}},
                 {"quadratic", {weights}},
                 {"indicator", {set_schema()}},
                 {"coulomb_log", {lambda}},
                 {"pairwise", {str("pair", "log", {"log", "inverse_power"}), strength, exponent}}});
}

inline Field schema() {
  auto dimension = integer("dimension", 1);
  dimension.at_least(1);
  auto history = num("history", 0.0);
  history.at_least(0.0);
  auto intensity = num("intensity", 1.0);
  intensity.above(0.0);
  auto width = num("distributed_width", 0.0);
  width.at_least(0.0);
  auto q = array("q", {1.0});
  q.at_least(0.0);
  auto stddev = array("stddev", {1.0});
  stddev.above(0.0);
  auto delay_value = num("value", 0.0);
  delay_value.at_least(0.0);
  auto iota = num("iota", 1.0);
  iota.at_least(0.0).at_most(1.0);

  Field problem = object(
      "problem",
      {dimension, array("x0", {0.0}), history, potential_schema(),
       tagged("operator", "kind", "zero", {{"zero", {}}, {"diagonal", {array("values", {0.0})}}, {"matrix", {matrix("rows")}}}),
       object("drift", {array("offset", {0.0}), array("current", {0.0}), array("delayed", {0.0}), num("sup_gain", 0.0),
                        num("distributed_gain", 0.0), width}),
       object("diffusion", {num("additive", 0.0), num("linear", 0.0), q}),
       object("jumps", {boolean("enabled", false), intensity,
                        tagged("marks", "kind", "uniform",
                               {{"uniform", {array("lower", {-1.0}), array("upper", {1.0})}},
                                {"gaussian", {array("mean", {0.0}), stddev}},
                                {"atoms", {matrix("points"), array("weights", {})}}}),
                        num("scale", 1.0), num("linear", 0.0)}),
       tagged("delay", "kind", "constant",
              {{"constant", {delay_value}},
               {"proportional", {iota}},
               {"full_path", {}},
               {"table", {array("times", {0.0}), array("values", {0.0})}}})});

  auto T = num("T", 1.0);
  T.above(0.0);
  auto dt = num("dt", 1e-3);
  dt.above(0.0);
  auto eps = num("epsilon", 0.01);
  eps.above(0.0);
  auto dt_grid = array("dt_grid", {0.04, 0.02, 0.01, 0.005});
  dt_grid.above(0.0);
  auto eps_grid = array("eps_grid", {1e-1, 1e-2, 1e-3, 1e-4});
  eps_grid.above(0.0);
  auto ref = num("reference_dt", 1e-4);
  ref.above(0.0);
  auto tol = num("tol", 1e-10);
  tol.above(0.0);
  auto iters = integer("max_iter", 30);
  iters.at_least(1);
  Field numerics = object("numerics", {T, dt, str("scheme", "prox", {"prox", "yosida"}), eps, dt_grid, eps_grid, ref,
                                       tol, iters, num("slope_min", 0.3), num("slope_max", 0.7)});

  auto paths = integer("paths", 1);
  paths.at_least(1);
  auto seed = integer("seed", 0);
  seed.at_least(0);
  auto workers = integer("workers", 1);
  workers.at_least(0);
  Field mc = object("mc", {paths, seed, workers});

  auto cadence = integer("snapshot_cadence", 100);
  cadence.at_least(1);
  auto points = integer("snapshot_points", 64);
  points.at_least(1);
  Field output = object("output", {str("dir", "out"), strings("formats", {"csv", "json"}, {"csv", "json"}), cadence,
                                   points, boolean("record_runtime", false)});

  auto avg_grid = array("eps_grid", {0.5, 0.1, 0.02, 0.004});
  avg_grid.above(0.0).at_most(1.0);
  auto avg_delay = num("delay", 0.1);
  avg_delay.at_least(0.0);
  Field avg = object("averaging", {str("family", "sinusoid", {"sinusoid", "deterministic"}), boolean("jumps", false),
                                   num("x0", 1.0), boolean("reflect", true), avg_delay, avg_grid});

  auto modes = integer("modes", 4);
  modes.at_least(1);
  auto m0 = num("m0", 1.0);
  m0.above(0.0);
  auto burn = num("burn_in", 1.0);
  burn.at_least(0.0);
  auto mode_index = integer("index", 1);
  mode_index.at_least(1);
  Field spde = object("spde", {modes, m0, array("reaction", {0.0}), array("q", {1.0}), potential_schema(),
                               object("initial", {str("kind", "mode", {"mode", "constant", "zero"}), mode_index,
                                                  num("amplitude", 1.0)}),
                               burn});

  auto count = integer("count", 5);
  count.at_least(2);
  auto plambda = num("lambda", 0.5);
  plambda.above(0.0);
  auto sigma = num("sigma", 1.0);
  sigma.at_least(0.0);
  auto spacing = num("spacing", 1.0);
  spacing.above(0.0);
  Field particles = object("particles", {count, plambda, sigma, spacing});

  auto samples = integer("samples", 10000);
  samples.at_least(1);
  auto ptol = num("tolerance", 1e-8);
  ptol.above(0.0);
  Field prop = object("proptest", {samples, ptol});

  Field command = str("command", "", commands());
  command.fallback = nullptr;
  command.required = true;
  return object("", {command, problem, numerics, mc, output, avg, spde, particles, prop});
}

struct Parsed {
  Json resolved;
  std::vector<ConfigError> errors;
  bool ok() const { return errors.empty(); }
};

/// Validates a parsed document against the schema and fills in every default.
inline Parsed resolve(const Json& doc) {
  Parsed p;
  const Field root = schema();
  p.resolved = detail::resolve_object(root.children, &doc, "", p.errors, nullptr);
  return p;
}

inline Parsed parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    return Parsed{Json::object(), {{"<document>", std::string("parse error: ") + e.what()}}};
  }
  if (!doc.is_object()) return Parsed{Json::object(), {{"<document>", "top level must be an object"}}};
  return resolve(doc);
}

}  // namespace svi::config
