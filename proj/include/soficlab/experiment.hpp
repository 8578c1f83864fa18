#pragma once

// Declarative experiments: a JSON spec file names a system, measures, covers,
// test functions and one task with its parameters. run_experiment writes CSV
// and JSON artifacts whose headers echo the experiment file and its FNV-1a hash.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "soficlab/entropy.hpp"
#include "soficlab/tiling.hpp"

namespace soficlab {

inline constexpr const char* version = "1.0.0";

using json = nlohmann::json;

/// Schema violation: `field` is a dotted path such as `system.alphabet`.
class spec_error : public std::runtime_error {
 public:
  spec_error(std::string field, const std::string& what, int line = 0)
      : std::runtime_error(what), field_(std::move(field)), line_(line) {}
  const std::string& field() const { return field_; }
  int line() const { return line_; }
  void set_line(int l) { line_ = l; }

 private:
  std::string field_;
  int line_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"language", "defects",   "microstates", "entropy-sofic", "entropy-amenable",
                                              "compare",  "variational", "tile",      "pairs",         "partition-bound"};
  return names;
}

struct SigmaSpec {
  std::string model;  // cyclic | folner | random
  std::vector<int> sizes;
  std::uint64_t seed = 0;
};

struct ExperimentParams {
  std::optional<std::string> cover;
  std::vector<FiniteSubset> f_grid;
  std::vector<double> deltas;
  std::optional<SigmaSpec> sigma;
  std::vector<int> folner;
  std::optional<FiniteSubset> metric_window;
  std::vector<std::string> measures;
  std::string mode = "both";
  std::vector<FiniteSubset> windows;
  FiniteSubset elements;
  double slack = 0.05;
  std::vector<FiniteSubset> shapes;
  double eta = 0.1, tau = 0.0;
  bool exact = false;
  std::optional<double> goodness_eta;
  std::vector<std::pair<Pattern, Pattern>> pairs;
  double threshold = 0.01;
  std::vector<std::size_t> sizes;
  std::vector<double> p;
  double epsilon = 0.1;
};

struct Experiment {
  std::string text;
  json raw;
  std::string hash;
  std::string task;
  SymbolicSystem system;
  std::map<std::string, MeasureModel> measures;
  std::map<std::string, Cover> covers;
  std::vector<TestFunction> tests;
  ExperimentParams params;
  std::string stem = "experiment";
};

namespace detail {

inline int line_of_field(const std::string& text, const std::string& field) {
  std::string path = field;
  while (!path.empty()) {
    auto dot = path.find_last_of('.');
    std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    if (auto br = key.find('['); br != std::string::npos) key = key.substr(0, br);
    const auto at = text.find("\"" + key + "\"");
    if (!key.empty() && at != std::string::npos) return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
    if (dot == std::string::npos) break;
    path = path.substr(0, dot);
  }
  return 1;
}

inline const json& need(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw spec_error(path, path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw spec_error(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

inline const json* maybe(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline std::string join_path(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string index_path(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw spec_error(path, "expected a number");
  return j.get<double>();
}

inline int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw spec_error(path, "expected an integer");
  return j.get<int>();
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw spec_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], index_path(path, i)));
  return out;
}

inline std::vector<std::vector<double>> as_matrix(const json& j, const std::string& path) {
  if (!j.is_array()) throw spec_error(path, "expected an array of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_numbers(j[i], index_path(path, i)));
  return out;
}

/// Integer list, or {"from": a, "to": b} inclusive.
inline std::vector<int> as_int_range(const json& j, const std::string& path) {
  std::vector<int> out;
  if (j.is_object()) {
    const int a = as_int(need(j, "from", path), join_path(path, "from"));
    const int b = as_int(need(j, "to", path), join_path(path, "to"));
    if (b < a) throw spec_error(path, "empty range");
    for (int x = a; x <= b; ++x) out.push_back(x);
    return out;
  }
  if (!j.is_array()) throw spec_error(path, "expected an integer list or {from,to}");
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_int(j[i], index_path(path, i)));
  if (out.empty()) throw spec_error(path, "empty list");
  return out;
}

inline GroupSpec parse_group(const json& j, const std::string& path) {
  const auto& kind = need(j, "kind", path);
  if (!kind.is_string()) throw spec_error(join_path(path, "kind"), "expected a string");
  const auto k = kind.get<std::string>();
  try {
    if (k == "lattice") return GroupSpec::lattice(as_int(need(j, "rank", path), join_path(path, "rank")));
    if (k == "cyclic") return GroupSpec::cyclic(as_int(need(j, "order", path), join_path(path, "order")));
    if (k == "free") return GroupSpec::free_group(as_int(need(j, "rank", path), join_path(path, "rank")));
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
  throw spec_error(join_path(path, "kind"), "unknown group kind '" + k + "' (lattice, cyclic, free)");
}

inline GroupElement parse_element(const GroupSpec& g, const json& j, const std::string& path) {
  try {
    if (g.kind() == GroupKind::free_group) {
      if (!j.is_string()) throw spec_error(path, "free group elements are words such as \"aB\"");
      return g.parse_word(j.get<std::string>());
    }
    if (g.kind() == GroupKind::finite) return g.element(as_int(j, path));
    if (j.is_number_integer() && g.rank() == 1) return g.element(std::vector<int>{j.get<int>()});
    if (!j.is_array() || j.size() != static_cast<std::size_t>(g.rank()))
      throw spec_error(path, "expected " + std::to_string(g.rank()) + " integer coordinates");
    std::vector<int> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_int(j[i], index_path(path, i)));
    return g.element(v);
  } catch (const argument_error& e) {
    throw spec_error(path, std::string("undefined group element: ") + e.what());
  }
}

inline FiniteSubset parse_subset(const GroupSpec& g, const json& j, const std::string& path) {
  if (!j.is_array()) throw spec_error(path, "expected a list of group elements");
  std::vector<GroupElement> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(parse_element(g, j[i], index_path(path, i)));
  try {
    return FiniteSubset(std::move(v));
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
}

inline std::vector<Symbol> parse_word(const SymbolicSystem& sys, const json& j, const std::string& path) {
  const auto& names = sys.alphabet();
  auto lookup = [&](const std::string& s, const std::string& p) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it == names.end()) throw spec_error(p, "symbol '" + s + "' is not in system.alphabet");
    return static_cast<Symbol>(it - names.begin());
  };
  std::vector<Symbol> out;
  if (j.is_string()) {
    for (char c : j.get<std::string>()) out.push_back(lookup(std::string(1, c), path));
    return out;
  }
  if (!j.is_array()) throw spec_error(path, "expected a symbol string or list");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw spec_error(index_path(path, i), "expected a symbol name");
    out.push_back(lookup(j[i].get<std::string>(), index_path(path, i)));
  }
  return out;
}

inline Pattern parse_pattern(const SymbolicSystem& sys, const json& j, const std::string& path) {
  auto cells = parse_subset(sys.group(), need(j, "cells", path), join_path(path, "cells"));
  auto symbols = parse_word(sys, need(j, "symbols", path), join_path(path, "symbols"));
  if (symbols.size() != cells.size()) throw spec_error(join_path(path, "symbols"), "one symbol per cell expected");
  return Pattern(std::move(cells), std::move(symbols));
}

inline SymbolicSystem parse_system(const json& j, const std::string& path) {
  auto group = parse_group(need(j, "group", path), join_path(path, "group"));
  const auto& alpha = need(j, "alphabet", path);
  if (!alpha.is_array() || alpha.empty()) throw spec_error(join_path(path, "alphabet"), "expected a non-empty list of symbol names");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!alpha[i].is_string()) throw spec_error(index_path(join_path(path, "alphabet"), i), "expected a string");
    names.push_back(alpha[i].get<std::string>());
  }
  WeightScheme weights;
  if (auto* w = maybe(j, "weight_step")) weights.step = static_cast<unsigned>(as_int(*w, join_path(path, "weight_step")));
  try {
    SymbolicSystem bare(group, names, {}, weights);
    std::vector<Pattern> forbidden;
    if (auto* f = maybe(j, "forbidden")) {
      if (!f->is_array()) throw spec_error(join_path(path, "forbidden"), "expected a list of patterns");
      for (std::size_t i = 0; i < f->size(); ++i)
        forbidden.push_back(parse_pattern(bare, (*f)[i], index_path(join_path(path, "forbidden"), i)));
    }
    return SymbolicSystem(group, names, std::move(forbidden), weights);
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
}

inline MeasureModel parse_measure(const json& j, const std::string& path) {
  try {
    if (auto* b = maybe(j, "bernoulli")) return MeasureModel::bernoulli(as_numbers(*b, join_path(path, "bernoulli")));
    if (auto* m = maybe(j, "markov")) {
      const auto p = join_path(path, "markov");
      auto t = as_matrix(need(*m, "transition", p), join_path(p, "transition"));
      std::optional<std::vector<double>> init;
      if (auto* i = maybe(*m, "initial")) init = as_numbers(*i, join_path(p, "initial"));
      return MeasureModel::markov(std::move(t), std::move(init));
    }
    if (auto* a = maybe(j, "parry")) {
      std::vector<std::vector<int>> adj;
      for (const auto& row : as_matrix(*a, join_path(path, "parry"))) {
        adj.emplace_back();
        for (double x : row) adj.back().push_back(static_cast<int>(x));
      }
      return MeasureModel::parry(adj);
    }
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
  throw spec_error(path, "expected one of bernoulli, markov, parry");
}

inline TestFunction parse_test(const SymbolicSystem& sys, const json& j, const std::string& path) {
  const auto k = sys.alphabet_size();
  try {
    if (auto* c = maybe(j, "constant")) return TestFunction::constant(as_number(*c, join_path(path, "constant")), k);
    if (auto* i = maybe(j, "indicator")) return TestFunction::indicator(parse_pattern(sys, *i, join_path(path, "indicator")), k);
    if (auto* t = maybe(j, "table")) {
      const auto p = join_path(path, "table");
      return TestFunction::table(parse_subset(sys.group(), need(*t, "window", p), join_path(p, "window")), k,
                                 as_numbers(need(*t, "values", p), join_path(p, "values")));
    }
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
  throw spec_error(path, "expected one of constant, indicator, table");
}

inline Cover parse_cover(const SymbolicSystem& sys, const json& j, const std::string& path) {
  try {
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      if (s == "origin") return Cover::origin_partition(sys);
      if (s == "trivial") return Cover::trivial(sys);
      throw spec_error(path, "unknown cover '" + s + "' (origin, trivial, or {window, elements})");
    }
    const auto w = parse_subset(sys.group(), need(j, "window", path), join_path(path, "window"));
    const auto& els = need(j, "elements", path);
    const auto ep = join_path(path, "elements");
    if (!els.is_array()) throw spec_error(ep, "expected a list of elements");
    std::vector<std::vector<Pattern>> elements;
    for (std::size_t e = 0; e < els.size(); ++e) {
      const auto epi = index_path(ep, e);
      if (!els[e].is_array()) throw spec_error(epi, "expected a list of cylinders");
      elements.emplace_back();
      for (std::size_t c = 0; c < els[e].size(); ++c) {
        const auto& cyl = els[e][c];
        const auto cp = index_path(epi, c);
        if (cyl.is_object()) {
          elements.back().push_back(parse_pattern(sys, cyl, cp));
        } else {
          auto word = parse_word(sys, cyl, cp);
          if (word.size() != w.size()) throw spec_error(cp, "word length differs from the cover window");
          elements.back().push_back(Pattern(w, std::move(word)));
        }
      }
    }
    return Cover::from_cylinders(sys, w, elements);
  } catch (const argument_error& e) {
    throw spec_error(path, e.what());
  }
}

inline SigmaSpec parse_sigma(const GroupSpec& g, const json& j, const std::string& path) {
  SigmaSpec s;
  const auto& m = need(j, "model", path);
  if (!m.is_string()) throw spec_error(join_path(path, "model"), "expected a string");
  s.model = m.get<std::string>();
  if (s.model == "cyclic" || s.model == "folner") {
    if (!g.is_amenable()) throw spec_error(join_path(path, "model"), s.model + " maps need an amenable group; use random");
    s.sizes = as_int_range(need(j, "n", path), join_path(path, "n"));
  } else if (s.model == "random") {
    if (g.kind() != GroupKind::free_group) throw spec_error(join_path(path, "model"), "random maps need a free group");
    s.sizes = as_int_range(need(j, "d", path), join_path(path, "d"));
    if (auto* seed = maybe(j, "seed")) s.seed = static_cast<std::uint64_t>(as_int(*seed, join_path(path, "seed")));
  } else {
    throw spec_error(join_path(path, "model"), "unknown model '" + s.model + "' (cyclic, folner, random)");
  }
  for (int n : s.sizes)
    if (n < 1 || (s.model == "random" && n < 2)) throw spec_error(path, "sizes must be positive (d >= 2 for random)");
  return s;
}

inline std::vector<SoficMap> build_prefix(const GroupSpec& g, const SigmaSpec& s) {
  std::vector<SoficMap> out;
  for (int n : s.sizes) {
    if (s.model == "cyclic") out.push_back(cyclic_model(g, n));
    else if (s.model == "folner") out.push_back(from_folner(g, folner_set(g, n)));
    else out.push_back(random_free_model(g.rank(), static_cast<std::size_t>(n), s.seed));
  }
  return out;
}

inline void require_param(bool present, const std::string& field, const std::string& task) {
  if (!present) throw spec_error("params." + field, "task " + task + " needs params." + field);
}

inline ExperimentParams parse_params(const Experiment& ex, const json& j) {
  const auto& sys = ex.system;
  const auto& g = sys.group();
  const std::string& task = ex.task;
  ExperimentParams p;
  const std::string root = "params";
  if (auto* c = maybe(j, "cover")) {
    if (!c->is_string() || !ex.covers.count(c->get<std::string>()))
      throw spec_error("params.cover", "cover must name an entry of covers (or the built-ins origin, trivial)");
    p.cover = c->get<std::string>();
  }
  if (auto* f = maybe(j, "F")) {
    if (!f->is_array() || f->empty()) throw spec_error("params.F", "expected a non-empty list of element lists");
    for (std::size_t i = 0; i < f->size(); ++i) p.f_grid.push_back(parse_subset(g, (*f)[i], index_path("params.F", i)));
  }
  if (auto* d = maybe(j, "delta")) {
    p.deltas = as_numbers(*d, "params.delta");
    if (p.deltas.empty()) throw spec_error("params.delta", "empty delta grid");
    for (std::size_t i = 0; i < p.deltas.size(); ++i)
      if (!(p.deltas[i] > 0)) throw spec_error(index_path("params.delta", i), "delta must be > 0 (the tests are strict inequalities)");
  }
  if (auto* s = maybe(j, "sigma")) p.sigma = parse_sigma(g, *s, "params.sigma");
  if (auto* n = maybe(j, "n")) p.folner = as_int_range(*n, "params.n");
  for (int n : p.folner)
    if (n < 1) throw spec_error("params.n", "Følner indices start at 1");
  if (auto* m = maybe(j, "metric_window")) p.metric_window = parse_subset(g, *m, "params.metric_window");
  auto measure_name = [&](const json& x, const std::string& path) {
    if (!x.is_string() || !ex.measures.count(x.get<std::string>())) throw spec_error(path, "must name an entry of measures");
    return x.get<std::string>();
  };
  if (auto* m = maybe(j, "measure")) p.measures.push_back(measure_name(*m, "params.measure"));
  if (auto* m = maybe(j, "measures")) {
    if (!m->is_array()) throw spec_error("params.measures", "expected a list of measure names");
    for (std::size_t i = 0; i < m->size(); ++i) p.measures.push_back(measure_name((*m)[i], index_path("params.measures", i)));
  }
  if (auto* m = maybe(j, "mode")) {
    if (!m->is_string() || (*m != "inner" && *m != "outer" && *m != "both")) throw spec_error("params.mode", "mode is inner, outer or both");
    p.mode = m->get<std::string>();
  }
  if (auto* w = maybe(j, "windows")) {
    if (!w->is_array() || w->empty()) throw spec_error("params.windows", "expected a non-empty list of windows");
    for (std::size_t i = 0; i < w->size(); ++i) p.windows.push_back(parse_subset(g, (*w)[i], index_path("params.windows", i)));
  }
  if (auto* e = maybe(j, "elements")) p.elements = parse_subset(g, *e, "params.elements");
  if (auto* s = maybe(j, "slack")) p.slack = as_number(*s, "params.slack");
  if (auto* s = maybe(j, "shapes")) {
    if (!s->is_array() || s->empty()) throw spec_error("params.shapes", "expected a non-empty list of shapes");
    for (std::size_t i = 0; i < s->size(); ++i) p.shapes.push_back(parse_subset(g, (*s)[i], index_path("params.shapes", i)));
  }
  if (auto* x = maybe(j, "eta")) p.eta = as_number(*x, "params.eta");
  if (auto* x = maybe(j, "tau")) p.tau = as_number(*x, "params.tau");
  if (auto* x = maybe(j, "exact")) {
    if (!x->is_boolean()) throw spec_error("params.exact", "expected true or false");
    p.exact = x->get<bool>();
  }
  if (auto* x = maybe(j, "goodness_eta")) p.goodness_eta = as_number(*x, "params.goodness_eta");
  if (auto* x = maybe(j, "pairs")) {
    if (!x->is_array() || x->empty()) throw spec_error("params.pairs", "expected a non-empty list of [pattern, pattern]");
    for (std::size_t i = 0; i < x->size(); ++i) {
      const auto pp = index_path("params.pairs", i);
      if (!(*x)[i].is_array() || (*x)[i].size() != 2) throw spec_error(pp, "expected [pattern, pattern]");
      p.pairs.push_back({parse_pattern(sys, (*x)[i][0], index_path(pp, 0)), parse_pattern(sys, (*x)[i][1], index_path(pp, 1))});
    }
  }
  if (auto* x = maybe(j, "threshold")) p.threshold = as_number(*x, "params.threshold");
  if (auto* x = maybe(j, "size")) {
    for (int s : as_int_range(*x, "params.size")) {
      if (s < 1) throw spec_error("params.size", "sizes must be positive");
      p.sizes.push_back(static_cast<std::size_t>(s));
    }
  }
  if (auto* x = maybe(j, "p")) p.p = as_numbers(*x, "params.p");
  if (auto* x = maybe(j, "epsilon")) p.epsilon = as_number(*x, "params.epsilon");
  (void)root;

  const bool amen = g.is_amenable();
  if (task == "language") require_param(!p.windows.empty(), "windows", task);
  if (task == "defects") {
    require_param(p.sigma.has_value(), "sigma", task);
    require_param(p.elements.size() >= 2, "elements", task);
  }
  if (task == "microstates" || task == "entropy-sofic" || task == "variational") {
    require_param(p.cover.has_value(), "cover", task);
    require_param(!p.f_grid.empty(), "F", task);
    require_param(!p.deltas.empty(), "delta", task);
    require_param(p.sigma.has_value(), "sigma", task);
  }
  if (task == "variational") require_param(!p.measures.empty(), "measures", task);
  if (task == "entropy-sofic" && p.measures.size() > 1) throw spec_error("params.measures", "entropy-sofic takes one measure");
  if (task == "entropy-amenable" || task == "compare" || task == "pairs") {
    if (!amen) throw spec_error("system.group.kind", "task " + task + " needs an amenable group");
    require_param(!p.folner.empty(), "n", task);
  }
  if (task == "entropy-amenable") require_param(p.cover.has_value(), "cover", task);
  if (task == "compare") {
    require_param(p.cover.has_value(), "cover", task);
    require_param(p.f_grid.size() == 1, "F", task);
    require_param(!p.deltas.empty(), "delta", task);
    require_param(p.sigma.has_value(), "sigma", task);
    if (p.sigma->sizes.size() != p.folner.size()) throw spec_error("params.n", "compare pairs params.n with params.sigma stage by stage; lengths differ");
    if (p.measures.size() > 1) throw spec_error("params.measures", "compare takes one measure");
  }
  if (task == "tile") {
    require_param(p.sigma.has_value() && p.sigma->sizes.size() == 1, "sigma", task);
    require_param(!p.shapes.empty(), "shapes", task);
  }
  if (task == "pairs") require_param(!p.pairs.empty(), "pairs", task);
  if (task == "partition-bound") {
    require_param(!p.sizes.empty(), "size", task);
    require_param(!p.p.empty(), "p", task);
    require_param(maybe(j, "eta") != nullptr, "eta", task);
  }
  return p;
}

}  // namespace detail

/// Parse and validate a spec: schema and cross references only, no
/// computation beyond building small window languages for covers.
inline Experiment parse_experiment(const std::string& text) {
  json raw;
  try {
    raw = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t at = std::min<std::size_t>(e.byte, text.size());
    throw spec_error("", std::string("malformed JSON: ") + e.what(),
                     1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(at), '\n')));
  }
  try {
    if (!raw.is_object()) throw spec_error("", "an experiment file must be a JSON object");
    const auto& task = detail::need(raw, "task", "");
    if (!task.is_string() || std::find(task_names().begin(), task_names().end(), task.get<std::string>()) == task_names().end())
      throw spec_error("task", "unknown task; expected one of language, defects, microstates, entropy-sofic, entropy-amenable, compare, "
                               "variational, tile, pairs, partition-bound");
    Experiment ex{text, raw, "", task.get<std::string>(), detail::parse_system(detail::need(raw, "system", ""), "system"), {}, {}, {}, {}};
    if (auto* m = detail::maybe(raw, "measures")) {
      if (!m->is_object()) throw spec_error("measures", "expected an object of named measures");
      for (const auto& [name, def] : m->items()) ex.measures.emplace(name, detail::parse_measure(def, "measures." + name));
    }
    ex.covers.emplace("origin", Cover::origin_partition(ex.system));
    ex.covers.emplace("trivial", Cover::trivial(ex.system));
    if (auto* c = detail::maybe(raw, "covers")) {
      if (!c->is_object()) throw spec_error("covers", "expected an object of named covers");
      for (const auto& [name, def] : c->items()) ex.covers.insert_or_assign(name, detail::parse_cover(ex.system, def, "covers." + name));
    }
    if (auto* t = detail::maybe(raw, "tests")) {
      if (!t->is_array()) throw spec_error("tests", "expected a list of test functions");
      for (std::size_t i = 0; i < t->size(); ++i) ex.tests.push_back(detail::parse_test(ex.system, (*t)[i], detail::index_path("tests", i)));
    }
    static const json empty = json::object();
    const auto* params = detail::maybe(raw, "params");
    ex.params = detail::parse_params(ex, params ? *params : empty);
    const auto canon = raw.dump();
    std::ostringstream h;
    h << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canon);
    ex.hash = h.str();
    return ex;
  } catch (spec_error& e) {
    if (e.line() == 0) e.set_line(detail::line_of_field(text, e.field()));
    throw;
  }
}

inline Experiment load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw spec_error("", "cannot open spec file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  auto ex = parse_experiment(ss.str());
  ex.stem = path.stem().string();
  return ex;
}

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned workers = 1;
  std::optional<std::uint64_t> budget_nodes;
  /// Header timestamp; empty means now (UTC).
  std::string timestamp;
};

struct RunResult {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> failed_assertions;
  std::vector<std::string> warnings;
  /// Set when a budget ran out; names the task and stage.
  std::optional<std::string> budget_exhausted;
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt(double x) { return format_double(x); }
inline std::string fmt(const ExtendedReal& x) { return x.to_string(); }

inline std::string subset_text(const GroupSpec& g, const FiniteSubset& s) {
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? " " : "") + g.to_string(s[i]);
  return out + "}";
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

class Artifacts {
 public:
  Artifacts(const Experiment& ex, const RunOptions& opt, RunResult& result)
      : ex_(ex), opt_(opt), result_(result), stamp_(opt.timestamp.empty() ? utc_now() : opt.timestamp) {
    std::filesystem::create_directories(opt.out_dir);
  }

  std::string header() const {
    std::ostringstream h;
    h << "# soficlab " << version << "\n"
      << "# spec_hash fnv1a64:" << ex_.hash << "\n"
      << "# task " << ex_.task << "\n"
      << "# params " << ex_.raw.dump() << "\n"
      << "# timestamp " << stamp_ << "\n";
    return h.str();
  }

  void csv(const std::string& suffix, const std::vector<std::string>& columns, const std::vector<std::vector<std::string>>& rows) {
    const auto path = opt_.out_dir / (ex_.stem + "." + suffix + ".csv");
    std::ofstream out(path, std::ios::binary);
    out << header();
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
      out << "\n";
    }
    if (!out) throw std::runtime_error("cannot write " + path.string());
    result_.files.push_back(path);
  }

  void report(const std::string& suffix, json body) {
    const auto path = opt_.out_dir / (ex_.stem + "." + suffix + ".json");
    json doc;
    doc["provenance"] = {{"version", version}, {"spec_hash", "fnv1a64:" + ex_.hash}, {"task", ex_.task},
                         {"params", ex_.raw}, {"timestamp", stamp_}};
    doc["result"] = std::move(body);
    std::ofstream out(path, std::ios::binary);
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + path.string());
    result_.files.push_back(path);
  }

 private:
  const Experiment& ex_;
  const RunOptions& opt_;
  RunResult& result_;
  std::string stamp_;
};

inline json ext_json(const ExtendedReal& x) { return x.is_neg_inf() ? json("-inf") : json(x.value()); }
inline json num_json(double x) { return std::isinf(x) ? json(x > 0 ? "inf" : "-inf") : json(x); }

inline TraceOptions trace_options(const Experiment& ex, const RunOptions& opt) {
  TraceOptions t;
  t.metric_window = ex.params.metric_window;
  t.workers = opt.workers;
  if (opt.budget_nodes) t.microstates.node_budget = *opt.budget_nodes;
  return t;
}

inline void note_incomplete(RunResult& r, const std::string& task, const EntropyTrace& t, const GroupSpec& g, std::size_t f_id) {
  for (const auto& row : t.rows)
    if (!row.complete && !r.budget_exhausted)
      r.budget_exhausted = "task " + task + ", stage " + std::to_string(row.i) + " (d=" + std::to_string(row.d) + ", F_id=" +
                           std::to_string(f_id) + " " + subset_text(g, t.f) + ", delta=" + fmt(t.delta) + "): " + row.note;
}

inline void run_language(const Experiment& ex, Artifacts& out, RunResult&) {
  const auto& g = ex.system.group();
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < ex.params.windows.size(); ++i) {
    const auto lang = language(ex.system, ex.params.windows[i]);
    rows.push_back({std::to_string(i), subset_text(g, ex.params.windows[i]), std::to_string(lang.size())});
  }
  out.csv("language", {"window_id", "window", "size"}, rows);
}

inline void run_defects(const Experiment& ex, Artifacts& out, RunResult&) {
  const auto& g = ex.system.group();
  const auto prefix = build_prefix(g, *ex.params.sigma);
  const auto& el = ex.params.elements;
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    for (std::size_t a = 0; a < el.size(); ++a)
      for (std::size_t b = 0; b < el.size(); ++b) {
        if (a == b) continue;
        rows.push_back({std::to_string(i), std::to_string(prefix[i].d()), g.to_string(el[a]), g.to_string(el[b]),
                        fmt(mult_defect(prefix[i], el[a], el[b])), fmt(freeness_defect(prefix[i], el[a], el[b]))});
      }
  out.csv("defects", {"i", "d", "s", "t", "mult_defect", "freeness_defect"}, rows);
}

inline void run_microstates(const Experiment& ex, const RunOptions& opt, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  const auto& u = ex.covers.at(*p.cover);
  const auto prefix = build_prefix(g, *p.sigma);
  const auto m = p.metric_window ? *p.metric_window : (u.window().empty() ? FiniteSubset({g.identity()}) : u.window());
  std::vector<std::vector<std::string>> rows;
  for (std::size_t fi = 0; fi < p.f_grid.size(); ++fi)
    for (double delta : p.deltas)
      for (std::size_t i = 0; i < prefix.size(); ++i) {
        std::vector<std::string> row{std::to_string(prefix[i].d()), std::to_string(fi), fmt(delta)};
        std::string m_cols[2], n_cols[2];
        bool complete = true;
        for (int k = 0; k < 2; ++k) {
          const auto mode = k == 0 ? Certification::inner : Certification::outer;
          if (p.mode != "both" && p.mode != to_string(mode)) continue;
          MicrostateOptions mo;
          mo.mode = mode;
          mo.workers = opt.workers;
          if (opt.budget_nodes) mo.node_budget = *opt.budget_nodes;
          try {
            const auto c = count_microstate_cover(ex.system, p.f_grid[fi], delta, prefix[i], m, u, mo);
            m_cols[k] = std::to_string(c.microstates);
            n_cols[k] = std::to_string(c.cover_count);
            complete = complete && c.exact;
          } catch (const resource_error& e) {
            complete = false;
            if (!res.budget_exhausted)
              res.budget_exhausted = "task microstates, stage " + std::to_string(i) + " (d=" + std::to_string(prefix[i].d()) + ", F_id=" +
                                     std::to_string(fi) + ", delta=" + fmt(delta) + ", " + to_string(mode) + "): " + e.what();
          }
        }
        row.insert(row.end(), {m_cols[0], m_cols[1], n_cols[0], n_cols[1], complete ? "true" : "false"});
        rows.push_back(row);
      }
  out.csv("microstates", {"d", "F_id", "delta", "M_inner", "M_outer", "N_inner", "N_outer", "complete"}, rows);
}

inline void run_entropy_sofic(const Experiment& ex, const RunOptions& opt, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  const auto& u = ex.covers.at(*p.cover);
  const auto prefix = build_prefix(g, *p.sigma);
  const auto topts = trace_options(ex, opt);
  const std::string kind = p.measures.empty() ? "topological" : "measure:" + p.measures[0];
  std::vector<std::vector<std::string>> rows;
  json grid = json::array();
  ExtendedReal inf_outer, inf_inner;
  bool first = true;
  for (std::size_t fi = 0; fi < p.f_grid.size(); ++fi)
    for (double delta : p.deltas) {
      const auto t = p.measures.empty()
                         ? sofic_topological_trace(ex.system, u, p.f_grid[fi], delta, prefix, topts)
                         : sofic_measure_trace(ex.system, u, ex.measures.at(p.measures[0]), ex.tests, p.f_grid[fi], delta, prefix, topts);
      note_incomplete(res, ex.task, t, g, fi);
      for (const auto& r : t.rows) {
        rows.push_back({kind, std::to_string(r.i), std::to_string(r.d), std::to_string(fi), fmt(delta), std::to_string(r.count_inner),
                        std::to_string(r.count_outer), fmt(r.value_inner), fmt(r.value_outer)});
        if (r.complete && r.value_inner > r.value_outer)
          res.failed_assertions.push_back("inner value exceeds outer value at stage " + std::to_string(r.i));
        if (r.complete && !r.value_outer.is_neg_inf() && r.value_outer.value() > t.log_cover_number + 1e-12)
          res.failed_assertions.push_back("trace value exceeds log N(U,X) at stage " + std::to_string(r.i));
      }
      const auto& last = t.rows.back();
      grid.push_back({{"F_id", fi}, {"F", subset_text(g, p.f_grid[fi])}, {"delta", delta},
                      {"running_max_inner", ext_json(last.running_max_inner)}, {"running_max_outer", ext_json(last.running_max_outer)}});
      if (first || last.running_max_outer < inf_outer) inf_outer = last.running_max_outer;
      if (first || last.running_max_inner < inf_inner) inf_inner = last.running_max_inner;
      first = false;
    }
  out.csv("trace", {"kind", "i", "d", "F_id", "delta", "count_inner", "count_outer", "value_inner", "value_outer"}, rows);
  out.report("summary", {{"kind", kind}, {"grid", grid}, {"grid_infimum_inner", ext_json(inf_inner)}, {"grid_infimum_outer", ext_json(inf_outer)},
                         {"note", "running max over the computed prefix; infimum over the declared (F, delta) grid"}});
}

inline void run_entropy_amenable(const Experiment& ex, Artifacts& out, RunResult&) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  std::vector<FiniteSubset> folner;
  for (int n : p.folner) folner.push_back(folner_set(g, n));
  const auto& u = ex.covers.at(*p.cover);
  const bool meas = !p.measures.empty();
  const auto t = meas ? amenable_measure_trace(ex.system, u, ex.measures.at(p.measures[0]), folner)
                      : amenable_topological_trace(ex.system, u, folner);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    rows.push_back({meas ? "measure:" + p.measures[0] : "topological", std::to_string(p.folner[i]), std::to_string(r.size),
                    meas ? "" : r.count.str(), meas ? fmt(r.entropy) : "", fmt(r.value), r.increment ? fmt(*r.increment) : "",
                    fmt(r.invariance_defect)});
  }
  out.csv("amenable", {"kind", "n", "size", "count", "entropy", "value", "increment", "invariance_defect"}, rows);
}

inline void run_compare(const Experiment& ex, const RunOptions& opt, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  std::vector<FiniteSubset> folner;
  for (int n : p.folner) folner.push_back(folner_set(g, n));
  AgreementOptions ao;
  ao.slack = p.slack;
  ao.trace = trace_options(ex, opt);
  if (!p.measures.empty()) {
    ao.mu = ex.measures.at(p.measures[0]);
    ao.tests = ex.tests;
  }
  const auto prefix = build_prefix(g, *p.sigma);
  const auto r = check_amenable_agreement(ex.system, ex.covers.at(*p.cover), folner, prefix, p.f_grid[0], p.deltas, ao);
  std::vector<std::vector<std::string>> rows;
  json jrows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({std::to_string(row.stage), std::to_string(p.folner[row.stage]), std::to_string(row.n), std::to_string(row.d),
                    fmt(row.delta), fmt(row.amenable), fmt(row.sofic), fmt(row.gap), row.within ? "true" : "false"});
    jrows.push_back({{"stage", row.stage}, {"n", row.n}, {"d", row.d}, {"delta", row.delta}, {"amenable", ext_json(row.amenable)},
                     {"sofic", ext_json(row.sofic)}, {"gap", num_json(row.gap)}, {"within", row.within}});
    if (!row.within) res.failed_assertions.push_back("sofic value exceeds amenable value + slack at stage " + std::to_string(row.stage));
  }
  out.csv("compare", {"stage", "n", "folner_size", "d", "delta", "amenable", "sofic", "gap", "within"}, rows);
  out.report("compare", {{"slack", r.slack}, {"measure", r.measure}, {"holds", r.holds}, {"rows", jrows},
                         {"final_gap", r.rows.empty() ? json(nullptr) : num_json(r.rows.back().gap)}});
}

inline void run_variational(const Experiment& ex, const RunOptions& opt, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  std::vector<std::pair<FiniteSubset, double>> grid;
  for (const auto& f : p.f_grid)
    for (double d : p.deltas) grid.push_back({f, d});
  std::vector<MeasureModel> ms;
  for (const auto& name : p.measures) ms.push_back(ex.measures.at(name));
  const auto prefix = build_prefix(g, *p.sigma);
  const auto r = check_variational(ex.system, ex.covers.at(*p.cover), ms, ex.tests, grid, prefix, trace_options(ex, opt));
  std::vector<std::vector<std::string>> rows;
  json jrows = json::array();
  for (const auto& row : r.rows) {
    for (std::size_t m = 0; m < ms.size(); ++m)
      rows.push_back({std::to_string(row.grid), fmt(row.delta), std::to_string(row.stage), std::to_string(row.d), p.measures[m],
                      std::to_string(row.topo_outer), std::to_string(row.measure_outer[m]), fmt(row.topo_value_outer),
                      fmt(row.measure_value_outer[m]), fmt(row.gap), row.holds ? "true" : "false"});
    jrows.push_back({{"grid", row.grid}, {"delta", row.delta}, {"stage", row.stage}, {"d", row.d}, {"best_measure", p.measures[row.best]},
                     {"gap", num_json(row.gap)}, {"holds", row.holds}});
    if (!row.holds) res.failed_assertions.push_back("measure count exceeds topological count at grid " + std::to_string(row.grid) +
                                                    ", stage " + std::to_string(row.stage));
  }
  out.csv("variational", {"grid_id", "delta", "stage", "d", "measure", "topo_count", "measure_count", "topo_value", "measure_value", "gap", "holds"},
          rows);
  out.report("variational", {{"holds", r.holds}, {"rows", jrows}});
}

inline void run_tile(const Experiment& ex, const RunOptions& opt, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  const auto sigma = build_prefix(g, *p.sigma).front();
  TilingOptions to;
  to.goodness_eta = p.goodness_eta;
  to.workers = opt.workers;
  const auto v = leading_indices(sigma.d(), p.tau);
  const auto t = p.exact ? amenable_exact_tile(sigma, v, p.shapes, p.eta, p.tau, to) : sofic_quasi_tile(sigma, v, p.shapes, p.eta, p.tau, to);
  const auto again = verify_tiling(t, sigma, opt.workers);
  if (!(again == t.record)) res.failed_assertions.push_back("re-verification disagrees with the stored record");
  TilingRecord no_cover = t.record;
  no_cover.covers = true;
  if (!no_cover.holds(t.exact)) res.failed_assertions.push_back("tiling violates a disjointness or bijectivity condition");
  if (t.guarantee_missed)
    res.warnings.push_back("guarantee_missed: coverage " + fmt(t.record.coverage()) + " < 1 - tau - eta");

  json shapes = json::array(), centers = json::array();
  std::vector<std::vector<std::string>> rows;
  std::size_t cumulative = 0;
  std::vector<char> seen(sigma.d(), 0);
  for (std::size_t k = t.shapes.size(); k-- > 0;) {
    const auto img = detail::shape_images(sigma, t.shapes[k]);
    std::size_t added = 0;
    for (auto c : t.centers[k])
      for (auto q : detail::tile_points(img, c))
        if (!seen[q]) {
          seen[q] = 1;
          ++added;
        }
    cumulative += added;
    rows.push_back({std::to_string(k + 1), std::to_string(t.shapes[k].size()), std::to_string(t.centers[k].size()), std::to_string(added),
                    std::to_string(cumulative), fmt(static_cast<double>(cumulative) / static_cast<double>(sigma.d()))});
  }
  for (std::size_t k = 0; k < t.shapes.size(); ++k) {
    shapes.push_back(subset_text(g, t.shapes[k]));
    centers.push_back(t.centers_one_based(k));
  }
  const auto& rec = t.record;
  json witnesses = json::array();
  for (const auto& wk : rec.witnesses) {
    json a = json::array();
    for (const auto& b : wk) {
      std::vector<std::uint32_t> one(b);
      for (auto& x : one) ++x;
      a.push_back(one);
    }
    witnesses.push_back(a);
  }
  out.report("tiling", {{"d", sigma.d()},
                        {"exact", t.exact},
                        {"eta", t.eta},
                        {"tau", t.tau},
                        {"goodness_eta", t.goodness_eta},
                        {"goodness_policy", "is_good on E = F_l F_l at eta''"},
                        {"good_points", t.good_points},
                        {"shapes", shapes},
                        {"centers", centers},
                        {"guarantee_missed", t.guarantee_missed},
                        {"verification",
                         {{"centers_valid", rec.centers_valid},
                          {"disjoint", rec.disjoint},
                          {"covered", rec.covered},
                          {"coverage", rec.coverage()},
                          {"covers", rec.covers},
                          {"eta_disjoint", rec.eta_disjoint},
                          {"witnesses", witnesses},
                          {"bijective", rec.bijective},
                          {"product_bijective", rec.product_bijective},
                          {"reverified", again == rec}}}});
  out.csv("coverage", {"k", "shape_size", "centers", "new_points", "covered", "coverage"}, rows);
}

inline void run_pairs(const Experiment& ex, Artifacts& out, RunResult&) {
  const auto& p = ex.params;
  const auto& g = ex.system.group();
  std::vector<FiniteSubset> folner;
  for (int n : p.folner) folner.push_back(folner_set(g, n));
  const auto r = entropy_pair_scan(ex.system, p.pairs, p.threshold, folner);
  auto describe = [&](const Pattern& q) {
    std::string s = "[";
    for (std::size_t i = 0; i < q.symbols.size(); ++i) s += (i ? " " : "") + g.to_string(q.window[i]) + ":" + ex.system.alphabet()[q.symbols[i]];
    return s + "]";
  };
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < r.size(); ++i)
    rows.push_back({std::to_string(i), describe(r[i].first), describe(r[i].second), fmt(r[i].value), r[i].positive ? "true" : "false", r[i].label});
  out.csv("pairs", {"pair_id", "first", "second", "value", "positive", "label"}, rows);
}

inline void run_partition_bound(const Experiment& ex, Artifacts& out, RunResult& res) {
  const auto& p = ex.params;
  std::vector<std::vector<std::string>> rows;
  for (auto n : p.sizes) {
    const auto r = partition_count_bound(n, p.p, p.eta, p.epsilon);
    rows.push_back({std::to_string(n), fmt(p.eta), fmt(p.epsilon), r.count.str(), fmt(r.log_count), fmt(r.log_bound), r.holds ? "true" : "false"});
    if (!r.holds) res.failed_assertions.push_back("partition count exceeds the bound at size " + std::to_string(n));
  }
  out.csv("partition_bound", {"size", "eta", "epsilon", "count", "log_count", "log_bound", "holds"}, rows);
}

}  // namespace detail

inline RunResult run_experiment(const Experiment& ex, const RunOptions& opt = {}) {
  RunResult res;
  detail::Artifacts out(ex, opt, res);
  const auto& t = ex.task;
  try {
    if (t == "language") detail::run_language(ex, out, res);
    else if (t == "defects") detail::run_defects(ex, out, res);
    else if (t == "microstates") detail::run_microstates(ex, opt, out, res);
    else if (t == "entropy-sofic") detail::run_entropy_sofic(ex, opt, out, res);
    else if (t == "entropy-amenable") detail::run_entropy_amenable(ex, out, res);
    else if (t == "compare") detail::run_compare(ex, opt, out, res);
    else if (t == "variational") detail::run_variational(ex, opt, out, res);
    else if (t == "tile") detail::run_tile(ex, opt, out, res);
    else if (t == "pairs") detail::run_pairs(ex, out, res);
    else detail::run_partition_bound(ex, out, res);
  } catch (const resource_error& e) {
    if (!res.budget_exhausted) res.budget_exhausted = "task " + t + ": " + e.what();
  }
  return res;
}

}  // namespace soficlab
