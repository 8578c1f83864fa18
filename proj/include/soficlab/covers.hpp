#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "soficlab/error.hpp"
#include "soficlab/setcover.hpp"
#include "soficlab/symbolic.hpp"

namespace soficlab {

/// A finite cover of X by unions of cylinders over a common window W.
///
/// Each element is stored as the sorted indices of the patterns of L(W) it
/// contains. Cylinders are clopen, so every cover here is also open; the
/// flag is kept so callers can record which family a cover came from.
class Cover {
 public:
  Cover(std::shared_ptr<const Language> lang, std::vector<std::vector<std::uint32_t>> elements, bool open = true)
      : lang_(std::move(lang)), elements_(std::move(elements)), open_(open) {
    std::vector<char> hit(lang_->size(), 0);
    for (auto& e : elements_) {
      if (e.empty()) throw argument_error("Cover: empty element");
      std::sort(e.begin(), e.end());
      e.erase(std::unique(e.begin(), e.end()), e.end());
      for (auto p : e) {
        if (p >= lang_->size()) throw argument_error("Cover: pattern index out of range");
        hit[p] = 1;
      }
    }
    for (std::size_t p = 0; p < hit.size(); ++p)
      if (!hit[p]) throw argument_error("Cover: elements do not cover pattern " + describe(p));
  }

  /// Each element is the union of the cylinders [q] for the listed patterns;
  /// pattern windows must lie inside `w`. Empty elements are rejected.
  static Cover from_cylinders(const SymbolicSystem& sys, const FiniteSubset& w,
                              const std::vector<std::vector<Pattern>>& elements, std::size_t budget = 5'000'000) {
    auto lang = std::make_shared<const Language>(soficlab::language(sys, w, budget));
    std::vector<std::vector<std::uint32_t>> out;
    for (const auto& cyls : elements) {
      for (const auto& q : cyls)
        if (!q.window.is_subset_of(w)) throw argument_error("Cover: cylinder window outside the cover window");
      std::vector<std::uint32_t> members;
      for (std::uint32_t p = 0; p < lang->size(); ++p) {
        const auto row = (*lang)[p];
        for (const auto& q : cyls) {
          bool match = true;
          for (std::size_t k = 0; k < q.window.size() && match; ++k) match = row[*w.index_of(q.window[k])] == q.symbols[k];
          if (match) {
            members.push_back(p);
            break;
          }
        }
      }
      out.push_back(std::move(members));
    }
    return Cover(lang, std::move(out));
  }

  /// {[a] : a ∈ A} at the identity, dropping symbols that never occur.
  static Cover origin_partition(const SymbolicSystem& sys) {
    const FiniteSubset w({sys.group().identity()});
    auto lang = std::make_shared<const Language>(soficlab::language(sys, w));
    std::vector<std::vector<std::uint32_t>> out;
    for (std::uint32_t p = 0; p < lang->size(); ++p) out.push_back({p});
    return Cover(lang, std::move(out));
  }

  /// {X}.
  static Cover trivial(const SymbolicSystem& sys) {
    auto lang = std::make_shared<const Language>(soficlab::language(sys, FiniteSubset()));
    return Cover(lang, {{0}});
  }

  const Language& language() const { return *lang_; }
  std::shared_ptr<const Language> language_ptr() const { return lang_; }
  const FiniteSubset& window() const { return lang_->window(); }
  std::size_t size() const { return elements_.size(); }
  const std::vector<std::vector<std::uint32_t>>& elements() const { return elements_; }
  const std::vector<std::uint32_t>& operator[](std::size_t i) const { return elements_[i]; }
  bool open() const { return open_; }

  bool is_partition() const {
    std::size_t total = 0;
    for (const auto& e : elements_) total += e.size();
    return total == lang_->size();
  }

  Bits bits(std::size_t i) const {
    Bits b(lang_->size());
    for (auto p : elements_[i]) b.set(p);
    return b;
  }

  /// For each pattern, the elements containing it.
  std::vector<std::vector<std::uint32_t>> memberships() const {
    std::vector<std::vector<std::uint32_t>> m(lang_->size());
    for (std::uint32_t i = 0; i < elements_.size(); ++i)
      for (auto p : elements_[i]) m[p].push_back(i);
    return m;
  }

  std::string describe(std::size_t p) const {
    std::string s;
    const auto row = (*lang_)[p];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) s += ' ';
      s += "x_" + std::to_string(k) + "=" + std::to_string(row[k]);
    }
    return s.empty() ? "(empty pattern)" : s;
  }

 private:
  std::shared_ptr<const Language> lang_;
  std::vector<std::vector<std::uint32_t>> elements_;
  bool open_;
};

/// ⋁_j g_j^-1 V_j over the window ⋃ W_j·g_j (optionally enlarged to
/// contain `target`). Empty intersections are dropped and identical
/// elements merged, keeping first-seen order.
inline Cover combine(const SymbolicSystem& sys, const std::vector<std::pair<const Cover*, GroupElement>>& factors,
                     const std::optional<FiniteSubset>& target = std::nullopt, std::size_t budget = 5'000'000) {
  const auto& spec = sys.group();
  std::vector<GroupElement> window_elems;
  if (target) window_elems = target->elements();
  FiniteSubset acc(window_elems);
  for (const auto& [cover, g] : factors) acc = set_union(acc, right_translate(spec, cover->window(), g));
  if (target && acc.size() != target->size()) throw argument_error("combine: target window does not contain the factor windows");
  auto lang = std::make_shared<const Language>(soficlab::language(sys, acc, budget));

  struct Factor {
    std::vector<std::size_t> positions;
    std::vector<std::vector<std::uint32_t>> member;
    const Language* lang;
  };
  std::vector<Factor> fs;
  for (const auto& [cover, g] : factors) {
    Factor f;
    for (const auto& h : cover->window()) f.positions.push_back(*acc.index_of(spec.multiply(h, g)));
    f.member = cover->memberships();
    f.lang = &cover->language();
    fs.push_back(std::move(f));
  }

  std::map<std::vector<std::uint32_t>, std::uint32_t> slot;
  std::vector<std::vector<std::uint32_t>> cells;
  std::vector<std::vector<std::uint32_t>> sig(fs.size());
  std::vector<Symbol> sub;
  std::size_t work = 0;
  for (std::uint32_t p = 0; p < lang->size(); ++p) {
    const auto row = (*lang)[p];
    for (std::size_t j = 0; j < fs.size(); ++j) {
      sub.resize(fs[j].positions.size());
      for (std::size_t k = 0; k < sub.size(); ++k) sub[k] = row[fs[j].positions[k]];
      auto idx = fs[j].lang->find(sub);
      if (!idx) throw argument_error("combine: restriction of an admissible pattern is not admissible");
      sig[j] = fs[j].member[*idx];
    }
    // Every tuple of elements (one per factor) containing this pattern.
    std::vector<std::uint32_t> key(fs.size());
    auto rec = [&](auto&& self, std::size_t j) -> void {
      if (j == fs.size()) {
        if (++work > budget) throw resource_error("combine: cover budget exceeded");
        auto [it, fresh] = slot.emplace(key, static_cast<std::uint32_t>(cells.size()));
        if (fresh) cells.emplace_back();
        cells[it->second].push_back(p);
        return;
      }
      for (auto e : sig[j]) {
        key[j] = e;
        self(self, j + 1);
      }
    };
    rec(rec, 0);
  }
  // Merge identical pattern sets.
  std::map<std::vector<std::uint32_t>, char> seen;
  std::vector<std::vector<std::uint32_t>> unique;
  for (auto& c : cells)
    if (seen.emplace(c, 1).second) unique.push_back(std::move(c));
  return Cover(lang, std::move(unique));
}

/// V1 ∨ V2.
inline Cover join(const SymbolicSystem& sys, const Cover& a, const Cover& b) {
  const auto e = sys.group().identity();
  return combine(sys, {{&a, e}, {&b, e}});
}

/// V_F = ⋁_{g∈F} g^-1 V.
inline Cover pullback_iterate(const SymbolicSystem& sys, const Cover& v, const FiniteSubset& f, std::size_t budget = 5'000'000) {
  if (f.empty()) throw argument_error("pullback_iterate: F is empty");
  std::vector<std::pair<const Cover*, GroupElement>> factors;
  for (const auto& g : f) factors.emplace_back(&v, g);
  return combine(sys, factors, std::nullopt, budget);
}

/// V re-expressed over a larger window.
inline Cover lift(const SymbolicSystem& sys, const Cover& v, const FiniteSubset& w) {
  return combine(sys, {{&v, sys.group().identity()}}, w);
}

/// a ⪰ b: every element of a lies inside some element of b.
inline bool refines(const SymbolicSystem& sys, const Cover& a, const Cover& b) {
  const auto w = set_union(a.window(), b.window());
  const Cover la = lift(sys, a, w), lb = lift(sys, b, w);
  std::vector<Bits> bb;
  for (std::size_t j = 0; j < lb.size(); ++j) bb.push_back(lb.bits(j));
  for (std::size_t i = 0; i < la.size(); ++i) {
    const Bits x = la.bits(i);
    if (std::none_of(bb.begin(), bb.end(), [&](const Bits& y) { return x.is_subset_of(y); })) return false;
  }
  return true;
}

/// N(V, K): the fewest elements of V covering the target patterns.
inline SetCoverResult min_subcover(const Cover& v, const std::vector<std::uint32_t>& target, std::uint64_t node_budget = 5'000'000) {
  const auto member = v.memberships();
  Bits t(v.language().size());
  for (auto p : target) {
    if (p >= member.size() || member[p].empty()) throw argument_error("min_subcover: pattern not covered: " + v.describe(p));
    t.set(p);
  }
  if (t.none()) return {};
  if (v.is_partition()) {
    std::vector<char> used(v.size(), 0);
    for (auto p : target) used[member[p][0]] = 1;
    SetCoverResult r;
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) r.witness.push_back(i);
    r.count = r.witness.size();
    return r;
  }
  std::vector<Bits> sets;
  for (std::size_t i = 0; i < v.size(); ++i) sets.push_back(v.bits(i));
  return exact_set_cover(sets, t, node_budget);
}

/// Target given as patterns on (a superset of) the cover window.
inline SetCoverResult min_subcover(const Cover& v, const std::vector<Pattern>& target, std::uint64_t node_budget = 5'000'000) {
  std::vector<std::uint32_t> idx;
  for (const auto& p : target) {
    auto i = v.language().find(p);
    if (!i) {
      std::string s;
      for (auto x : p.symbols) s += std::to_string(x);
      throw argument_error("min_subcover: pattern " + s + " is not in the cover's language");
    }
    idx.push_back(*i);
  }
  return min_subcover(v, idx, node_budget);
}

/// N(V, X).
inline SetCoverResult cover_number(const Cover& v, std::uint64_t node_budget = 5'000'000) {
  std::vector<std::uint32_t> all(v.language().size());
  for (std::uint32_t p = 0; p < all.size(); ++p) all[p] = p;
  return min_subcover(v, all, node_budget);
}

namespace detail {

inline std::vector<double> pattern_masses(const MeasureModel& mu, const Language& lang) {
  std::vector<double> m(lang.size());
  for (std::size_t p = 0; p < lang.size(); ++p) m[p] = cylinder_measure(mu, lang.pattern(p));
  return m;
}

inline double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

inline void require_supported(const std::vector<double>& masses) {
  double total = 0;
  for (double x : masses) total += x;
  if (std::abs(total - 1.0) > 1e-9) throw argument_error("measure puts mass outside X on this window");
}

}  // namespace detail

/// H_μ(α) = -Σ μ(A) log μ(A), in nats.
inline double shannon_entropy(const MeasureModel& mu, const Cover& alpha) {
  if (!alpha.is_partition()) throw argument_error("shannon_entropy: cover is not a partition");
  const auto masses = detail::pattern_masses(mu, alpha.language());
  detail::require_supported(masses);
  // Long double sums: windows can hold 10^5 atoms.
  long double h = 0;
  for (const auto& e : alpha.elements()) {
    long double m = 0;
    for (auto p : e) m += masses[p];
    if (m > 0) h -= m * std::log(m);
  }
  return static_cast<double>(h);
}

struct CoverEntropyResult {
  double value = 0;
  /// Element chosen for each pattern of the window language; the induced
  /// partition attains `value`.
  std::vector<std::uint32_t> assignment;
  bool exact = true;
};

/// H_μ(V) = min over partitions refining V, via assignments of patterns to
/// containing elements.
///
/// Patterns with the same set of containing elements are assigned together:
/// with the rest fixed, entropy is concave in how such a class is split, so
/// some minimiser never splits it. Branch and bound over classes in order of
/// first pattern; the bound puts all unassigned mass on the largest atom,
/// which majorises every completion. Ties keep the lexicographically first
/// assignment.
inline CoverEntropyResult cover_entropy(const MeasureModel& mu, const Cover& v, std::uint64_t node_budget = 2'000'000) {
  const auto masses = detail::pattern_masses(mu, v.language());
  detail::require_supported(masses);
  const auto member = v.memberships();
  if (v.is_partition()) {
    CoverEntropyResult r;
    r.value = shannon_entropy(mu, v);
    r.assignment.resize(member.size());
    for (std::size_t p = 0; p < member.size(); ++p) r.assignment[p] = member[p][0];
    return r;
  }
  std::map<std::vector<std::uint32_t>, std::size_t> class_of;
  std::vector<std::vector<std::uint32_t>> class_members, class_options;
  std::vector<double> class_mass;
  for (std::uint32_t p = 0; p < member.size(); ++p) {
    auto [it, fresh] = class_of.emplace(member[p], class_members.size());
    if (fresh) {
      class_members.emplace_back();
      class_options.push_back(member[p]);
      class_mass.push_back(0.0);
    }
    class_members[it->second].push_back(p);
    class_mass[it->second] += masses[p];
  }
  const std::size_t nc = class_members.size();
  std::vector<double> suffix(nc + 1, 0.0);
  for (std::size_t c = nc; c-- > 0;) suffix[c] = suffix[c + 1] + class_mass[c];

  auto entropy_of = [](const std::vector<double>& atoms) {
    double h = 0;
    for (double a : atoms) h -= detail::xlogx(a);
    return h;
  };

  // Greedy: each class to its heaviest element.
  std::vector<double> element_mass(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (auto p : v[i]) element_mass[i] += masses[p];
  std::vector<std::uint32_t> best_choice(nc);
  {
    std::vector<double> atoms(v.size(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
      std::uint32_t pick = class_options[c][0];
      for (auto e : class_options[c])
        if (element_mass[e] > element_mass[pick]) pick = e;
      best_choice[c] = pick;
      atoms[pick] += class_mass[c];
    }
  }
  auto value_of = [&](const std::vector<std::uint32_t>& choice) {
    std::vector<double> atoms(v.size(), 0.0);
    for (std::size_t c = 0; c < nc; ++c) atoms[choice[c]] += class_mass[c];
    return entropy_of(atoms);
  };
  double best = value_of(best_choice);
  const double greedy = best;

  std::vector<double> atoms(v.size(), 0.0);
  std::vector<std::uint32_t> choice(nc);
  std::uint64_t nodes = 0;
  bool exhausted = false;
  constexpr double tie = 1e-12;
  bool found_exact = false;
  auto rec = [&](auto&& self, std::size_t c) -> void {
    if (exhausted) return;
    if (++nodes > node_budget) {
      exhausted = true;
      return;
    }
    if (c == nc) {
      const double h = entropy_of(atoms);
      if (!found_exact || h < best - tie) {
        best = h;
        best_choice = choice;
        found_exact = true;
      }
      return;
    }
    // Lower bound: remaining mass piled on the largest atom.
    std::size_t top = 0;
    for (std::size_t i = 1; i < atoms.size(); ++i)
      if (atoms[i] > atoms[top]) top = i;
    atoms[top] += suffix[c];
    const double bound = entropy_of(atoms);
    atoms[top] -= suffix[c];
    if (found_exact ? bound >= best - tie : bound > best + tie) return;
    for (auto e : class_options[c]) {
      choice[c] = e;
      atoms[e] += class_mass[c];
      self(self, c + 1);
      atoms[e] -= class_mass[c];
      if (exhausted) return;
    }
  };
  rec(rec, 0);
  if (exhausted) throw resource_error("cover_entropy: assignment budget exceeded", false, greedy);

  CoverEntropyResult r;
  r.value = best;
  r.assignment.resize(member.size());
  for (std::size_t c = 0; c < nc; ++c)
    for (auto p : class_members[c]) r.assignment[p] = best_choice[c];
  return r;
}

struct PartialCoverResult {
  std::size_t count = 0;
  std::vector<std::size_t> witness;
  double mass = 0;
};

/// b_ν for an already-pulled-back cover: the fewest elements whose union has
/// ν-mass at least a (compared with 1e-12 slack).
inline PartialCoverResult partial_cover_count(const MeasureModel& nu, const Cover& v_f, double a, std::uint64_t node_budget = 5'000'000) {
  if (!(a > 0.0 && a < 1.0)) throw argument_error("partial_cover_count: a must lie in (0,1)");
  const auto masses = detail::pattern_masses(nu, v_f.language());
  constexpr double slack = 1e-12;
  std::vector<double> emass(v_f.size(), 0.0);
  for (std::size_t i = 0; i < v_f.size(); ++i)
    for (auto p : v_f[i]) emass[i] += masses[p];
  std::vector<std::size_t> order(v_f.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return emass[x] > emass[y]; });

  PartialCoverResult r;
  if (v_f.is_partition()) {
    for (std::size_t i : order) {
      r.witness.push_back(i);
      r.mass += emass[i];
      if (r.mass >= a - slack) break;
    }
    if (r.mass < a - slack) throw argument_error("partial_cover_count: total mass below a");
    r.count = r.witness.size();
    std::sort(r.witness.begin(), r.witness.end());
    return r;
  }

  std::vector<Bits> sets;
  for (std::size_t i = 0; i < v_f.size(); ++i) sets.push_back(v_f.bits(i));
  auto mass_of = [&](const Bits& b) {
    double m = 0;
    for (auto p = b.find_first(); p != Bits::npos; p = b.find_next(p)) m += masses[p];
    return m;
  };
  std::uint64_t nodes = 0;
  for (std::size_t k = 1; k <= v_f.size(); ++k) {
    std::vector<std::size_t> chosen;
    bool found = false;
    auto rec = [&](auto&& self, std::size_t start, const Bits& covered, double covered_mass) -> void {
      if (found) return;
      if (covered_mass >= a - slack) {
        found = true;
        r.witness = chosen;
        r.mass = covered_mass;
        return;
      }
      if (chosen.size() == k) return;
      if (++nodes > node_budget) throw resource_error("partial_cover_count: node budget exceeded");
      // Optimistic bound: the next best elements add their full mass.
      double optimistic = covered_mass;
      for (std::size_t j = start, used = chosen.size(); j < order.size() && used < k; ++j, ++used) optimistic += emass[order[j]];
      if (optimistic < a - slack) return;
      for (std::size_t j = start; j < order.size(); ++j) {
        const Bits next = covered | sets[order[j]];
        chosen.push_back(order[j]);
        self(self, j + 1, next, mass_of(next));
        chosen.pop_back();
        if (found) return;
      }
    };
    rec(rec, 0, Bits(v_f.language().size()), 0.0);
    if (found) {
      r.count = k;
      std::sort(r.witness.begin(), r.witness.end());
      return r;
    }
  }
  throw argument_error("partial_cover_count: total mass below a");
}

/// b_ν(F, a, V).
inline PartialCoverResult partial_cover_count(const SymbolicSystem& sys, const MeasureModel& nu, const FiniteSubset& f,
                                              double a, const Cover& v) {
  return partial_cover_count(nu, pullback_iterate(sys, v, f), a);
}

}  // namespace soficlab
