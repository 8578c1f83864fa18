#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/group.hpp"
#include "soficlab/parallel.hpp"
#include "soficlab/sofic.hpp"

namespace soficlab {

/// ceil((1-ε)n), with ε read as its exact decimal.
inline std::size_t core_size(std::size_t n, double eps) {
  const rational need = (1 - exact_decimal(eps)) * rational(n);
  big_int q = boost::multiprecision::numerator(need) / boost::multiprecision::denominator(need);
  if (rational(q) < need) ++q;
  return q.convert_to<std::size_t>();
}

struct EpsilonDisjointResult {
  bool holds = false;
  /// B_i ⊆ A_i, pairwise disjoint, |B_i| >= ceil((1-ε)|A_i|). Empty when false.
  std::vector<std::vector<std::uint32_t>> witnesses;
  /// True when the greedy pass failed and max-flow decided.
  bool used_flow = false;
};

namespace detail {

// Dinic on a unit-ish bipartite network.
class FlowNetwork {
 public:
  explicit FlowNetwork(std::size_t n) : adj_(n), level_(n), it_(n) {}

  std::size_t add_edge(std::size_t u, std::size_t v, std::int64_t cap) {
    adj_[u].push_back(edges_.size());
    edges_.push_back({v, cap});
    adj_[v].push_back(edges_.size());
    edges_.push_back({u, 0});
    return edges_.size() - 2;
  }

  std::int64_t flow_on(std::size_t e) const { return edges_[e ^ 1].cap; }

  std::int64_t max_flow(std::size_t s, std::size_t t) {
    std::int64_t total = 0;
    while (bfs(s, t)) {
      std::fill(it_.begin(), it_.end(), 0);
      while (auto f = dfs(s, t, std::numeric_limits<std::int64_t>::max())) total += f;
    }
    return total;
  }

 private:
  struct Edge {
    std::size_t to;
    std::int64_t cap;
  };

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const auto u = q.front();
      q.pop();
      for (auto e : adj_[u])
        if (edges_[e].cap > 0 && level_[edges_[e].to] < 0) {
          level_[edges_[e].to] = level_[u] + 1;
          q.push(edges_[e].to);
        }
    }
    return level_[t] >= 0;
  }

  std::int64_t dfs(std::size_t u, std::size_t t, std::int64_t f) {
    if (u == t) return f;
    for (auto& i = it_[u]; i < adj_[u].size(); ++i) {
      const auto e = adj_[u][i];
      const auto v = edges_[e].to;
      if (edges_[e].cap <= 0 || level_[v] != level_[u] + 1) continue;
      if (auto got = dfs(v, t, std::min(f, edges_[e].cap))) {
        edges_[e].cap -= got;
        edges_[e ^ 1].cap += got;
        return got;
      }
    }
    return 0;
  }

  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> it_;
};

}  // namespace detail

/// Decide whether the family is ε-disjoint. Greedy first (private points,
/// then shared ones in order), max-flow when greedy falls short.
inline EpsilonDisjointResult epsilon_disjoint_check(const std::vector<std::vector<std::uint32_t>>& family, double eps) {
  if (!(eps >= 0.0 && eps < 1.0)) throw argument_error("epsilon_disjoint_check: epsilon must lie in [0,1)");
  const std::size_t m = family.size();
  std::vector<std::vector<std::uint32_t>> sets(m);
  std::vector<std::size_t> need(m);
  std::vector<std::uint32_t> points;
  for (std::size_t i = 0; i < m; ++i) {
    sets[i] = family[i];
    std::sort(sets[i].begin(), sets[i].end());
    sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
    need[i] = core_size(sets[i].size(), eps);
    points.insert(points.end(), sets[i].begin(), sets[i].end());
  }
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  auto index = [&](std::uint32_t p) { return static_cast<std::size_t>(std::lower_bound(points.begin(), points.end(), p) - points.begin()); };
  std::vector<std::uint32_t> mult(points.size(), 0);
  for (const auto& s : sets)
    for (auto p : s) ++mult[index(p)];

  EpsilonDisjointResult out;
  std::vector<char> taken(points.size(), 0);
  std::vector<std::vector<std::uint32_t>> b(m);
  bool greedy_ok = true;
  for (std::size_t i = 0; i < m && greedy_ok; ++i) {
    for (int pass = 0; pass < 2 && b[i].size() < need[i]; ++pass)
      for (auto p : sets[i]) {
        if (b[i].size() >= need[i]) break;
        const auto k = index(p);
        if (taken[k] || (pass == 0) != (mult[k] == 1)) continue;
        taken[k] = 1;
        b[i].push_back(p);
      }
    greedy_ok = b[i].size() >= need[i];
  }
  if (greedy_ok) {
    for (auto& x : b) std::sort(x.begin(), x.end());
    out.holds = true;
    out.witnesses = std::move(b);
    return out;
  }

  out.used_flow = true;
  const std::size_t src = 0, sink = 1, set0 = 2, pt0 = 2 + m;
  detail::FlowNetwork net(pt0 + points.size());
  std::int64_t total = 0;
  std::vector<std::vector<std::pair<std::size_t, std::uint32_t>>> arcs(m);
  for (std::size_t i = 0; i < m; ++i) {
    net.add_edge(src, set0 + i, static_cast<std::int64_t>(need[i]));
    total += static_cast<std::int64_t>(need[i]);
    for (auto p : sets[i]) arcs[i].push_back({net.add_edge(set0 + i, pt0 + index(p), 1), p});
  }
  for (std::size_t k = 0; k < points.size(); ++k) net.add_edge(pt0 + k, sink, 1);
  if (net.max_flow(src, sink) < total) return out;
  out.holds = true;
  out.witnesses.assign(m, {});
  for (std::size_t i = 0; i < m; ++i)
    for (const auto& [e, p] : arcs[i])
      if (net.flow_on(e) > 0) out.witnesses[i].push_back(p);
  return out;
}

/// Conditions recomputed from the raw tiling.
struct TilingRecord {
  /// Centers lie in V and in range, and no C_k repeats a center.
  bool centers_valid = false;
  /// σ(F_k)C_k, k = 1..l, pairwise disjoint.
  bool disjoint = false;
  std::size_t covered = 0;
  std::size_t d = 0;
  /// covered >= (1-τ-η)d.
  bool covers = false;
  /// {σ(F_k)c : c ∈ C_k} is η-disjoint, per k, with the B_c.
  std::vector<bool> eta_disjoint;
  std::vector<std::vector<std::vector<std::uint32_t>>> witnesses;
  /// F_k ∋ s ↦ σ_s(c) injective, per k and center.
  std::vector<std::vector<bool>> bijective;
  /// F_k × C_k ∋ (s,c) ↦ σ_s(c) injective, per k.
  std::vector<bool> product_bijective;

  double coverage() const { return d == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(d); }

  /// The lemma's conditions: η-disjointness for quasi-tilings, product
  /// bijectivity for exact ones.
  bool holds(bool exact) const {
    auto all = [](const auto& v) { return std::all_of(v.begin(), v.end(), [](bool b) { return b; }); };
    bool ok = centers_valid && disjoint && covers;
    for (const auto& row : bijective) ok = ok && all(row);
    return ok && (exact ? all(product_bijective) : all(eta_disjoint));
  }

  bool operator==(const TilingRecord&) const = default;
};

struct TilingOptions {
  /// η'' for the is_good precondition; defaults to η/4.
  std::optional<double> goodness_eta;
  std::size_t workers = 1;
};

struct QuasiTiling {
  std::vector<FiniteSubset> shapes;
  /// 0-based centers per shape; C_k lists centers in admission order.
  std::vector<std::vector<std::uint32_t>> centers;
  std::vector<std::uint32_t> v;
  double tau = 0.0;
  double eta = 0.0;
  double goodness_eta = 0.0;
  std::size_t good_points = 0;
  bool exact = false;
  bool guarantee_missed = false;
  TilingRecord record;

  /// C_k sorted and shifted to {1..d}.
  std::vector<std::uint32_t> centers_one_based(std::size_t k) const {
    auto c = centers.at(k);
    std::sort(c.begin(), c.end());
    for (auto& x : c) ++x;
    return c;
  }
};

namespace detail {

inline std::vector<Permutation> shape_images(const SoficMap& sigma, const FiniteSubset& f) {
  std::vector<Permutation> out;
  for (const auto& s : f) out.push_back(sigma.image(s));
  return out;
}

inline std::vector<std::uint32_t> tile_points(const std::vector<Permutation>& img, std::uint32_t c) {
  std::vector<std::uint32_t> t;
  t.reserve(img.size());
  for (const auto& p : img) t.push_back(p[c]);
  return t;
}

inline bool injective(std::vector<std::uint32_t> t) {
  std::sort(t.begin(), t.end());
  return std::adjacent_find(t.begin(), t.end()) == t.end();
}

inline std::vector<std::uint32_t> check_tiling_inputs(const SoficMap& sigma, std::vector<std::uint32_t> v,
                                                      const std::vector<FiniteSubset>& shapes, double eta, double tau,
                                                      const TilingOptions& opt, double& eta2, std::size_t& good) {
  const auto& spec = sigma.group();
  if (shapes.empty()) throw argument_error("tiling: need at least one shape");
  if (!(eta > 0.0 && eta < 1.0)) throw argument_error("tiling: eta must lie in (0,1)");
  if (!(tau >= 0.0 && tau < 1.0)) throw argument_error("tiling: tau must lie in [0,1)");
  if (!shapes.front().contains(spec.identity())) throw argument_error("tiling: F_1 must contain the identity");
  for (std::size_t k = 1; k < shapes.size(); ++k)
    if (!shapes[k - 1].is_subset_of(shapes[k])) throw argument_error("tiling: shapes must be nested F_1 ⊆ ... ⊆ F_l");
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (!v.empty() && v.back() >= sigma.d()) throw argument_error("tiling: V has an index outside {1..d}");
  if (rational(v.size()) < (1 - exact_decimal(tau)) * rational(sigma.d()))
    throw argument_error("tiling: |V| < (1-tau)d");
  eta2 = opt.goodness_eta.value_or(eta / 4);
  const auto e = product_set(spec, shapes.back(), shapes.back());
  const auto cert = is_good(sigma, e, eta2);
  good = cert.good_points.size();
  if (!cert.good)
    throw argument_error("tiling: sigma is not good on F_l F_l at eta''=" + std::to_string(eta2) + " (" +
                         std::to_string(good) + " of " + std::to_string(sigma.d()) + " good points)");
  return v;
}

// Phases k = l..1. A candidate tile must miss every earlier phase and add at
// least `threshold(k)` points new to its own phase; among those the largest
// gain wins, ties to the lowest index. Gains only shrink, so a lazy heap
// with re-evaluation on pop is exact.
template <class Threshold>
std::vector<std::vector<std::uint32_t>> greedy_tile(const SoficMap& sigma, const std::vector<std::uint32_t>& v,
                                                    const std::vector<FiniteSubset>& shapes, Threshold threshold) {
  const std::size_t d = sigma.d(), l = shapes.size();
  std::vector<std::vector<std::uint32_t>> centers(l);
  std::vector<char> blocked(d, 0);
  for (std::size_t k = l; k-- > 0;) {
    const auto img = shape_images(sigma, shapes[k]);
    const std::size_t need = threshold(k);
    std::vector<char> mine(d, 0);
    using Entry = std::pair<std::size_t, std::int64_t>;  // (gain, -index)
    std::priority_queue<Entry> heap;
    std::vector<std::vector<std::uint32_t>> tiles(d);
    for (auto c : v) {
      auto t = tile_points(img, c);
      if (!injective(t)) continue;
      if (std::any_of(t.begin(), t.end(), [&](std::uint32_t p) { return blocked[p]; })) continue;
      if (t.size() < need) continue;
      heap.push({t.size(), -static_cast<std::int64_t>(c)});
      tiles[c] = std::move(t);
    }
    while (!heap.empty()) {
      const auto [stored, negc] = heap.top();
      heap.pop();
      const auto c = static_cast<std::uint32_t>(-negc);
      std::size_t gain = 0;
      for (auto p : tiles[c]) gain += mine[p] ? 0 : 1;
      if (gain < need) continue;
      if (gain < stored) {
        heap.push({gain, negc});
        continue;
      }
      centers[k].push_back(c);
      for (auto p : tiles[c]) mine[p] = 1;
    }
    for (std::size_t p = 0; p < d; ++p)
      if (mine[p]) blocked[p] = 1;
  }
  return centers;
}

}  // namespace detail

/// Recompute every condition of the tiling from σ and the raw centers.
inline TilingRecord verify_tiling(const QuasiTiling& t, const SoficMap& sigma, std::size_t workers = 1) {
  const std::size_t d = sigma.d(), l = t.shapes.size();
  struct Phase {
    std::vector<std::vector<std::uint32_t>> tiles;
    std::vector<bool> bijective;
    bool centers_ok = true, product = false;
    EpsilonDisjointResult eps;
  };
  std::vector<Phase> phases(l);
  const auto& v = t.v;
  parallel_for(l, workers, [&](std::size_t k) {
    auto& ph = phases[k];
    const auto img = detail::shape_images(sigma, t.shapes[k]);
    std::vector<std::uint32_t> seen;
    for (auto c : t.centers[k]) {
      if (c >= d || !std::binary_search(v.begin(), v.end(), c)) {
        ph.centers_ok = false;
        ph.tiles.push_back({});
        ph.bijective.push_back(false);
        continue;
      }
      seen.push_back(c);
      ph.tiles.push_back(detail::tile_points(img, c));
      ph.bijective.push_back(detail::injective(ph.tiles.back()));
    }
    if (!detail::injective(seen)) ph.centers_ok = false;
    std::vector<std::uint32_t> all;
    for (const auto& x : ph.tiles) all.insert(all.end(), x.begin(), x.end());
    ph.product = ph.centers_ok && detail::injective(all);
    ph.eps = epsilon_disjoint_check(ph.tiles, t.eta);
  });
  TilingRecord r;
  r.d = d;
  r.centers_valid = true;
  for (auto& ph : phases) {
    r.centers_valid = r.centers_valid && ph.centers_ok;
    r.bijective.push_back(ph.bijective);
    r.product_bijective.push_back(ph.product);
    r.eta_disjoint.push_back(ph.eps.holds);
    r.witnesses.push_back(std::move(ph.eps.witnesses));
  }
  std::vector<int> owner(d, -1);
  r.disjoint = true;
  for (std::size_t k = 0; k < l; ++k)
    for (const auto& tile : phases[k].tiles)
      for (auto p : tile) {
        if (owner[p] >= 0 && owner[p] != static_cast<int>(k)) r.disjoint = false;
        owner[p] = static_cast<int>(k);
      }
  r.covered = static_cast<std::size_t>(std::count_if(owner.begin(), owner.end(), [](int o) { return o >= 0; }));
  r.covers = rational(r.covered) >= (1 - exact_decimal(t.tau) - exact_decimal(t.eta)) * rational(d);
  return r;
}

namespace detail {

inline QuasiTiling finish_tiling(QuasiTiling t, const SoficMap& sigma, const TilingOptions& opt) {
  t.record = verify_tiling(t, sigma, opt.workers);
  t.guarantee_missed = !t.record.covers;
  return t;
}

}  // namespace detail

/// Greedy sofic Rokhlin tiling: C_1..C_l ⊆ V with σ(F_k)C_k disjoint across
/// k and each phase η-disjoint. Low coverage sets `guarantee_missed`.
inline QuasiTiling sofic_quasi_tile(const SoficMap& sigma, const std::vector<std::uint32_t>& v, const std::vector<FiniteSubset>& shapes,
                                    double eta, double tau, const TilingOptions& opt = {}) {
  QuasiTiling t;
  t.v = detail::check_tiling_inputs(sigma, v, shapes, eta, tau, opt, t.goodness_eta, t.good_points);
  t.shapes = shapes;
  t.eta = eta;
  t.tau = tau;
  t.centers = detail::greedy_tile(sigma, t.v, shapes, [&](std::size_t k) { return core_size(shapes[k].size(), eta); });
  return detail::finish_tiling(std::move(t), sigma, opt);
}

/// Exact variant for σ built from a Følner set: tiles never overlap and
/// (s,c) ↦ σ_s(c) is injective on each F_k × C_k.
inline QuasiTiling amenable_exact_tile(const SoficMap& sigma, const std::vector<std::uint32_t>& v, const std::vector<FiniteSubset>& shapes,
                                       double eta, double tau, const TilingOptions& opt = {}) {
  if (!sigma.group().is_amenable()) throw argument_error("amenable_exact_tile: group is not amenable");
  if (sigma.provenance() != SoficProvenance::cyclic_from_folner && sigma.provenance() != SoficProvenance::folner_fill)
    throw argument_error("amenable_exact_tile: sigma must be built from a Følner set");
  QuasiTiling t;
  t.v = detail::check_tiling_inputs(sigma, v, shapes, eta, tau, opt, t.goodness_eta, t.good_points);
  t.shapes = shapes;
  t.eta = eta;
  t.tau = tau;
  t.exact = true;
  t.centers = detail::greedy_tile(sigma, t.v, shapes, [&](std::size_t k) { return shapes[k].size(); });
  return detail::finish_tiling(std::move(t), sigma, opt);
}

/// {0..d-1} minus the last floor(τd) indices.
inline std::vector<std::uint32_t> leading_indices(std::size_t d, double tau) {
  const rational drop = exact_decimal(tau) * rational(d);
  const std::size_t cut = d - (boost::multiprecision::numerator(drop) / boost::multiprecision::denominator(drop)).convert_to<std::size_t>();
  std::vector<std::uint32_t> v(cut);
  for (std::size_t i = 0; i < cut; ++i) v[i] = static_cast<std::uint32_t>(i);
  return v;
}

}  // namespace soficlab
