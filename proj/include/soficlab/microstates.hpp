#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "soficlab/covers.hpp"
#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/parallel.hpp"
#include "soficlab/sofic.hpp"
#include "soficlab/symbolic.hpp"

namespace soficlab {

/// Which end of the ρ bracket enters the microstate test. Inner uses the
/// upper distance (fewer tuples pass), outer the lower one.
enum class Certification { inner, outer };

inline const char* to_string(Certification m) { return m == Certification::inner ? "inner" : "outer"; }

/// Empirical-average condition |(1/d) Σ f(x_i) - μ(f)| < δ for every f in L.
struct MeasureFilter {
  MeasureModel mu;
  std::vector<TestFunction> tests;
  double delta = 0.0;
};

struct MicrostateOptions {
  Certification mode = Certification::outer;
  /// Window the tuples' patterns live on; defaults to M ∪ M·F.
  std::optional<FiniteSubset> pattern_window;
  std::uint64_t node_budget = 1'000'000'000;
  /// Tuples kept in memory; past this the set only counts.
  std::size_t store_limit = std::size_t{1} << 20;
  unsigned workers = 1;
};

/// M ∪ ⋃_{s∈F} M·s: the sites read when comparing (s·x)|_M with y|_M.
inline FiniteSubset microstate_window(const GroupSpec& spec, const FiniteSubset& m, const FiniteSubset& f) {
  FiniteSubset w = m;
  for (const auto& s : f) w = set_union(w, right_translate(spec, m, s));
  return w;
}

/// max_{s∈F} (1/d) Σ_i ρ(s·x_i, x_{σ_s(i)})² on the metric window M, exact.
/// The microstate test is this value < δ².
inline rational microstate_defect(const SymbolicSystem& sys, const std::vector<Pattern>& tuple, const FiniteSubset& f,
                                  const SoficMap& sigma, const FiniteSubset& m, Certification mode) {
  const auto& spec = sys.group();
  const std::size_t d = tuple.size();
  if (d != sigma.d()) throw argument_error("microstate_check: tuple length differs from d");
  if (!(sigma.group() == spec)) throw argument_error("microstate_check: sofic map over a different group");
  const auto need = microstate_window(spec, m, f);
  for (const auto& p : tuple)
    if (!need.is_subset_of(p.window))
      throw argument_error("microstate_check: pattern window too small; enlarge it to contain M ∪ M·F (" +
                           std::to_string(need.size()) + " sites)");
  rational worst = 0;
  for (const auto& s : f) {
    const auto perm = sigma.image(s);
    rational total = 0;
    for (std::size_t i = 0; i < d; ++i) {
      const auto r = rho(sys, act(spec, s, tuple[i]), tuple[perm[i]], m);
      const rational& x = mode == Certification::outer ? r.lo : r.hi;
      total += x * x;
    }
    worst = std::max(worst, total / rational(d));
  }
  return worst;
}

inline bool microstate_check(const SymbolicSystem& sys, const std::vector<Pattern>& tuple, const FiniteSubset& f, double delta,
                             const SoficMap& sigma, const FiniteSubset& m, Certification mode) {
  if (!(delta > 0)) throw argument_error("microstate_check: delta must be positive");
  const rational dl = exact_decimal(delta);
  return microstate_defect(sys, tuple, f, sigma, m, mode) < dl * dl;
}

/// Exact empirical-average test for a tuple.
inline bool filter_check(const MeasureFilter& filter, const std::vector<Pattern>& tuple) {
  const rational dl = exact_decimal(filter.delta);
  const rational d(tuple.size());
  for (const auto& f : filter.tests) {
    rational sum = 0;
    for (const auto& p : tuple) sum += exact_decimal(f(p));
    const rational gap = sum / d - exact_decimal(integrate(filter.mu, f));
    if (!(gap < dl && -gap < dl)) return false;
  }
  return true;
}

/// The tuples (x_1..x_d) ∈ L(W)^d passing the microstate test, stored as
/// pattern indices into the language of the pattern window.
class MicrostateSet {
 public:
  std::size_t d() const { return d_; }
  const FiniteSubset& window() const { return lang_->window(); }
  const FiniteSubset& metric_window() const { return metric_; }
  const FiniteSubset& f() const { return f_; }
  double delta() const { return delta_; }
  Certification mode() const { return mode_; }
  bool filtered() const { return filtered_; }
  const Language& language() const { return *lang_; }
  std::shared_ptr<const Language> language_ptr() const { return lang_; }

  /// Number of tuples, exact even when not all are stored.
  std::uint64_t size() const { return size_; }
  bool complete() const { return stored_ == size_; }
  std::uint64_t nodes() const { return nodes_; }

  std::span<const std::uint32_t> tuple(std::size_t k) const { return {flat_.data() + k * d_, d_}; }
  std::vector<Pattern> patterns(std::size_t k) const {
    std::vector<Pattern> out;
    for (auto p : tuple(k)) out.push_back(lang_->pattern(p));
    return out;
  }

  /// The stored tuples with keep[k] set, in order.
  MicrostateSet select(const std::vector<char>& keep, bool filtered = true) const {
    if (!complete()) throw resource_error("MicrostateSet: selection needs every tuple stored");
    if (keep.size() != size_) throw argument_error("MicrostateSet: selection mask has the wrong length");
    MicrostateSet out = *this;
    out.flat_.clear();
    out.filtered_ = filtered_ || filtered;
    out.size_ = out.stored_ = 0;
    for (std::size_t k = 0; k < size_; ++k)
      if (keep[k]) {
        out.flat_.insert(out.flat_.end(), tuple(k).begin(), tuple(k).end());
        ++out.size_;
        ++out.stored_;
      }
    return out;
  }

  /// Tuples are stored in lexicographic order of pattern indices.
  std::vector<std::vector<std::uint32_t>> tuples() const {
    std::vector<std::vector<std::uint32_t>> out;
    for (std::size_t k = 0; k < stored_; ++k) out.emplace_back(tuple(k).begin(), tuple(k).end());
    return out;
  }

 private:
  template <class Acc>
  friend class MicrostateSearch;
  friend MicrostateSet enumerate_microstates(const SymbolicSystem&, const FiniteSubset&, double, const SoficMap&,
                                             const FiniteSubset&, const MicrostateOptions&, const MeasureFilter*);

  std::size_t d_ = 0;
  std::shared_ptr<const Language> lang_;
  FiniteSubset metric_, f_;
  double delta_ = 0;
  Certification mode_ = Certification::outer;
  bool filtered_ = false;
  std::uint64_t size_ = 0, stored_ = 0, nodes_ = 0;
  std::vector<std::uint32_t> flat_;
};

namespace detail {

using i128 = __int128;
using u128 = unsigned __int128;

inline unsigned decimal_digits(const rational& q) {
  big_int den = boost::multiprecision::denominator(q);
  unsigned twos = 0, fives = 0;
  while (den % 2 == 0) {
    den /= 2;
    ++twos;
  }
  while (den % 5 == 0) {
    den /= 5;
    ++fives;
  }
  if (den != 1) throw argument_error("filter value is not a terminating decimal");
  return std::max(twos, fives);
}

inline i128 to_i128(const big_int& v, const char* what) {
  static const big_int limit = big_int(1) << 110;
  if (v >= limit || v <= -limit) throw argument_error(std::string(what) + ": value out of range for exact filter sums");
  const bool neg = v < 0;
  big_int a = neg ? big_int(-v) : v;
  u128 r = 0;
  for (int shift = 0; a != 0; shift += 32, a >>= 32) r |= static_cast<u128>(static_cast<std::uint32_t>(a & 0xffffffffu)) << shift;
  return neg ? -static_cast<i128>(r) : static_cast<i128>(r);
}

inline u128 to_u128(const big_int& v) {
  big_int a = v;
  u128 r = 0;
  for (int shift = 0; a != 0; shift += 32, a >>= 32) r |= static_cast<u128>(static_cast<std::uint32_t>(a & 0xffffffffu)) << shift;
  return r;
}

// Everything the search needs, independent of the accumulator.
struct MicrostateProblem {
  std::size_t d = 0, n = 0;
  std::shared_ptr<const Language> lang;
  struct Edge {
    std::uint32_t k, src, dst;
  };
  // Per s ∈ F: code of (s·x)|_M for each pattern, and the cost table over
  // (code of (s·x)|_M, code of y|_M) in units of 2^-2P.
  std::vector<std::vector<std::uint32_t>> shifted_code;
  std::vector<std::uint32_t> metric_code;
  std::vector<std::vector<u128>> cost;
  std::size_t codes = 0;
  u128 threshold = 0;
  std::vector<std::vector<Edge>> checks;  // edges completing at coordinate i
  // Filter, scaled to integers.
  struct Test {
    std::vector<i128> value;
    i128 lo, hi;  // exclusive bounds on Σ f(x_i)
    i128 fmin, fmax;
  };
  std::vector<Test> tests;
};

inline MicrostateProblem build_problem(const SymbolicSystem& sys, const FiniteSubset& f, double delta, const SoficMap& sigma,
                                       const FiniteSubset& m, const MicrostateOptions& opt, const MeasureFilter* filter) {
  const auto& spec = sys.group();
  if (!(delta > 0)) throw argument_error("microstates: delta must be positive");
  if (f.empty()) throw argument_error("microstates: F is empty");
  if (m.empty()) throw argument_error("microstates: metric window is empty");
  if (!(sigma.group() == spec)) throw argument_error("microstates: sofic map over a different group");
  const auto need = microstate_window(spec, m, f);
  const FiniteSubset w = opt.pattern_window ? *opt.pattern_window : need;
  if (!need.is_subset_of(w))
    throw argument_error("microstates: pattern window too small; enlarge it to contain M ∪ M·F");

  MicrostateProblem pb;
  pb.d = sigma.d();
  pb.lang = std::make_shared<const Language>(language(sys, w));
  pb.n = pb.lang->size();
  if (pb.n == 0) return pb;

  // Dyadic resolution: every weight on M and the tail are multiples of 2^-P.
  rational tail = sys.tail(m);
  unsigned precision = 0;
  auto exponent = [](const rational& q) {
    const big_int den = boost::multiprecision::denominator(q);
    return static_cast<unsigned>(boost::multiprecision::msb(den));
  };
  std::vector<rational> weights;
  for (const auto& h : m) {
    weights.push_back(sys.weight(h));
    precision = std::max(precision, exponent(weights.back()));
  }
  if (tail != 0) precision = std::max(precision, exponent(tail));
  if (precision > 48) throw unsupported_error("microstates: metric window too deep for exact 128-bit sums");
  const big_int unit = big_int(1) << precision;
  std::vector<std::uint64_t> w_units;
  for (const auto& x : weights) w_units.push_back(static_cast<std::uint64_t>(boost::multiprecision::numerator(x * rational(unit))));
  const auto tail_units = static_cast<std::uint64_t>(boost::multiprecision::numerator(tail * rational(unit)));

  // Σ cost < d δ² 2^2P  ⟺  Σ cost ≤ ceil(d δ² 2^2P) - 1.
  const rational dl = exact_decimal(delta);
  const rational bound = rational(pb.d) * dl * dl * rational(unit * unit);
  const big_int thr = ceil_rational(bound) - 1;
  static const big_int cap = big_int(1) << 126;
  pb.threshold = to_u128(std::min(thr, cap));

  // Codes of M-restrictions.
  std::unordered_map<std::string, std::uint32_t> code_of;
  std::vector<std::string> code_symbols;
  auto intern = [&](std::string key) {
    auto [it, fresh] = code_of.emplace(std::move(key), static_cast<std::uint32_t>(code_symbols.size()));
    if (fresh) code_symbols.push_back(it->first);
    return it->second;
  };
  std::vector<std::size_t> m_pos;
  for (const auto& h : m) m_pos.push_back(*w.index_of(h));
  pb.metric_code.resize(pb.n);
  for (std::size_t p = 0; p < pb.n; ++p) {
    const auto row = (*pb.lang)[p];
    std::string key;
    for (auto i : m_pos) key.push_back(static_cast<char>(row[i]));
    pb.metric_code[p] = intern(std::move(key));
  }
  for (const auto& s : f) {
    std::vector<std::size_t> pos;
    for (const auto& h : m) pos.push_back(*w.index_of(spec.multiply(h, s)));
    std::vector<std::uint32_t> codes(pb.n);
    for (std::size_t p = 0; p < pb.n; ++p) {
      const auto row = (*pb.lang)[p];
      std::string key;
      for (auto i : pos) key.push_back(static_cast<char>(row[i]));
      codes[p] = intern(std::move(key));
    }
    pb.shifted_code.push_back(std::move(codes));
  }
  pb.codes = code_symbols.size();
  if (pb.codes * pb.codes > 50'000'000) throw resource_error("microstates: metric window has too many patterns");
  std::vector<u128> table(pb.codes * pb.codes);
  for (std::size_t a = 0; a < pb.codes; ++a)
    for (std::size_t b = 0; b < pb.codes; ++b) {
      std::uint64_t lo = 0;
      for (std::size_t k = 0; k < m_pos.size(); ++k)
        if (code_symbols[a][k] != code_symbols[b][k]) lo += w_units[k];
      const u128 x = opt.mode == Certification::outer ? lo : lo + tail_units;
      table[a * pb.codes + b] = x * x;
    }
  pb.cost.assign(f.size(), table);

  // Edge (j, σ_s(j)) is checked once both ends are assigned.
  pb.checks.assign(pb.d, {});
  std::uint32_t k = 0;
  for (const auto& s : f) {
    const auto perm = sigma.image(s);
    for (std::uint32_t j = 0; j < pb.d; ++j) pb.checks[std::max<std::uint32_t>(j, perm[j])].push_back({k, j, perm[j]});
    ++k;
  }

  if (filter) {
    if (!(filter->delta > 0)) throw argument_error("microstates: filter delta must be positive");
    std::vector<std::vector<rational>> values;
    std::vector<rational> means;
    const rational fd = exact_decimal(filter->delta);
    unsigned digits = decimal_digits(fd);
    for (const auto& t : filter->tests) {
      if (t.alphabet_size() != sys.alphabet_size()) throw argument_error("microstates: test function alphabet mismatch");
      if (!t.window().is_subset_of(w)) throw argument_error("microstates: test function window outside the pattern window");
      std::vector<rational> v(pb.n);
      for (std::size_t p = 0; p < pb.n; ++p) {
        v[p] = exact_decimal(t(pb.lang->pattern(p)));
        digits = std::max(digits, decimal_digits(v[p]));
      }
      means.push_back(exact_decimal(integrate(filter->mu, t)));
      digits = std::max(digits, decimal_digits(means.back()));
      values.push_back(std::move(v));
    }
    if (digits > 30) throw argument_error("microstates: filter values need more than 30 decimal digits");
    big_int scale = 1;
    for (unsigned i = 0; i < digits; ++i) scale *= 10;
    auto scaled = [&](const rational& q) { return to_i128(boost::multiprecision::numerator(q * rational(scale)), "filter"); };
    const i128 radius = scaled(fd) * static_cast<i128>(pb.d);
    for (std::size_t t = 0; t < values.size(); ++t) {
      MicrostateProblem::Test test;
      for (const auto& q : values[t]) test.value.push_back(scaled(q));
      const i128 centre = scaled(means[t]) * static_cast<i128>(pb.d);
      test.lo = centre - radius;
      test.hi = centre + radius;
      test.fmin = *std::min_element(test.value.begin(), test.value.end());
      test.fmax = *std::max_element(test.value.begin(), test.value.end());
      pb.tests.push_back(std::move(test));
    }
  }
  return pb;
}

}  // namespace detail

/// Depth-first search over coordinates 0..d-1. An edge (j, σ_s(j)) is charged
/// when its later endpoint is assigned; per-s partial sums only grow, so a
/// prefix over threshold is cut. The filter prunes when the reachable range
/// of each empirical sum misses its window. Leaves go to `Acc`.
template <class Acc>
class MicrostateSearch {
 public:
  MicrostateSearch(const detail::MicrostateProblem& pb, std::uint64_t budget, std::atomic<std::uint64_t>& nodes)
      : pb_(pb), budget_(budget), nodes_(nodes) {}

  /// Runs the subtree with x_0 = first.
  void run(std::uint32_t first, Acc& acc) {
    x_.assign(pb_.d, 0);
    sums_.assign(pb_.cost.size() * (pb_.d + 1), 0);
    fsums_.assign(pb_.tests.size() * (pb_.d + 1), 0);
    acc_ = &acc;
    if (try_assign(0, first)) descend(1);
    flush();
  }

 private:
  bool try_assign(std::size_t i, std::uint32_t p) {
    if (++local_ >= 4096) flush();
    x_[i] = p;
    const std::size_t nk = pb_.cost.size();
    detail::u128* cur = &sums_[i * nk];
    detail::u128* next = &sums_[(i + 1) * nk];
    for (std::size_t k = 0; k < nk; ++k) next[k] = cur[k];
    for (const auto& e : pb_.checks[i]) {
      const auto a = pb_.shifted_code[e.k][x_[e.src]];
      const auto b = pb_.metric_code[x_[e.dst]];
      next[e.k] += pb_.cost[e.k][a * pb_.codes + b];
      if (next[e.k] > pb_.threshold) return false;
    }
    const std::size_t nt = pb_.tests.size();
    const auto remaining = static_cast<detail::i128>(pb_.d - i - 1);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& test = pb_.tests[t];
      const detail::i128 s = fsums_[i * nt + t] + test.value[p];
      fsums_[(i + 1) * nt + t] = s;
      if (s + remaining * test.fmax <= test.lo || s + remaining * test.fmin >= test.hi) return false;
    }
    return true;
  }

  void descend(std::size_t i) {
    if (i == pb_.d) {
      (*acc_)(std::span<const std::uint32_t>(x_));
      return;
    }
    for (std::uint32_t p = 0; p < pb_.n; ++p)
      if (try_assign(i, p)) descend(i + 1);
  }

  void flush() {
    if (local_ == 0) return;
    const auto total = nodes_.fetch_add(local_) + local_;
    local_ = 0;
    if (total > budget_)
      throw resource_error("microstates: node budget exceeded (the search already prunes edge by edge along the coordinates)");
  }

  const detail::MicrostateProblem& pb_;
  std::uint64_t budget_;
  std::atomic<std::uint64_t>& nodes_;
  std::uint64_t local_ = 0;
  Acc* acc_ = nullptr;
  std::vector<std::uint32_t> x_;
  std::vector<detail::u128> sums_;
  std::vector<detail::i128> fsums_;
};

namespace detail {

// Runs the search split on x_0, one accumulator per first symbol, returned
// in order so merging is deterministic.
template <class Acc, class Make>
std::vector<Acc> run_split(const MicrostateProblem& pb, const MicrostateOptions& opt, Make make, std::uint64_t& nodes_out) {
  std::vector<Acc> parts;
  for (std::size_t p = 0; p < pb.n; ++p) parts.push_back(make());
  std::atomic<std::uint64_t> nodes{0};
  if (pb.d > 0)
    parallel_for(pb.n, opt.workers, [&](std::size_t p) {
      MicrostateSearch<Acc> search(pb, opt.node_budget, nodes);
      search.run(static_cast<std::uint32_t>(p), parts[p]);
    });
  nodes_out = nodes.load();
  return parts;
}

struct StoreAcc {
  std::size_t limit = 0;
  std::uint64_t count = 0;
  std::vector<std::uint32_t> flat;
  void operator()(std::span<const std::uint32_t> t) {
    if (count < limit) flat.insert(flat.end(), t.begin(), t.end());
    ++count;
  }
};

// Distinct tuples of partition cells, keyed compactly when |cells|^d fits in
// 64 bits.
struct CellAcc {
  const std::vector<std::uint32_t>* cell = nullptr;
  std::uint64_t base = 0;
  bool packed = true;
  std::uint64_t count = 0;
  std::unordered_set<std::uint64_t> packed_keys;
  std::unordered_set<std::string> keys;
  void operator()(std::span<const std::uint32_t> t) {
    ++count;
    if (packed) {
      std::uint64_t key = 0;
      for (auto p : t) key = key * base + (*cell)[p];
      packed_keys.insert(key);
    } else {
      std::string key;
      for (auto p : t) {
        const auto c = (*cell)[p];
        key.append(reinterpret_cast<const char*>(&c), sizeof c);
      }
      keys.insert(std::move(key));
    }
  }
  std::size_t distinct() const { return packed ? packed_keys.size() : keys.size(); }
};

// For each pattern of L(W), the elements of U containing its restriction.
inline std::vector<std::vector<std::uint32_t>> restricted_memberships(const Language& lang, const Cover& u) {
  if (!u.window().is_subset_of(lang.window())) throw argument_error("count_cover: cover window is not inside the pattern window");
  const auto member = u.memberships();
  std::vector<std::size_t> pos;
  for (const auto& h : u.window()) pos.push_back(*lang.window().index_of(h));
  std::vector<std::vector<std::uint32_t>> out(lang.size());
  std::vector<Symbol> sub(pos.size());
  for (std::size_t p = 0; p < lang.size(); ++p) {
    const auto row = lang[p];
    for (std::size_t k = 0; k < pos.size(); ++k) sub[k] = row[pos[k]];
    const auto idx = u.language().find(sub);
    if (!idx) throw argument_error("count_cover: pattern restriction is not admissible for the cover");
    out[p] = member[*idx];
  }
  return out;
}

}  // namespace detail

/// X^d_{F,δ,σ} (or X^d_{F,δ,σ,μ,L} when `filter` is given) at window
/// resolution.
inline MicrostateSet enumerate_microstates(const SymbolicSystem& sys, const FiniteSubset& f, double delta, const SoficMap& sigma,
                                           const FiniteSubset& m, const MicrostateOptions& opt = {},
                                           const MeasureFilter* filter = nullptr) {
  const auto pb = detail::build_problem(sys, f, delta, sigma, m, opt, filter);
  MicrostateSet out;
  out.d_ = pb.d;
  out.lang_ = pb.lang;
  out.metric_ = m;
  out.f_ = f;
  out.delta_ = delta;
  out.mode_ = opt.mode;
  out.filtered_ = filter != nullptr;
  std::uint64_t nodes = 0;
  auto parts = detail::run_split<detail::StoreAcc>(pb, opt, [&] { return detail::StoreAcc{opt.store_limit, 0, {}}; }, nodes);
  out.nodes_ = nodes;
  for (auto& part : parts) {
    out.size_ += part.count;
    const std::size_t room = opt.store_limit > out.stored_ ? opt.store_limit - out.stored_ : 0;
    const std::size_t take = std::min<std::size_t>(room, part.flat.size() / std::max<std::size_t>(pb.d, 1));
    out.flat_.insert(out.flat_.end(), part.flat.begin(), part.flat.begin() + static_cast<std::ptrdiff_t>(take * pb.d));
    out.stored_ += take;
  }
  return out;
}

/// N(U^d, M): the fewest product sets U_{j_1}×...×U_{j_d} covering M.
///
/// Partitions take the unique-cover shortcut (distinct cell tuples). Other
/// covers go to exact set cover over the product sets that meet M, after
/// dropping per coordinate any element dominated by another on the patterns
/// that occur there.
inline SetCoverResult count_cover(const MicrostateSet& ms, const Cover& u, std::uint64_t node_budget = 5'000'000) {
  if (!ms.complete()) throw resource_error("count_cover: microstate set was not stored in full");
  const auto member = detail::restricted_memberships(ms.language(), u);
  const std::size_t d = ms.d();
  SetCoverResult r;
  if (ms.size() == 0) return r;
  if (u.is_partition()) {
    std::set<std::vector<std::uint32_t>> seen;
    for (std::size_t k = 0; k < ms.size(); ++k) {
      std::vector<std::uint32_t> key;
      for (auto p : ms.tuple(k)) key.push_back(member[p][0]);
      seen.insert(std::move(key));
    }
    r.count = seen.size();
    return r;
  }
  // Per-coordinate surviving elements.
  std::vector<std::vector<char>> allowed(d, std::vector<char>(u.size(), 0));
  for (std::size_t i = 0; i < d; ++i) {
    std::vector<char> occurs(ms.language().size(), 0);
    for (std::size_t k = 0; k < ms.size(); ++k) occurs[ms.tuple(k)[i]] = 1;
    std::vector<Bits> restricted(u.size(), Bits(ms.language().size()));
    std::vector<std::uint32_t> live;
    for (std::uint32_t p = 0; p < occurs.size(); ++p)
      if (occurs[p])
        for (auto e : member[p]) restricted[e].set(p);
    for (std::uint32_t e = 0; e < u.size(); ++e)
      if (restricted[e].any()) live.push_back(e);
    for (auto e : live) {
      bool dominated = false;
      for (auto g : live)
        if (g != e && restricted[e].is_subset_of(restricted[g]) && (restricted[e] != restricted[g] || g < e)) {
          dominated = true;
          break;
        }
      allowed[i][e] = !dominated;
    }
  }
  std::map<std::vector<std::uint32_t>, std::size_t> product_index;
  std::vector<Bits> products;
  std::uint64_t work = 0;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const auto t = ms.tuple(k);
    std::vector<std::vector<std::uint32_t>> options(d);
    for (std::size_t i = 0; i < d; ++i)
      for (auto e : member[t[i]])
        if (allowed[i][e]) options[i].push_back(e);
    std::vector<std::uint32_t> key(d);
    auto rec = [&](auto&& self, std::size_t i) -> void {
      if (i == d) {
        if (++work > node_budget) throw resource_error("count_cover: too many product sets");
        auto [it, fresh] = product_index.emplace(key, products.size());
        if (fresh) products.emplace_back(ms.size());
        products[it->second].set(k);
        return;
      }
      for (auto e : options[i]) {
        key[i] = e;
        self(self, i + 1);
      }
    };
    rec(rec, 0);
  }
  Bits target(ms.size());
  target.set();
  return exact_set_cover(products, target, node_budget);
}

struct MicrostateCount {
  std::uint64_t microstates = 0;
  std::uint64_t cover_count = 0;
  /// False when set cover ran out of budget; cover_count is then an upper bound.
  bool exact = true;
};

/// |X^d| and N(U^d, X^d) in one pass. Partition covers stream tuples into a
/// cell-tuple set instead of storing them. The pattern window is enlarged to
/// contain the window of U when needed.
inline MicrostateCount count_microstate_cover(const SymbolicSystem& sys, const FiniteSubset& f, double delta,
                                              const SoficMap& sigma, const FiniteSubset& m, const Cover& u,
                                              const MicrostateOptions& opt = {}, const MeasureFilter* filter = nullptr) {
  MicrostateOptions o = opt;
  if (!o.pattern_window) o.pattern_window = microstate_window(sys.group(), m, f);
  if (!u.window().is_subset_of(*o.pattern_window)) o.pattern_window = set_union(*o.pattern_window, u.window());
  if (!u.is_partition()) {
    auto ms = enumerate_microstates(sys, f, delta, sigma, m, o, filter);
    const auto r = count_cover(ms, u, opt.node_budget);
    return {ms.size(), r.count, r.exact};
  }
  const auto pb = detail::build_problem(sys, f, delta, sigma, m, o, filter);
  const auto member = detail::restricted_memberships(*pb.lang, u);
  std::vector<std::uint32_t> cell(member.size());
  for (std::size_t p = 0; p < member.size(); ++p) cell[p] = member[p][0];
  const std::uint64_t base = std::max<std::uint64_t>(u.size(), 1);
  bool packed = true;
  {
    unsigned __int128 cap = 1;
    for (std::size_t i = 0; i < pb.d && packed; ++i) {
      cap *= base;
      if (cap > (static_cast<unsigned __int128>(1) << 64)) packed = false;
    }
  }
  std::uint64_t nodes = 0;
  auto parts = detail::run_split<detail::CellAcc>(pb, o, [&] { return detail::CellAcc{&cell, base, packed}; }, nodes);
  MicrostateCount out;
  if (packed) {
    std::unordered_set<std::uint64_t> all;
    for (auto& part : parts) {
      out.microstates += part.count;
      all.insert(part.packed_keys.begin(), part.packed_keys.end());
    }
    out.cover_count = all.size();
  } else {
    std::unordered_set<std::string> all;
    for (auto& part : parts) {
      out.microstates += part.count;
      all.insert(part.keys.begin(), part.keys.end());
    }
    out.cover_count = all.size();
  }
  return out;
}

}  // namespace soficlab
