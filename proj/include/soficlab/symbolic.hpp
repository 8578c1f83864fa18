#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/group.hpp"

namespace soficlab {

using Symbol = std::uint8_t;

/// A finite configuration: one symbol per element of its window.
struct Pattern {
  FiniteSubset window;
  std::vector<Symbol> symbols;

  Pattern() = default;
  Pattern(FiniteSubset w, std::vector<Symbol> s) : window(std::move(w)), symbols(std::move(s)) {
    if (window.size() != symbols.size()) throw argument_error("Pattern: window and symbol counts differ");
  }

  Symbol at(const GroupElement& g) const {
    auto i = window.index_of(g);
    if (!i) throw argument_error("Pattern: coordinate outside the window");
    return symbols[*i];
  }

  friend bool operator==(const Pattern& a, const Pattern& b) {
    return a.window == b.window && a.symbols == b.symbols;
  }
};

/// Metric weights w_g = 2^-(step * (pos(g) + 1)), pos being the index of g in
/// the word-length enumeration of G. With step 1 on an infinite group the
/// weights sum to exactly 1.
struct WeightScheme {
  unsigned step = 1;
  TieBreak tie = TieBreak::positive_first;
};

/// A subshift of finite type over a finitely generated group.
class SymbolicSystem {
 public:
  SymbolicSystem(GroupSpec group, std::vector<std::string> alphabet, std::vector<Pattern> forbidden = {},
                 WeightScheme weights = {})
      : group_(std::move(group)), alphabet_(std::move(alphabet)), forbidden_(std::move(forbidden)), weights_(weights) {
    if (alphabet_.empty()) throw argument_error("SymbolicSystem: empty alphabet");
    if (alphabet_.size() > 255) throw argument_error("SymbolicSystem: alphabet too large");
    if (weights_.step == 0) throw argument_error("SymbolicSystem: weight step must be positive");
    for (const auto& p : forbidden_) {
      if (p.window.empty()) throw argument_error("SymbolicSystem: forbidden pattern with empty window");
      for (const auto& g : p.window)
        if (!group_.contains(g)) throw argument_error("SymbolicSystem: forbidden pattern outside the group");
      for (Symbol s : p.symbols)
        if (s >= alphabet_.size()) throw argument_error("SymbolicSystem: forbidden symbol outside the alphabet");
    }
  }

  static SymbolicSystem full_shift(GroupSpec group, std::size_t symbols, WeightScheme weights = {}) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < symbols; ++i) names.push_back(std::to_string(i));
    return SymbolicSystem(std::move(group), std::move(names), {}, weights);
  }

  /// Binary shift on Z forbidding "11".
  static SymbolicSystem golden_mean() {
    auto z = GroupSpec::lattice(1);
    return SymbolicSystem(z, {"0", "1"}, {Pattern(interval(z, 0, 2), {1, 1})});
  }

  const GroupSpec& group() const { return group_; }
  std::size_t alphabet_size() const { return alphabet_.size(); }
  const std::vector<std::string>& alphabet() const { return alphabet_; }
  const std::vector<Pattern>& forbidden() const { return forbidden_; }
  const WeightScheme& weights() const { return weights_; }

  std::uint64_t position(const GroupElement& g) const { return group_.enumeration_index(g, weights_.tie); }

  rational weight(const GroupElement& g) const {
    return dyadic(static_cast<unsigned>(weights_.step * (position(g) + 1)));
  }

  /// Σ_{g ∉ W} w_g, exact for finite groups and for step 1; otherwise the
  /// dyadic upper bound 2^-(step*m + step - 1) on the tail past position m.
  rational tail(const FiniteSubset& w) const {
    std::vector<std::uint64_t> pos;
    pos.reserve(w.size());
    for (const auto& g : w) pos.push_back(position(g));
    std::sort(pos.begin(), pos.end());
    if (group_.is_finite()) {
      rational total = 0;
      const auto n = static_cast<std::uint64_t>(group_.order());
      for (std::uint64_t j = 0; j < n; ++j)
        if (!std::binary_search(pos.begin(), pos.end(), j)) total += dyadic(static_cast<unsigned>(weights_.step * (j + 1)));
      return total;
    }
    const std::uint64_t m = pos.empty() ? 0 : pos.back() + 1;
    rational total = 0;
    for (std::uint64_t j = 0; j < m; ++j)
      if (!std::binary_search(pos.begin(), pos.end(), j)) total += dyadic(static_cast<unsigned>(weights_.step * (j + 1)));
    total += dyadic(static_cast<unsigned>(weights_.step * m + weights_.step - 1));
    return total;
  }

 private:
  GroupSpec group_;
  std::vector<std::string> alphabet_;
  std::vector<Pattern> forbidden_;
  WeightScheme weights_;
};

/// g·p for the shift (g·x)_h = x_{hg}: the result lives on W·g^-1.
inline Pattern act(const GroupSpec& spec, const GroupElement& g, const Pattern& p) {
  return Pattern(right_translate(spec, p.window, spec.inverse(g)), p.symbols);
}

/// p restricted to `w`, in the order of `w`.
inline Pattern restrict(const Pattern& p, const FiniteSubset& w) {
  std::vector<Symbol> out;
  out.reserve(w.size());
  for (const auto& g : w) out.push_back(p.at(g));
  return Pattern(w, std::move(out));
}

/// All locally admissible patterns on a window, stored flat in
/// lexicographic order of the window's element order.
class Language {
 public:
  Language(FiniteSubset window, std::size_t alphabet_size) : window_(std::move(window)), alphabet_size_(alphabet_size) {}

  const FiniteSubset& window() const { return window_; }
  std::size_t width() const { return window_.size(); }
  std::size_t alphabet_size() const { return alphabet_size_; }
  std::size_t size() const { return count_; }

  std::span<const Symbol> operator[](std::size_t i) const {
    return {data_.data() + i * width(), width()};
  }

  Pattern pattern(std::size_t i) const {
    auto s = (*this)[i];
    return Pattern(window_, std::vector<Symbol>(s.begin(), s.end()));
  }

  std::optional<std::uint32_t> find(std::span<const Symbol> symbols) const {
    auto it = index_.find(key(symbols));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::uint32_t> find(const Pattern& p) const {
    if (!(p.window == window_)) return find(restrict(p, window_).symbols);
    return find(std::span<const Symbol>(p.symbols));
  }

  void push(std::span<const Symbol> symbols) {
    index_.emplace(key(symbols), static_cast<std::uint32_t>(count_));
    data_.insert(data_.end(), symbols.begin(), symbols.end());
    ++count_;
  }

 private:
  static std::string key(std::span<const Symbol> s) { return std::string(s.begin(), s.end()); }

  FiniteSubset window_;
  std::size_t alphabet_size_;
  std::size_t count_ = 0;
  std::vector<Symbol> data_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

namespace detail {

// An occurrence of a forbidden pattern inside a window: the positions (as
// window indices) it occupies and the symbols it forbids there. `trigger` is
// the largest position, where the search can first test it.
struct Occurrence {
  std::vector<std::size_t> positions;
  std::vector<Symbol> symbols;
  std::size_t trigger = 0;
};

inline std::vector<Occurrence> occurrences(const SymbolicSystem& sys, const FiniteSubset& w) {
  const auto& spec = sys.group();
  std::vector<Occurrence> out;
  for (const auto& q : sys.forbidden()) {
    std::vector<GroupElement> tried;
    for (const auto& h0 : q.window) {
      const auto h0_inv = spec.inverse(h0);
      for (const auto& x : w) {
        // Q sits at g when Q.window · g ⊆ W; anchor h0 at x.
        GroupElement g = spec.multiply(h0_inv, x);
        if (std::find(tried.begin(), tried.end(), g) != tried.end()) continue;
        tried.push_back(g);
        Occurrence occ;
        bool inside = true;
        for (std::size_t k = 0; k < q.window.size() && inside; ++k) {
          auto idx = w.index_of(spec.multiply(q.window[k], g));
          if (!idx) {
            inside = false;
          } else {
            occ.positions.push_back(*idx);
            occ.symbols.push_back(q.symbols[k]);
          }
        }
        if (!inside) continue;
        occ.trigger = *std::max_element(occ.positions.begin(), occ.positions.end());
        out.push_back(std::move(occ));
      }
    }
  }
  return out;
}

}  // namespace detail

/// Locally admissible patterns on `w`: no translate of a forbidden pattern
/// fits inside `w` and matches. Over budget (patterns stored) the search
/// stops with resource_error flagged partial.
inline Language language(const SymbolicSystem& sys, const FiniteSubset& w, std::size_t budget = 5'000'000) {
  Language lang(w, sys.alphabet_size());
  const auto occ = detail::occurrences(sys, w);
  std::vector<std::vector<const detail::Occurrence*>> by_trigger(w.size());
  for (const auto& o : occ) by_trigger[o.trigger].push_back(&o);
  std::vector<Symbol> current(w.size(), 0);
  const Symbol k = static_cast<Symbol>(sys.alphabet_size());
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == w.size()) {
      if (lang.size() >= budget) throw resource_error("language: pattern budget exceeded", true);
      lang.push(current);
      return;
    }
    for (Symbol s = 0; s < k; ++s) {
      current[i] = s;
      bool ok = true;
      for (const auto* o : by_trigger[i]) {
        bool match = true;
        for (std::size_t j = 0; j < o->positions.size() && match; ++j) match = current[o->positions[j]] == o->symbols[j];
        if (match) {
          ok = false;
          break;
        }
      }
      if (ok) self(self, i + 1);
    }
  };
  rec(rec, 0);
  return lang;
}

/// |L([0,n))| for a Z-subshift whose forbidden patterns have width at most 2
/// on consecutive sites, by transfer-matrix path counting.
inline big_int language_count_transfer(const SymbolicSystem& sys, int n) {
  const auto& spec = sys.group();
  if (spec.kind() != GroupKind::lattice || spec.rank() != 1) throw unsupported_error("transfer count needs Z");
  const std::size_t k = sys.alphabet_size();
  std::vector<char> allowed_symbol(k, 1);
  std::vector<std::vector<char>> allowed(k, std::vector<char>(k, 1));
  for (const auto& q : sys.forbidden()) {
    std::vector<std::pair<int, Symbol>> cells;
    for (std::size_t i = 0; i < q.window.size(); ++i) cells.emplace_back(q.window[i].coords[0], q.symbols[i]);
    std::sort(cells.begin(), cells.end());
    if (cells.size() == 1) {
      allowed_symbol[cells[0].second] = 0;
    } else if (cells.size() == 2 && cells[1].first == cells[0].first + 1) {
      allowed[cells[0].second][cells[1].second] = 0;
    } else {
      throw unsupported_error("transfer count needs nearest-neighbour constraints");
    }
  }
  if (n <= 0) return 1;
  std::vector<big_int> v(k);
  for (std::size_t a = 0; a < k; ++a) v[a] = allowed_symbol[a] ? 1 : 0;
  for (int step = 1; step < n; ++step) {
    std::vector<big_int> next(k, 0);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b)
        if (allowed[a][b] && allowed_symbol[b]) next[b] += v[a];
    v = std::move(next);
  }
  big_int total = 0;
  for (const auto& x : v) total += x;
  return total;
}

/// Distance bracket between any two points extending p and q.
struct RhoInterval {
  rational lo;
  rational hi;
};

/// lo = Σ_{g∈W} w_g [p_g ≠ q_g], hi = lo + tail(W).
inline RhoInterval rho(const SymbolicSystem& sys, const Pattern& p, const Pattern& q, const FiniteSubset& w) {
  if (!w.is_subset_of(p.window) || !w.is_subset_of(q.window)) throw argument_error("rho: patterns are not defined on W");
  rational lo = 0;
  for (const auto& g : w)
    if (p.at(g) != q.at(g)) lo += sys.weight(g);
  return {lo, lo + sys.tail(w)};
}

/// Shift-invariant Bernoulli or stationary Markov measure.
class MeasureModel {
 public:
  struct Bernoulli {
    std::vector<double> p;
  };
  struct Markov {
    std::vector<double> pi;
    std::vector<std::vector<double>> transition;
  };

  static MeasureModel bernoulli(std::vector<double> p) {
    check_distribution(p, "bernoulli");
    MeasureModel m;
    m.model_ = Bernoulli{std::move(p)};
    return m;
  }

  /// Markov chain on Z. Without `initial`, the stationary vector is solved for.
  static MeasureModel markov(std::vector<std::vector<double>> transition, std::optional<std::vector<double>> initial = std::nullopt) {
    const std::size_t k = transition.size();
    if (k == 0) throw argument_error("markov: empty transition matrix");
    for (const auto& row : transition) {
      if (row.size() != k) throw argument_error("markov: transition matrix is not square");
      check_distribution(row, "markov transition row");
    }
    std::vector<double> pi;
    if (initial) {
      pi = *initial;
      check_distribution(pi, "markov initial distribution");
      if (pi.size() != k) throw argument_error("markov: initial distribution has the wrong length");
      for (std::size_t j = 0; j < k; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < k; ++i) s += pi[i] * transition[i][j];
        if (std::abs(s - pi[j]) > 1e-12) throw argument_error("markov: initial distribution is not stationary");
      }
    } else {
      Eigen::MatrixXd a(k + 1, k);
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) a(j, i) = transition[i][j] - (i == j ? 1.0 : 0.0);
      for (std::size_t i = 0; i < k; ++i) a(k, i) = 1.0;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
      rhs(k) = 1.0;
      Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
      if ((a * sol - rhs).norm() > 1e-10) throw argument_error("markov: no unique stationary distribution");
      pi.assign(sol.data(), sol.data() + k);
      for (auto& x : pi) {
        if (x < -1e-12) throw argument_error("markov: stationary vector has negative entries");
        x = std::max(0.0, x);
      }
    }
    MeasureModel m;
    m.model_ = Markov{std::move(pi), std::move(transition)};
    return m;
  }

  /// The measure of maximal entropy of a nearest-neighbour Z-SFT with
  /// irreducible 0/1 adjacency matrix.
  static MeasureModel parry(const std::vector<std::vector<int>>& adjacency) {
    const std::size_t k = adjacency.size();
    Eigen::MatrixXd a(k, k);
    for (std::size_t i = 0; i < k; ++i) {
      if (adjacency[i].size() != k) throw argument_error("parry: adjacency matrix is not square");
      for (std::size_t j = 0; j < k; ++j) a(i, j) = adjacency[i][j];
    }
    Eigen::EigenSolver<Eigen::MatrixXd> right(a), left(a.transpose());
    auto perron = [k](const Eigen::EigenSolver<Eigen::MatrixXd>& es, double& lambda) {
      Eigen::Index best = 0;
      for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(k); ++i)
        if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
      lambda = es.eigenvalues()(best).real();
      Eigen::VectorXd v = es.eigenvectors().col(best).real();
      if (v.sum() < 0) v = -v;
      return v;
    };
    double lambda = 0, lambda2 = 0;
    const Eigen::VectorXd v = perron(right, lambda);
    const Eigen::VectorXd u = perron(left, lambda2);
    std::vector<std::vector<double>> p(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (adjacency[i][j]) p[i][j] = v(j) / (lambda * v(i));
    std::vector<double> pi(k);
    double norm = u.dot(v);
    for (std::size_t i = 0; i < k; ++i) pi[i] = u(i) * v(i) / norm;
    for (auto& row : p) {
      double s = 0;
      for (double x : row) s += x;
      for (double& x : row) x /= s;
    }
    MeasureModel m;
    m.model_ = Markov{std::move(pi), std::move(p)};
    return m;
  }

  bool is_markov() const { return std::holds_alternative<Markov>(model_); }
  std::size_t alphabet_size() const {
    return is_markov() ? std::get<Markov>(model_).pi.size() : std::get<Bernoulli>(model_).p.size();
  }
  const Bernoulli* as_bernoulli() const { return std::get_if<Bernoulli>(&model_); }
  const Markov* as_markov() const { return std::get_if<Markov>(&model_); }

  /// Single-site marginal.
  const std::vector<double>& marginal() const {
    return is_markov() ? std::get<Markov>(model_).pi : std::get<Bernoulli>(model_).p;
  }

  /// Closed-form entropy per site in nats.
  double entropy_rate() const {
    auto xlogx = [](double x) { return x > 0 ? x * std::log(x) : 0.0; };
    double h = 0;
    if (const auto* b = as_bernoulli()) {
      for (double x : b->p) h -= xlogx(x);
      return h;
    }
    const auto& m = std::get<Markov>(model_);
    for (std::size_t i = 0; i < m.pi.size(); ++i)
      for (double x : m.transition[i]) h -= m.pi[i] * xlogx(x);
    return h;
  }

 private:
  static void check_distribution(const std::vector<double>& p, const char* what) {
    if (p.empty()) throw argument_error(std::string(what) + ": empty probability vector");
    double s = 0;
    for (double x : p) {
      if (!(x >= 0.0)) throw argument_error(std::string(what) + ": negative probability");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw argument_error(std::string(what) + ": probabilities do not sum to 1");
  }

  std::variant<Bernoulli, Markov> model_;
};

/// μ{x : x|_W = p}.
inline double cylinder_measure(const MeasureModel& mu, const Pattern& p) {
  for (Symbol s : p.symbols)
    if (s >= mu.alphabet_size()) throw argument_error("cylinder_measure: symbol outside the measure's alphabet");
  if (const auto* b = mu.as_bernoulli()) {
    double r = 1.0;
    for (Symbol s : p.symbols) r *= b->p[s];
    return r;
  }
  const auto* m = mu.as_markov();
  if (p.window.empty()) return 1.0;
  std::vector<std::pair<int, Symbol>> cells;
  for (std::size_t i = 0; i < p.window.size(); ++i) {
    const auto& c = p.window[i].coords;
    if (c.size() != 1) throw unsupported_error("cylinder_measure: Markov measures live on Z");
    cells.emplace_back(c[0], p.symbols[i]);
  }
  std::sort(cells.begin(), cells.end());
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (cells[i].first != cells[i - 1].first + 1) throw unsupported_error("cylinder_measure: Markov cylinders need an interval window");
  double r = m->pi[cells[0].second];
  for (std::size_t i = 1; i < cells.size(); ++i) r *= m->transition[cells[i - 1].second][cells[i].second];
  return r;
}

/// A continuous function depending only on the coordinates in its window,
/// tabulated over all |A|^|W| patterns (first window element most significant).
class TestFunction {
 public:
  static TestFunction constant(double c, std::size_t alphabet_size) {
    return TestFunction(FiniteSubset(), alphabet_size, {c});
  }

  /// 1 on the cylinder [q], 0 elsewhere.
  static TestFunction indicator(const Pattern& q, std::size_t alphabet_size) {
    TestFunction f(q.window, alphabet_size, {});
    f.values_.assign(f.table_size(), 0.0);
    f.values_[f.code(q.symbols)] = 1.0;
    f.sup_ = 1.0;
    return f;
  }

  static TestFunction table(FiniteSubset window, std::size_t alphabet_size, std::vector<double> values) {
    return TestFunction(std::move(window), alphabet_size, std::move(values));
  }

  const FiniteSubset& window() const { return window_; }
  std::size_t alphabet_size() const { return k_; }
  const std::vector<double>& values() const { return values_; }
  double sup_norm() const { return sup_; }

  double operator()(std::span<const Symbol> symbols_on_window) const { return values_[code(symbols_on_window)]; }

  /// Value at any point extending p; p's window must contain the window of f.
  double operator()(const Pattern& p) const {
    std::vector<Symbol> s;
    s.reserve(window_.size());
    for (const auto& g : window_) s.push_back(p.at(g));
    return values_[code(s)];
  }

  /// x ↦ f(g·x), which reads x on W·g.
  TestFunction compose(const GroupSpec& spec, const GroupElement& g) const {
    return TestFunction(right_translate(spec, window_, g), k_, values_);
  }

  std::size_t table_size() const {
    std::size_t n = 1;
    for (std::size_t i = 0; i < window_.size(); ++i) n *= k_;
    return n;
  }

  std::vector<Symbol> decode(std::size_t code) const {
    std::vector<Symbol> s(window_.size());
    for (std::size_t i = window_.size(); i-- > 0;) {
      s[i] = static_cast<Symbol>(code % k_);
      code /= k_;
    }
    return s;
  }

 private:
  TestFunction(FiniteSubset window, std::size_t k, std::vector<double> values)
      : window_(std::move(window)), k_(k), values_(std::move(values)) {
    if (k_ == 0) throw argument_error("TestFunction: empty alphabet");
    if (window_.size() > 20) throw resource_error("TestFunction: window too large to tabulate");
    if (!values_.empty() && values_.size() != table_size()) throw argument_error("TestFunction: table has the wrong size");
    for (double v : values_) sup_ = std::max(sup_, std::abs(v));
  }

  std::size_t code(std::span<const Symbol> s) const {
    std::size_t c = 0;
    for (Symbol x : s) {
      if (x >= k_) throw argument_error("TestFunction: symbol outside the alphabet");
      c = c * k_ + x;
    }
    return c;
  }

  FiniteSubset window_;
  std::size_t k_;
  std::vector<double> values_;
  double sup_ = 0.0;
};

/// μ(f) = Σ_p f(p) μ[p] over all patterns on the window of f.
inline double integrate(const MeasureModel& mu, const TestFunction& f) {
  double total = 0.0;
  for (std::size_t c = 0; c < f.table_size(); ++c) {
    if (f.values()[c] == 0.0) continue;
    total += f.values()[c] * cylinder_measure(mu, Pattern(f.window(), f.decode(c)));
  }
  return total;
}

}  // namespace soficlab
