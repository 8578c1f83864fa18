#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "soficlab/error.hpp"

namespace soficlab {

/// An element of a finitely generated group.
///
/// The meaning of `coords` depends on the owning GroupSpec: an integer vector
/// for Z^k, a single table index for a finite group, and a freely reduced
/// word for F_r with letters +(i+1) for generator i and -(i+1) for its
/// inverse. Elements carry no pointer to their group; operations validate
/// membership through the GroupSpec.
struct GroupElement {
  std::vector<int> coords;

  friend auto operator<=>(const GroupElement&, const GroupElement&) = default;
};

struct GroupElementHash {
  std::size_t operator()(const GroupElement& g) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL ^ g.coords.size();
    for (int c : g.coords) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(c)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

enum class GroupKind { lattice, finite, free_group };

/// Order of elements of equal word length in the canonical enumeration of G.
enum class TieBreak { positive_first, negative_first };

class GroupSpec {
 public:
  static GroupSpec lattice(int k) {
    if (k < 1) throw argument_error("lattice rank must be >= 1");
    GroupSpec g;
    g.kind_ = GroupKind::lattice;
    g.rank_ = k;
    for (int i = 0; i < k; ++i) {
      std::vector<int> plus(k, 0), minus(k, 0);
      plus[i] = 1;
      minus[i] = -1;
      g.generators_.push_back({plus});
      g.generators_.push_back({minus});
    }
    return g;
  }

  static GroupSpec free_group(int rank) {
    if (rank < 1) throw argument_error("free group rank must be >= 1");
    GroupSpec g;
    g.kind_ = GroupKind::free_group;
    g.rank_ = rank;
    for (int i = 0; i < rank; ++i) {
      g.generators_.push_back({{i + 1}});
      g.generators_.push_back({{-(i + 1)}});
    }
    return g;
  }

  /// Finite group from its multiplication table, table[a][b] = a*b.
  ///
  /// `generators` are table indices; inverses are added automatically. An
  /// empty list uses every non-identity element.
  static GroupSpec finite(std::vector<std::vector<int>> table, std::vector<int> generators = {}) {
    const int n = static_cast<int>(table.size());
    if (n == 0) throw argument_error("finite group table is empty");
    for (const auto& row : table) {
      if (static_cast<int>(row.size()) != n) throw argument_error("finite group table is not square");
      std::vector<char> seen(n, 0);
      for (int v : row) {
        if (v < 0 || v >= n || seen[v]) throw argument_error("finite group table is not a Latin square");
        seen[v] = 1;
      }
    }
    for (int b = 0; b < n; ++b) {
      std::vector<char> seen(n, 0);
      for (int a = 0; a < n; ++a) {
        if (seen[table[a][b]]) throw argument_error("finite group table is not a Latin square");
        seen[table[a][b]] = 1;
      }
    }
    int identity = -1;
    for (int e = 0; e < n && identity < 0; ++e) {
      bool neutral = true;
      for (int a = 0; a < n && neutral; ++a) neutral = table[e][a] == a && table[a][e] == a;
      if (neutral) identity = e;
    }
    if (identity < 0) throw argument_error("finite group table has no identity");
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          if (table[table[a][b]][c] != table[a][table[b][c]])
            throw argument_error("finite group table is not associative");

    GroupSpec g;
    g.kind_ = GroupKind::finite;
    g.table_ = std::move(table);
    g.identity_ = identity;
    g.inverse_.assign(n, -1);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (g.table_[a][b] == identity) g.inverse_[a] = b;

    if (generators.empty()) {
      for (int a = 0; a < n; ++a)
        if (a != identity) generators.push_back(a);
    }
    std::vector<int> gens;
    for (int s : generators) {
      if (s < 0 || s >= n) throw argument_error("finite group generator out of range");
      if (s == identity) continue;
      for (int t : {s, g.inverse_[s]})
        if (std::find(gens.begin(), gens.end(), t) == gens.end()) gens.push_back(t);
    }
    for (int s : gens) g.generators_.push_back({{s}});

    // Breadth-first search over the right Cayley graph: distances and a
    // shortest word for every element.
    g.distance_.assign(n, -1);
    g.words_.assign(n, {});
    g.distance_[identity] = 0;
    std::deque<int> queue{identity};
    while (!queue.empty()) {
      const int a = queue.front();
      queue.pop_front();
      for (std::size_t k = 0; k < gens.size(); ++k) {
        const int b = g.table_[a][gens[k]];
        if (g.distance_[b] >= 0) continue;
        g.distance_[b] = g.distance_[a] + 1;
        g.words_[b] = g.words_[a];
        g.words_[b].push_back(static_cast<int>(k));
        queue.push_back(b);
      }
    }
    if (std::any_of(g.distance_.begin(), g.distance_.end(), [](int d) { return d < 0; }))
      throw argument_error("finite group generators do not generate the group");
    return g;
  }

  /// Z/n as a finite group, generated by 1.
  static GroupSpec cyclic(int n) {
    if (n < 1) throw argument_error("cyclic group order must be >= 1");
    std::vector<std::vector<int>> table(n, std::vector<int>(n));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) table[a][b] = (a + b) % n;
    return finite(std::move(table), n > 1 ? std::vector<int>{1} : std::vector<int>{});
  }

  GroupKind kind() const { return kind_; }
  /// Lattice dimension or free rank; 0 for finite groups.
  int rank() const { return rank_; }
  /// Number of elements of a finite group; 0 otherwise.
  int order() const { return kind_ == GroupKind::finite ? static_cast<int>(table_.size()) : 0; }
  bool is_finite() const { return kind_ == GroupKind::finite; }
  bool is_amenable() const { return kind_ != GroupKind::free_group; }

  GroupElement identity() const {
    switch (kind_) {
      case GroupKind::lattice: return {std::vector<int>(rank_, 0)};
      case GroupKind::finite: return {{identity_}};
      case GroupKind::free_group: return {};
    }
    return {};
  }

  bool contains(const GroupElement& g) const {
    switch (kind_) {
      case GroupKind::lattice: return static_cast<int>(g.coords.size()) == rank_;
      case GroupKind::finite: return g.coords.size() == 1 && g.coords[0] >= 0 && g.coords[0] < order();
      case GroupKind::free_group:
        for (std::size_t i = 0; i < g.coords.size(); ++i) {
          const int c = g.coords[i];
          if (c == 0 || std::abs(c) > rank_) return false;
          if (i > 0 && g.coords[i - 1] == -c) return false;
        }
        return true;
    }
    return false;
  }

  GroupElement multiply(const GroupElement& a, const GroupElement& b) const {
    require(a);
    require(b);
    switch (kind_) {
      case GroupKind::lattice: {
        GroupElement r = a;
        for (int i = 0; i < rank_; ++i) r.coords[i] += b.coords[i];
        return r;
      }
      case GroupKind::finite: return {{table_[a.coords[0]][b.coords[0]]}};
      case GroupKind::free_group: {
        std::vector<int> w = a.coords;
        for (int c : b.coords) {
          if (!w.empty() && w.back() == -c) {
            w.pop_back();
          } else {
            w.push_back(c);
          }
        }
        return {std::move(w)};
      }
    }
    return {};
  }

  GroupElement inverse(const GroupElement& a) const {
    require(a);
    switch (kind_) {
      case GroupKind::lattice: {
        GroupElement r = a;
        for (int& c : r.coords) c = -c;
        return r;
      }
      case GroupKind::finite: return {{inverse_[a.coords[0]]}};
      case GroupKind::free_group: {
        std::vector<int> w(a.coords.rbegin(), a.coords.rend());
        for (int& c : w) c = -c;
        return {std::move(w)};
      }
    }
    return {};
  }

  /// The symmetric generating set S ∪ S^-1 in a fixed order.
  const std::vector<GroupElement>& generators() const { return generators_; }

  /// A shortest expression g = s_1 s_2 ... s_k with every s_i in generators().
  std::vector<GroupElement> word(const GroupElement& g) const {
    require(g);
    std::vector<GroupElement> out;
    switch (kind_) {
      case GroupKind::lattice:
        for (int i = 0; i < rank_; ++i) {
          const GroupElement& step = generators_[2 * i + (g.coords[i] < 0 ? 1 : 0)];
          for (int k = 0; k < std::abs(g.coords[i]); ++k) out.push_back(step);
        }
        break;
      case GroupKind::finite:
        for (int k : words_[g.coords[0]]) out.push_back(generators_[k]);
        break;
      case GroupKind::free_group:
        for (int c : g.coords) out.push_back({{c}});
        break;
    }
    return out;
  }

  int word_length(const GroupElement& g) const {
    require(g);
    switch (kind_) {
      case GroupKind::lattice: {
        int s = 0;
        for (int c : g.coords) s += std::abs(c);
        return s;
      }
      case GroupKind::finite: return distance_[g.coords[0]];
      case GroupKind::free_group: return static_cast<int>(g.coords.size());
    }
    return 0;
  }

  /// Position of g in the enumeration of G by word length, ties broken by
  /// `tie`. The identity has position 0.
  std::uint64_t enumeration_index(const GroupElement& g, TieBreak tie = TieBreak::positive_first) const {
    require(g);
    switch (kind_) {
      case GroupKind::lattice: {
        const int r = word_length(g);
        std::uint64_t before = r == 0 ? 0 : lattice_ball_size(rank_, r - 1);
        const auto sphere = lattice_sphere(r, tie);
        const auto it = std::lower_bound(sphere.begin(), sphere.end(), g, [&](const GroupElement& x, const GroupElement& y) {
          return lattice_key(x, tie) < lattice_key(y, tie);
        });
        return before + static_cast<std::uint64_t>(it - sphere.begin());
      }
      case GroupKind::finite: {
        std::uint64_t pos = 0;
        const int a = g.coords[0];
        for (int b = 0; b < order(); ++b) {
          if (finite_less(b, a, tie)) ++pos;
        }
        return pos;
      }
      case GroupKind::free_group: {
        const std::uint64_t len = g.coords.size();
        const std::uint64_t letters = 2 * static_cast<std::uint64_t>(rank_);
        if (len > 24) throw resource_error("enumeration_index: free word too long for weight bookkeeping");
        std::uint64_t before = 1;
        std::uint64_t sphere = letters;
        for (std::uint64_t j = 1; j < len; ++j) {
          before += sphere;
          sphere *= letters - 1;
        }
        if (len == 0) return 0;
        std::uint64_t rank_in_sphere = 0;
        for (std::uint64_t i = 0; i < len; ++i) {
          std::uint64_t smaller = 0;
          const int code = letter_code(g.coords[i], tie);
          for (int c = 0; c < code; ++c) {
            const int letter = letter_from_code(c, tie);
            if (i > 0 && letter == -g.coords[i - 1]) continue;
            ++smaller;
          }
          std::uint64_t tail = 1;
          for (std::uint64_t j = i + 1; j < len; ++j) tail *= letters - 1;
          rank_in_sphere += smaller * tail;
        }
        return before + rank_in_sphere;
      }
    }
    return 0;
  }

  /// All elements of word length <= radius in enumeration order.
  std::vector<GroupElement> ball(int radius, TieBreak tie = TieBreak::positive_first) const {
    if (radius < 0) return {};
    std::vector<GroupElement> out;
    switch (kind_) {
      case GroupKind::lattice:
        for (int r = 0; r <= radius; ++r) {
          auto s = lattice_sphere(r, tie);
          out.insert(out.end(), s.begin(), s.end());
        }
        break;
      case GroupKind::finite: {
        std::vector<int> idx;
        for (int a = 0; a < order(); ++a)
          if (distance_[a] <= radius) idx.push_back(a);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return finite_less(a, b, tie); });
        for (int a : idx) out.push_back({{a}});
        break;
      }
      case GroupKind::free_group: {
        std::vector<GroupElement> layer{identity()};
        out.push_back(identity());
        for (int r = 1; r <= radius; ++r) {
          std::vector<GroupElement> next;
          for (const auto& w : layer) {
            for (int c = 0; c < 2 * rank_; ++c) {
              const int letter = letter_from_code(c, tie);
              if (!w.coords.empty() && w.coords.back() == -letter) continue;
              GroupElement x = w;
              x.coords.push_back(letter);
              next.push_back(std::move(x));
            }
          }
          out.insert(out.end(), next.begin(), next.end());
          layer = std::move(next);
        }
        break;
      }
    }
    return out;
  }

  /// Z (rank 1) or finite index element.
  GroupElement element(int x) const {
    if (kind_ == GroupKind::lattice && rank_ == 1) return {{x}};
    if (kind_ == GroupKind::finite) {
      GroupElement g{{x}};
      require(g);
      return g;
    }
    throw argument_error("element(int) needs Z or a finite group");
  }

  GroupElement element(std::vector<int> v) const {
    GroupElement g{std::move(v)};
    require(g);
    return g;
  }

  /// Free group word in letters a, b, c, ... with upper case for inverses;
  /// "e" or "" is the identity. The word is reduced on parse.
  GroupElement parse_word(std::string_view text) const {
    if (kind_ != GroupKind::free_group) throw argument_error("parse_word needs a free group");
    GroupElement g = identity();
    if (text == "e") return g;
    for (char ch : text) {
      int letter = 0;
      if (ch >= 'a' && ch <= 'z') letter = ch - 'a' + 1;
      else if (ch >= 'A' && ch <= 'Z') letter = -(ch - 'A' + 1);
      if (letter == 0 || std::abs(letter) > rank_) throw argument_error("free word letter out of range: " + std::string(1, ch));
      g = multiply(g, GroupElement{{letter}});
    }
    return g;
  }

  std::string to_string(const GroupElement& g) const {
    switch (kind_) {
      case GroupKind::lattice: {
        if (rank_ == 1) return std::to_string(g.coords.at(0));
        std::string s = "(";
        for (std::size_t i = 0; i < g.coords.size(); ++i) {
          if (i) s += ",";
          s += std::to_string(g.coords[i]);
        }
        return s + ")";
      }
      case GroupKind::finite: return std::to_string(g.coords.at(0));
      case GroupKind::free_group: {
        if (g.coords.empty()) return "e";
        std::string s;
        for (int c : g.coords) s += c > 0 ? static_cast<char>('a' + c - 1) : static_cast<char>('A' - c - 1);
        return s;
      }
    }
    return {};
  }

  friend bool operator==(const GroupSpec& a, const GroupSpec& b) {
    return a.kind_ == b.kind_ && a.rank_ == b.rank_ && a.table_ == b.table_ && a.generators_ == b.generators_;
  }

 private:
  void require(const GroupElement& g) const {
    if (!contains(g)) throw argument_error("group element does not belong to this group");
  }

  static std::uint64_t binom(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  // Number of points of Z^k with L1 norm <= r.
  static std::uint64_t lattice_ball_size(int k, int r) {
    std::uint64_t total = 0;
    for (int i = 0; i <= std::min(k, r); ++i) total += (1ULL << i) * binom(k, i) * binom(r, i);
    return total;
  }

  static int coordinate_key(int x, TieBreak tie) {
    if (x == 0) return 0;
    const bool first = tie == TieBreak::positive_first ? x > 0 : x < 0;
    return 2 * std::abs(x) - (first ? 1 : 0);
  }

  static std::vector<int> lattice_key(const GroupElement& g, TieBreak tie) {
    std::vector<int> key;
    key.reserve(g.coords.size());
    for (int c : g.coords) key.push_back(coordinate_key(c, tie));
    return key;
  }

  std::vector<GroupElement> lattice_sphere(int r, TieBreak tie) const {
    std::vector<GroupElement> out;
    std::vector<int> v(rank_, 0);
    auto rec = [&](auto&& self, int i, int remaining) -> void {
      if (i == rank_ - 1) {
        if (remaining == 0) {
          v[i] = 0;
          out.push_back({v});
        } else {
          v[i] = remaining;
          out.push_back({v});
          v[i] = -remaining;
          out.push_back({v});
        }
        return;
      }
      for (int a = 0; a <= remaining; ++a) {
        for (int sign : {1, -1}) {
          if (a == 0 && sign < 0) continue;
          v[i] = sign * a;
          self(self, i + 1, remaining - a);
        }
      }
    };
    rec(rec, 0, r);
    std::sort(out.begin(), out.end(), [&](const GroupElement& x, const GroupElement& y) {
      return lattice_key(x, tie) < lattice_key(y, tie);
    });
    return out;
  }

  bool finite_less(int a, int b, TieBreak tie) const {
    if (distance_[a] != distance_[b]) return distance_[a] < distance_[b];
    return tie == TieBreak::positive_first ? a < b : a > b;
  }

  static int letter_code(int letter, TieBreak tie) {
    const int base = 2 * (std::abs(letter) - 1);
    const bool first = tie == TieBreak::positive_first ? letter > 0 : letter < 0;
    return base + (first ? 0 : 1);
  }

  static int letter_from_code(int code, TieBreak tie) {
    const int gen = code / 2 + 1;
    const bool first = code % 2 == 0;
    const bool positive = tie == TieBreak::positive_first ? first : !first;
    return positive ? gen : -gen;
  }

  GroupKind kind_ = GroupKind::lattice;
  int rank_ = 0;
  std::vector<std::vector<int>> table_;
  std::vector<int> inverse_;
  int identity_ = 0;
  std::vector<int> distance_;
  std::vector<std::vector<int>> words_;
  std::vector<GroupElement> generators_;
};

/// An ordered, duplicate-free finite subset of a group.
class FiniteSubset {
 public:
  FiniteSubset() = default;

  explicit FiniteSubset(std::vector<GroupElement> elements) : elements_(std::move(elements)) {
    index_.reserve(elements_.size());
    for (std::size_t i = 0; i < elements_.size(); ++i) {
      if (!index_.emplace(elements_[i], i).second) throw argument_error("FiniteSubset: duplicate element");
    }
  }

  std::size_t size() const { return elements_.size(); }
  bool empty() const { return elements_.empty(); }
  const GroupElement& operator[](std::size_t i) const { return elements_[i]; }
  auto begin() const { return elements_.begin(); }
  auto end() const { return elements_.end(); }
  const std::vector<GroupElement>& elements() const { return elements_; }

  bool contains(const GroupElement& g) const { return index_.count(g) != 0; }

  std::optional<std::size_t> index_of(const GroupElement& g) const {
    auto it = index_.find(g);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_subset_of(const FiniteSubset& other) const {
    return std::all_of(elements_.begin(), elements_.end(), [&](const GroupElement& g) { return other.contains(g); });
  }

  friend bool operator==(const FiniteSubset& a, const FiniteSubset& b) { return a.elements_ == b.elements_; }

 private:
  std::vector<GroupElement> elements_;
  std::unordered_map<GroupElement, std::size_t, GroupElementHash> index_;
};

/// Elements of `a` followed by the elements of `b` not already present.
inline FiniteSubset set_union(const FiniteSubset& a, const FiniteSubset& b) {
  std::vector<GroupElement> out = a.elements();
  for (const auto& g : b)
    if (!a.contains(g)) out.push_back(g);
  return FiniteSubset(std::move(out));
}

/// W·g, in the order of W.
inline FiniteSubset right_translate(const GroupSpec& spec, const FiniteSubset& w, const GroupElement& g) {
  std::vector<GroupElement> out;
  out.reserve(w.size());
  for (const auto& h : w) out.push_back(spec.multiply(h, g));
  return FiniteSubset(std::move(out));
}

/// g·F, in the order of F.
inline FiniteSubset left_translate(const GroupSpec& spec, const GroupElement& g, const FiniteSubset& f) {
  std::vector<GroupElement> out;
  out.reserve(f.size());
  for (const auto& h : f) out.push_back(spec.multiply(g, h));
  return FiniteSubset(std::move(out));
}

/// {a·b : a ∈ A, b ∈ B}, deduplicated in first-seen order.
inline FiniteSubset product_set(const GroupSpec& spec, const FiniteSubset& a, const FiniteSubset& b) {
  std::vector<GroupElement> out;
  std::unordered_map<GroupElement, char, GroupElementHash> seen;
  for (const auto& x : a)
    for (const auto& y : b) {
      auto z = spec.multiply(x, y);
      if (seen.emplace(z, 1).second) out.push_back(std::move(z));
    }
  return FiniteSubset(std::move(out));
}

/// Integer interval {lo, ..., hi-1} in Z.
inline FiniteSubset interval(const GroupSpec& spec, int lo, int hi) {
  if (spec.kind() != GroupKind::lattice || spec.rank() != 1) throw argument_error("interval needs Z");
  std::vector<GroupElement> out;
  for (int x = lo; x < hi; ++x) out.push_back({{x}});
  return FiniteSubset(std::move(out));
}

/// The Følner set of index n: the box [0,n)^k in Z^k (lexicographic order,
/// last coordinate fastest) or the whole group when G is finite.
inline FiniteSubset folner_set(const GroupSpec& spec, int n) {
  if (!spec.is_amenable()) throw unsupported_error("folner_set: free groups have no Følner sets here; use a sofic map");
  if (n < 1) throw argument_error("folner_set: n must be >= 1");
  std::vector<GroupElement> out;
  if (spec.is_finite()) {
    for (int a = 0; a < spec.order(); ++a) out.push_back({{a}});
    return FiniteSubset(std::move(out));
  }
  const int k = spec.rank();
  std::vector<int> v(k, 0);
  while (true) {
    out.push_back({v});
    int i = k - 1;
    while (i >= 0 && ++v[i] == n) {
      v[i] = 0;
      --i;
    }
    if (i < 0) break;
  }
  return FiniteSubset(std::move(out));
}

/// max over g in K of |gF Δ F| / |F|.
inline double invariance_defect(const GroupSpec& spec, const FiniteSubset& f, const FiniteSubset& k) {
  if (f.empty()) throw argument_error("invariance_defect: F is empty");
  std::size_t worst = 0;
  for (const auto& g : k) {
    std::size_t inside = 0;
    for (const auto& x : f)
      if (f.contains(spec.multiply(g, x))) ++inside;
    worst = std::max(worst, 2 * (f.size() - inside));
  }
  return static_cast<double>(worst) / static_cast<double>(f.size());
}

/// n ↦ folner_set(spec, n).
struct FolnerSequence {
  GroupSpec spec;

  explicit FolnerSequence(GroupSpec s) : spec(std::move(s)) {
    if (!spec.is_amenable()) throw unsupported_error("FolnerSequence: group is not amenable");
  }

  FiniteSubset operator()(int n) const { return folner_set(spec, n); }
};

}  // namespace soficlab
