#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <variant>
#include <vector>

#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/group.hpp"

namespace soficlab {

/// A permutation of {0, ..., d-1}; point a maps to perm[a].
using Permutation = std::vector<std::uint32_t>;

enum class SoficProvenance { cyclic_from_folner, folner_fill, random_free, explicit_map };

/// How from_folner extends translation to a bijection of F.
enum class FolnerModel {
  /// g·f if it stays in F; the leftover points fill the holes F \ gF in index order.
  translate_fill,
  /// Exact torus (Z^k on a box) or left regular representation (finite G).
  cyclic,
};

namespace detail {

struct CyclicModel {
  // Lattice: box side and dimension. Finite: number of copies of G.
  int side = 0;
  int dim = 0;
  int copies = 0;
};

struct FillModel {
  FiniteSubset folner;
};

struct FreeModel {
  std::vector<Permutation> forward;
  std::vector<Permutation> backward;
};

struct ExplicitModel {
  std::map<GroupElement, Permutation> images;
};

using SoficModel = std::variant<CyclicModel, FillModel, FreeModel, ExplicitModel>;

inline Permutation invert(const Permutation& p) {
  Permutation q(p.size());
  for (std::size_t a = 0; a < p.size(); ++a) q[p[a]] = static_cast<std::uint32_t>(a);
  return q;
}

inline bool is_bijection(const Permutation& p, std::size_t d) {
  if (p.size() != d) return false;
  std::vector<char> seen(d, 0);
  for (auto v : p) {
    if (v >= d || seen[v]) return false;
    seen[v] = 1;
  }
  return true;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform draw in [0, bound) by rejection; portable across standard libraries.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace detail

/// σ: G → Sym(d), defined on all of G by a construction rule.
///
/// Immutable and cheap to copy; the construction data is shared.
class SoficMap {
 public:
  std::size_t d() const { return d_; }
  const GroupSpec& group() const { return *group_; }
  SoficProvenance provenance() const { return provenance_; }

  /// The Følner set indexing {0..d-1}, for maps built from one.
  const FiniteSubset* folner_set() const {
    if (auto* fill = std::get_if<detail::FillModel>(model_.get())) return &fill->folner;
    return cyclic_folner_ ? cyclic_folner_.get() : nullptr;
  }

  /// σ_g as a full permutation.
  Permutation image(const GroupElement& g) const {
    if (!group_->contains(g)) throw argument_error("SoficMap: element not in the group");
    return std::visit([&](const auto& m) { return image_of(m, g); }, *model_);
  }

  /// Build from raw parts. Prefer the named constructors below.
  SoficMap(std::shared_ptr<const GroupSpec> group, std::size_t d, SoficProvenance provenance,
           std::shared_ptr<const detail::SoficModel> model, std::shared_ptr<const FiniteSubset> cyclic_folner = nullptr)
      : group_(std::move(group)), d_(d), provenance_(provenance), model_(std::move(model)), cyclic_folner_(std::move(cyclic_folner)) {}

 private:
  Permutation image_of(const detail::CyclicModel& m, const GroupElement& g) const {
    Permutation p(d_);
    if (group_->is_finite()) {
      const int n = group_->order();
      for (std::size_t a = 0; a < d_; ++a) {
        const int copy = static_cast<int>(a) / n;
        const int elem = static_cast<int>(a) % n;
        p[a] = static_cast<std::uint32_t>(copy * n + group_->multiply(g, GroupElement{{elem}}).coords[0]);
      }
      return p;
    }
    std::vector<int> coords(m.dim);
    for (std::size_t a = 0; a < d_; ++a) {
      std::size_t rest = a;
      for (int i = m.dim - 1; i >= 0; --i) {
        coords[i] = static_cast<int>(rest % m.side);
        rest /= m.side;
      }
      std::size_t idx = 0;
      for (int i = 0; i < m.dim; ++i) {
        int c = (coords[i] + g.coords[i]) % m.side;
        if (c < 0) c += m.side;
        idx = idx * m.side + static_cast<std::size_t>(c);
      }
      p[a] = static_cast<std::uint32_t>(idx);
    }
    return p;
  }

  Permutation image_of(const detail::FillModel& m, const GroupElement& g) const {
    const auto& f = m.folner;
    Permutation p(d_);
    std::vector<char> hit(d_, 0);
    std::vector<std::size_t> leftovers;
    for (std::size_t a = 0; a < d_; ++a) {
      auto idx = f.index_of(group_->multiply(g, f[a]));
      if (idx) {
        p[a] = static_cast<std::uint32_t>(*idx);
        hit[*idx] = 1;
      } else {
        leftovers.push_back(a);
      }
    }
    std::size_t next = 0;
    for (std::size_t b = 0; b < d_; ++b) {
      if (!hit[b]) p[leftovers[next++]] = static_cast<std::uint32_t>(b);
    }
    return p;
  }

  Permutation image_of(const detail::FreeModel& m, const GroupElement& g) const {
    Permutation p(d_);
    for (std::size_t a = 0; a < d_; ++a) {
      std::uint32_t x = static_cast<std::uint32_t>(a);
      for (auto it = g.coords.rbegin(); it != g.coords.rend(); ++it) {
        const int c = *it;
        x = c > 0 ? m.forward[c - 1][x] : m.backward[-c - 1][x];
      }
      p[a] = x;
    }
    return p;
  }

  Permutation image_of(const detail::ExplicitModel& m, const GroupElement& g) const {
    if (auto it = m.images.find(g); it != m.images.end()) return it->second;
    Permutation p(d_);
    for (std::size_t a = 0; a < d_; ++a) p[a] = static_cast<std::uint32_t>(a);
    const auto word = group_->word(g);
    for (auto it = word.rbegin(); it != word.rend(); ++it) {
      Permutation step;
      if (auto s = m.images.find(*it); s != m.images.end()) {
        step = s->second;
      } else if (auto t = m.images.find(group_->inverse(*it)); t != m.images.end()) {
        step = detail::invert(t->second);
      } else {
        throw argument_error("explicit sofic map: no image for generator " + group_->to_string(*it));
      }
      for (auto& x : p) x = step[x];
    }
    return p;
  }

  std::shared_ptr<const GroupSpec> group_;
  std::size_t d_;
  SoficProvenance provenance_;
  std::shared_ptr<const detail::SoficModel> model_;
  std::shared_ptr<const FiniteSubset> cyclic_folner_;
};

/// σ built from a Følner set F: d = |F| and a ↔ f_a.
inline SoficMap from_folner(const GroupSpec& spec, const FiniteSubset& f, FolnerModel model = FolnerModel::translate_fill) {
  if (!spec.is_amenable()) throw unsupported_error("from_folner: free groups have no Følner sets");
  if (f.empty()) throw argument_error("from_folner: empty Følner set");
  auto group = std::make_shared<const GroupSpec>(spec);
  if (model == FolnerModel::cyclic) {
    detail::CyclicModel m;
    if (spec.is_finite()) {
      if (f != folner_set(spec, 1)) throw argument_error("from_folner(cyclic): finite groups need F = G");
      m.copies = 1;
    } else {
      int side = 1;
      while (static_cast<std::size_t>(std::pow(side, spec.rank())) < f.size()) ++side;
      if (f != folner_set(spec, side)) throw argument_error("from_folner(cyclic): F must be a box [0,n)^k");
      m.side = side;
      m.dim = spec.rank();
    }
    return SoficMap(group, f.size(), SoficProvenance::cyclic_from_folner,
                    std::make_shared<const detail::SoficModel>(m), std::make_shared<const FiniteSubset>(f));
  }
  return SoficMap(group, f.size(), SoficProvenance::folner_fill,
                  std::make_shared<const detail::SoficModel>(detail::FillModel{f}));
}

/// The exact torus model on the box [0,n)^k (Z^k) or `n` disjoint copies of
/// the left regular representation (finite G).
inline SoficMap cyclic_model(const GroupSpec& spec, int n) {
  if (n < 1) throw argument_error("cyclic_model: n must be >= 1");
  if (spec.is_finite()) {
    auto group = std::make_shared<const GroupSpec>(spec);
    detail::CyclicModel m;
    m.copies = n;
    return SoficMap(group, static_cast<std::size_t>(n) * spec.order(), SoficProvenance::cyclic_from_folner,
                    std::make_shared<const detail::SoficModel>(m),
                    n == 1 ? std::make_shared<const FiniteSubset>(folner_set(spec, 1)) : nullptr);
  }
  return from_folner(spec, folner_set(spec, n), FolnerModel::cyclic);
}

/// Each free generator mapped to an independent uniform random permutation.
/// Generator i draws from its own mt19937_64 stream seeded by
/// splitmix64(seed + i * golden-ratio increment), so results are
/// bit-reproducible across platforms.
inline SoficMap random_free_model(int rank, std::size_t d, std::uint64_t seed) {
  if (rank < 1) throw argument_error("random_free_model: rank must be >= 1");
  if (d < 2) throw argument_error("random_free_model: d must be >= 2");
  detail::FreeModel m;
  for (int i = 0; i < rank; ++i) {
    std::mt19937_64 rng(detail::splitmix64(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
    Permutation p(d);
    for (std::size_t a = 0; a < d; ++a) p[a] = static_cast<std::uint32_t>(a);
    for (std::size_t a = d - 1; a > 0; --a) std::swap(p[a], p[detail::bounded(rng, a + 1)]);
    m.backward.push_back(detail::invert(p));
    m.forward.push_back(std::move(p));
  }
  return SoficMap(std::make_shared<const GroupSpec>(GroupSpec::free_group(rank)), d, SoficProvenance::random_free,
                  std::make_shared<const detail::SoficModel>(std::move(m)));
}

/// A hand-specified map. Elements outside `images` are evaluated by
/// composing generator images along a shortest word.
inline SoficMap explicit_map(const GroupSpec& spec, std::size_t d, std::map<GroupElement, Permutation> images) {
  if (d == 0) throw argument_error("explicit_map: d must be positive");
  for (const auto& [g, p] : images) {
    if (!spec.contains(g)) throw argument_error("explicit_map: element not in the group");
    if (!detail::is_bijection(p, d)) throw argument_error("explicit_map: image of " + spec.to_string(g) + " is not a bijection");
  }
  return SoficMap(std::make_shared<const GroupSpec>(spec), d, SoficProvenance::explicit_map,
                  std::make_shared<const detail::SoficModel>(detail::ExplicitModel{std::move(images)}));
}

/// 1 - (1/d)|{a : σ_st(a) = σ_s σ_t(a)}|.
inline double mult_defect(const SoficMap& sigma, const GroupElement& s, const GroupElement& t) {
  const auto& spec = sigma.group();
  const Permutation ps = sigma.image(s), pt = sigma.image(t), pst = sigma.image(spec.multiply(s, t));
  std::size_t bad = 0;
  for (std::size_t a = 0; a < sigma.d(); ++a)
    if (pst[a] != ps[pt[a]]) ++bad;
  return static_cast<double>(bad) / static_cast<double>(sigma.d());
}

/// 1 - (1/d)|{a : σ_s(a) ≠ σ_t(a)}|, the fraction of points where σ_s and σ_t agree.
inline double freeness_defect(const SoficMap& sigma, const GroupElement& s, const GroupElement& t) {
  if (s == t) throw argument_error("freeness_defect: s and t must be distinct");
  const Permutation ps = sigma.image(s), pt = sigma.image(t);
  std::size_t agree = 0;
  for (std::size_t a = 0; a < sigma.d(); ++a)
    if (ps[a] == pt[a]) ++agree;
  return static_cast<double>(agree) / static_cast<double>(sigma.d());
}

struct GoodnessCertificate {
  /// Every point where σ is multiplicative, free and unital on E.
  std::vector<std::uint32_t> good_points;
  bool good = false;
  std::size_t d = 0;
  double eta = 0.0;
};

/// The maximal B ⊆ {0..d-1} on which σ_st = σ_s σ_t, σ_s ≠ σ_s' (s ≠ s')
/// and σ_e = id for all s, t, s' in E; good iff |B| >= (1-η)d.
inline GoodnessCertificate is_good(const SoficMap& sigma, const FiniteSubset& e_set, double eta) {
  const auto& spec = sigma.group();
  if (!e_set.contains(spec.identity())) throw argument_error("is_good: E must contain the identity");
  if (!(eta > 0.0 && eta < 1.0)) throw argument_error("is_good: eta must lie in (0,1)");
  const std::size_t d = sigma.d();
  const std::size_t m = e_set.size();
  std::vector<Permutation> img(m);
  for (std::size_t i = 0; i < m; ++i) img[i] = sigma.image(e_set[i]);
  std::vector<char> ok(d, 1);
  const Permutation id_img = sigma.image(spec.identity());
  for (std::size_t a = 0; a < d; ++a)
    if (id_img[a] != a) ok[a] = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const Permutation pst = sigma.image(spec.multiply(e_set[i], e_set[j]));
      for (std::size_t a = 0; a < d; ++a)
        if (pst[a] != img[i][img[j][a]]) ok[a] = 0;
      if (j > i) {
        for (std::size_t a = 0; a < d; ++a)
          if (img[i][a] == img[j][a]) ok[a] = 0;
      }
    }
  }
  GoodnessCertificate cert;
  cert.d = d;
  cert.eta = eta;
  for (std::size_t a = 0; a < d; ++a)
    if (ok[a]) cert.good_points.push_back(static_cast<std::uint32_t>(a));
  cert.good = rational(cert.good_points.size()) >= (1 - exact_decimal(eta)) * rational(d);
  return cert;
}

/// i ↦ σ_i with d_i strictly increasing.
class SoficSequence {
 public:
  using Generator = std::function<SoficMap(std::size_t)>;

  explicit SoficSequence(Generator gen) : gen_(std::move(gen)) {}

  SoficMap operator()(std::size_t i) const { return gen_(i); }

  /// σ_0 .. σ_{count-1}; throws if the dimensions fail to increase.
  std::vector<SoficMap> prefix(std::size_t count) const {
    std::vector<SoficMap> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(gen_(i));
      if (i > 0 && out[i].d() <= out[i - 1].d())
        throw argument_error("SoficSequence: d_i must be strictly increasing");
    }
    return out;
  }

  /// Maps from the Følner sets of the given indices.
  static SoficSequence folner(const GroupSpec& spec, std::vector<int> ns, FolnerModel model) {
    return SoficSequence([spec, ns = std::move(ns), model](std::size_t i) {
      if (spec.is_finite()) return cyclic_model(spec, ns.at(i));
      return from_folner(spec, folner_set(spec, ns.at(i)), model);
    });
  }

  /// Independent random free-group models; stage i uses seed + i.
  static SoficSequence random_free(int rank, std::vector<std::size_t> ds, std::uint64_t seed) {
    return SoficSequence([rank, ds = std::move(ds), seed](std::size_t i) {
      return random_free_model(rank, ds.at(i), seed + i);
    });
  }

 private:
  Generator gen_;
};

}  // namespace soficlab
