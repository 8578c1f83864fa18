#pragma once

#include <boost/dynamic_bitset.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "soficlab/error.hpp"

namespace soficlab {

using Bits = boost::dynamic_bitset<std::uint64_t>;

struct SetCoverResult {
  std::size_t count = 0;
  /// Indices into the input family attaining `count`.
  std::vector<std::size_t> witness;
  /// False when the node budget ran out; `count` is then an upper bound.
  bool exact = true;
  std::uint64_t nodes = 0;
};

/// Minimum number of `sets` whose union contains `target`.
///
/// Branch and bound: branch on the uncovered item with the fewest covering
/// sets, bound by ceil(uncovered / largest remaining gain), seeded with the
/// greedy cover. Sets dominated by another set are dropped first. The caller
/// guarantees every target item is covered by some set.
inline SetCoverResult exact_set_cover(const std::vector<Bits>& sets, const Bits& target, std::uint64_t node_budget = 5'000'000) {
  SetCoverResult result;
  if (target.none()) return result;
  const std::size_t n = target.size();

  // Restrict to the target and drop empty, duplicate and dominated sets.
  std::vector<std::size_t> live;
  std::vector<Bits> restricted(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    restricted[i] = sets[i] & target;
    if (restricted[i].any()) live.push_back(i);
  }
  std::stable_sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) { return restricted[a].count() > restricted[b].count(); });
  std::vector<std::size_t> kept;
  if (live.size() > 4000) {
    kept = live;  // the quadratic dominance scan costs more than it saves here
  } else {
    for (std::size_t i : live) {
      bool dominated = false;
      for (std::size_t j : kept)
        if (restricted[i].is_subset_of(restricted[j])) {
          dominated = true;
          break;
        }
      if (!dominated) kept.push_back(i);
    }
  }

  // Greedy upper bound.
  {
    Bits uncovered = target;
    std::vector<std::size_t> pick;
    while (uncovered.any()) {
      std::size_t best = 0, gain = 0;
      for (std::size_t i : kept) {
        const std::size_t g = (restricted[i] & uncovered).count();
        if (g > gain) {
          gain = g;
          best = i;
        }
      }
      if (gain == 0) throw argument_error("exact_set_cover: target item not covered by any set");
      pick.push_back(best);
      uncovered -= restricted[best];
    }
    result.count = pick.size();
    result.witness = pick;
    std::sort(result.witness.begin(), result.witness.end());
  }
  if (result.count <= 1) return result;

  // Covering lists per item.
  std::vector<std::vector<std::size_t>> covering(n);
  for (std::size_t i : kept)
    for (auto b = restricted[i].find_first(); b != Bits::npos; b = restricted[i].find_next(b)) covering[b].push_back(i);

  std::vector<std::size_t> chosen;
  std::uint64_t nodes = 0;
  bool exhausted = false;
  auto rec = [&](auto&& self, const Bits& uncovered) -> void {
    if (exhausted) return;
    if (++nodes > node_budget) {
      exhausted = true;
      return;
    }
    if (uncovered.none()) {
      if (chosen.size() < result.count) {
        result.count = chosen.size();
        result.witness = chosen;
      }
      return;
    }
    std::size_t max_gain = 0;
    for (std::size_t i : kept) max_gain = std::max(max_gain, (restricted[i] & uncovered).count());
    const std::size_t remaining = uncovered.count();
    const std::size_t lower = chosen.size() + (remaining + max_gain - 1) / max_gain;
    if (lower >= result.count) return;
    // Item with the fewest covering sets.
    std::size_t item = uncovered.find_first(), fewest = covering[item].size();
    for (auto b = uncovered.find_next(item); b != Bits::npos; b = uncovered.find_next(b))
      if (covering[b].size() < fewest) {
        fewest = covering[b].size();
        item = b;
      }
    std::vector<std::size_t> options = covering[item];
    std::stable_sort(options.begin(), options.end(), [&](std::size_t a, std::size_t b) {
      return (restricted[a] & uncovered).count() > (restricted[b] & uncovered).count();
    });
    for (std::size_t i : options) {
      chosen.push_back(i);
      self(self, uncovered - restricted[i]);
      chosen.pop_back();
      if (exhausted) return;
    }
  };
  rec(rec, target);
  result.nodes = nodes;
  result.exact = !exhausted;
  std::sort(result.witness.begin(), result.witness.end());
  return result;
}

}  // namespace soficlab
