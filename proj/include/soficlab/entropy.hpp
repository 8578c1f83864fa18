#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "soficlab/covers.hpp"
#include "soficlab/error.hpp"
#include "soficlab/exact.hpp"
#include "soficlab/microstates.hpp"
#include "soficlab/parallel.hpp"
#include "soficlab/sofic.hpp"
#include "soficlab/symbolic.hpp"

namespace soficlab {

// ---------------------------------------------------------------------------
// Sofic traces

struct EntropyRow {
  std::size_t i = 0;
  std::size_t d = 0;
  std::uint64_t microstates_inner = 0, microstates_outer = 0;
  std::uint64_t count_inner = 0, count_outer = 0;
  ExtendedReal value_inner, value_outer;
  /// Running max over rows 0..i: the finite-stage stand-in for limsup.
  ExtendedReal running_max_inner, running_max_outer;
  /// False when a budget ran out; counts are then not meaningful.
  bool complete = true;
  std::string note;
};

struct EntropyTrace {
  FiniteSubset f;
  double delta = 0;
  FiniteSubset metric_window;
  bool filtered = false;
  std::size_t cover_size = 0;
  /// log N(U, X), the ceiling for every value.
  double log_cover_number = 0;
  std::vector<EntropyRow> rows;
};

struct TraceOptions {
  /// Metric window M; defaults to the window of U, or {e} if that is empty.
  std::optional<FiniteSubset> metric_window;
  MicrostateOptions microstates;
  /// Rows computed in parallel; each row's search then runs single-threaded.
  unsigned workers = 1;
};

namespace detail {

inline FiniteSubset default_metric(const SymbolicSystem& sys, const Cover& u, const TraceOptions& opt) {
  if (opt.metric_window) return *opt.metric_window;
  if (!u.window().empty()) return u.window();
  return FiniteSubset({sys.group().identity()});
}

inline EntropyTrace sofic_trace(const SymbolicSystem& sys, const Cover& u, const FiniteSubset& f, double delta,
                                const std::vector<SoficMap>& prefix, const TraceOptions& opt, const MeasureFilter* filter) {
  if (prefix.empty()) throw argument_error("sofic trace: empty sofic prefix");
  EntropyTrace trace;
  trace.f = f;
  trace.delta = delta;
  trace.metric_window = default_metric(sys, u, opt);
  trace.filtered = filter != nullptr;
  trace.cover_size = u.size();
  trace.log_cover_number = std::log(static_cast<double>(cover_number(u).count));
  trace.rows.resize(prefix.size());
  MicrostateOptions mo = opt.microstates;
  if (opt.workers > 1) mo.workers = 1;
  parallel_for(prefix.size(), opt.workers, [&](std::size_t i) {
    EntropyRow& row = trace.rows[i];
    row.i = i;
    row.d = prefix[i].d();
    try {
      for (auto mode : {Certification::inner, Certification::outer}) {
        MicrostateOptions m = mo;
        m.mode = mode;
        const auto c = count_microstate_cover(sys, f, delta, prefix[i], trace.metric_window, u, m, filter);
        (mode == Certification::inner ? row.count_inner : row.count_outer) = c.cover_count;
        (mode == Certification::inner ? row.microstates_inner : row.microstates_outer) = c.microstates;
        if (!c.exact) row.note = "set cover budget exhausted; count is an upper bound";
      }
      row.value_inner = normalized_log(row.count_inner, static_cast<double>(row.d));
      row.value_outer = normalized_log(row.count_outer, static_cast<double>(row.d));
    } catch (const resource_error& e) {
      row.complete = false;
      row.note = e.what();
    }
  });
  ExtendedReal run_in = ExtendedReal::neg_inf(), run_out = ExtendedReal::neg_inf();
  for (auto& row : trace.rows) {
    if (row.complete) {
      run_in = max(run_in, row.value_inner);
      run_out = max(run_out, row.value_outer);
    }
    row.running_max_inner = run_in;
    row.running_max_outer = run_out;
  }
  return trace;
}

}  // namespace detail

/// Rows (i, d_i, N(U^d, X^d_{F,δ,σ_i}), (1/d_i) log N) in both modes.
inline EntropyTrace sofic_topological_trace(const SymbolicSystem& sys, const Cover& u, const FiniteSubset& f, double delta,
                                            const std::vector<SoficMap>& prefix, const TraceOptions& opt = {}) {
  return detail::sofic_trace(sys, u, f, delta, prefix, opt, nullptr);
}

/// As sofic_topological_trace on X^d_{F,δ,σ,μ,L}.
inline EntropyTrace sofic_measure_trace(const SymbolicSystem& sys, const Cover& u, const MeasureModel& mu,
                                        const std::vector<TestFunction>& tests, const FiniteSubset& f, double delta,
                                        const std::vector<SoficMap>& prefix, const TraceOptions& opt = {}) {
  const MeasureFilter filter{mu, tests, delta};
  return detail::sofic_trace(sys, u, f, delta, prefix, opt, &filter);
}

// ---------------------------------------------------------------------------
// Amenable traces

struct AmenableRow {
  std::size_t n = 0;
  std::size_t size = 0;  // |F_n|
  /// N(U_{F_n}, X) for topological traces.
  big_int count = 0;
  /// H_μ(V_{F_n}) for measure traces.
  double entropy = 0;
  ExtendedReal value;
  /// (H_n - H_{n-1}) / (|F_n| - |F_{n-1}|); equals the entropy rate for
  /// Markov measures on intervals.
  std::optional<double> increment;
  double invariance_defect = 0;
};

struct AmenableTrace {
  bool measure = false;
  double log_cover_number = 0;
  std::vector<AmenableRow> rows;
};

namespace detail {

inline FiniteSubset default_k(const GroupSpec& spec, const std::optional<FiniteSubset>& k) {
  if (k) return *k;
  const auto gens = spec.generators();
  if (gens.empty()) return FiniteSubset({spec.identity()});
  return FiniteSubset(gens);
}

}  // namespace detail

/// Rows (n, N(U_{F_n}, X), (1/|F_n|) log N) along a Følner prefix.
inline AmenableTrace amenable_topological_trace(const SymbolicSystem& sys, const Cover& u, const std::vector<FiniteSubset>& folner,
                                                const std::optional<FiniteSubset>& k = std::nullopt) {
  const auto& spec = sys.group();
  if (!spec.is_amenable()) throw unsupported_error("amenable trace: the group is not amenable");
  AmenableTrace trace;
  trace.log_cover_number = std::log(static_cast<double>(cover_number(u).count));
  const auto kk = detail::default_k(spec, k);
  for (std::size_t n = 0; n < folner.size(); ++n) {
    AmenableRow row;
    row.n = n;
    row.size = folner[n].size();
    const auto uf = pullback_iterate(sys, u, folner[n]);
    const auto r = cover_number(uf);
    if (!r.exact) throw resource_error("amenable trace: set cover budget exhausted", false, static_cast<double>(r.count));
    row.count = r.count;
    row.value = normalized_log(row.count, static_cast<double>(row.size));
    row.invariance_defect = invariance_defect(spec, folner[n], kk);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

/// Rows (n, H_μ(V_{F_n}), H_μ(V_{F_n}) / |F_n|).
inline AmenableTrace amenable_measure_trace(const SymbolicSystem& sys, const Cover& v, const MeasureModel& mu,
                                            const std::vector<FiniteSubset>& folner,
                                            const std::optional<FiniteSubset>& k = std::nullopt) {
  const auto& spec = sys.group();
  if (!spec.is_amenable()) throw unsupported_error("amenable trace: the group is not amenable");
  AmenableTrace trace;
  trace.measure = true;
  trace.log_cover_number = std::log(static_cast<double>(cover_number(v).count));
  const auto kk = detail::default_k(spec, k);
  for (std::size_t n = 0; n < folner.size(); ++n) {
    AmenableRow row;
    row.n = n;
    row.size = folner[n].size();
    row.entropy = cover_entropy(mu, pullback_iterate(sys, v, folner[n])).value;
    row.value = ExtendedReal(row.entropy / static_cast<double>(row.size));
    if (n > 0 && row.size > trace.rows.back().size)
      row.increment = (row.entropy - trace.rows.back().entropy) / static_cast<double>(row.size - trace.rows.back().size);
    row.invariance_defect = invariance_defect(spec, folner[n], kk);
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

/// (H(π) + (n-1) h) / n for a stationary Markov measure on an interval of
/// length n, where h is the entropy rate.
inline double markov_interval_value(const MeasureModel& mu, std::size_t n) {
  const auto* m = mu.as_markov();
  if (!m) throw argument_error("markov_interval_value: not a Markov measure");
  if (n == 0) throw argument_error("markov_interval_value: n must be positive");
  double h_pi = 0;
  for (double x : m->pi)
    if (x > 0) h_pi -= x * std::log(x);
  return (h_pi + static_cast<double>(n - 1) * mu.entropy_rate()) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Pigeonhole selection

struct DominantMeasure {
  std::size_t index = 0;
  std::uint64_t count = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t unfiltered = 0;
  /// ceil(unfiltered / |D|); the selected count is at least this.
  std::uint64_t required = 0;
};

/// The candidate ν ∈ D maximising N(U^d, X^d_{F,δ,σ,ν,L}). Every tuple's
/// empirical averages must lie within δ of some candidate.
inline DominantMeasure select_dominant_measure(const MicrostateSet& ms, const std::vector<MeasureModel>& candidates,
                                               const std::vector<TestFunction>& tests, double delta, const Cover& u) {
  if (candidates.empty()) throw argument_error("select_dominant_measure: no candidates");
  if (!ms.complete()) throw resource_error("select_dominant_measure: microstate set was not stored in full");
  std::vector<std::vector<char>> keep(candidates.size(), std::vector<char>(ms.size(), 0));
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const auto tuple = ms.patterns(k);
    bool any = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      keep[c][k] = filter_check(MeasureFilter{candidates[c], tests, delta}, tuple);
      any = any || keep[c][k];
    }
    if (!any) {
      std::string v;
      for (const auto& f : tests) {
        double s = 0;
        for (const auto& p : tuple) s += f(p);
        v += (v.empty() ? "" : ", ") + format_double(s / static_cast<double>(tuple.size()));
      }
      throw argument_error("select_dominant_measure: empirical vector (" + v + ") is not within delta of any candidate");
    }
  }
  DominantMeasure out;
  out.unfiltered = count_cover(ms, u).count;
  out.required = (out.unfiltered + candidates.size() - 1) / candidates.size();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    out.counts.push_back(count_cover(ms.select(keep[c]), u).count);
    if (out.counts[c] > out.counts[out.index]) out.index = c;
  }
  out.count = out.counts[out.index];
  if (out.count < out.required) throw std::logic_error("select_dominant_measure: pigeonhole bound violated");
  return out;
}

// ---------------------------------------------------------------------------
// Partition count

struct PartitionCountBound {
  big_int count = 0;
  double log_count = 0;
  /// log of exp(|Λ| (H(p) + 2ε)).
  double log_bound = 0;
  bool holds = false;
};

/// |Γ_{η,p}|: labelled tuples (γ_1..γ_n, rest) partitioning a set of size N
/// with | |γ_k|/N - p_k | < η, summed exactly as multinomials.
inline PartitionCountBound partition_count_bound(std::size_t size, const std::vector<double>& p, double eta, double epsilon) {
  if (p.empty()) throw argument_error("partition_count_bound: empty probability vector");
  double total = 0, pmin = 1;
  for (double x : p) {
    if (!(x > 0)) throw argument_error("partition_count_bound: p must be strictly positive");
    total += x;
    pmin = std::min(pmin, x);
  }
  if (std::abs(total - 1) > 1e-12) throw argument_error("partition_count_bound: p must sum to 1");
  if (!(eta > 0 && eta < pmin)) throw argument_error("partition_count_bound: need 0 < eta < min p");
  const rational n(size), e = exact_decimal(eta);
  std::vector<big_int> fact(size + 1, 1);
  for (std::size_t i = 1; i <= size; ++i) fact[i] = fact[i - 1] * i;
  // Admissible range of a_k: |a_k - N p_k| < N η.
  std::vector<std::pair<std::size_t, std::size_t>> range;
  for (double x : p) {
    const rational centre = n * exact_decimal(x), radius = n * e;
    const big_int lo = floor_rational(centre - radius) + 1;
    const big_int hi = ceil_rational(centre + radius) - 1;
    const big_int clo = std::max(lo, big_int(0)), chi = std::min(hi, big_int(size));
    range.emplace_back(clo.convert_to<std::size_t>(), chi.convert_to<std::size_t>());
  }
  PartitionCountBound out;
  std::vector<std::size_t> a(p.size());
  auto rec = [&](auto&& self, std::size_t k, std::size_t used, const big_int& denom) -> void {
    if (k == p.size()) {
      out.count += fact[size] / (denom * fact[size - used]);
      return;
    }
    for (std::size_t x = range[k].first; x <= range[k].second && used + x <= size; ++x) self(self, k + 1, used + x, denom * fact[x]);
  };
  if (std::all_of(range.begin(), range.end(), [](const auto& r) { return r.first <= r.second; })) rec(rec, 0, 0, big_int(1));
  double h = 0;
  for (double x : p) h -= x * std::log(x);
  out.log_bound = static_cast<double>(size) * (h + 2 * epsilon);
  out.log_count = out.count == 0 ? -std::numeric_limits<double>::infinity() : log_big(out.count);
  out.holds = out.log_count <= out.log_bound;
  return out;
}

// ---------------------------------------------------------------------------
// Variational check

struct VariationalRow {
  std::size_t grid = 0;
  double delta = 0;
  std::size_t stage = 0, d = 0;
  std::uint64_t topo_inner = 0, topo_outer = 0;
  ExtendedReal topo_value_inner, topo_value_outer;
  std::vector<std::uint64_t> measure_inner, measure_outer;
  std::vector<ExtendedReal> measure_value_inner, measure_value_outer;
  std::size_t best = 0;
  /// topo_value_outer minus the best measure value; +inf when every measure
  /// count is zero.
  double gap = 0;
  bool holds = true;
};

struct VariationalReport {
  std::vector<std::pair<FiniteSubset, double>> grid;
  std::vector<VariationalRow> rows;
  bool holds = true;
};

/// For each (F, δ) and stage: every measure count ≤ the topological count,
/// in both modes, compared as integers.
inline VariationalReport check_variational(const SymbolicSystem& sys, const Cover& u, const std::vector<MeasureModel>& measures,
                                           const std::vector<TestFunction>& tests,
                                           const std::vector<std::pair<FiniteSubset, double>>& grid,
                                           const std::vector<SoficMap>& prefix, const TraceOptions& opt = {}) {
  VariationalReport report;
  report.grid = grid;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& [f, delta] = grid[g];
    const auto topo = sofic_topological_trace(sys, u, f, delta, prefix, opt);
    std::vector<EntropyTrace> traces;
    for (const auto& mu : measures) traces.push_back(sofic_measure_trace(sys, u, mu, tests, f, delta, prefix, opt));
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      VariationalRow row;
      row.grid = g;
      row.delta = delta;
      row.stage = i;
      row.d = prefix[i].d();
      const auto& t = topo.rows[i];
      row.topo_inner = t.count_inner;
      row.topo_outer = t.count_outer;
      row.topo_value_inner = t.value_inner;
      row.topo_value_outer = t.value_outer;
      ExtendedReal best = ExtendedReal::neg_inf();
      for (std::size_t m = 0; m < measures.size(); ++m) {
        const auto& r = traces[m].rows[i];
        row.measure_inner.push_back(r.count_inner);
        row.measure_outer.push_back(r.count_outer);
        row.measure_value_inner.push_back(r.value_inner);
        row.measure_value_outer.push_back(r.value_outer);
        row.holds = row.holds && r.complete && t.complete && r.count_inner <= t.count_inner && r.count_outer <= t.count_outer;
        if (m == 0 || best < r.value_outer) {
          best = r.value_outer;
          row.best = m;
        }
      }
      if (best.is_neg_inf())
        row.gap = std::numeric_limits<double>::infinity();
      else
        row.gap = t.value_outer.value() - best.value();
      report.holds = report.holds && row.holds;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sofic versus amenable agreement

struct AgreementRow {
  std::size_t stage = 0;
  std::size_t n = 0, d = 0;
  double delta = 0;
  ExtendedReal sofic, amenable;
  double gap = 0;
  /// sofic ≤ amenable + slack.
  bool within = true;
};

struct AgreementReport {
  double slack = 0.05;
  bool measure = false;
  std::vector<AgreementRow> rows;
  bool holds = true;
};

struct AgreementOptions {
  double slack = 0.05;
  /// When set, compares h_{F,δ,μ,L} with H_μ(U_{F_n}) / |F_n|.
  std::optional<MeasureModel> mu;
  std::vector<TestFunction> tests;
  TraceOptions trace;
};

/// Stage i pairs the Følner set F_i with the sofic map σ_i.
inline AgreementReport check_amenable_agreement(const SymbolicSystem& sys, const Cover& u, const std::vector<FiniteSubset>& folner,
                                                const std::vector<SoficMap>& prefix, const FiniteSubset& f,
                                                const std::vector<double>& deltas, const AgreementOptions& opt = {}) {
  if (!sys.group().is_amenable()) throw unsupported_error("agreement: the group is not amenable");
  if (folner.size() != prefix.size()) throw argument_error("agreement: Følner and sofic prefixes differ in length");
  AgreementReport report;
  report.slack = opt.slack;
  report.measure = opt.mu.has_value();
  const auto amen = opt.mu ? amenable_measure_trace(sys, u, *opt.mu, folner) : amenable_topological_trace(sys, u, folner);
  for (double delta : deltas) {
    const auto sofic = opt.mu ? sofic_measure_trace(sys, u, *opt.mu, opt.tests, f, delta, prefix, opt.trace)
                              : sofic_topological_trace(sys, u, f, delta, prefix, opt.trace);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
      AgreementRow row;
      row.stage = i;
      row.n = folner[i].size();
      row.d = prefix[i].d();
      row.delta = delta;
      row.sofic = sofic.rows[i].value_outer;
      row.amenable = amen.rows[i].value;
      if (row.sofic.is_neg_inf()) {
        row.gap = std::numeric_limits<double>::infinity();
        row.within = true;
      } else {
        row.gap = std::abs(row.sofic.value() - row.amenable.value());
        row.within = row.sofic.value() <= row.amenable.value() + opt.slack;
      }
      report.holds = report.holds && row.within && sofic.rows[i].complete;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Entropy pairs

struct EntropyPairResult {
  Pattern first, second;
  std::vector<ExtendedReal> values;
  ExtendedReal value;
  bool positive = false;
  std::string label = "numerical evidence, not a certificate";
};

/// For each pair (p, q) of separated cylinders, the cover {[p]^c, [q]^c}
/// and its amenable finite-stage entropy along the Følner prefix. The
/// verdict compares the last stage with `threshold`.
inline std::vector<EntropyPairResult> entropy_pair_scan(const SymbolicSystem& sys, const std::vector<std::pair<Pattern, Pattern>>& pairs,
                                                        double threshold, const std::vector<FiniteSubset>& folner) {
  if (folner.empty()) throw argument_error("entropy_pair_scan: empty Følner prefix");
  std::vector<EntropyPairResult> out;
  for (const auto& [p, q] : pairs) {
    const auto w = set_union(p.window, q.window);
    auto lang = std::make_shared<const Language>(language(sys, w));
    std::vector<std::uint32_t> not_p, not_q;
    auto matches = [&](std::span<const Symbol> row, const Pattern& c) {
      for (std::size_t k = 0; k < c.window.size(); ++k)
        if (row[*w.index_of(c.window[k])] != c.symbols[k]) return false;
      return true;
    };
    for (std::uint32_t i = 0; i < lang->size(); ++i) {
      const bool in_p = matches((*lang)[i], p), in_q = matches((*lang)[i], q);
      if (in_p && in_q) throw argument_error("entropy_pair_scan: candidate cylinders overlap and cannot be separated");
      if (!in_p) not_p.push_back(i);
      if (!in_q) not_q.push_back(i);
    }
    std::vector<std::vector<std::uint32_t>> elements;
    if (!not_p.empty()) elements.push_back(not_p);
    if (!not_q.empty() && not_q != not_p) elements.push_back(not_q);
    if (elements.empty()) throw argument_error("entropy_pair_scan: the system is empty on this window");
    const Cover u(lang, elements);
    const auto trace = amenable_topological_trace(sys, u, folner);
    EntropyPairResult r{p, q, {}, {}, false};
    for (const auto& row : trace.rows) r.values.push_back(row.value);
    r.value = r.values.back();
    r.positive = !r.value.is_neg_inf() && r.value.value() > threshold;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace soficlab
