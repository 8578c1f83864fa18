// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// line fails. Detail lines follow each verdict.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "naive.hpp"
#include "oracles.hpp"
#include "soficlab/soficlab.hpp"

using namespace soficlab;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

class Verdict {
 public:
  explicit Verdict(int id) : id_(id) {}
  void check(bool ok, const std::string& what) {
    if (!ok) {
      ok_ = false;
      if (failures_.size() < 8) failures_.push_back(what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return ok_; }
  void print() const {
    std::printf("criterion %d: %s\n", id_, ok_ ? "PASS" : "FAIL");
    for (const auto& n : notes_) std::printf("    %s\n", n.c_str());
    for (const auto& f : failures_) std::printf("    failed: %s\n", f.c_str());
    std::fflush(stdout);
  }

 private:
  int id_;
  bool ok_ = true;
  std::vector<std::string> notes_, failures_;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

GroupSpec z() { return GroupSpec::lattice(1); }
FiniteSubset one() { return FiniteSubset({z().element(1)}); }
FiniteSubset origin() { return FiniteSubset({z().identity()}); }

std::vector<SoficMap> cyclic_prefix(const GroupSpec& g, int from, int to) {
  std::vector<SoficMap> out;
  for (int n = from; n <= to; ++n) out.push_back(cyclic_model(g, n));
  return out;
}

std::vector<FiniteSubset> folner_prefix(const GroupSpec& g, int from, int to) {
  std::vector<FiniteSubset> out;
  for (int n = from; n <= to; ++n) out.push_back(folner_set(g, n));
  return out;
}

Pattern word(const std::string& s) {
  std::vector<Symbol> sym;
  for (char c : s) sym.push_back(static_cast<Symbol>(c - '0'));
  return Pattern(interval(z(), 0, static_cast<int>(s.size())), sym);
}

Cover word_cover(const SymbolicSystem& sys, const std::vector<std::vector<std::string>>& elements) {
  std::vector<std::vector<Pattern>> cyl;
  for (const auto& e : elements) {
    cyl.emplace_back();
    for (const auto& w : e) cyl.back().push_back(word(w));
  }
  return Cover::from_cylinders(sys, interval(z(), 0, 2), cyl);
}

struct Instance {
  std::string name;
  SymbolicSystem sys;
  Cover u;
  FiniteSubset f, f_larger;
  std::vector<double> deltas;
  std::vector<SoficMap> prefix;
  /// Invariant measures supported on the system.
  std::vector<MeasureModel> measures;
  std::vector<TestFunction> tests;
};

std::vector<Instance> corpus() {
  std::vector<Instance> out;
  const auto full2 = SymbolicSystem::full_shift(z(), 2);
  const auto golden = SymbolicSystem::golden_mean();
  const TestFunction zero_at_origin = TestFunction::indicator(Pattern(origin(), {0}), 2);
  const FiniteSubset pm({z().element(1), z().element(-1)});
  const FiniteSubset f12({z().element(1), z().element(2)});
  const std::vector<MeasureModel> bern2{MeasureModel::bernoulli({0.5, 0.5}), MeasureModel::bernoulli({0.3, 0.7})};
  const auto golden_measures = std::vector<MeasureModel>{MeasureModel::parry({{1, 1}, {1, 0}}), MeasureModel::markov({{0.7, 0.3}, {1.0, 0.0}})};

  out.push_back({"full shift, origin", full2, Cover::origin_partition(full2), one(), pm, {0.3, 0.6}, cyclic_prefix(z(), 4, 8), bern2, {zero_at_origin}});
  out.push_back({"full shift, two-site partition", full2, pullback_iterate(full2, Cover::origin_partition(full2), interval(z(), 0, 2)), one(), pm,
                 {0.3, 0.6}, cyclic_prefix(z(), 3, 6), bern2, {zero_at_origin}});
  out.push_back({"full shift, overlapping cover", full2, word_cover(full2, {{"00", "01"}, {"01", "10", "11"}}), one(), pm, {0.3, 0.6},
                 cyclic_prefix(z(), 3, 5), bern2, {zero_at_origin}});
  const auto full3 = SymbolicSystem::full_shift(z(), 3);
  out.push_back({"3-symbol full shift", full3, Cover::origin_partition(full3), one(), pm, {0.3, 0.6}, cyclic_prefix(z(), 3, 5),
                 {MeasureModel::bernoulli({1.0 / 3, 1.0 / 3, 1.0 / 3})}, {TestFunction::indicator(Pattern(origin(), {0}), 3)}});
  out.push_back({"golden mean, origin", golden, Cover::origin_partition(golden), one(), pm, {0.1, 0.4}, cyclic_prefix(z(), 4, 10),
                 golden_measures, {zero_at_origin}});
  out.push_back({"golden mean, overlapping cover", golden, word_cover(golden, {{"00", "01"}, {"01", "10"}}), one(), pm, {0.1, 0.3},
                 cyclic_prefix(z(), 3, 5), golden_measures, {zero_at_origin}});
  out.push_back({"golden mean, F={1,2}", golden, Cover::origin_partition(golden), f12, interval(z(), 1, 4), {0.1, 0.4},
                 cyclic_prefix(z(), 4, 9), golden_measures, {zero_at_origin}});
  const SymbolicSystem alternating(z(), {"0", "1"}, {word("00"), word("11")});
  out.push_back({"alternating", alternating, Cover::origin_partition(alternating), one(), pm, {0.1, 0.4}, cyclic_prefix(z(), 3, 8),
                 {MeasureModel::markov({{0.0, 1.0}, {1.0, 0.0}})}, {zero_at_origin}});
  const SymbolicSystem fixed(z(), {"0", "1"}, {Pattern(origin(), {1})});
  out.push_back({"fixed point", fixed, Cover::origin_partition(fixed), one(), pm, {0.1, 0.4}, cyclic_prefix(z(), 2, 8),
                 {MeasureModel::bernoulli({1.0, 0.0})}, {zero_at_origin}});

  const auto z3 = GroupSpec::cyclic(3);
  const auto fz3 = SymbolicSystem::full_shift(z3, 2);
  out.push_back({"Z/3 full shift", fz3, Cover::origin_partition(fz3), FiniteSubset({z3.element(1)}), FiniteSubset({z3.element(1), z3.element(2)}),
                 {0.3, 0.6}, cyclic_prefix(z3, 1, 3), {MeasureModel::bernoulli({0.5, 0.5})},
                 {TestFunction::indicator(Pattern(FiniteSubset({z3.identity()}), {0}), 2)}});
  const auto z2 = GroupSpec::lattice(2);
  const auto fz2 = SymbolicSystem::full_shift(z2, 2);
  out.push_back({"Z^2 full shift", fz2, Cover::origin_partition(fz2), FiniteSubset({z2.element({1, 0})}),
                 FiniteSubset({z2.element({1, 0}), z2.element({0, 1})}), {0.3, 0.6}, cyclic_prefix(z2, 2, 3),
                 {MeasureModel::bernoulli({0.5, 0.5})}, {TestFunction::indicator(Pattern(FiniteSubset({z2.identity()}), {0}), 2)}});
  const auto f2 = GroupSpec::free_group(2);
  const auto ff2 = SymbolicSystem::full_shift(f2, 2);
  std::vector<SoficMap> random;
  for (std::size_t d = 4; d <= 7; ++d) random.push_back(random_free_model(2, d, 7));
  out.push_back({"F_2 full shift", ff2, Cover::origin_partition(ff2), FiniteSubset({f2.parse_word("a")}),
                 FiniteSubset({f2.parse_word("a"), f2.parse_word("b")}), {0.3, 0.6}, random, {MeasureModel::bernoulli({0.5, 0.5})},
                 {TestFunction::indicator(Pattern(FiniteSubset({f2.identity()}), {0}), 2)}});
  return out;
}

// 1. Full-shift exactness.
Verdict criterion1() {
  Verdict v(1);
  const auto t0 = clock_type::now();
  const auto sys = SymbolicSystem::full_shift(z(), 2);
  const auto u = Cover::origin_partition(sys);
  const ExtendedReal log2(std::log(2.0));
  const auto amen = amenable_topological_trace(sys, u, folner_prefix(z(), 1, 16));
  for (const auto& row : amen.rows) {
    v.check(row.count == (big_int(1) << row.size), "amenable count at n=" + std::to_string(row.size));
    v.check(row.value == log2, "amenable value at n=" + std::to_string(row.size) + " is " + row.value.to_string());
  }
  const auto sofic = sofic_topological_trace(sys, u, one(), 0.1, cyclic_prefix(z(), 1, 12));
  for (const auto& row : sofic.rows) {
    v.check(row.complete && row.count_outer == (std::uint64_t{1} << row.d), "sofic count at d=" + std::to_string(row.d));
    v.check(row.value_outer == log2, "sofic value at d=" + std::to_string(row.d) + " is " + row.value_outer.to_string());
  }
  const double secs = seconds_since(t0);
  v.check(secs < 10, "runtime " + fmt("%.2f s", secs));
  v.note("amenable n=1..16 and cyclic sofic d=1..12 (F={1}, delta=0.1, outer mode) equal log 2 bit-for-bit; " + fmt("%.2f s", secs));
  return v;
}

// 2. Golden-mean convergence.
Verdict criterion2() {
  Verdict v(2);
  const auto t0 = clock_type::now();
  const auto sys = SymbolicSystem::golden_mean();
  const auto u = Cover::origin_partition(sys);
  const double log_phi = std::log(oracle::golden_ratio());
  const auto amen = amenable_topological_trace(sys, u, folner_prefix(z(), 1, 16));
  for (const auto& row : amen.rows)
    v.check(row.count == big_int(oracle::golden_words(static_cast<int>(row.size))), "amenable Fibonacci count at n=" + std::to_string(row.size));
  const auto& last = amen.rows.back();
  v.check(last.count == 2584, "count at n=16");
  v.check(std::abs(last.value.value() - std::log(2584.0) / 16) < 1e-15, "value at n=16");
  v.check(std::abs(last.value.value() - log_phi) < 0.02, "distance to log phi at n=16");
  const auto sofic = sofic_topological_trace(sys, u, one(), 0.1, cyclic_prefix(z(), 4, 12));
  for (const auto& row : sofic.rows)
    v.check(row.count_outer == oracle::lucas(static_cast<int>(row.d)), "Lucas count at d=" + std::to_string(row.d));
  const auto& s12 = sofic.rows.back();
  v.check(s12.count_outer == 322, "count at d=12");
  v.check(std::abs(s12.value_outer.value() - std::log(322.0) / 12) < 1e-15, "value at d=12");
  const auto agree = check_amenable_agreement(sys, u, {folner_set(z(), 12)}, {cyclic_model(z(), 12)}, one(), {0.1});
  const double gap = agree.rows[0].gap;
  v.check(gap < 0.05 && agree.holds, "agreement gap " + fmt("%.6f", gap));
  const double secs = seconds_since(t0);
  v.check(secs < 60, "runtime " + fmt("%.2f s", secs));
  v.note("n=16: 2584 words, value " + fmt("%.6f", last.value.value()) + ", |value - log phi| = " + fmt("%.6f", std::abs(last.value.value() - log_phi)));
  v.note("d=12: 322 necklaces, value " + fmt("%.6f", s12.value_outer.value()) + "; gap at n=d=12 " + fmt("%.6f", gap) + "; " + fmt("%.2f s", secs));
  return v;
}

// 3. Measure side.
Verdict criterion3() {
  Verdict v(3);
  const auto folner = folner_prefix(z(), 1, 16);
  double bern_err = 0;
  for (const auto& p : {std::vector<double>{0.5, 0.5}, std::vector<double>{0.3, 0.7}, std::vector<double>{0.2, 0.3, 0.5}}) {
    const auto sys = SymbolicSystem::full_shift(z(), p.size());
    const auto prefix = p.size() == 2 ? folner : folner_prefix(z(), 1, 10);
    const auto trace = amenable_measure_trace(sys, Cover::origin_partition(sys), MeasureModel::bernoulli(p), prefix);
    for (const auto& row : trace.rows) bern_err = std::max(bern_err, std::abs(row.value.value() - oracle::shannon(p)));
  }
  v.check(bern_err <= 1e-12, "Bernoulli max |value - H(p)| " + fmt("%.3e", bern_err));
  v.note("Bernoulli p in {(.5,.5), (.3,.7), (.2,.3,.5)}, n=1..16 (1..10 for three symbols): max |value - H(p)| = " + fmt("%.3e", bern_err));

  const auto golden = SymbolicSystem::golden_mean();
  const double phi = oracle::golden_ratio();
  const std::vector<double> pi{phi * phi / (1 + phi * phi), 1 / (1 + phi * phi)};
  const double rate = oracle::markov_rate(pi, {{1 / phi, 1 / (phi * phi)}, {1.0, 0.0}});
  const auto trace = amenable_measure_trace(golden, Cover::origin_partition(golden), MeasureModel::parry({{1, 1}, {1, 0}}), folner);
  double worst = 0, worst_incr = 0, worst_closed = 0;
  std::size_t worst_n = 0;
  for (const auto& row : trace.rows) {
    const double diff = std::abs(row.value.value() - rate);
    if (diff > worst) {
      worst = diff;
      worst_n = row.size;
    }
    if (row.increment) worst_incr = std::max(worst_incr, std::abs(*row.increment - rate));
    const double closed = (oracle::shannon(pi) + static_cast<double>(row.size - 1) * rate) / static_cast<double>(row.size);
    worst_closed = std::max(worst_closed, std::abs(row.value.value() - closed));
    v.check(diff <= 1e-9, "Markov |value - rate| at n=" + std::to_string(row.size) + " is " + fmt("%.3e", diff));
  }
  v.note("golden-mean Markov: rate " + fmt("%.12f", rate) + ", max |value - rate| " + fmt("%.3e", worst) + " at n=" + std::to_string(worst_n) +
         ", at n=16 " + fmt("%.3e", std::abs(trace.rows.back().value.value() - rate)));
  v.note("value equals (H(pi) + (n-1) rate) / n to " + fmt("%.1e", worst_closed) + "; per-site increment equals the rate to " + fmt("%.1e", worst_incr));
  return v;
}

// 4. Ordering suite.
Verdict criterion4(const std::vector<Instance>& instances) {
  Verdict v(4);
  const auto t0 = clock_type::now();
  std::size_t comparisons = 0;
  auto le = [&](std::uint64_t a, std::uint64_t b, const std::string& what) {
    ++comparisons;
    v.check(a <= b, what + " (" + std::to_string(a) + " > " + std::to_string(b) + ")");
  };
  for (const auto& in : instances) {
    const auto e = in.sys.group().identity();
    // Partitions refine by pulling back along {e} ∪ F; other covers by
    // splitting into the cylinders of their own window.
    std::vector<std::vector<std::uint32_t>> atoms;
    for (std::uint32_t p = 0; p < in.u.language().size(); ++p) atoms.push_back({p});
    const auto refined = in.u.is_partition() ? pullback_iterate(in.sys, in.u, set_union(FiniteSubset({e}), in.f)) : Cover(in.u.language_ptr(), atoms);
    v.check(refines(in.sys, refined, in.u), in.name + ": refinement precondition");
    for (double delta : in.deltas) {
      const auto base = sofic_topological_trace(in.sys, in.u, in.f, delta, in.prefix);
      const auto larger_f = sofic_topological_trace(in.sys, in.u, in.f_larger, delta, in.prefix);
      const auto smaller_delta = sofic_topological_trace(in.sys, in.u, in.f, delta / 2, in.prefix);
      TraceOptions same_metric;
      same_metric.metric_window = base.metric_window;
      const auto fine = sofic_topological_trace(in.sys, refined, in.f, delta, in.prefix, same_metric);
      std::vector<EntropyTrace> filtered;
      for (const auto& mu : in.measures) filtered.push_back(sofic_measure_trace(in.sys, in.u, mu, in.tests, in.f, delta, in.prefix));
      for (std::size_t i = 0; i < in.prefix.size(); ++i) {
        const auto tag = in.name + " delta=" + fmt("%g", delta) + " d=" + std::to_string(in.prefix[i].d()) + ": ";
        const auto& b = base.rows[i];
        v.check(b.complete && larger_f.rows[i].complete && smaller_delta.rows[i].complete && fine.rows[i].complete, tag + "budget");
        le(b.count_inner, b.count_outer, tag + "inner <= outer");
        le(b.microstates_inner, b.microstates_outer, tag + "inner <= outer microstates");
        for (auto* r : {&larger_f.rows[i], &smaller_delta.rows[i]}) {
          le(r->count_outer, b.count_outer, tag + "antitone (outer)");
          le(r->count_inner, b.count_inner, tag + "antitone (inner)");
        }
        le(b.count_outer, fine.rows[i].count_outer, tag + "refinement (outer)");
        le(b.count_inner, fine.rows[i].count_inner, tag + "refinement (inner)");
        for (const auto& f : filtered) {
          le(f.rows[i].count_outer, b.count_outer, tag + "filtered <= unfiltered (outer)");
          le(f.rows[i].count_inner, b.count_inner, tag + "filtered <= unfiltered (inner)");
        }
        for (const auto* t : {&base, &larger_f, &smaller_delta}) {
          const auto& r = t->rows[i];
          ++comparisons;
          v.check(r.value_outer.is_neg_inf() || r.value_outer.value() <= t->log_cover_number, tag + "value <= log N(U,X)");
          v.check(r.value_inner <= r.value_outer, tag + "inner value <= outer value");
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  v.check(secs < 300, "runtime " + fmt("%.1f s", secs));
  v.note(std::to_string(instances.size()) + " instances, " + std::to_string(comparisons) + " exact comparisons, " + fmt("%.1f s", secs));
  return v;
}

// 5. Lemma oracles.
Verdict criterion5(const std::vector<Instance>& instances) {
  Verdict v(5);
  std::size_t brute = 0;
  const std::vector<std::vector<double>> ps{{1.0}, {0.5, 0.5}, {0.3, 0.7}, {0.2, 0.3, 0.5}};
  for (const auto& p : ps)
    for (double eta : {0.05, 0.1, 0.15})
      for (int n = 1; n <= 12; ++n) {
        if (eta >= *std::min_element(p.begin(), p.end())) continue;
        ++brute;
        v.check(partition_count_bound(n, p, eta, 0.1).count == big_int(oracle::brute_force_partition_count(n, p, eta)),
                "partition count |Lambda|=" + std::to_string(n) + " eta=" + fmt("%g", eta));
      }
  v.note(std::to_string(brute) + " partition counts match exhaustive labelling for |Lambda| <= 12");

  std::size_t lemma = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (const auto& in : instances) {
    const auto fl = set_union(FiniteSubset({in.sys.group().identity()}), in.f);
    const auto vf = pullback_iterate(in.sys, in.u, fl);
    const double log_n = std::log(static_cast<double>(cover_number(in.u).count));
    for (const auto& nu : in.measures)
      for (double a : {0.5, 0.75, 0.9, 0.99}) {
        ++lemma;
        const double lhs = cover_entropy(nu, vf).value;
        const auto b = partial_cover_count(nu, vf, a);
        const double rhs = std::log(static_cast<double>(b.count)) + (1 - a) * static_cast<double>(fl.size()) * log_n + std::log(2.0);
        tightest = std::min(tightest, rhs - lhs);
        v.check(lhs <= rhs, in.name + " a=" + fmt("%g", a) + ": " + fmt("%.6f", lhs) + " > " + fmt("%.6f", rhs));
      }
  }
  v.note(std::to_string(lemma) + " cover-entropy inequalities hold; smallest slack " + fmt("%.4f", tightest));

  const auto sys = SymbolicSystem::full_shift(z(), 2);
  const auto ms = enumerate_microstates(sys, one(), 0.1, cyclic_model(z(), 8), origin());
  const std::vector<MeasureModel> cands{MeasureModel::bernoulli({0.25, 0.75}), MeasureModel::bernoulli({0.5, 0.5}), MeasureModel::bernoulli({0.75, 0.25})};
  const auto dom = select_dominant_measure(ms, cands, {TestFunction::indicator(Pattern(origin(), {0}), 2)}, 0.3, Cover::origin_partition(sys));
  v.check(dom.count * cands.size() >= dom.unfiltered, "pigeonhole count");
  v.check(dom.unfiltered == 256, "unfiltered count at d=8");
  v.note("d=8 full shift, |D|=3: selected count " + std::to_string(dom.count) + " >= ceil(" + std::to_string(dom.unfiltered) + "/3) = " +
         std::to_string(dom.required));
  return v;
}

// 6. Tiling.
Verdict criterion6() {
  Verdict v(6);
  struct Case {
    std::string name;
    SoficMap sigma;
    std::vector<FiniteSubset> shapes;
  };
  std::vector<Case> cases;
  const FiniteSubset e1({z().identity()});
  for (int d : {12, 13, 17, 24, 31})
    for (int len : {2, 3, 5})
      if (2 * len <= d) cases.push_back({"Z d=" + std::to_string(d) + " len " + std::to_string(len), cyclic_model(z(), d), {e1, interval(z(), 0, len)}});
  cases.push_back({"Z d=30 chain", cyclic_model(z(), 30), {e1, interval(z(), 0, 2), interval(z(), 0, 4)}});
  const auto z2 = GroupSpec::lattice(2);
  for (int n : {5, 6}) cases.push_back({"Z^2 " + std::to_string(n) + "x" + std::to_string(n), cyclic_model(z2, n), {FiniteSubset({z2.identity()}), folner_set(z2, 2)}});
  const auto z5 = GroupSpec::cyclic(5);
  cases.push_back({"Z/5 x3", cyclic_model(z5, 3), {FiniteSubset({z5.identity()}), FiniteSubset({z5.identity(), z5.element(1)})}});

  std::size_t runs = 0;
  double worst_margin = 1;
  for (const auto& c : cases)
    for (double eta : {0.05, 0.1, 0.2, 0.3})
      for (double tau : {0.0, 0.1}) {
        const auto idx = leading_indices(c.sigma.d(), tau);
        for (bool exact : {false, true}) {
          ++runs;
          const auto t = exact ? amenable_exact_tile(c.sigma, idx, c.shapes, eta, tau) : sofic_quasi_tile(c.sigma, idx, c.shapes, eta, tau);
          const auto again = verify_tiling(t, c.sigma);
          const auto tag = c.name + (exact ? " exact" : " quasi") + " eta=" + fmt("%g", eta) + " tau=" + fmt("%g", tau);
          v.check(again == t.record, tag + ": recomputation differs");
          v.check(again.holds(exact), tag + ": conditions");
          v.check(again.coverage() >= 1 - tau - eta, tag + ": coverage " + fmt("%.4f", again.coverage()));
          worst_margin = std::min(worst_margin, again.coverage() - (1 - tau - eta));
        }
      }
  v.note(std::to_string(cases.size()) + " instances, " + std::to_string(runs) + " tilings verified; smallest coverage margin " + fmt("%.4f", worst_margin));

  TilingOptions opt;
  opt.goodness_eta = 0.025;
  const auto t = sofic_quasi_tile(cyclic_model(z(), 12), leading_indices(12, 0), {interval(z(), 0, 3)}, 0.1, 0.0, opt);
  std::string c1 = "[";
  for (auto c : t.centers_one_based(0)) c1 += (c1.size() > 1 ? "," : "") + std::to_string(c);
  c1 += "]";
  v.check(c1 == "[1,4,7,10]", "C_1 = " + c1);
  v.note("cyclic d=12, F_1={0,1,2}: C_1 = " + c1);
  return v;
}

// 7. Variational inequality.
Verdict criterion7(const std::vector<Instance>& instances) {
  Verdict v(7);
  std::size_t rows = 0;
  for (const auto& in : instances) {
    std::vector<std::pair<FiniteSubset, double>> grid;
    for (double delta : in.deltas) grid.push_back({in.f, delta});
    const auto report = check_variational(in.sys, in.u, in.measures, in.tests, grid, in.prefix);
    rows += report.rows.size();
    for (const auto& r : report.rows) {
      v.check(r.holds, in.name + " d=" + std::to_string(r.d) + " delta=" + fmt("%g", r.delta));
      if (!r.holds) continue;
      for (std::size_t m = 0; m < r.measure_outer.size(); ++m)
        v.check(r.measure_value_outer[m] <= r.topo_value_outer && r.measure_value_inner[m] <= r.topo_value_inner,
                in.name + ": measure value above topological");
    }
  }
  v.note(std::to_string(instances.size()) + " instances, " + std::to_string(rows) + " stages: measure counts never exceed topological counts");

  const auto sys = SymbolicSystem::full_shift(z(), 2);
  const auto report = check_variational(sys, Cover::origin_partition(sys), {MeasureModel::bernoulli({0.5, 0.5})},
                                        {TestFunction::indicator(Pattern(origin(), {0}), 2)}, {{one(), 0.6}}, cyclic_prefix(z(), 4, 10));
  double worst = 0;
  for (const auto& r : report.rows) worst = std::max(worst, std::abs(r.gap));
  v.check(report.holds && worst == 0.0, "full shift + Bernoulli(1/2) gap " + fmt("%.3e", worst));
  v.note("full shift + Bernoulli(1/2), delta=0.6, d=4..10: max stage gap " + fmt("%g", worst));
  return v;
}

// 8. Pruned enumeration against the naive scan.
Verdict criterion8(const std::vector<Instance>& instances) {
  Verdict v(8);
  std::size_t checked = 0, skipped = 0;
  for (const auto& in : instances) {
    const auto m = in.u.window().empty() ? FiniteSubset({in.sys.group().identity()}) : in.u.window();
    const auto w = microstate_window(in.sys.group(), m, in.f);
    const double letters = static_cast<double>(language(in.sys, w).size());
    for (const auto& sigma : in.prefix) {
      if (std::pow(letters, static_cast<double>(sigma.d())) > 4096) {
        ++skipped;
        continue;
      }
      for (double delta : in.deltas)
        for (auto mode : {Certification::outer, Certification::inner}) {
          MicrostateOptions opt;
          opt.mode = mode;
          const auto tag = in.name + " d=" + std::to_string(sigma.d()) + " delta=" + fmt("%g", delta) + " " + to_string(mode);
          ++checked;
          v.check(enumerate_microstates(in.sys, in.f, delta, sigma, m, opt).tuples() ==
                      oracle::naive_microstates(in.sys, in.f, delta, sigma, m, mode),
                  tag);
          const MeasureFilter filter{in.measures.front(), in.tests, delta};
          ++checked;
          v.check(enumerate_microstates(in.sys, in.f, delta, sigma, m, opt, &filter).tuples() ==
                      oracle::naive_microstates(in.sys, in.f, delta, sigma, m, mode, &filter),
                  tag + " filtered");
        }
    }
  }
  v.note(std::to_string(checked) + " enumerations equal the naive |L(W)|^d scan (" + std::to_string(skipped) + " stages above 4096 skipped)");
  return v;
}

// 9. Entropy pairs.
Verdict criterion9() {
  Verdict v(9);
  const auto folner = folner_prefix(z(), 1, 10);
  const std::pair<Pattern, Pattern> pair{Pattern(origin(), {0}), Pattern(origin(), {1})};
  const auto full = entropy_pair_scan(SymbolicSystem::full_shift(z(), 2), {pair}, 0.01, folner);
  v.check(full[0].positive && full[0].value == ExtendedReal(std::log(2.0)), "full shift pair " + full[0].value.to_string());
  const SymbolicSystem fixed(z(), {"0", "1"}, {Pattern(origin(), {1})});
  const auto fp = entropy_pair_scan(fixed, {pair}, 0.01, folner);
  v.check(!fp[0].positive && fp[0].value == ExtendedReal(0.0), "fixed point pair " + fp[0].value.to_string());
  v.note("full shift [0] vs [1]: " + full[0].value.to_string() + " (positive); fixed point: " + fp[0].value.to_string() + " (not positive); " +
         full[0].label);
  return v;
}

}  // namespace

int main() {
  const auto instances = corpus();
  std::printf("corpus: %zu (system, cover, sofic prefix) instances\n", instances.size());
  std::vector<std::function<Verdict()>> runs{
      criterion1,
      criterion2,
      criterion3,

      [&] { return criterion4(instances); },
      [&] { return criterion5(instances); },
      criterion6,
      [&] { return criterion7(instances); },
      [&] { return criterion8(instances); },
      criterion9,
  };
  int failed = 0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    try {
      const auto verdict = runs[k]();
      verdict.print();
      failed += verdict.ok() ? 0 : 1;
    } catch (const std::exception& e) {
      std::printf("criterion %zu: FAIL\n    exception: %s\n", k + 1, e.what());
      ++failed;
    }
  }
  std::printf("%d of %zu criteria failed\n", failed, runs.size());
  return failed == 0 ? 0 : 1;
}
