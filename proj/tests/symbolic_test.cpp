#include <gtest/gtest.h>

#include "oracles.hpp"
#include "soficlab/symbolic.hpp"

using namespace soficlab;

namespace {

GroupSpec z() { return GroupSpec::lattice(1); }

Pattern word(int start, std::vector<Symbol> s) {
  auto w = interval(z(), start, start + static_cast<int>(s.size()));
  return Pattern(std::move(w), std::move(s));
}

}  // namespace

TEST(Language, FullShiftInterval) {
  auto sys = SymbolicSystem::full_shift(z(), 2);
  EXPECT_EQ(language(sys, interval(z(), 0, 3)).size(), 8u);
}

TEST(Language, GoldenMeanPairs) {
  auto sys = SymbolicSystem::golden_mean();
  auto lang = language(sys, interval(z(), 0, 2));
  ASSERT_EQ(lang.size(), 3u);
  EXPECT_EQ(lang.pattern(0).symbols, (std::vector<Symbol>{0, 0}));
  EXPECT_EQ(lang.pattern(1).symbols, (std::vector<Symbol>{0, 1}));
  EXPECT_EQ(lang.pattern(2).symbols, (std::vector<Symbol>{1, 0}));
  EXPECT_FALSE(lang.find(std::vector<Symbol>{1, 1}));
}

TEST(Language, GoldenMeanFibonacci) {
  auto sys = SymbolicSystem::golden_mean();
  std::vector<std::size_t> counts;
  for (int n = 1; n <= 16; ++n) {
    const auto size = language(sys, interval(z(), 0, n)).size();
    EXPECT_EQ(size, oracle::fibonacci(n + 2)) << n;
    EXPECT_EQ(size, oracle::golden_words(n)) << n;
    EXPECT_EQ(language_count_transfer(sys, n), big_int(size));
    counts.push_back(size);
  }
  for (int n = 2; n <= 14; ++n) EXPECT_EQ(counts[n], counts[n - 1] + counts[n - 2]);
  EXPECT_EQ(language(sys, interval(z(), 0, 4)).size(), 8u);
}

TEST(Language, ShiftedWindowSameCount) {
  auto sys = SymbolicSystem::golden_mean();
  EXPECT_EQ(language(sys, interval(z(), -7, -2)).size(), 13u);
  // A window with a gap has no adjacent sites to constrain across it.
  const FiniteSubset gap({z().element(0), z().element(2)});
  EXPECT_EQ(language(sys, gap).size(), 4u);
}

TEST(Language, HardSquareOnTwoByTwo) {
  auto z2 = GroupSpec::lattice(2);
  const std::vector<Pattern> forbidden{Pattern(FiniteSubset({z2.element({0, 0}), z2.element({1, 0})}), {1, 1}),
                                       Pattern(FiniteSubset({z2.element({0, 0}), z2.element({0, 1})}), {1, 1})};
  SymbolicSystem sys(z2, {"0", "1"}, forbidden);
  // Independent sets of the 4-cycle.
  EXPECT_EQ(language(sys, folner_set(z2, 2)).size(), 7u);
  // 3x3 grid graph: 63 independent sets.
  EXPECT_EQ(language(sys, folner_set(z2, 3)).size(), 63u);
}

TEST(Language, FreeGroupHardCoreOnStar) {
  auto f2 = GroupSpec::free_group(2);
  const std::vector<Pattern> forbidden{Pattern(FiniteSubset({f2.identity(), f2.parse_word("a")}), {1, 1}),
                                       Pattern(FiniteSubset({f2.identity(), f2.parse_word("b")}), {1, 1})};
  SymbolicSystem sys(f2, {"0", "1"}, forbidden);
  // Ball(1) is a star with four leaves: 2^4 + 1 independent sets.
  EXPECT_EQ(language(sys, FiniteSubset(f2.ball(1))).size(), 17u);
}

TEST(Language, BudgetExceeded) {
  auto sys = SymbolicSystem::full_shift(z(), 2);
  try {
    language(sys, interval(z(), 0, 10), 100);
    FAIL() << "expected resource_error";
  } catch (const resource_error& e) {
    EXPECT_TRUE(e.partial());
  }
}

TEST(Language, TransferNeedsNearestNeighbour) {
  auto zz = z();
  SymbolicSystem sys(zz, {"0", "1"}, {Pattern(interval(zz, 0, 3), {1, 1, 1})});
  EXPECT_THROW(language_count_transfer(sys, 5), unsupported_error);
  EXPECT_EQ(language(sys, interval(zz, 0, 5)).size(), 24u);  // tribonacci
}

TEST(Act, Reindexing) {
  auto zz = z();
  const auto p = word(0, {0, 1, 1});
  const auto q = act(zz, zz.element(1), p);
  EXPECT_EQ(q.window, interval(zz, -1, 2));
  EXPECT_EQ(q.symbols, (std::vector<Symbol>{0, 1, 1}));
  EXPECT_EQ(act(zz, zz.identity(), p), p);
}

TEST(Act, ActionAxiomAndRestriction) {
  auto f2 = GroupSpec::free_group(2);
  const FiniteSubset w(f2.ball(1));
  const Pattern p(w, {1, 0, 1, 1, 0});
  for (const auto& g : f2.ball(2))
    for (const auto& h : f2.ball(1)) {
      EXPECT_EQ(act(f2, g, act(f2, h, p)), act(f2, f2.multiply(g, h), p));
    }
  // restrict-then-act equals act-then-restrict on the translated window.
  const FiniteSubset sub({f2.identity(), f2.parse_word("b")});
  const auto g = f2.parse_word("aB");
  const auto lhs = act(f2, g, restrict(p, sub));
  const auto rhs = restrict(act(f2, g, p), right_translate(f2, sub, f2.inverse(g)));
  EXPECT_EQ(lhs, rhs);
}

TEST(Weights, IntegerEnumeration) {
  auto sys = SymbolicSystem::full_shift(z(), 2);
  EXPECT_EQ(sys.weight(z().element(0)), rational(1, 2));
  EXPECT_EQ(sys.weight(z().element(1)), rational(1, 4));
  EXPECT_EQ(sys.weight(z().element(-1)), rational(1, 8));
  EXPECT_EQ(sys.tail(interval(z(), -2, 3)), rational(1, 32));
  EXPECT_EQ(sys.tail(FiniteSubset()), rational(1));
  EXPECT_EQ(sys.tail(FiniteSubset({z().element(1)})), rational(3, 4));
}

TEST(Weights, StepTwoTailIsAnUpperBound) {
  auto sys = SymbolicSystem::full_shift(z(), 2, WeightScheme{2, TieBreak::positive_first});
  const auto w = interval(z(), -1, 2);
  double true_tail = 0;
  for (int j = 3; j < 200; ++j) true_tail += std::ldexp(1.0, -2 * (j + 1));
  EXPECT_GE(sys.tail(w).convert_to<double>(), true_tail);
  EXPECT_LE(sys.tail(w).convert_to<double>(), 2 * true_tail);
}

TEST(Weights, FiniteGroupTailIsExact) {
  auto sys = SymbolicSystem::full_shift(GroupSpec::cyclic(3), 2);
  EXPECT_EQ(sys.tail(folner_set(sys.group(), 1)), rational(0));
  EXPECT_EQ(sys.tail(FiniteSubset({sys.group().element(0)})), rational(1, 4) + rational(1, 8));
}

TEST(Rho, Examples) {
  auto sys = SymbolicSystem::full_shift(z(), 2);
  const auto w6 = interval(z(), -2, 4);  // positions 0..5
  const Pattern p(w6, {0, 0, 0, 0, 0, 0});
  auto r = rho(sys, p, p, w6);
  EXPECT_EQ(r.lo, 0);
  EXPECT_EQ(r.hi, rational(1, 64));

  const auto w5 = interval(z(), -2, 3);
  const Pattern a(w5, {0, 0, 0, 0, 0}), b(w5, {0, 0, 1, 0, 0}), c(w5, {1, 1, 1, 1, 1});
  EXPECT_EQ(rho(sys, a, b, w5).lo, rational(1, 2));
  EXPECT_EQ(rho(sys, a, c, w5).lo, rational(31, 32));
  EXPECT_EQ(rho(sys, a, c, w5).hi, rational(1));
  EXPECT_THROW(rho(sys, a, word(0, {0, 0}), w5), argument_error);
}

TEST(Rho, WidthShrinksAsWindowGrows) {
  auto sys = SymbolicSystem::full_shift(z(), 2);
  rational last = 2;
  for (int r = 0; r < 8; ++r) {
    const auto w = interval(z(), -r, r + 1);
    const Pattern p(w, std::vector<Symbol>(w.size(), 0));
    const auto iv = rho(sys, p, p, w);
    EXPECT_LE(iv.hi - iv.lo, last);
    last = iv.hi - iv.lo;
  }
}

TEST(Measure, BernoulliCylinders) {
  auto half = MeasureModel::bernoulli({0.5, 0.5});
  EXPECT_DOUBLE_EQ(cylinder_measure(half, word(0, {1, 0, 1})), 0.125);
  auto m = MeasureModel::bernoulli({0.3, 0.7});
  EXPECT_NEAR(cylinder_measure(m, word(4, {0, 1, 0})), 0.063, 1e-15);
  EXPECT_THROW(MeasureModel::bernoulli({0.3, 0.6}), argument_error);
  EXPECT_THROW(MeasureModel::bernoulli({-0.1, 1.1}), argument_error);
}

TEST(Measure, GoldenMeanMarkov) {
  const double phi = oracle::golden_ratio();
  const std::vector<std::vector<double>> p{{1 / phi, 1 / (phi * phi)}, {1.0, 0.0}};
  auto mu = MeasureModel::markov(p);
  const double pi0 = phi * phi / (1 + phi * phi), pi1 = 1 / (1 + phi * phi);
  EXPECT_NEAR(mu.marginal()[0], pi0, 1e-12);
  EXPECT_NEAR(mu.marginal()[1], pi1, 1e-12);
  EXPECT_NEAR(cylinder_measure(mu, word(0, {0, 1})), pi0 / (phi * phi), 1e-12);
  EXPECT_EQ(cylinder_measure(mu, word(0, {1, 1})), 0.0);

  auto parry = MeasureModel::parry({{1, 1}, {1, 0}});
  EXPECT_NEAR(parry.marginal()[0], pi0, 1e-12);
  EXPECT_NEAR(parry.as_markov()->transition[0][1], 1 / (phi * phi), 1e-12);
  EXPECT_NEAR(parry.entropy_rate(), std::log(phi), 1e-12);
  EXPECT_NEAR(mu.entropy_rate(), oracle::markov_rate({pi0, pi1}, p), 1e-12);
}

TEST(Measure, MarkovValidation) {
  const std::vector<std::vector<double>> p{{0.9, 0.1}, {0.5, 0.5}};
  EXPECT_THROW(MeasureModel::markov(p, std::vector<double>{0.5, 0.5}), argument_error);
  auto mu = MeasureModel::markov(p, std::vector<double>{5.0 / 6.0, 1.0 / 6.0});
  EXPECT_THROW(cylinder_measure(mu, Pattern(FiniteSubset({z().element(0), z().element(2)}), {0, 0})),
               unsupported_error);
  EXPECT_THROW(MeasureModel::markov({{0.5, 0.6}, {0.5, 0.5}}), argument_error);
}

TEST(Integrate, Examples) {
  auto zz = z();
  auto m = MeasureModel::bernoulli({0.3, 0.7});
  EXPECT_NEAR(integrate(m, TestFunction::indicator(word(0, {0}), 2)), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(integrate(m, TestFunction::constant(2.5, 2)), 2.5);
  auto half = MeasureModel::bernoulli({0.5, 0.5});
  EXPECT_DOUBLE_EQ(integrate(half, TestFunction::indicator(word(0, {0, 1}), 2)), 0.25);
}

TEST(Integrate, ShiftInvariance) {
  auto zz = z();
  const double phi = oracle::golden_ratio();
  auto markov = MeasureModel::markov({{1 / phi, 1 / (phi * phi)}, {1.0, 0.0}});
  auto bern = MeasureModel::bernoulli({0.2, 0.8});
  const auto f = TestFunction::table(interval(zz, 0, 3), 2, {0.1, -2, 3, 0.5, 1, 7, -1, 4});
  for (const auto* mu : {&markov, &bern}) {
    const double base = integrate(*mu, f);
    for (const auto& g : zz.ball(5)) EXPECT_NEAR(integrate(*mu, f.compose(zz, g)), base, 1e-12);
  }
  EXPECT_DOUBLE_EQ(f.sup_norm(), 7.0);
}

TEST(TestFunctionTable, ComposeReadsTranslatedWindow) {
  auto zz = z();
  const auto f = TestFunction::indicator(word(0, {1, 0}), 2);
  const auto g = f.compose(zz, zz.element(3));
  EXPECT_EQ(g.window(), interval(zz, 3, 5));
  // f(3·x) = 1 iff x_3 x_4 = 10.
  EXPECT_EQ(g(word(2, {0, 1, 0})), 1.0);
  EXPECT_EQ(g(word(2, {1, 0, 0})), 0.0);
}
