// Golden-mean shift: amenable versus sofic entropy of the origin partition,
// side by side with the transfer-matrix counts they should reproduce.

#include <cmath>
#include <cstdio>

#include "soficlab/soficlab.hpp"

using namespace soficlab;

int main() {
  const auto sys = SymbolicSystem::golden_mean();
  const auto z = sys.group();
  const auto u = Cover::origin_partition(sys);
  const FiniteSubset f({z.element(1)});

  std::vector<FiniteSubset> folner;
  std::vector<SoficMap> prefix;
  for (int n = 2; n <= 14; ++n) {
    folner.push_back(folner_set(z, n));
    prefix.push_back(cyclic_model(z, n));
  }
  const auto amen = amenable_topological_trace(sys, u, folner);
  const auto sofic = sofic_topological_trace(sys, u, f, 0.1, prefix);
  const auto mu = MeasureModel::parry({{1, 1}, {1, 0}});
  const auto meas = amenable_measure_trace(sys, u, mu, folner);

  std::printf("%3s %8s %10s %8s %10s %10s %10s\n", "n", "words", "amenable", "cycles", "sofic", "gap", "parry");
  for (std::size_t i = 0; i < folner.size(); ++i) {
    const auto& a = amen.rows[i];
    const auto& s = sofic.rows[i];
    std::printf("%3zu %8s %10.6f %8llu %10.6f %10.6f %10.6f\n", a.size, a.count.str().c_str(), a.value.value(),
                static_cast<unsigned long long>(s.count_outer), s.value_outer.value(), a.value.value() - s.value_outer.value(),
                meas.rows[i].value.value());
  }
  std::printf("log of the golden ratio: %.6f\n", std::log((1 + std::sqrt(5.0)) / 2));
  return 0;
}
