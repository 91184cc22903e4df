// Prices one option, fits GARCH on a simulated path and scores a small error table.

#include <cmath>
#include <cstdio>
#include <random>

#include "optbench/harness.hpp"

using namespace optbench;

int main() {
  const OptionTerms call{100.0, 105.0, 0.5, 0.03, 0.01, 0.25, OptionKind::kCall};
  const auto q = bsm_price(call);
  std::printf("call price %.4f delta %.4f\n", q.price, q.delta);

  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0.0, 0.012);
  std::vector<double> returns(2000);
  for (auto& r : returns) r = z(rng);
  const auto g = garch_fit(returns);
  std::printf("garch omega %.3g alpha %.4f beta %.4f\n", g.omega, g.alpha, g.beta);

  ErrorTable t;
  t.set("BS", "near", 0.20);
  t.set("BS", "far", 0.30);
  t.set("GB2", "near", 0.12);
  t.set("GB2", "far", 0.27);
  t.set("RF", "near", 0.15);
  t.set("RF", "far", 0.25);
  const auto rep = score_table(t, WeightVector::equal({"near", "far"}));
  for (const auto& row : rep.rows) std::printf("%s score_bs %.2f score_ml %.2f\n", row.model.c_str(), row.score_bs, row.score_ml);
}
