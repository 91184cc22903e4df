#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's own formulas.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

// Adaptive Simpson quadrature with Richardson correction.
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 60);
}

inline double gauss_density(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Standard normal CDF by quadrature of the density.
inline double normal_cdf(double x) {
  if (x >= 0.0) return 0.5 + integrate(gauss_density, 0.0, x);
  return 0.5 - integrate(gauss_density, x, 0.0);
}

// European option value as the discounted risk-neutral expectation over the
// lognormal terminal price, integrated in the standard normal variable z:
//   S_T = S exp((r - q - v^2/2) tau + v sqrt(tau) z)
// The payoff kink is placed on a panel boundary and the integrand is summed
// over the in-the-money half-line only.
inline double european_price(double S, double K, double tau, double r, double q, double v, bool call) {
  const double drift = (r - q - 0.5 * v * v) * tau;
  const double sd = v * std::sqrt(tau);
  const double kink = (std::log(K / S) - drift) / sd;
  auto payoff = [&](double z) {
    const double st = S * std::exp(drift + sd * z);
    return (call ? st - K : K - st) * gauss_density(z);
  };
  // Tails beyond 40 sd contribute below double precision.
  double total = 0.0;
  const double lo = call ? std::max(kink, -40.0) : -40.0;
  const double hi = call ? std::max(kink, sd) + 40.0 : std::min(kink, 40.0);
  if (hi > lo) {
    const int panels = 64;
    const double w = (hi - lo) / panels;
    for (int i = 0; i < panels; ++i) total += integrate(payoff, lo + i * w, lo + (i + 1) * w, 1e-15 * S);
  }
  return std::exp(-r * tau) * total;
}

// Exhaustive split search over a row subset of a small row-major matrix.
// Candidate thresholds sit halfway between consecutive distinct values;
// `score(left_rows, right_rows)` returns the criterion to maximize.
struct BruteSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> left;  // rows sent left
};

template <typename Score>
BruteSplit brute_force_split(const std::vector<double>& X, std::size_t cols, const std::vector<std::size_t>& rows,
                             std::size_t min_leaf, Score&& score) {
  BruteSplit best;
  for (std::size_t f = 0; f < cols; ++f) {
    std::vector<double> values;
    for (auto r : rows) values.push_back(X[r * cols + f]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t j = 0; j + 1 < values.size(); ++j) {
      const double t = 0.5 * (values[j] + values[j + 1]);
      std::vector<std::size_t> L, R;
      for (auto r : rows) (X[r * cols + f] <= t ? L : R).push_back(r);
      if (L.size() < min_leaf || R.size() < min_leaf) continue;
      const double sc = score(L, R);
      if (sc > best.score) best = {true, f, t, sc, L};
    }
  }
  return best;
}

// Sum of squared deviations from the mean, two-pass.
inline double sse(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  double m = 0.0;
  for (auto r : rows) m += y[r];
  m /= static_cast<double>(rows.size());
  double s = 0.0;
  for (auto r : rows) s += (y[r] - m) * (y[r] - m);
  return s;
}

// Second-order gain with explicit sums.
inline double second_order_gain(const std::vector<double>& g, const std::vector<double>& h,
                                const std::vector<std::size_t>& L, const std::vector<std::size_t>& R, double lambda,
                                double gamma) {
  double GL = 0, HL = 0, GR = 0, HR = 0;
  for (auto r : L) GL += g[r], HL += h[r];
  for (auto r : R) GR += g[r], HR += h[r];
  return 0.5 * (GL * GL / (HL + lambda) + GR * GR / (HR + lambda) - (GL + GR) * (GL + GR) / (HL + HR + lambda)) -
         gamma;
}

}  // namespace oracle
