#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace optbench {

struct NelderMeadOptions {
  double initial_step = 0.5;
  double f_tolerance = 1e-8;  // stop when the simplex spread in f drops below this
  std::size_t max_evaluations = 20000;
  int max_restarts = 6;       // fresh simplex around the incumbent until it stops moving
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

namespace detail {

template <typename F>
NelderMeadResult nelder_mead_once(F&& f, std::vector<double> start, const NelderMeadOptions& opt,
                                  std::size_t budget) {
  const std::size_t n = start.size();
  std::vector<std::vector<double>> pts(n + 1, start);
  std::vector<double> vals(n + 1);
  std::size_t evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += opt.initial_step;
  for (std::size_t i = 0; i <= n; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second_worst = order[n - 1];
    if (std::isfinite(vals[worst]) && vals[worst] - vals[best] < opt.f_tolerance) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);
    }
    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - pts[worst][j]);
    const double fr = eval(xr);
    if (fr < vals[best]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - pts[worst][j]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second_worst]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    for (std::size_t j = 0; j < n; ++j)
      xc[j] = outside ? centroid[j] + 0.5 * (xr[j] - centroid[j])
                      : centroid[j] + 0.5 * (pts[worst][j] - centroid[j]);
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    // shrink toward the best vertex
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return {pts[static_cast<std::size_t>(it - vals.begin())], *it, evals};
}

}  // namespace detail

/// Derivative-free minimization of f over R^n.
template <typename F>
NelderMeadResult nelder_mead(F&& f, std::vector<double> start, const NelderMeadOptions& opt = {}) {
  NelderMeadResult best;
  best.x = start;
  for (int round = 0; round <= opt.max_restarts; ++round) {
    if (best.evaluations >= opt.max_evaluations) break;
    auto step = opt;
    step.initial_step = round == 0 ? opt.initial_step : opt.initial_step * 0.1;
    auto r = detail::nelder_mead_once(f, best.x, step, opt.max_evaluations - best.evaluations);
    const double prev = best.value;
    const std::size_t used = best.evaluations + r.evaluations;
    if (r.value <= best.value) {
      best.x = std::move(r.x);
      best.value = r.value;
    }
    best.evaluations = used;
    if (round > 0 && std::isfinite(prev) && prev - best.value < opt.f_tolerance) break;
  }
  return best;
}

}  // namespace optbench
