#pragma once

// GARCH(1,1) with zero-mean Gaussian innovations:
//   sigma2[t] = omega + alpha * eps[t-1]^2 + beta * sigma2[t-1]
// The pre-sample eps^2 and sigma^2 are both backcast with the sample second
// moment s2, so sigma2[0] = omega + (alpha + beta) * s2.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "optbench/error.hpp"
#include "optbench/nelder_mead.hpp"

namespace optbench {

struct GarchParams {
  double omega = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double loglik = 0.0;
  bool degenerate = false;  // optimizer could not beat the constant-variance fit
};

inline std::vector<double> log_returns(std::span<const double> prices) {
  if (prices.size() < 2) throw DataError("log_returns: need at least 2 prices");
  for (std::size_t i = 0; i < prices.size(); ++i)
    if (!(prices[i] > 0.0) || !std::isfinite(prices[i]))
      throw DomainError("log_returns: nonpositive price at index " + std::to_string(i));
  std::vector<double> out(prices.size() - 1);
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) out[i] = std::log(prices[i + 1] / prices[i]);
  return out;
}

// Second moment about zero, the constant-variance MLE for zero-mean returns.
inline double sample_variance(std::span<const double> returns) {
  double s = 0.0;
  for (double e : returns) s += e * e;
  return returns.empty() ? 0.0 : s / static_cast<double>(returns.size());
}

namespace detail {

inline double variance_floor() { return std::numeric_limits<double>::min(); }

template <typename Visit>
void garch_recursion(double omega, double alpha, double beta, std::span<const double> returns,
                     Visit&& visit) {
  const double s2 = sample_variance(returns);
  double var = omega + (alpha + beta) * s2;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    if (t > 0) var = omega + alpha * returns[t - 1] * returns[t - 1] + beta * var;
    visit(t, var);
  }
}

}  // namespace detail

/// Gaussian log-likelihood of the returns under (omega, alpha, beta).
inline double garch_loglik(double omega, double alpha, double beta, std::span<const double> returns) {
  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  double ll = 0.0;
  bool ok = true;
  detail::garch_recursion(omega, alpha, beta, returns, [&](std::size_t t, double var) {
    if (!(var > 0.0)) {
      ok = false;
      return;
    }
    ll += -0.5 * (kLog2Pi + std::log(var) + returns[t] * returns[t] / var);
  });
  return ok ? ll : -std::numeric_limits<double>::infinity();
}

// Unconstrained coordinates used by the optimizer:
//   x0 = log omega, alpha = e^x1 / (1 + e^x1 + e^x2), beta = e^x2 / (1 + e^x1 + e^x2)
// which keeps omega > 0, alpha, beta > 0 and alpha + beta < 1.
struct GarchCoordinates {
  static std::array<double, 3> to_params(std::span<const double> x) {
    const double m = std::max({0.0, x[1], x[2]});
    const double e0 = std::exp(-m), e1 = std::exp(x[1] - m), e2 = std::exp(x[2] - m);
    const double denom = e0 + e1 + e2;
    return {std::exp(x[0]), e1 / denom, e2 / denom};
  }
  static std::vector<double> from_params(double omega, double alpha, double beta) {
    const double rest = 1.0 - alpha - beta;
    return {std::log(omega), std::log(alpha / rest), std::log(beta / rest)};
  }
};

struct GarchFitOptions {
  double f_tolerance = 1e-8;
  std::size_t max_evaluations = 20000;
};

/// Maximum-likelihood GARCH(1,1) fit by multi-start Nelder-Mead.
///
/// When no start improves on the constant-variance model (omega = s2,
/// alpha = beta = 0) by more than 1e-6 in log-likelihood, the constant
/// model is returned with `degenerate` set.
inline GarchParams garch_fit(std::span<const double> returns, const GarchFitOptions& opt = {}) {
  if (returns.size() < 100) throw DataError("garch_fit: need at least 100 returns");
  for (double e : returns)
    if (!std::isfinite(e)) throw DataError("garch_fit: non-finite return");

  const double s2 = std::max(sample_variance(returns), detail::variance_floor());
  GarchParams constant{s2, 0.0, 0.0, garch_loglik(s2, 0.0, 0.0, returns), true};

  double mean = 0.0;
  for (double e : returns) mean += e;
  mean /= static_cast<double>(returns.size());
  double spread = 0.0;
  for (double e : returns) spread += (e - mean) * (e - mean);
  if (spread == 0.0) return constant;

  constexpr std::array<std::array<double, 2>, 3> kStarts{{{0.05, 0.90}, {0.10, 0.80}, {0.02, 0.97}}};
  NelderMeadOptions nm;
  nm.f_tolerance = opt.f_tolerance;
  nm.max_evaluations = opt.max_evaluations;
  auto objective = [&](const std::vector<double>& x) {
    const auto p = GarchCoordinates::to_params(x);
    return -garch_loglik(p[0], p[1], p[2], returns);
  };

  GarchParams best = constant;
  for (const auto& [a, b] : kStarts) {
    const auto r = nelder_mead(objective, GarchCoordinates::from_params(s2 * (1.0 - a - b), a, b), nm);
    const auto p = GarchCoordinates::to_params(r.x);
    const double ll = -r.value;
    if (std::isfinite(ll) && ll > best.loglik && p[1] + p[2] < 1.0) best = {p[0], p[1], p[2], ll, false};
  }
  if (best.degenerate || best.loglik <= constant.loglik + 1e-6) return constant;
  return best;
}

/// Annualized conditional volatility sqrt(sigma2[t] * periods_per_year).
inline std::vector<double> vol_series(const GarchParams& p, std::span<const double> returns,
                                      int periods_per_year = 252) {
  if (periods_per_year <= 0) throw ConfigError("vol_series: periods_per_year must be positive");
  if (!(p.omega > 0.0) || p.alpha < 0.0 || p.beta < 0.0)
    throw DomainError("vol_series: invalid GARCH parameters");
  std::vector<double> out(returns.size());
  detail::garch_recursion(p.omega, p.alpha, p.beta, returns, [&](std::size_t t, double var) {
    out[t] = std::sqrt(var * static_cast<double>(periods_per_year));
  });
  return out;
}

}  // namespace optbench
