#pragma once

// Closed-form Black-Scholes / Black-Scholes-Merton pricing for European
// options. All rates, yields and volatilities are annualized and
// continuously compounded.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "optbench/error.hpp"

namespace optbench {

enum class OptionKind { kCall, kPut };

inline std::string_view to_string(OptionKind k) { return k == OptionKind::kCall ? "call" : "put"; }

inline OptionKind parse_option_kind(std::string_view s) {
  if (s == "call" || s == "C" || s == "c") return OptionKind::kCall;
  if (s == "put" || s == "P" || s == "p") return OptionKind::kPut;
  throw DataError("unknown option kind '" + std::string(s) + "'");
}

struct OptionTerms {
  double spot = 0.0;
  double strike = 0.0;
  double tau = 0.0;         // years to expiry
  double rate = 0.0;
  double div_yield = 0.0;
  double vol = 0.0;
  OptionKind kind = OptionKind::kCall;
};

struct PriceResult {
  double price = 0.0;
  double delta = 0.0;
};

inline void validate(const OptionTerms& t) {
  if (!(t.spot > 0.0) || !std::isfinite(t.spot)) throw DomainError("option terms: spot must be > 0");
  if (!(t.strike > 0.0) || !std::isfinite(t.strike)) throw DomainError("option terms: strike must be > 0");
  if (!(t.tau >= 0.0) || !std::isfinite(t.tau)) throw DomainError("option terms: tau must be >= 0");
  if (!(t.vol >= 0.0) || !std::isfinite(t.vol)) throw DomainError("option terms: vol must be >= 0");
  if (!(t.div_yield >= 0.0) || !std::isfinite(t.div_yield))
    throw DomainError("option terms: dividend yield must be >= 0");
  if (!std::isfinite(t.rate)) throw DomainError("option terms: rate must be finite");
}

/// Standard normal CDF, N(x) = erfc(-x / sqrt 2) / 2.
///
/// Evaluated through the complementary error function so both tails keep
/// full relative precision.
inline double norm_cdf(double x) {
  if (!std::isfinite(x)) throw DomainError("norm_cdf: non-finite argument");
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace detail {

// tau == 0 or vol == 0: the payoff on the deterministic forward, discounted.
inline PriceResult degenerate_price(const OptionTerms& t) {
  const double fwd_spot = t.spot * std::exp(-t.div_yield * t.tau);
  const double pv_strike = t.strike * std::exp(-t.rate * t.tau);
  const double carry = std::exp(-t.div_yield * t.tau);
  if (t.kind == OptionKind::kCall) {
    const bool itm = fwd_spot > pv_strike;
    return {itm ? fwd_spot - pv_strike : 0.0, itm ? carry : 0.0};
  }
  const bool itm = pv_strike > fwd_spot;
  return {itm ? pv_strike - fwd_spot : 0.0, itm ? -carry : 0.0};
}

}  // namespace detail

/// Black-Scholes-Merton price and delta with continuous dividend yield q.
inline PriceResult bsm_price(const OptionTerms& t) {
  validate(t);
  if (t.tau == 0.0 || t.vol == 0.0) return detail::degenerate_price(t);

  const double sqrt_tau = std::sqrt(t.tau);
  const double vol_sqrt = t.vol * sqrt_tau;
  const double d1 =
      (std::log(t.spot / t.strike) + (t.rate - t.div_yield + 0.5 * t.vol * t.vol) * t.tau) / vol_sqrt;
  const double d2 = d1 - vol_sqrt;
  const double carry = std::exp(-t.div_yield * t.tau);
  const double discount = std::exp(-t.rate * t.tau);

  const double fwd_spot = t.spot * carry;
  const double pv_strike = t.strike * discount;
  // Out-of-the-money values are differences of two small terms; an
  // in-the-money leg is the forward intrinsic plus the other kind's value,
  // which avoids cancelling two large terms.
  const double call_otm = fwd_spot * norm_cdf(d1) - pv_strike * norm_cdf(d2);
  const double put_otm = pv_strike * norm_cdf(-d2) - fwd_spot * norm_cdf(-d1);
  const bool call_itm = fwd_spot > pv_strike;

  if (t.kind == OptionKind::kCall) {
    const double price = call_itm ? (fwd_spot - pv_strike) + put_otm : call_otm;
    return {std::max(price, 0.0), carry * norm_cdf(d1)};
  }
  const double price = call_itm ? put_otm : (pv_strike - fwd_spot) + call_otm;
  return {std::max(price, 0.0), -carry * norm_cdf(-d1)};
}

/// Black-Scholes price: BSM with the dividend yield forced to zero.
inline PriceResult bs_price(OptionTerms t) {
  t.div_yield = 0.0;
  return bsm_price(t);
}

// C - P - (S e^{-q tau} - K e^{-r tau}); zero up to rounding.
inline double parity_gap(const OptionTerms& t) {
  validate(t);
  if (!(t.tau > 0.0)) throw DomainError("parity_gap: tau must be > 0");
  OptionTerms call = t;
  call.kind = OptionKind::kCall;
  OptionTerms put = t;
  put.kind = OptionKind::kPut;
  const double forward =
      t.spot * std::exp(-t.div_yield * t.tau) - t.strike * std::exp(-t.rate * t.tau);
  return bsm_price(call).price - bsm_price(put).price - forward;
}

}  // namespace optbench
