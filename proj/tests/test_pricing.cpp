#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "optbench/pricing.hpp"
#include "oracles.hpp"

using namespace optbench;

namespace {

OptionTerms terms(double S, double K, double tau, double r, double q, double vol,
                  OptionKind kind = OptionKind::kCall) {
  return {S, K, tau, r, q, vol, kind};
}

OptionTerms random_terms(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> spot(50, 150), m(0.8, 1.25), tau(0.1, 2.0), r(0.0, 0.08), q(0.0, 0.05),
      vol(0.15, 0.6);
  std::bernoulli_distribution call(0.5);
  const double S = spot(rng);
  return terms(S, S * m(rng), tau(rng), r(rng), q(rng), vol(rng), call(rng) ? OptionKind::kCall : OptionKind::kPut);
}

}  // namespace

TEST(NormCdf, Symmetry) { EXPECT_EQ(norm_cdf(0.0), 0.5); }

TEST(NormCdf, TailSaturation) { EXPECT_NEAR(norm_cdf(10.0), 1.0, 1e-12); }

TEST(NormCdf, MatchesQuadratureAtOne) {
  const double q = oracle::normal_cdf(1.0);
  EXPECT_NEAR(q, 0.8413447461, 5e-11);
  EXPECT_NEAR(norm_cdf(1.0), q, 1e-12);
}

TEST(NormCdf, AgreesWithQuadratureOnGrid) {
  for (double x = -8.0; x <= 8.0; x += 0.25) EXPECT_NEAR(norm_cdf(x), oracle::normal_cdf(x), 1e-12) << x;
}

TEST(NormCdf, MonotoneAndBounded) {
  double prev = 0.0;
  for (double x = -40.0; x <= 40.0; x += 0.01) {
    const double v = norm_cdf(x);
    EXPECT_GE(v, prev);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    prev = v;
  }
}

TEST(NormCdf, RejectsNonFinite) {
  EXPECT_THROW(norm_cdf(std::numeric_limits<double>::quiet_NaN()), DomainError);
  EXPECT_THROW(norm_cdf(std::numeric_limits<double>::infinity()), DomainError);
}

TEST(BsPrice, AtTheMoneyAtExpiry) {
  const auto p = bs_price(terms(100, 100, 0, 0.05, 0, 0.2));
  EXPECT_EQ(p.price, 0.0);
  EXPECT_EQ(p.delta, 0.0);
}

TEST(BsPrice, ExpiryDeltaFollowsMoneyness) {
  EXPECT_EQ(bs_price(terms(110, 100, 0, 0.05, 0, 0.2)).delta, 1.0);
  EXPECT_EQ(bs_price(terms(110, 100, 0, 0.05, 0, 0.2)).price, 10.0);
  EXPECT_EQ(bs_price(terms(90, 100, 0, 0.05, 0, 0.2)).delta, 0.0);
}

TEST(BsPrice, ReferenceCallMatchesQuadrature) {
  const double q = oracle::european_price(100, 100, 1, 0.05, 0, 0.2, true);
  EXPECT_NEAR(q, 10.450584, 5e-7);
  EXPECT_NEAR(bs_price(terms(100, 100, 1, 0.05, 0, 0.2)).price, q, 1e-6 * q);
}

TEST(BsPrice, ZeroVolatilityLimit) {
  const double forward_limit = 100.0 - 100.0 * std::exp(-0.05);
  EXPECT_NEAR(forward_limit, 4.877058, 5e-7);
  EXPECT_NEAR(bs_price(terms(100, 100, 1, 0.05, 0, 0.0)).price, forward_limit, 1e-12);
  EXPECT_NEAR(bs_price(terms(100, 100, 1, 0.05, 0, 1e-9)).price, forward_limit, 1e-9);
}

TEST(BsmPrice, ZeroDividendEqualsBs) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto t = random_terms(rng);
    t.div_yield = 0.0;
    const auto a = bsm_price(t);
    const auto b = bs_price(t);
    EXPECT_EQ(a.price, b.price);
    EXPECT_EQ(a.delta, b.delta);
  }
}

TEST(BsmPrice, DividendCallMatchesQuadrature) {
  const double q = oracle::european_price(100, 100, 1, 0.05, 0.02, 0.2, true);
  EXPECT_NEAR(bsm_price(terms(100, 100, 1, 0.05, 0.02, 0.2)).price, q, 1e-6 * q);
}

TEST(BsmPrice, DeepInTheMoneyDelta) {
  const auto p = bsm_price(terms(200, 100, 0.5, 0.05, 0.01, 0.2));
  EXPECT_NEAR(p.delta, std::exp(-0.01 * 0.5), 1e-4);
}

TEST(BsmPrice, SeededGridMatchesQuadrature) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_terms(rng);
    const double q =
        oracle::european_price(t.spot, t.strike, t.tau, t.rate, t.div_yield, t.vol, t.kind == OptionKind::kCall);
    EXPECT_NEAR(bsm_price(t).price, q, 1e-6 * q) << i;
  }
}

TEST(BsmPrice, DeltaMatchesCentralDifference) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    auto t = random_terms(rng);
    const double h = 1e-4 * t.spot;
    auto up = t, dn = t;
    up.spot += h;
    dn.spot -= h;
    const double fd = (bsm_price(up).price - bsm_price(dn).price) / (2.0 * h);
    EXPECT_NEAR(bsm_price(t).delta, fd, 1e-5) << i;
  }
}

TEST(BsmPrice, CallBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double S = 1 + 200 * u(rng), K = 1 + 200 * u(rng), tau = 3 * u(rng), r = -0.02 + 0.12 * u(rng),
                 q = 0.08 * u(rng), vol = 1.5 * u(rng);
    const auto p = bsm_price(terms(S, K, tau, r, q, vol));
    const double fwd = S * std::exp(-q * tau);
    const double lower = std::max(fwd - K * std::exp(-r * tau), 0.0);
    EXPECT_GE(p.price, lower - 1e-12 * S);
    EXPECT_LE(p.price, fwd + 1e-12 * S);
    EXPECT_GE(p.delta, 0.0);
    EXPECT_LE(p.delta, 1.0);
    auto put = terms(S, K, tau, r, q, vol, OptionKind::kPut);
    const auto pp = bsm_price(put);
    EXPECT_GE(pp.delta, -1.0);
    EXPECT_LE(pp.delta, 0.0);
    EXPECT_GE(pp.price, 0.0);
  }
}

TEST(BsmPrice, MonotoneInSpotAndVol) {
  std::mt19937_64 rng(100);
  for (int grid = 0; grid < 100; ++grid) {
    const auto base = random_terms(rng);
    double prev = -1.0;
    for (double S = 0.5 * base.spot; S <= 1.5 * base.spot; S += 0.01 * base.spot) {
      auto t = base;
      t.kind = OptionKind::kCall;
      t.spot = S;
      const double c = bsm_price(t).price;
      EXPECT_GE(c, prev);
      prev = c;
    }
    prev = -1.0;
    for (double v = 0.0; v <= 1.0; v += 0.01) {
      auto t = base;
      t.kind = OptionKind::kCall;
      t.vol = v;
      const double c = bsm_price(t).price;
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(ParityGap, ReferenceTerms) {
  EXPECT_LT(std::abs(parity_gap(terms(100, 100, 1, 0.05, 0.02, 0.2))), 1e-10);
  EXPECT_LT(std::abs(parity_gap(terms(100, 90, 0.3, 0.03, 0.0, 0.35))), 1e-10);
}

TEST(ParityGap, BsLegsWithoutDividend) {
  const auto call = terms(100, 105, 0.75, 0.04, 0.0, 0.25);
  auto put = call;
  put.kind = OptionKind::kPut;
  const double gap = bs_price(call).price - bs_price(put).price - (100.0 - 105.0 * std::exp(-0.04 * 0.75));
  EXPECT_LT(std::abs(gap), 1e-10);
}

TEST(ParityGap, SeededSweep) {
  std::mt19937_64 rng(1000);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) worst = std::max(worst, std::abs(parity_gap(random_terms(rng))));
  EXPECT_LT(worst, 1e-9);
}

TEST(ParityGap, RequiresPositiveTau) { EXPECT_THROW(parity_gap(terms(100, 100, 0, 0.05, 0, 0.2)), DomainError); }

TEST(Validate, RejectsInvalidTerms) {
  EXPECT_THROW(bsm_price(terms(0, 100, 1, 0.05, 0, 0.2)), DomainError);
  EXPECT_THROW(bsm_price(terms(100, -1, 1, 0.05, 0, 0.2)), DomainError);
  EXPECT_THROW(bsm_price(terms(100, 100, -1, 0.05, 0, 0.2)), DomainError);
  EXPECT_THROW(bsm_price(terms(100, 100, 1, 0.05, -0.01, 0.2)), DomainError);
  EXPECT_THROW(bsm_price(terms(100, 100, 1, 0.05, 0, -0.2)), DomainError);
}

TEST(OptionKind, ParsesNames) {
  EXPECT_EQ(parse_option_kind("call"), OptionKind::kCall);
  EXPECT_EQ(parse_option_kind("put"), OptionKind::kPut);
  EXPECT_THROW(parse_option_kind("straddle"), Error);
}
