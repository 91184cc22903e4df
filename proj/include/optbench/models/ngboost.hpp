#pragma once

// Natural-gradient boosting for a Gaussian predictive distribution,
// parameterized as theta = (mu, log sigma) and scored by negative
// log-likelihood.
//
//   NLL(y; mu, s)   = s + (y - mu)^2 / (2 e^{2s}) + log(2 pi) / 2
//   grad            = ( -(y - mu) / sigma^2,  1 - (y - mu)^2 / sigma^2 )
//   Fisher          = diag( 1 / sigma^2, 2 )
//   natural grad    = ( -(y - mu),  (1 - (y - mu)^2 / sigma^2) / 2 )

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "optbench/models/boosting.hpp"
#include "optbench/models/tree.hpp"

namespace optbench::models {

struct GaussianPrediction {
  double mu = 0.0;
  double log_sigma = 0.0;

  double sigma() const { return std::exp(log_sigma); }
};

inline double gaussian_nll(double y, const GaussianPrediction& p) {
  const double z = (y - p.mu) * std::exp(-p.log_sigma);
  return p.log_sigma + 0.5 * z * z + 0.5 * std::log(2.0 * std::numbers::pi);
}

inline std::array<double, 2> gaussian_nll_gradient(double y, const GaussianPrediction& p) {
  const double r = y - p.mu;
  const double inv_var = std::exp(-2.0 * p.log_sigma);
  return {-r * inv_var, 1.0 - r * r * inv_var};
}

// Diagonal of the Fisher information in (mu, log sigma).
inline std::array<double, 2> gaussian_fisher_diagonal(const GaussianPrediction& p) {
  return {std::exp(-2.0 * p.log_sigma), 2.0};
}

inline std::array<double, 2> gaussian_natural_gradient(double y, const GaussianPrediction& p) {
  const double r = y - p.mu;
  const double inv_var = std::exp(-2.0 * p.log_sigma);
  return {-r, 0.5 * (1.0 - r * r * inv_var)};
}

struct NgbRound {
  RegressionTree mu_tree;
  RegressionTree log_sigma_tree;
  double scale = 1.0;  // line-search multiplier

  bool operator==(const NgbRound&) const = default;
};

/// theta(x) = theta_0 - sum_m learning_rate * scale_m * (tree_mu_m(x), tree_s_m(x)).
class NgbModel {
 public:
  NgbModel() = default;
  NgbModel(GaussianPrediction base, double learning_rate, std::vector<NgbRound> rounds)
      : base_(base), learning_rate_(learning_rate), rounds_(std::move(rounds)) {}

  GaussianPrediction predict_dist(std::span<const double> x) const {
    GaussianPrediction p = base_;
    for (const auto& r : rounds_) {
      const double step = learning_rate_ * r.scale;
      p.mu -= step * r.mu_tree.predict(x);
      p.log_sigma -= step * r.log_sigma_tree.predict(x);
    }
    return p;
  }

  std::vector<GaussianPrediction> predict_dist(const MatrixView& X) const {
    std::vector<GaussianPrediction> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict_dist(X.row(i));
    return out;
  }

  double predict(std::span<const double> x) const { return predict_dist(x).mu; }

  std::vector<double> predict(const MatrixView& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) out[i] = predict(X.row(i));
    return out;
  }

  const GaussianPrediction& base() const { return base_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<NgbRound>& rounds() const { return rounds_; }
  bool operator==(const NgbModel&) const = default;

 private:
  GaussianPrediction base_;
  double learning_rate_ = 0.1;
  std::vector<NgbRound> rounds_;
};

inline double mean_nll(std::span<const double> y, std::span<const GaussianPrediction> p) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += gaussian_nll(y[i], p[i]);
  return s / static_cast<double>(y.size());
}

using NgbObserver = std::function<void(int, std::span<const GaussianPrediction>)>;

/// Gaussian NGBoost with one tree per parameter per round.
///
/// Uses params.n_rounds, learning_rate and tree; lambda, gamma and order are
/// ignored. Each round's step is halved until the mean training NLL does not
/// increase (at most 30 halvings, after which the round is a no-op).
inline NgbModel fit_ngb_gaussian(const MatrixView& X, std::span<const double> y, const BoostParams& params,
                                 const NgbObserver& observe = {}) {
  params.validate();
  if (y.size() != X.rows || X.rows == 0) throw ConfigError("fit_ngb_gaussian: bad target length");
  const double mu0 = detail::mean(y);
  double var0 = 0.0;
  for (double v : y) var0 += (v - mu0) * (v - mu0);
  var0 /= static_cast<double>(y.size());
  if (!(var0 > 0.0)) throw ConfigError("fit_ngb_gaussian: zero-variance target, Gaussian initialization undefined");
  const GaussianPrediction base{mu0, 0.5 * std::log(var0)};

  const SplitIndex index(X, params.tree);
  const std::size_t n = X.rows;
  std::vector<GaussianPrediction> theta(n, base), trial(n);
  std::vector<double> g_mu(n), g_s(n), h(n, 1.0), c(n, 1.0);
  std::vector<double> step_mu(n), step_s(n);
  std::vector<NgbRound> rounds;

  double current = mean_nll(y, theta);
  for (int m = 0; m < params.n_rounds; ++m) {
    // Trees regress the natural gradient: leaf = mean target, i.e. g = -target.
    for (std::size_t i = 0; i < n; ++i) {
      const auto ng = gaussian_natural_gradient(y[i], theta[i]);
      g_mu[i] = -ng[0];
      g_s[i] = -ng[1];
    }
    auto mu_tree = grow_tree(index, {g_mu, h, c}, {});
    auto s_tree = grow_tree(index, {g_s, h, c}, {});
    for (std::size_t i = 0; i < n; ++i) {
      step_mu[i] = mu_tree.predict(X.row(i));
      step_s[i] = s_tree.predict(X.row(i));
    }

    double scale = 1.0;
    double trial_loss = current;
    int halvings = 0;
    for (; halvings <= 30; ++halvings, scale *= 0.5) {
      const double step = params.learning_rate * scale;
      for (std::size_t i = 0; i < n; ++i)
        trial[i] = {theta[i].mu - step * step_mu[i], theta[i].log_sigma - step * step_s[i]};
      trial_loss = mean_nll(y, trial);
      if (std::isfinite(trial_loss) && trial_loss <= current) break;
    }
    if (halvings > 30) {
      scale = 0.0;
    } else {
      theta.swap(trial);
      current = trial_loss;
    }
    rounds.push_back({std::move(mu_tree), std::move(s_tree), scale});
    if (observe) observe(m, theta);
  }
  return NgbModel(base, params.learning_rate, std::move(rounds));
}

}  // namespace optbench::models
