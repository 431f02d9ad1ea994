#ifndef FOLDDIFF_GLM_HPP
#define FOLDDIFF_GLM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "folddiff/mathutil.hpp"

namespace folddiff {

// Shared fitting kernel for the log-link and logit-link weighted regressions.
// The design matrix must carry an explicit intercept in column 0; the ridge
// penalty (lambda/2)*||beta||^2 excludes that column. Degenerate likelihoods
// (all-zero responses, separation) drift toward infinite coefficients and are
// stopped at +/-40 on the coefficient scale with converged = false.

struct GlmFit {
  Eigen::VectorXd coefficients;   // intercept first
  bool converged = false;
  int iterations = 0;
  double final_score_norm = 0.0;
  bool capped = false;            // coefficient cap engaged
};

namespace detail {

constexpr double kGlmCoefCap = 40.0;
constexpr int kGlmMaxIter = 100;
constexpr int kGlmMaxHalvings = 30;

inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

enum class GlmFamily { poisson_log, bernoulli_logit };

inline GlmFit fit_weighted_glm(GlmFamily family, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                               const Eigen::VectorXd& offset, double ridge) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (d < 1) throw std::invalid_argument("glm: design needs at least the intercept column");
  if (y.size() != n || w.size() != n) throw std::invalid_argument("glm: length mismatch");
  if (offset.size() != 0 && offset.size() != n) {
    throw std::invalid_argument("glm: offset length mismatch");
  }
  if (ridge < 0.0) throw std::invalid_argument("glm: negative ridge");
  const double sumw = w.sum();
  if (!(sumw > 0.0)) throw std::invalid_argument("glm: all weights zero");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw std::invalid_argument("glm: bad weight");
    if (!std::isfinite(y[i])) throw std::invalid_argument("glm: bad response");
    if (family == GlmFamily::poisson_log && y[i] < 0.0) {
      throw std::invalid_argument("glm: negative response under log link");
    }
    if (family == GlmFamily::bernoulli_logit && y[i] != 0.0 && y[i] != 1.0) {
      throw std::invalid_argument("glm: logistic response must be 0/1");
    }
  }

  const bool has_offset = offset.size() == n;

  // Degenerate likelihoods have no finite optimum; return the documented
  // floor immediately instead of letting the iteration drift.
  const double sumwy = w.dot(y);
  const bool zero_mass = sumwy <= 0.0;
  const bool full_mass = family == GlmFamily::bernoulli_logit && sumwy >= sumw;
  if (zero_mass || full_mass) {
    GlmFit fit;
    fit.coefficients = Eigen::VectorXd::Zero(d);
    fit.coefficients[0] = zero_mass ? -kGlmCoefCap : kGlmCoefCap;
    fit.converged = false;
    fit.capped = true;
    fit.iterations = 0;
    return fit;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd eta(n), mu(n);

  auto update_mu = [&](const Eigen::VectorXd& b) {
    eta = X * b;
    if (has_offset) eta += offset;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = clip(eta[i], -kGlmCoefCap, kGlmCoefCap);
      mu[i] = (family == GlmFamily::poisson_log) ? std::exp(e) : expit(e);
    }
  };

  auto objective = [&](const Eigen::VectorXd& b) {
    Eigen::VectorXd et = X * b;
    if (has_offset) et += offset;
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w[i] == 0.0) continue;
      const double e = clip(et[i], -kGlmCoefCap, kGlmCoefCap);
      if (family == GlmFamily::poisson_log) {
        obj += w[i] * (std::exp(e) - y[i] * e);
      } else {
        obj += w[i] * (log1pexp(e) - y[i] * e);
      }
    }
    if (ridge > 0.0 && d > 1) obj += 0.5 * ridge * b.tail(d - 1).squaredNorm();
    return obj;
  };

  GlmFit fit;
  fit.coefficients = beta;
  const double tol = 1e-10 * sumw;
  double obj = objective(beta);
  update_mu(beta);

  for (int it = 0; it < kGlmMaxIter; ++it) {
    fit.iterations = it + 1;
    Eigen::VectorXd score = X.transpose() * (w.array() * (y - mu).array()).matrix();
    if (ridge > 0.0 && d > 1) score.tail(d - 1) -= ridge * beta.tail(d - 1);
    fit.final_score_norm = score.lpNorm<Eigen::Infinity>();
    if (fit.final_score_norm <= tol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd irls(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = (family == GlmFamily::poisson_log) ? mu[i] : mu[i] * (1.0 - mu[i]);
      irls[i] = w[i] * v;
    }
    Eigen::MatrixXd H = X.transpose() * irls.asDiagonal() * X;
    if (ridge > 0.0 && d > 1) {
      for (Eigen::Index k = 1; k < d; ++k) H(k, k) += ridge;
    }
    // Tiny diagonal jitter keeps the working system solvable when a curvature
    // direction collapses (e.g. identical columns without ridge).
    for (Eigen::Index k = 0; k < d; ++k) H(k, k) += 1e-12 * (1.0 + H(k, k));
    Eigen::VectorXd delta = H.ldlt().solve(score);
    if (!delta.allFinite()) {
      fit.converged = false;
      break;
    }
    double step = 1.0;
    Eigen::VectorXd cand;
    double cand_obj = 0.0;
    bool accepted = false;
    for (int h = 0; h <= kGlmMaxHalvings; ++h) {
      cand = beta + step * delta;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (cand[k] > kGlmCoefCap) { cand[k] = kGlmCoefCap; fit.capped = true; }
        if (cand[k] < -kGlmCoefCap) { cand[k] = -kGlmCoefCap; fit.capped = true; }
      }
      cand_obj = objective(cand);
      if (cand_obj <= obj + 1e-12 * (1.0 + std::fabs(obj))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;        // no descent, objective is flat or stalled
    if ((cand - beta).lpNorm<Eigen::Infinity>() == 0.0) break;
    beta = cand;
    obj = cand_obj;
    update_mu(beta);
  }

  // Recompute the score at the final coefficients.
  Eigen::VectorXd score = X.transpose() * (w.array() * (y - mu).array()).matrix();
  if (ridge > 0.0 && d > 1) score.tail(d - 1) -= ridge * beta.tail(d - 1);
  fit.final_score_norm = score.lpNorm<Eigen::Infinity>();
  fit.converged = fit.final_score_norm <= tol;
  if (fit.capped) {
    bool binding = false;
    for (Eigen::Index k = 0; k < d; ++k) {
      if (std::fabs(beta[k]) >= kGlmCoefCap - 1e-9) binding = true;
    }
    if (binding) fit.converged = false; else fit.capped = false;
  }
  // Unpenalized logistic fits on separated data satisfy the score tolerance
  // while the true optimum sits at infinity; detect via all-positive margins.
  if (family == GlmFamily::bernoulli_logit && ridge == 0.0) {
    bool separated = true;
    for (Eigen::Index i = 0; i < n && separated; ++i) {
      if (w[i] > 0.0 && (2.0 * y[i] - 1.0) * eta[i] <= 0.0) separated = false;
    }
    if (separated) {
      fit.converged = false;
      fit.capped = true;
    }
  }
  fit.coefficients = beta;
  return fit;
}

}  // namespace detail

// Weighted quasi-Poisson regression with log link. Accepts any nonnegative
// (not necessarily integer) response.
inline GlmFit fit_weighted_poisson(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& weights,
                                   const Eigen::VectorXd& offset = Eigen::VectorXd(),
                                   double ridge = 0.0) {
  return detail::fit_weighted_glm(detail::GlmFamily::poisson_log, design, y, weights, offset,
                                  ridge);
}

// Weighted Bernoulli regression with logit link.
inline GlmFit fit_weighted_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& weights,
                                    const Eigen::VectorXd& offset = Eigen::VectorXd(),
                                    double ridge = 0.0) {
  return detail::fit_weighted_glm(detail::GlmFamily::bernoulli_logit, design, y, weights, offset,
                                  ridge);
}

struct PoissonFluct {
  double exp_beta = 1.0;  // multiplicative shift applied to the offset fit
  bool ok = false;
};

// Intercept-only weighted Poisson fluctuation around a fitted mean. The score
// equation sum_i w_i (y_i - exp(beta) mu_i) = 0 has the closed-form root
// exp(beta) = sum(w y) / sum(w mu).
inline PoissonFluct solve_fluct_poisson(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted_mean,
                                        const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  if (fitted_mean.size() != n || weights.size() != n) {
    throw std::invalid_argument("solve_fluct_poisson: length mismatch");
  }
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights[i] == 0.0) continue;
    if (!(weights[i] > 0.0) || !(y[i] >= 0.0) || !(fitted_mean[i] >= 0.0)) {
      throw std::invalid_argument("solve_fluct_poisson: negative input");
    }
    num += weights[i] * y[i];
    den += weights[i] * fitted_mean[i];
  }
  PoissonFluct out;
  if (!(den > 0.0) || !(num > 0.0)) {
    out.exp_beta = (num > 0.0) ? 1.0 : 0.0;
    out.ok = false;
    return out;
  }
  out.exp_beta = num / den;
  out.ok = true;
  return out;
}

struct LogisticFluct {
  double beta = 0.0;
  bool converged = false;
  bool capped = false;   // degenerate weighted response, beta at +/-40
};

// Intercept-only weighted logistic fluctuation on a logit-scale offset:
// solves sum_i w_i (y_i - expit(offset_i + beta)) = 0 by safeguarded Newton.
inline LogisticFluct solve_fluct_logistic(const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& offset_logit,
                                          const Eigen::VectorXd& weights) {
  const Eigen::Index n = y.size();
  if (offset_logit.size() != n || weights.size() != n) {
    throw std::invalid_argument("solve_fluct_logistic: length mismatch");
  }
  double sumw = 0.0, sumwy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights[i] == 0.0) continue;
    if (!(weights[i] > 0.0)) throw std::invalid_argument("solve_fluct_logistic: negative weight");
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw std::invalid_argument("solve_fluct_logistic: response must be 0/1");
    }
    if (!std::isfinite(offset_logit[i])) {
      throw std::invalid_argument("solve_fluct_logistic: non-finite offset");
    }
    sumw += weights[i];
    sumwy += weights[i] * y[i];
  }
  LogisticFluct out;
  if (!(sumw > 0.0)) throw std::invalid_argument("solve_fluct_logistic: all weights zero");
  const double cap = detail::kGlmCoefCap;
  if (sumwy <= 0.0 || sumwy >= sumw) {
    out.beta = (sumwy <= 0.0) ? -cap : cap;
    out.capped = true;
    return out;
  }
  auto score = [&](double b) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      f += weights[i] * (y[i] - expit(offset_logit[i] + b));
    }
    return f;
  };
  double lo = -cap, hi = cap;
  if (score(lo) < 0.0) { out.beta = lo; out.capped = true; return out; }
  if (score(hi) > 0.0) { out.beta = hi; out.capped = true; return out; }
  const double tol = 1e-12 * sumw;
  double b = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double f = score(b);
    if (std::fabs(f) <= tol) {
      out.beta = b;
      out.converged = true;
      return out;
    }
    if (f > 0.0) lo = b; else hi = b;
    double h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weights[i] == 0.0) continue;
      const double p = expit(offset_logit[i] + b);
      h += weights[i] * p * (1.0 - p);
    }
    double next = (h > 0.0) ? b + f / h : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    b = next;
  }
  for (int it = 0; it < 200; ++it) {
    b = 0.5 * (lo + hi);
    const double f = score(b);
    if (std::fabs(f) <= tol) break;
    if (f > 0.0) lo = b; else hi = b;
  }
  out.beta = b;
  out.converged = std::fabs(score(b)) <= tol;
  return out;
}

}  // namespace folddiff

#endif
