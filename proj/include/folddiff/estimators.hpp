#ifndef FOLDDIFF_ESTIMATORS_HPP
#define FOLDDIFF_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "folddiff/centering.hpp"
#include "folddiff/data.hpp"
#include "folddiff/glm.hpp"
#include "folddiff/nuisance.hpp"

namespace folddiff {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Unadjusted group contrast: log ratio of per-category sample means.
// ---------------------------------------------------------------------------

struct UnadjustedEstimate {
  Eigen::VectorXd psi;        // J, NaN where undefined
  Eigen::MatrixXd IF;         // n x J, zero columns where undefined
  Eigen::MatrixXd arm_means;  // 2 x J, row a holds the arm-a sample mean
  std::vector<std::uint8_t> defined;
  std::vector<CategoryStatus> status;
};

inline UnadjustedEstimate estimate_psi1(const Dataset& d) {
  const Eigen::Index n = d.n(), J = d.J();
  UnadjustedEstimate out;
  out.status = validate(d);
  out.psi = Eigen::VectorXd::Constant(J, kNaN);
  out.IF = Eigen::MatrixXd::Zero(n, J);
  out.arm_means = Eigen::MatrixXd::Zero(2, J);
  out.defined.assign(static_cast<std::size_t>(J), 0);

  Eigen::Index n1 = 0;
  for (Eigen::Index i = 0; i < n; ++i) n1 += d.A[i];
  const Eigen::Index n0 = n - n1;
  const double phat = static_cast<double>(n1) / static_cast<double>(n);

  for (Eigen::Index j = 0; j < J; ++j) {
    double s0 = 0.0, s1 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      (d.A[i] == 1 ? s1 : s0) += d.W(i, j);
    }
    const double mu0 = s0 / static_cast<double>(n0);
    const double mu1 = s1 / static_cast<double>(n1);
    out.arm_means(0, j) = mu0;
    out.arm_means(1, j) = mu1;
    if (!(mu0 > 0.0) || !(mu1 > 0.0)) continue;
    out.defined[static_cast<std::size_t>(j)] = 1;
    out.psi[j] = std::log(mu1 / mu0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = static_cast<double>(d.A[i]);
      out.IF(i, j) = a / phat * (d.W(i, j) - mu1) / mu1 -
                     (1.0 - a) / (1.0 - phat) * (d.W(i, j) - mu0) / mu0;
    }
  }
  return out;
}

inline UnadjustedEstimate estimate_psi1_centered(const Dataset& d, const CenteringSpec& g) {
  UnadjustedEstimate est = estimate_psi1(d);
  const CenteredEstimate c = apply_centering(est.psi, est.IF, g, est.defined);
  est.psi = c.psi;
  est.IF = c.IF;
  est.defined = c.defined;
  return est;
}

// ---------------------------------------------------------------------------
// Covariate-adjusted estimators on cross-fitted nuisances.
// ---------------------------------------------------------------------------

enum class AdjustedMethod { plugin, onestep, tmle };

inline const char* method_label(AdjustedMethod m) {
  switch (m) {
    case AdjustedMethod::plugin: return "plugin";
    case AdjustedMethod::onestep: return "onestep";
    case AdjustedMethod::tmle: return "tmle";
  }
  return "tmle";
}

struct AdjustedEstimate {
  AdjustedMethod method = AdjustedMethod::tmle;
  Eigen::VectorXd psi;            // J, NaN where undefined
  Eigen::MatrixXd IF;             // n x J; zero for the plugin (no validity claim)
  Eigen::MatrixXd g_computation;  // 2 x J marginalized means, row a for arm a
  std::vector<std::uint8_t> defined;
  std::vector<CategoryStatus> status;
};

// Influence rows for the adjusted contrast, evaluated at the supplied
// conditional means and marginalized means. Column j of the result is
//   phi1_j(i)/N1[j] - phi0_j(i)/N0[j],
// phia_j(i) = 1{A_i=a}/pi_a(X_i) * (W_ij - mu_{A_i,j}(X_i)) + mu_{a,j}(X_i) - N_a[j].
inline Eigen::MatrixXd eif_psi2(const Dataset& d, const Eigen::VectorXd& pi,
                                const Eigen::MatrixXd& mu0, const Eigen::MatrixXd& mu1,
                                const Eigen::VectorXd& N0, const Eigen::VectorXd& N1) {
  const Eigen::Index n = d.n(), J = d.J();
  if (pi.size() != n || mu0.rows() != n || mu1.rows() != n || mu0.cols() != J ||
      mu1.cols() != J || N0.size() != J || N1.size() != J) {
    throw std::invalid_argument("eif_psi2: dimension mismatch");
  }
  Eigen::MatrixXd IF(n, J);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool exposed = d.A[i] == 1;
    const double inv1 = exposed ? 1.0 / pi[i] : 0.0;
    const double inv0 = exposed ? 0.0 : 1.0 / (1.0 - pi[i]);
    for (Eigen::Index j = 0; j < J; ++j) {
      const double resid = d.W(i, j) - (exposed ? mu1(i, j) : mu0(i, j));
      const double bar1 = inv1 * resid + mu1(i, j) - N1[j];
      const double bar0 = inv0 * resid + mu0(i, j) - N0[j];
      IF(i, j) = bar1 / N1[j] - bar0 / N0[j];
    }
  }
  return IF;
}

inline AdjustedEstimate estimate_plugin2(const Dataset& d, const NuisanceFits& fits) {
  const Eigen::Index n = d.n(), J = d.J();
  AdjustedEstimate out;
  out.method = AdjustedMethod::plugin;
  out.status = validate(d);
  out.psi = Eigen::VectorXd::Constant(J, kNaN);
  out.IF = Eigen::MatrixXd::Zero(n, J);
  out.g_computation.resize(2, J);
  out.g_computation.row(0) = fits.mu0.colwise().mean();
  out.g_computation.row(1) = fits.mu1.colwise().mean();
  out.defined.assign(static_cast<std::size_t>(J), 0);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double N0 = out.g_computation(0, j), N1 = out.g_computation(1, j);
    if (out.status[static_cast<std::size_t>(j)].estimable && N0 > 0.0 && N1 > 0.0) {
      out.psi[j] = std::log(N1 / N0);
      out.defined[static_cast<std::size_t>(j)] = 1;
    }
  }
  return out;
}

// Fold-averaged de-biased estimator: each fold contributes its own plug-in on
// the fold's empirical covariate distribution plus the fold mean of the
// influence rows, and the K contributions are averaged. A fold whose
// marginalized mean is nonpositive in either arm leaves the category undefined.
inline AdjustedEstimate estimate_onestep2(const Dataset& d, const NuisanceFits& fits) {
  const Eigen::Index n = d.n(), J = d.J();
  const int K = fits.folds.K;
  AdjustedEstimate out;
  out.method = AdjustedMethod::onestep;
  out.status = validate(d);
  out.psi = Eigen::VectorXd::Constant(J, kNaN);
  out.IF = Eigen::MatrixXd::Zero(n, J);
  out.g_computation.resize(2, J);
  out.g_computation.row(0) = fits.mu0.colwise().mean();
  out.g_computation.row(1) = fits.mu1.colwise().mean();
  out.defined = estimable_mask(out.status);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(J);
  Eigen::MatrixXd IF = Eigen::MatrixXd::Zero(n, J);
  for (int k = 0; k < K; ++k) {
    const auto& rows = fits.folds.members[static_cast<std::size_t>(k)];
    const double nk = static_cast<double>(rows.size());
    Eigen::VectorXd N0 = Eigen::VectorXd::Zero(J), N1 = Eigen::VectorXd::Zero(J);
    for (int i : rows) {
      N0 += fits.mu0.row(i).transpose();
      N1 += fits.mu1.row(i).transpose();
    }
    N0 /= nk;
    N1 /= nk;
    for (Eigen::Index j = 0; j < J; ++j) {
      if (!(N0[j] > 0.0) || !(N1[j] > 0.0)) out.defined[static_cast<std::size_t>(j)] = 0;
    }

    // Influence rows at the fold-level means; undefined columns are junk here
    // and get zeroed at the end.
    Eigen::VectorXd N0safe = N0.cwiseMax(1e-300), N1safe = N1.cwiseMax(1e-300);
    for (int i : rows) {
      const bool exposed = d.A[i] == 1;
      const double inv1 = exposed ? 1.0 / fits.pi[i] : 0.0;
      const double inv0 = exposed ? 0.0 : 1.0 / (1.0 - fits.pi[i]);
      for (Eigen::Index j = 0; j < J; ++j) {
        const double resid = d.W(i, j) - (exposed ? fits.mu1(i, j) : fits.mu0(i, j));
        const double bar1 = inv1 * resid + fits.mu1(i, j) - N1[j];
        const double bar0 = inv0 * resid + fits.mu0(i, j) - N0[j];
        IF(i, j) = bar1 / N1safe[j] - bar0 / N0safe[j];
      }
    }
    for (Eigen::Index j = 0; j < J; ++j) {
      if (!out.defined[static_cast<std::size_t>(j)]) continue;
      double corr = 0.0;
      for (int i : rows) corr += IF(i, j);
      acc[j] += std::log(N1[j] / N0[j]) + corr / nk;
    }
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (out.defined[static_cast<std::size_t>(j)]) {
      out.psi[j] = acc[j] / static_cast<double>(K);
      out.IF.col(j) = IF.col(j);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Targeting step.
// ---------------------------------------------------------------------------

enum class TmleMode { two_stage, single_stage };

inline const char* tmle_mode_label(TmleMode m) {
  return m == TmleMode::two_stage ? "two-stage" : "single-stage";
}

struct TargetedNuisances {
  TmleMode mode = TmleMode::two_stage;
  Eigen::MatrixXd poisson_fluct;   // 2 x J, exp(beta) applied to m (or mu)
  Eigen::MatrixXd logistic_fluct;  // 2 x J, logit-scale shift of q (two-stage)
  Eigen::MatrixXd mu0, mu1;        // n x J targeted conditional means
  std::vector<std::uint8_t> flagged0, flagged1;  // per (category, arm)
};

inline TargetedNuisances tmle_target(const Dataset& d, const NuisanceFits& fits, TmleMode mode) {
  const Eigen::Index n = d.n(), J = d.J();
  if (mode == TmleMode::two_stage && fits.form != MeanForm::product) {
    throw std::invalid_argument("tmle_target: two-stage targeting needs factorized nuisances");
  }
  TargetedNuisances t;
  t.mode = mode;
  t.poisson_fluct = Eigen::MatrixXd::Ones(2, J);
  t.logistic_fluct = Eigen::MatrixXd::Zero(2, J);
  t.mu0 = fits.mu0;
  t.mu1 = fits.mu1;
  t.flagged0.assign(static_cast<std::size_t>(J), 0);
  t.flagged1.assign(static_cast<std::size_t>(J), 0);

  for (int a = 0; a <= 1; ++a) {
    const Eigen::MatrixXd& mu_hat = (a == 0) ? fits.mu0 : fits.mu1;
    Eigen::MatrixXd& mu_out = (a == 0) ? t.mu0 : t.mu1;
    auto& flagged = (a == 0) ? t.flagged0 : t.flagged1;

    // Inverse-probability weight of the arm, zero off-arm.
    Eigen::VectorXd w_arm = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d.A[i] == a) w_arm[i] = (a == 1) ? 1.0 / fits.pi[i] : 1.0 / (1.0 - fits.pi[i]);
    }

    for (Eigen::Index j = 0; j < J; ++j) {
      if (mode == TmleMode::single_stage) {
        const PoissonFluct pf = solve_fluct_poisson(d.W.col(j), mu_hat.col(j), w_arm);
        if (!pf.ok) {
          flagged[static_cast<std::size_t>(j)] = 1;
          continue;  // fluctuation pinned at 1, fit left untouched
        }
        t.poisson_fluct(a, j) = pf.exp_beta;
        mu_out.col(j) = pf.exp_beta * mu_hat.col(j);
        continue;
      }

      const Eigen::MatrixXd& m_hat = (a == 0) ? fits.m0 : fits.m1;
      const Eigen::MatrixXd& q_hat = (a == 0) ? fits.q0 : fits.q1;

      // Stage 1: scale the positive-part mean using only rows observed positive.
      Eigen::VectorXd w_pos = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (w_arm[i] > 0.0 && d.W(i, j) > 0.0) w_pos[i] = w_arm[i];
      }
      const PoissonFluct pf = solve_fluct_poisson(d.W.col(j), m_hat.col(j), w_pos);
      if (!pf.ok) {
        flagged[static_cast<std::size_t>(j)] = 1;
        continue;
      }
      t.poisson_fluct(a, j) = pf.exp_beta;
      const Eigen::VectorXd m_t = pf.exp_beta * m_hat.col(j);

      // Stage 2: shift the presence probability on the logit scale. The
      // fluctuated positive-part mean enters the weights so that the stage
      // score matches the residual decomposition of W - m*q; without it the
      // influence rows would not average to zero.
      Eigen::VectorXd w_q(n), pres(n), off(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        w_q[i] = w_arm[i] * m_t[i];
        pres[i] = (d.W(i, j) > 0.0) ? 1.0 : 0.0;
        off[i] = (w_q[i] > 0.0) ? logit(q_hat(i, j)) : 0.0;
      }
      if (!(w_q.sum() > 0.0)) {
        flagged[static_cast<std::size_t>(j)] = 1;
        continue;
      }
      const LogisticFluct lf = solve_fluct_logistic(pres, off, w_q);
      t.logistic_fluct(a, j) = lf.beta;
      for (Eigen::Index i = 0; i < n; ++i) {
        mu_out(i, j) = m_t[i] * expit(logit(q_hat(i, j)) + lf.beta);
      }
    }
  }
  return t;
}

inline AdjustedEstimate estimate_tmle2(const Dataset& d, const NuisanceFits& fits,
                                       const TargetedNuisances& t) {
  const Eigen::Index n = d.n(), J = d.J();
  AdjustedEstimate out;
  out.method = AdjustedMethod::tmle;
  out.status = validate(d);
  out.psi = Eigen::VectorXd::Constant(J, kNaN);
  out.IF = Eigen::MatrixXd::Zero(n, J);
  out.g_computation.resize(2, J);
  out.g_computation.row(0) = t.mu0.colwise().mean();
  out.g_computation.row(1) = t.mu1.colwise().mean();
  out.defined.assign(static_cast<std::size_t>(J), 0);

  Eigen::VectorXd N0(J), N1(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    N0[j] = out.g_computation(0, j);
    N1[j] = out.g_computation(1, j);
    const bool ok = out.status[static_cast<std::size_t>(j)].estimable &&
                    !t.flagged0[static_cast<std::size_t>(j)] &&
                    !t.flagged1[static_cast<std::size_t>(j)] && N0[j] > 0.0 && N1[j] > 0.0;
    if (ok) {
      out.psi[j] = std::log(N1[j] / N0[j]);
      out.defined[static_cast<std::size_t>(j)] = 1;
    } else {
      N0[j] = 1.0;  // keep the influence evaluation finite; column zeroed below
      N1[j] = 1.0;
    }
  }
  const Eigen::MatrixXd IF = eif_psi2(d, fits.pi, t.mu0, t.mu1, N0, N1);
  for (Eigen::Index j = 0; j < J; ++j) {
    if (out.defined[static_cast<std::size_t>(j)]) out.IF.col(j) = IF.col(j);
  }
  return out;
}

inline AdjustedEstimate estimate_tmle2(const Dataset& d, const NuisanceFits& fits,
                                       TmleMode mode = TmleMode::two_stage) {
  return estimate_tmle2(d, fits, tmle_target(d, fits, mode));
}

// Applies a centering map to an adjusted estimate, restricting the map to the
// categories that are both estimable in the data and defined by the estimator.
inline AdjustedEstimate estimate_psi2_centered(const AdjustedEstimate& est,
                                               const CenteringSpec& g) {
  AdjustedEstimate out = est;
  const CenteredEstimate c = apply_centering(est.psi, est.IF, g, est.defined);
  out.psi = c.psi;
  out.IF = c.IF;
  out.defined = c.defined;
  return out;
}

}  // namespace folddiff

#endif
