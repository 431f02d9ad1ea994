#ifndef FOLDDIFF_INFERENCE_HPP
#define FOLDDIFF_INFERENCE_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "folddiff/mathutil.hpp"
#include "folddiff/rng.hpp"

namespace folddiff {

// Second-moment covariance of the influence rows. No mean-centering: the
// estimators guarantee near-zero column means, and keeping the raw second
// moment makes the estimate conservative when they do not.
inline Eigen::MatrixXd covariance_from_if(const Eigen::MatrixXd& IF) {
  const Eigen::Index n = IF.rows();
  if (n == 0) throw std::invalid_argument("covariance_from_if: no rows");
  return IF.transpose() * IF / static_cast<double>(n);
}

struct WaldRow {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;  // zero standard error
};

inline WaldRow wald_row(double psi, double se, double z_crit) {
  WaldRow r;
  if (!std::isfinite(psi) || !std::isfinite(se)) return r;
  r.lo = psi - z_crit * se;
  r.hi = psi + z_crit * se;
  if (se > 0.0) {
    r.p = norm_two_sided_p(psi / se);
  } else {
    r.degenerate = true;
    r.p = (psi == 0.0) ? 1.0 : 0.0;
  }
  return r;
}

// Simultaneous critical value from a correlation matrix: the empirical
// (1 - alpha) quantile of sup-norms of B multivariate normal draws, floored at
// the marginal normal quantile so the simultaneous band always contains the
// marginal one. Each draw derives its own RNG stream, so the result does not
// depend on evaluation order.
inline double maxT_critical_from_corr(const Eigen::MatrixXd& R, int B, double alpha,
                                      std::uint64_t seed) {
  const Eigen::Index J = R.rows();
  if (R.cols() != J || J < 1) throw std::invalid_argument("maxT_critical_from_corr: bad matrix");
  if (B < 1000) throw std::invalid_argument("maxT_critical_from_corr: need B >= 1000");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("maxT_critical_from_corr: bad alpha");
  if (!R.allFinite()) throw std::invalid_argument("maxT_critical_from_corr: non-finite correlation");
  const double z_marginal = norm_quantile(1.0 - alpha / 2.0);
  if (J == 1) return z_marginal;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(R);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("maxT_critical_from_corr: eigendecomposition failed");
  }
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd A = eig.eigenvectors() * lam.asDiagonal();

  std::vector<double> sup(static_cast<std::size_t>(B));
  Eigen::VectorXd g(J);
  for (int b = 0; b < B; ++b) {
    Rng rng(derive_seed(seed, {rngtag::kMaxT, static_cast<std::uint64_t>(b)}));
    for (Eigen::Index j = 0; j < J; ++j) g[j] = rng.normal();
    sup[static_cast<std::size_t>(b)] = (A * g).lpNorm<Eigen::Infinity>();
  }
  return std::max(z_marginal, empirical_quantile(sup, 1.0 - alpha));
}

// Correlation of the estimable influence columns, then the quantile above.
// Columns that are excluded or have zero variance do not enter the maximum.
inline double maxT_critical(const Eigen::MatrixXd& IF, const std::vector<std::uint8_t>& defined,
                            int B, double alpha, std::uint64_t seed) {
  const Eigen::Index J = IF.cols();
  if (static_cast<Eigen::Index>(defined.size()) != J) {
    throw std::invalid_argument("maxT_critical: mask size mismatch");
  }
  const Eigen::MatrixXd sigma = covariance_from_if(IF);
  std::vector<Eigen::Index> live;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (defined[static_cast<std::size_t>(j)] && sigma(j, j) > 0.0) live.push_back(j);
  }
  if (live.size() < 2) return norm_quantile(1.0 - alpha / 2.0);
  Eigen::MatrixXd R(static_cast<Eigen::Index>(live.size()), static_cast<Eigen::Index>(live.size()));
  for (std::size_t r = 0; r < live.size(); ++r) {
    for (std::size_t c = 0; c < live.size(); ++c) {
      R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          sigma(live[r], live[c]) / std::sqrt(sigma(live[r], live[r]) * sigma(live[c], live[c]));
    }
  }
  return maxT_critical_from_corr(R, B, alpha, seed);
}

inline Eigen::MatrixXd simultaneous_intervals(const Eigen::VectorXd& psi, const Eigen::VectorXd& se,
                                              double crit) {
  const Eigen::Index J = psi.size();
  if (se.size() != J) throw std::invalid_argument("simultaneous_intervals: length mismatch");
  Eigen::MatrixXd ci(J, 2);
  for (Eigen::Index j = 0; j < J; ++j) {
    ci(j, 0) = psi[j] - crit * se[j];
    ci(j, 1) = psi[j] + crit * se[j];
  }
  return ci;
}

struct InferenceResult {
  Eigen::MatrixXd sigma;            // J x J influence covariance
  Eigen::VectorXd se;               // sqrt(sigma_jj / n), NaN where undefined
  Eigen::MatrixXd ci_marginal;      // J x 2
  Eigen::MatrixXd ci_simultaneous;  // J x 2
  Eigen::VectorXd p_values;
  double crit_simultaneous = 0.0;
  double alpha = 0.05;
  int B = 10000;
  std::vector<std::uint8_t> defined;
  std::vector<std::uint8_t> degenerate_se;
};

// Full inference pass for one estimate: covariance, marginal Wald rows, and
// the simultaneous band.
inline InferenceResult infer(const Eigen::VectorXd& psi, const Eigen::MatrixXd& IF,
                             const std::vector<std::uint8_t>& defined, double alpha, int B,
                             std::uint64_t seed) {
  const Eigen::Index n = IF.rows(), J = IF.cols();
  if (psi.size() != J || static_cast<Eigen::Index>(defined.size()) != J) {
    throw std::invalid_argument("infer: dimension mismatch");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("infer: alpha outside (0,1)");

  InferenceResult out;
  out.alpha = alpha;
  out.B = B;
  out.defined = defined;
  out.degenerate_se.assign(static_cast<std::size_t>(J), 0);
  out.sigma = covariance_from_if(IF);
  out.se = Eigen::VectorXd::Constant(J, std::numeric_limits<double>::quiet_NaN());
  out.ci_marginal = Eigen::MatrixXd::Constant(J, 2, std::numeric_limits<double>::quiet_NaN());
  out.p_values = Eigen::VectorXd::Constant(J, std::numeric_limits<double>::quiet_NaN());

  const double z = norm_quantile(1.0 - alpha / 2.0);
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!defined[static_cast<std::size_t>(j)]) continue;
    out.se[j] = std::sqrt(out.sigma(j, j) / static_cast<double>(n));
    const WaldRow r = wald_row(psi[j], out.se[j], z);
    out.ci_marginal(j, 0) = r.lo;
    out.ci_marginal(j, 1) = r.hi;
    out.p_values[j] = r.p;
    out.degenerate_se[static_cast<std::size_t>(j)] = r.degenerate ? 1 : 0;
  }
  out.crit_simultaneous = maxT_critical(IF, defined, B, alpha, seed);
  out.ci_simultaneous = simultaneous_intervals(psi, out.se, out.crit_simultaneous);
  return out;
}

}  // namespace folddiff

#endif
