#ifndef FOLDDIFF_SUPERLEARNER_HPP
#define FOLDDIFF_SUPERLEARNER_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include "folddiff/folds.hpp"
#include "folddiff/learners.hpp"

namespace folddiff {

// Euclidean projection onto the probability simplex (sort-based algorithm).
inline Eigen::VectorXd simplex_projection(const Eigen::VectorXd& v) {
  const Eigen::Index L = v.size();
  if (L == 0) throw std::invalid_argument("simplex_projection: empty input");
  std::vector<double> u(v.data(), v.data() + L);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  int rho = 0;
  for (Eigen::Index k = 0; k < L; ++k) {
    cum += u[static_cast<std::size_t>(k)];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > 0.0) {
      rho = static_cast<int>(k + 1);
      tau = t;
    }
  }
  Eigen::VectorXd out(L);
  for (Eigen::Index k = 0; k < L; ++k) out[k] = std::max(0.0, v[k] - tau);
  return out;
}

// Convex combination weights minimizing the weighted squared error
// sum_i w_i (y_i - P.row(i) * beta)^2 over the probability simplex, by
// projected gradient descent with a vertex safeguard.
inline Eigen::VectorXd simplex_weights(const Eigen::MatrixXd& P, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w) {
  const Eigen::Index n = P.rows(), L = P.cols();
  if (L == 0) throw std::invalid_argument("simplex_weights: no candidates");
  if (y.size() != n || w.size() != n) throw std::invalid_argument("simplex_weights: length mismatch");
  const double sumw = w.sum();
  if (!(sumw > 0.0)) throw std::invalid_argument("simplex_weights: zero weight mass");
  if (L == 1) return Eigen::VectorXd::Ones(1);

  const Eigen::MatrixXd Pw = w.asDiagonal() * P;
  const Eigen::MatrixXd G = P.transpose() * Pw / sumw;   // L x L Gram
  const Eigen::VectorXd b = P.transpose() * (w.cwiseProduct(y)) / sumw;
  auto objective = [&](const Eigen::VectorXd& beta) {
    return beta.dot(G * beta) - 2.0 * beta.dot(b);  // weighted MSE up to a constant
  };

  // Lipschitz constant of the gradient, bounded by twice the Gram trace.
  const double lip = 2.0 * std::max(G.trace(), 1e-300);
  const double step = 1.0 / lip;
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(L, 1.0 / static_cast<double>(L));
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd grad = 2.0 * (G * beta - b);
    const Eigen::VectorXd next = simplex_projection(beta - step * grad);
    const double move = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    if (move < 1e-13) break;
  }

  // Safeguard: no vertex may beat the optimized combination.
  double best_vertex = std::numeric_limits<double>::infinity();
  int best_l = 0;
  for (Eigen::Index l = 0; l < L; ++l) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(L);
    e[l] = 1.0;
    const double obj = objective(e);
    if (obj < best_vertex) {
      best_vertex = obj;
      best_l = static_cast<int>(l);
    }
  }
  if (objective(beta) > best_vertex) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(L);
    e[best_l] = 1.0;
    beta = e;
    for (int it = 0; it < 20000; ++it) {
      const Eigen::VectorXd grad = 2.0 * (G * beta - b);
      const Eigen::VectorXd next = simplex_projection(beta - step * grad);
      const double move = (next - beta).lpNorm<Eigen::Infinity>();
      beta = next;
      if (move < 1e-13) break;
    }
    if (objective(beta) > best_vertex) {
      beta.setZero();
      beta[best_l] = 1.0;
    }
  }
  return beta;
}

struct EnsembleFit {
  std::vector<LearnerSpec> menu;
  std::vector<std::shared_ptr<FittedModel>> models;  // null where failed
  Eigen::VectorXd weights;                           // sums to one
  Eigen::VectorXd cv_risk;                           // NaN where failed
  double ensemble_cv_risk = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::uint8_t> failed;
  bool degenerate = false;   // too little data for cross-validation
  double fallback_value = 0.0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& F) const {
    if (degenerate) return Eigen::VectorXd::Constant(F.rows(), fallback_value);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(F.rows());
    for (std::size_t l = 0; l < models.size(); ++l) {
      if (weights[static_cast<Eigen::Index>(l)] > 0.0 && models[l]) {
        out += weights[static_cast<Eigen::Index>(l)] * models[l]->predict(F);
      }
    }
    return out;
  }
};

// Cross-validated stacking: candidate learners get out-of-fold predictions on
// V inner folds, the simplex weights minimize the weighted CV squared error,
// and the survivors are refit on all rows. A candidate that throws or returns
// non-finite predictions anywhere is dropped with weight zero.
inline EnsembleFit fit_superlearner(TaskKind task, const std::vector<LearnerSpec>& menu,
                                    const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w, int V, std::uint64_t seed) {
  if (menu.empty()) throw std::invalid_argument("fit_superlearner: empty learner menu");
  for (const auto& spec : menu) {
    if (!spec.compatible(task)) {
      throw std::invalid_argument("fit_superlearner: learner '" + spec.name() +
                                  "' not in this task's menu");
    }
  }
  const Eigen::Index n = F.rows();
  if (y.size() != n || w.size() != n) throw std::invalid_argument("fit_superlearner: length mismatch");
  if (V < 2) throw std::invalid_argument("fit_superlearner: V must be at least 2");

  const Eigen::Index L = static_cast<Eigen::Index>(menu.size());
  EnsembleFit fit;
  fit.menu = menu;
  fit.models.assign(static_cast<std::size_t>(L), nullptr);
  fit.weights = Eigen::VectorXd::Zero(L);
  fit.cv_risk = Eigen::VectorXd::Constant(L, std::numeric_limits<double>::quiet_NaN());
  fit.failed.assign(static_cast<std::size_t>(L), 0);

  const double sumw = w.sum();
  if (n < 2 || !(sumw > 0.0)) {
    fit.degenerate = true;
    fit.fallback_value = (sumw > 0.0) ? y.dot(w) / sumw : (n > 0 ? y.mean() : 0.0);
    return fit;
  }

  const int V_eff = std::min<int>(V, static_cast<int>(n));
  Eigen::VectorXi strata = Eigen::VectorXi::Zero(n);
  if (task == TaskKind::binary) {
    for (Eigen::Index i = 0; i < n; ++i) strata[i] = (y[i] > 0.0) ? 1 : 0;
  }
  const FoldAssignment inner = make_folds(static_cast<int>(n), V_eff, strata, seed);

  Eigen::MatrixXd cvP(n, L);
  cvP.setZero();
  for (int v = 0; v < inner.K; ++v) {
    const auto& hold = inner.members[static_cast<std::size_t>(v)];
    std::vector<int> train;
    train.reserve(static_cast<std::size_t>(n) - hold.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (inner.fold_of[static_cast<std::size_t>(i)] != v) train.push_back(static_cast<int>(i));
    }
    Eigen::MatrixXd Ftr(static_cast<Eigen::Index>(train.size()), F.cols());
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(train.size())), wtr(static_cast<Eigen::Index>(train.size()));
    for (std::size_t t = 0; t < train.size(); ++t) {
      Ftr.row(static_cast<Eigen::Index>(t)) = F.row(train[t]);
      ytr[static_cast<Eigen::Index>(t)] = y[train[t]];
      wtr[static_cast<Eigen::Index>(t)] = w[train[t]];
    }
    Eigen::MatrixXd Fho(static_cast<Eigen::Index>(hold.size()), F.cols());
    for (std::size_t t = 0; t < hold.size(); ++t) Fho.row(static_cast<Eigen::Index>(t)) = F.row(hold[t]);

    for (Eigen::Index l = 0; l < L; ++l) {
      if (fit.failed[static_cast<std::size_t>(l)]) continue;
      bool ok = true;
      Eigen::VectorXd pred;
      try {
        const auto model = fit_learner(menu[static_cast<std::size_t>(l)], task, Ftr, ytr, wtr);
        pred = model->predict(Fho);
        ok = pred.allFinite();
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) {
        fit.failed[static_cast<std::size_t>(l)] = 1;
        continue;
      }
      for (std::size_t t = 0; t < hold.size(); ++t) cvP(hold[t], l) = pred[static_cast<Eigen::Index>(t)];
    }
  }

  std::vector<Eigen::Index> alive;
  for (Eigen::Index l = 0; l < L; ++l) {
    if (!fit.failed[static_cast<std::size_t>(l)]) alive.push_back(l);
  }
  if (alive.empty()) {
    fit.degenerate = true;
    fit.fallback_value = y.dot(w) / sumw;
    return fit;
  }

  for (Eigen::Index l : alive) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = y[i] - cvP(i, l);
      r += w[i] * e * e;
    }
    fit.cv_risk[l] = r / sumw;
  }

  Eigen::MatrixXd Pa(n, static_cast<Eigen::Index>(alive.size()));
  for (std::size_t t = 0; t < alive.size(); ++t) Pa.col(static_cast<Eigen::Index>(t)) = cvP.col(alive[t]);
  const Eigen::VectorXd wa = simplex_weights(Pa, y, w);
  for (std::size_t t = 0; t < alive.size(); ++t) fit.weights[alive[t]] = wa[static_cast<Eigen::Index>(t)];

  {
    double r = 0.0;
    const Eigen::VectorXd comb = Pa * wa;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = y[i] - comb[i];
      r += w[i] * e * e;
    }
    fit.ensemble_cv_risk = r / sumw;
  }

  // Refit survivors on all rows.
  for (Eigen::Index l : alive) {
    bool ok = true;
    try {
      auto model = fit_learner(menu[static_cast<std::size_t>(l)], task, F, y, w);
      if (!model->predict(F).allFinite()) ok = false;
      if (ok) fit.models[static_cast<std::size_t>(l)] = std::move(model);
    } catch (const std::exception&) {
      ok = false;
    }
    if (!ok) {
      fit.failed[static_cast<std::size_t>(l)] = 1;
      fit.weights[l] = 0.0;
    }
  }
  const double wsum = fit.weights.sum();
  if (wsum <= 0.0) {
    fit.degenerate = true;
    fit.fallback_value = y.dot(w) / sumw;
    return fit;
  }
  fit.weights /= wsum;
  return fit;
}

}  // namespace folddiff

#endif
