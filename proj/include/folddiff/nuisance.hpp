#ifndef FOLDDIFF_NUISANCE_HPP
#define FOLDDIFF_NUISANCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "folddiff/data.hpp"
#include "folddiff/folds.hpp"
#include "folddiff/mathutil.hpp"
#include "folddiff/rng.hpp"
#include "folddiff/superlearner.hpp"

namespace folddiff {

struct LearnerMenu {
  std::vector<LearnerSpec> regression;
  std::vector<LearnerSpec> binary;

  static LearnerMenu defaults() {
    LearnerMenu m;
    m.regression = {LearnerSpec::parse("sample_mean"), LearnerSpec::parse("glm_log"),
                    LearnerSpec::parse("glm_log_ridge:1"), LearnerSpec::parse("boost:200:2:0.1")};
    m.binary = {LearnerSpec::parse("sample_mean"), LearnerSpec::parse("logistic"),
                LearnerSpec::parse("logistic_ridge:1"), LearnerSpec::parse("logistic_boost:200:2:0.1")};
    return m;
  }

  // Trimmed menu for large studies where the boosted candidates dominate runtime.
  static LearnerMenu light() {
    LearnerMenu m;
    m.regression = {LearnerSpec::parse("sample_mean"), LearnerSpec::parse("glm_log")};
    m.binary = {LearnerSpec::parse("sample_mean"), LearnerSpec::parse("logistic")};
    return m;
  }
};

// How the conditional mean of a count given (arm, covariates) is modeled.
// product:  mean = E[W | W>0, arm, x] * P(W>0 | arm, x), two separate fits.
// direct:   mean regressed on all rows of the arm in one fit.
enum class MeanForm { product, direct };

inline std::string mean_form_label(MeanForm f) {
  return f == MeanForm::product ? "product" : "direct";
}

struct NuisanceOptions {
  LearnerMenu menu = LearnerMenu::defaults();
  MeanForm form = MeanForm::product;
  int inner_folds = 5;
  double propensity_clip = 0.025;  // propensity kept inside [clip, 1 - clip]
  double presence_clip = 1e-6;     // presence probability kept inside [clip, 1 - clip]
  int threads = 1;
};

// One stacked fit's audit trail, kept for the diagnostics report.
struct EnsembleRecord {
  int fold = 0;
  std::string target;
  std::vector<std::string> learners;
  Eigen::VectorXd weights;
  Eigen::VectorXd cv_risk;
  std::vector<std::uint8_t> failed;
  bool degenerate = false;
};

// Cross-fitted nuisance estimates. Every row i holds predictions from models
// trained without fold(i). The mu matrices are the conditional means actually
// consumed by the estimators; m and q are their factors and are only filled
// under the product form.
struct NuisanceFits {
  FoldAssignment folds;
  Eigen::VectorXd pi;        // P(A=1 | X_i), clipped
  Eigen::MatrixXd mu0, mu1;  // n x J
  Eigen::MatrixXd m0, m1;    // n x J, positive-part means (product form)
  Eigen::MatrixXd q0, q1;    // n x J, presence probabilities (product form)
  MeanForm form = MeanForm::product;
  double propensity_clip = 0.025;
  double presence_clip = 1e-6;
  // Set when some training fold had no positive rows for the category in that
  // arm and the positive-part mean fell back to a pooled constant.
  std::vector<std::uint8_t> m_fallback0, m_fallback1;
  std::vector<EnsembleRecord> records;
};

namespace detail {

inline EnsembleRecord make_record(int fold, std::string target, const EnsembleFit& fit) {
  EnsembleRecord rec;
  rec.fold = fold;
  rec.target = std::move(target);
  for (const auto& spec : fit.menu) rec.learners.push_back(spec.name());
  rec.weights = fit.weights;
  rec.cv_risk = fit.cv_risk;
  rec.failed = fit.failed;
  rec.degenerate = fit.degenerate;
  return rec;
}

}  // namespace detail

// Fits propensity, presence, and positive-part mean models on each training
// complement and evaluates them on the held-out fold, so downstream scores
// never reuse rows their own nuisances were trained on.
inline NuisanceFits fit_nuisances(const Dataset& d, const FoldAssignment& folds,
                                  const NuisanceOptions& opt, std::uint64_t seed) {
  const Eigen::Index n = d.n(), J = d.J();
  if (folds.fold_of.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("fit_nuisances: fold assignment does not match dataset");
  }
  if (opt.inner_folds < 2) throw std::invalid_argument("fit_nuisances: inner_folds must be at least 2");

  NuisanceFits out;
  out.folds = folds;
  out.form = opt.form;
  out.propensity_clip = opt.propensity_clip;
  out.presence_clip = opt.presence_clip;
  out.pi = Eigen::VectorXd::Zero(n);
  out.mu0 = Eigen::MatrixXd::Zero(n, J);
  out.mu1 = Eigen::MatrixXd::Zero(n, J);
  if (opt.form == MeanForm::product) {
    out.m0 = Eigen::MatrixXd::Zero(n, J);
    out.m1 = Eigen::MatrixXd::Zero(n, J);
    out.q0 = Eigen::MatrixXd::Zero(n, J);
    out.q1 = Eigen::MatrixXd::Zero(n, J);
  }
  out.m_fallback0.assign(static_cast<std::size_t>(J), 0);
  out.m_fallback1.assign(static_cast<std::size_t>(J), 0);

  std::mutex record_mutex;
  for (int k = 0; k < folds.K; ++k) {
    const auto& hold = folds.members[static_cast<std::size_t>(k)];
    std::vector<int> train;
    train.reserve(static_cast<std::size_t>(n) - hold.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (folds.fold_of[static_cast<std::size_t>(i)] != k) train.push_back(static_cast<int>(i));
    }
    const Eigen::Index ntr = static_cast<Eigen::Index>(train.size());
    const Eigen::Index nho = static_cast<Eigen::Index>(hold.size());

    Eigen::MatrixXd Xtr(ntr, d.p()), Xho(nho, d.p());
    Eigen::VectorXd Atr(ntr);
    for (Eigen::Index t = 0; t < ntr; ++t) {
      Xtr.row(t) = d.X.row(train[static_cast<std::size_t>(t)]);
      Atr[t] = static_cast<double>(d.A[train[static_cast<std::size_t>(t)]]);
    }
    for (Eigen::Index t = 0; t < nho; ++t) Xho.row(t) = d.X.row(hold[static_cast<std::size_t>(t)]);
    const Eigen::VectorXd ones_tr = Eigen::VectorXd::Ones(ntr);

    // Propensity on the full training complement.
    {
      const auto fit = fit_superlearner(TaskKind::binary, opt.menu.binary, Xtr, Atr, ones_tr,
                                        opt.inner_folds, derive_seed(seed, {rngtag::kPropensity, static_cast<std::uint64_t>(k)}));
      const Eigen::VectorXd pred = fit.predict(Xho);
      for (Eigen::Index t = 0; t < nho; ++t) {
        out.pi[hold[static_cast<std::size_t>(t)]] =
            clip(pred[t], opt.propensity_clip, 1.0 - opt.propensity_clip);
      }
      out.records.push_back(detail::make_record(k, "propensity", fit));
    }

    // Arm-specific per-category fits, parallel over categories.
    std::vector<std::vector<EnsembleRecord>> cell_records(static_cast<std::size_t>(J));
    parallel_for(static_cast<std::size_t>(J), opt.threads, [&](std::size_t j) {
      const Eigen::Index jj = static_cast<Eigen::Index>(j);
      for (int a = 0; a <= 1; ++a) {
        std::vector<int> arm;
        for (Eigen::Index t = 0; t < ntr; ++t) {
          if (d.A[train[static_cast<std::size_t>(t)]] == a) arm.push_back(train[static_cast<std::size_t>(t)]);
        }
        Eigen::MatrixXd Xarm(static_cast<Eigen::Index>(arm.size()), d.p());
        Eigen::VectorXd warm_y(static_cast<Eigen::Index>(arm.size()));
        for (std::size_t t = 0; t < arm.size(); ++t) {
          Xarm.row(static_cast<Eigen::Index>(t)) = d.X.row(arm[t]);
          warm_y[static_cast<Eigen::Index>(t)] = d.W(arm[t], jj);
        }
        const Eigen::VectorXd ones_arm = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(arm.size()));

        Eigen::MatrixXd& mu = (a == 0) ? out.mu0 : out.mu1;
        if (opt.form == MeanForm::direct) {
          const auto fit = fit_superlearner(
              TaskKind::regression_nonneg, opt.menu.regression, Xarm, warm_y, ones_arm,
              opt.inner_folds,
              derive_seed(seed, {rngtag::kPositiveMean, static_cast<std::uint64_t>(k), j,
                                 static_cast<std::uint64_t>(a)}));
          // Held-out predictions are capped to the training response range:
          // link-scale learners extrapolate without bound, and one runaway row
          // would otherwise dominate the marginalized arm mean.
          const Eigen::VectorXd pred =
              fit.predict(Xho).cwiseMax(warm_y.minCoeff()).cwiseMin(warm_y.maxCoeff());
          for (Eigen::Index t = 0; t < nho; ++t) mu(hold[static_cast<std::size_t>(t)], jj) = pred[t];
          cell_records[j].push_back(detail::make_record(
              k, "mean[" + d.category_names[j] + ",arm=" + std::to_string(a) + "]", fit));
          continue;
        }

        // Presence model on all arm rows.
        Eigen::VectorXd pres(warm_y.size());
        for (Eigen::Index t = 0; t < warm_y.size(); ++t) pres[t] = (warm_y[t] > 0.0) ? 1.0 : 0.0;
        Eigen::VectorXd qpred;
        {
          const auto fit = fit_superlearner(
              TaskKind::binary, opt.menu.binary, Xarm, pres, ones_arm, opt.inner_folds,
              derive_seed(seed, {rngtag::kPresence, static_cast<std::uint64_t>(k), j,
                                 static_cast<std::uint64_t>(a)}));
          qpred = fit.predict(Xho);
          for (Eigen::Index t = 0; t < nho; ++t) {
            qpred[t] = clip(qpred[t], opt.presence_clip, 1.0 - opt.presence_clip);
          }
          cell_records[j].push_back(detail::make_record(
              k, "presence[" + d.category_names[j] + ",arm=" + std::to_string(a) + "]", fit));
        }

        // Positive-part mean on the arm rows with a positive count.
        std::vector<int> pos;
        for (std::size_t t = 0; t < arm.size(); ++t) {
          if (warm_y[static_cast<Eigen::Index>(t)] > 0.0) pos.push_back(static_cast<int>(t));
        }
        Eigen::VectorXd mpred(nho);
        bool fell_back = false;
        if (pos.empty()) {
          // No positive rows for this arm in the training complement: fall back
          // to the positive-part mean pooled over both arms, or zero if the
          // category never appears in training at all.
          double s = 0.0;
          int c = 0;
          for (Eigen::Index t = 0; t < ntr; ++t) {
            const double v = d.W(train[static_cast<std::size_t>(t)], jj);
            if (v > 0.0) {
              s += v;
              ++c;
            }
          }
          mpred.setConstant(c > 0 ? s / c : 0.0);
          fell_back = true;
        } else {
          Eigen::MatrixXd Xpos(static_cast<Eigen::Index>(pos.size()), d.p());
          Eigen::VectorXd ypos(static_cast<Eigen::Index>(pos.size()));
          for (std::size_t t = 0; t < pos.size(); ++t) {
            Xpos.row(static_cast<Eigen::Index>(t)) = Xarm.row(pos[t]);
            ypos[static_cast<Eigen::Index>(t)] = warm_y[pos[t]];
          }
          const auto fit = fit_superlearner(
              TaskKind::regression_nonneg, opt.menu.regression, Xpos, ypos,
              Eigen::VectorXd::Ones(static_cast<Eigen::Index>(pos.size())), opt.inner_folds,
              derive_seed(seed, {rngtag::kPositiveMean, static_cast<std::uint64_t>(k), j,
                                 static_cast<std::uint64_t>(a)}));
          // Same range cap as the direct form. The positive-part fits often see
          // only a handful of rows, which is where extrapolation is worst.
          mpred = fit.predict(Xho).cwiseMax(ypos.minCoeff()).cwiseMin(ypos.maxCoeff());
          cell_records[j].push_back(detail::make_record(
              k, "posmean[" + d.category_names[j] + ",arm=" + std::to_string(a) + "]", fit));
        }

        Eigen::MatrixXd& m = (a == 0) ? out.m0 : out.m1;
        Eigen::MatrixXd& q = (a == 0) ? out.q0 : out.q1;
        for (Eigen::Index t = 0; t < nho; ++t) {
          const Eigen::Index row = hold[static_cast<std::size_t>(t)];
          m(row, jj) = mpred[t];
          q(row, jj) = qpred[t];
          mu(row, jj) = mpred[t] * qpred[t];
        }
        if (fell_back) {
          std::lock_guard<std::mutex> lk(record_mutex);
          auto& flag = (a == 0) ? out.m_fallback0 : out.m_fallback1;
          flag[j] = 1;
        }
      }
    });
    for (auto& recs : cell_records) {
      for (auto& r : recs) out.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace folddiff

#endif
