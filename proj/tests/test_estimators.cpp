#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "folddiff/estimators.hpp"
#include "folddiff/folds.hpp"
#include "folddiff/nuisance.hpp"
#include "folddiff/rng.hpp"

using namespace folddiff;

namespace {

Dataset two_arm_counts(int n, unsigned long long seed) {
  Rng rng(seed);
  Dataset d;
  d.X.resize(n, 1);
  d.A.resize(n);
  d.W.resize(n, 3);
  int n1 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    d.X(i, 0) = x;
    const int a = rng.bernoulli(expit(x - 0.2)) ? 1 : 0;
    n1 += a;
    d.A[i] = a;
    d.W(i, 0) = rng.bernoulli(0.6) ? static_cast<double>(rng.poisson(std::exp(0.5 + x + 0.4 * a))) : 0.0;
    d.W(i, 1) = rng.bernoulli(0.25) ? static_cast<double>(1 + rng.poisson(1.5 + x)) : 0.0;
    d.W(i, 2) = 1.0 + static_cast<double>(rng.poisson(2.0 + 0.5 * a));
    d.sample_ids.push_back("s" + std::to_string(i));
  }
  // Both arms must appear for the estimators to be defined at all.
  if (n1 == 0) d.A[0] = 1;
  if (n1 == n) d.A[0] = 0;
  d.category_names = {"u", "v", "w"};
  d.covariate_names = {"x"};
  return d;
}

// Dataset with no covariates at all, for the constant-nuisance reduction.
Dataset bare_counts(int n, int J, Rng& rng) {
  Dataset d;
  d.X.resize(n, 0);
  d.A.resize(n);
  d.W.resize(n, J);
  for (int i = 0; i < n; ++i) {
    d.A[i] = (i < n / 2) ? 0 : 1;
    for (int j = 0; j < J; ++j) {
      d.W(i, j) = rng.bernoulli(0.7) ? static_cast<double>(1 + rng.poisson(2.0 + j)) : 0.0;
    }
    d.sample_ids.push_back("s" + std::to_string(i));
  }
  for (int j = 0; j < J; ++j) d.category_names.push_back("c" + std::to_string(j));
  return d;
}

// Fold-invariant nuisance fits built from scalars, bypassing any learner.
NuisanceFits constant_fits(const Dataset& d, double pi_c, double m0c, double q0c, double m1c,
                           double q1c) {
  const Eigen::Index n = d.n(), J = d.J();
  NuisanceFits f;
  Eigen::VectorXi strata(n);
  for (Eigen::Index i = 0; i < n; ++i) strata[i] = d.A[i];
  f.folds = make_folds(static_cast<int>(n), 2, strata, 1);
  f.pi = Eigen::VectorXd::Constant(n, pi_c);
  f.m0 = Eigen::MatrixXd::Constant(n, J, m0c);
  f.q0 = Eigen::MatrixXd::Constant(n, J, q0c);
  f.m1 = Eigen::MatrixXd::Constant(n, J, m1c);
  f.q1 = Eigen::MatrixXd::Constant(n, J, q1c);
  f.mu0 = f.m0.cwiseProduct(f.q0);
  f.mu1 = f.m1.cwiseProduct(f.q1);
  f.m_fallback0.assign(static_cast<std::size_t>(J), 0);
  f.m_fallback1.assign(static_cast<std::size_t>(J), 0);
  return f;
}

NuisanceFits fitted_nuisances(const Dataset& d, int K, unsigned long long seed,
                              const LearnerMenu& menu) {
  Eigen::VectorXi strata(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) strata[i] = d.A[i];
  const auto folds = make_folds(static_cast<int>(d.n()), K, strata, seed);
  NuisanceOptions opt;
  opt.menu = menu;
  opt.inner_folds = 3;
  return fit_nuisances(d, folds, opt, seed + 1);
}

double max_abs_col_mean(const Eigen::MatrixXd& IF, const std::vector<std::uint8_t>& defined) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < IF.cols(); ++j) {
    if (!defined[static_cast<std::size_t>(j)]) continue;
    worst = std::max(worst, std::abs(IF.col(j).mean()));
  }
  return worst;
}

}  // namespace

TEST_CASE("group ratio on a four-row example matches hand arithmetic") {
  Dataset d;
  d.X.resize(4, 0);
  d.A.resize(4);
  d.A << 0, 0, 1, 1;
  d.W.resize(4, 1);
  d.W << 1, 2, 2, 4;
  d.sample_ids = {"a", "b", "c", "d"};
  d.category_names = {"only"};

  const auto est = estimate_psi1(d);
  REQUIRE(est.defined[0] == 1);
  CHECK(est.psi[0] == Catch::Approx(std::log(2.0)).margin(1e-14));
  CHECK(est.arm_means(0, 0) == Catch::Approx(1.5));
  CHECK(est.arm_means(1, 0) == Catch::Approx(3.0));
  // phat = 1/2, so IF = 2(w - 3)/3 on exposed rows and -2(w - 1.5)/1.5 on the rest.
  CHECK(est.IF(0, 0) == Catch::Approx(2.0 / 3.0).margin(1e-14));
  CHECK(est.IF(1, 0) == Catch::Approx(-2.0 / 3.0).margin(1e-14));
  CHECK(est.IF(2, 0) == Catch::Approx(-2.0 / 3.0).margin(1e-14));
  CHECK(est.IF(3, 0) == Catch::Approx(2.0 / 3.0).margin(1e-14));
  CHECK(std::abs(est.IF.col(0).mean()) < 1e-15);
}

TEST_CASE("group ratio influence columns average to zero exactly") {
  const auto d = two_arm_counts(150, 31);
  const auto est = estimate_psi1(d);
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!est.defined[static_cast<std::size_t>(j)]) continue;
    CHECK(std::abs(est.IF.col(j).mean()) < 1e-12);
  }
}

TEST_CASE("scaling one arm shifts the ratio and leaves centered values alone") {
  const auto d = two_arm_counts(120, 7);
  auto scaled = d;
  const double lambda = 3.7;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.A[i] == 1) scaled.W.row(i) *= lambda;
  }
  const auto base = estimate_psi1(d);
  const auto moved = estimate_psi1(scaled);
  const auto cbase = estimate_psi1_centered(d, CenteringSpec{CenterKind::mean});
  const auto cmoved = estimate_psi1_centered(scaled, CenteringSpec{CenterKind::mean});
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!base.defined[static_cast<std::size_t>(j)]) continue;
    CHECK(moved.psi[j] - base.psi[j] == Catch::Approx(std::log(lambda)).margin(1e-10));
    CHECK(cmoved.psi[j] == Catch::Approx(cbase.psi[j]).margin(1e-10));
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (cbase.defined[static_cast<std::size_t>(j)]) sum += cbase.psi[j];
  }
  CHECK(std::abs(sum) < 1e-10);
}

TEST_CASE("shuffling rows permutes influence rows and fixes the estimate") {
  const auto d = two_arm_counts(60, 13);
  Rng rng(5);
  const auto perm = rng.permutation(60);
  Dataset shuffled = d;
  for (int i = 0; i < 60; ++i) {
    shuffled.W.row(i) = d.W.row(perm[static_cast<std::size_t>(i)]);
    shuffled.A[i] = d.A[perm[static_cast<std::size_t>(i)]];
    shuffled.sample_ids[static_cast<std::size_t>(i)] =
        d.sample_ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const auto base = estimate_psi1(d);
  const auto moved = estimate_psi1(shuffled);
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!base.defined[static_cast<std::size_t>(j)]) continue;
    CHECK(moved.psi[j] == Catch::Approx(base.psi[j]).margin(1e-14));
    for (int i = 0; i < 60; ++i) {
      CHECK(moved.IF(i, j) == Catch::Approx(base.IF(perm[static_cast<std::size_t>(i)], j)).margin(1e-14));
    }
  }
}

TEST_CASE("adjusted influence rows match an exact two-sample evaluation") {
  Dataset d;
  d.X.resize(2, 0);
  d.A.resize(2);
  d.A << 0, 1;
  d.W.resize(2, 1);
  d.W << 3, 5;
  d.sample_ids = {"a", "b"};
  d.category_names = {"only"};

  Eigen::VectorXd pi(2);
  pi << 0.4, 0.6;
  Eigen::MatrixXd mu0(2, 1), mu1(2, 1);
  mu0 << 2.0, 1.0;
  mu1 << 4.0, 6.0;
  Eigen::VectorXd N0(1), N1(1);
  N0 << 1.5;
  N1 << 5.0;

  const Eigen::MatrixXd IF = eif_psi2(d, pi, mu0, mu1, N0, N1);
  // Row 0: exposed-arm part (4-5)/5; unexposed part (1/0.6 + 0.5)/1.5.
  CHECK(IF(0, 0) == Catch::Approx(-74.0 / 45.0).margin(1e-14));
  // Row 1: ((5-6)/0.6 + 1)/5 - (1 - 1.5)/1.5.
  CHECK(IF(1, 0) == Catch::Approx(0.2).margin(1e-14));
}

TEST_CASE("adjusted influence reduces to the unadjusted formula under constants") {
  const auto d = two_arm_counts(90, 17);
  const auto base = estimate_psi1(d);
  double exposed = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) exposed += d.A[i];
  const double phat = exposed / static_cast<double>(d.n());
  const Eigen::VectorXd pi = Eigen::VectorXd::Constant(d.n(), phat);
  Eigen::MatrixXd mu0(d.n(), d.J()), mu1(d.n(), d.J());
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    mu0.col(j).setConstant(base.arm_means(0, j));
    mu1.col(j).setConstant(base.arm_means(1, j));
  }
  const Eigen::VectorXd N0 = base.arm_means.row(0).transpose();
  const Eigen::VectorXd N1 = base.arm_means.row(1).transpose();
  const Eigen::MatrixXd IF = eif_psi2(d, pi, mu0, mu1, N0, N1);
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!base.defined[static_cast<std::size_t>(j)]) continue;
    CHECK((IF.col(j) - base.IF.col(j)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("single-stage fluctuation matches its closed form on random instances") {
  Rng rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 5 + static_cast<int>(rng.below(60));
    Eigen::VectorXd y(n), mu(n), w(n);
    for (int i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.8) ? rng.uniform(0.0, 8.0) : 0.0;
      mu[i] = rng.uniform(0.05, 6.0);
      w[i] = rng.bernoulli(0.5) ? rng.uniform(0.5, 3.0) : 0.0;
    }
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
      num += w[i] * y[i];
      den += w[i] * mu[i];
    }
    const auto pf = solve_fluct_poisson(y, mu, w);
    if (num > 0.0 && den > 0.0) {
      REQUIRE(pf.ok);
      CHECK(pf.exp_beta == Catch::Approx(num / den).epsilon(1e-12));
      double score = 0.0;
      for (int i = 0; i < n; ++i) score += w[i] * (y[i] - pf.exp_beta * mu[i]);
      CHECK(std::abs(score) < 1e-10 * (1.0 + num));
    } else {
      CHECK_FALSE(pf.ok);
    }
  }
}

TEST_CASE("two-stage targeting zeroes the empirical score of every arm") {
  const auto d = two_arm_counts(120, 41);
  const auto fits = fitted_nuisances(d, 3, 2000, LearnerMenu::light());
  const auto t = tmle_target(d, fits, TmleMode::two_stage);
  const auto est = estimate_tmle2(d, fits, t);

  // Sub-score for each (category, arm) at the targeted fits.
  for (int a = 0; a <= 1; ++a) {
    const Eigen::MatrixXd& mu_t = (a == 0) ? t.mu0 : t.mu1;
    for (Eigen::Index j = 0; j < d.J(); ++j) {
      if (!est.defined[static_cast<std::size_t>(j)]) continue;
      double score = 0.0;
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.A[i] != a) continue;
        const double inv = (a == 1) ? 1.0 / fits.pi[i] : 1.0 / (1.0 - fits.pi[i]);
        score += inv * (d.W(i, j) - mu_t(i, j));
      }
      CHECK(std::abs(score / static_cast<double>(d.n())) < 1e-8);
    }
  }
  CHECK(max_abs_col_mean(est.IF, est.defined) < 1e-8);
  // The estimate is the log ratio of its own reported marginalized means.
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!est.defined[static_cast<std::size_t>(j)]) continue;
    CHECK(est.psi[j] ==
          Catch::Approx(std::log(est.g_computation(1, j) / est.g_computation(0, j))).margin(1e-12));
  }
}

TEST_CASE("single-stage targeting also zeroes the influence means") {
  const auto d = two_arm_counts(120, 43);
  Eigen::VectorXi strata(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) strata[i] = d.A[i];
  const auto folds = make_folds(static_cast<int>(d.n()), 3, strata, 4);
  NuisanceOptions opt;
  opt.menu = LearnerMenu::light();
  opt.inner_folds = 3;
  opt.form = MeanForm::direct;
  const auto fits = fit_nuisances(d, folds, opt, 11);
  const auto est = estimate_tmle2(d, fits, TmleMode::single_stage);
  CHECK(max_abs_col_mean(est.IF, est.defined) < 1e-10);
}

TEST_CASE("targeting with the default learner menu keeps the score identity") {
  const auto d = two_arm_counts(100, 47);
  const auto fits = fitted_nuisances(d, 3, 5, LearnerMenu::defaults());
  const auto est = estimate_tmle2(d, fits, TmleMode::two_stage);
  int defined_count = 0;
  for (auto f : est.defined) defined_count += f;
  REQUIRE(defined_count >= 2);
  CHECK(max_abs_col_mean(est.IF, est.defined) < 1e-8);
}

TEST_CASE("nuisances that already solve the score are a targeting fixed point") {
  Rng rng(71);
  const auto d = bare_counts(40, 2, rng);
  // Empirical positive-part means, presence rates, and exposure rate.
  double n1 = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) n1 += d.A[i];
  const double phat = n1 / static_cast<double>(d.n());
  Eigen::VectorXd m_emp(2 * d.J()), q_emp(2 * d.J());
  NuisanceFits fits = constant_fits(d, phat, 1, 0.5, 1, 0.5);
  for (int a = 0; a <= 1; ++a) {
    for (Eigen::Index j = 0; j < d.J(); ++j) {
      double pos_sum = 0.0;
      int pos_count = 0, arm_count = 0;
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.A[i] != a) continue;
        ++arm_count;
        if (d.W(i, j) > 0.0) {
          ++pos_count;
          pos_sum += d.W(i, j);
        }
      }
      REQUIRE(pos_count > 0);
      Eigen::MatrixXd& m = (a == 0) ? fits.m0 : fits.m1;
      Eigen::MatrixXd& q = (a == 0) ? fits.q0 : fits.q1;
      m.col(j).setConstant(pos_sum / pos_count);
      q.col(j).setConstant(static_cast<double>(pos_count) / arm_count);
    }
  }
  fits.mu0 = fits.m0.cwiseProduct(fits.q0);
  fits.mu1 = fits.m1.cwiseProduct(fits.q1);

  const auto t = tmle_target(d, fits, TmleMode::two_stage);
  for (int a = 0; a <= 1; ++a) {
    for (Eigen::Index j = 0; j < d.J(); ++j) {
      CHECK(t.poisson_fluct(a, j) == Catch::Approx(1.0).margin(1e-12));
      CHECK(std::abs(t.logistic_fluct(a, j)) < 1e-10);
    }
  }
}

TEST_CASE("with flat nuisances the adjusted and unadjusted estimators coincide") {
  Rng rng(2025);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 20 + static_cast<int>(rng.below(40)) * 2;
    const auto d = bare_counts(n, 3, rng);
    double n1 = 0.0;
    for (Eigen::Index i = 0; i < d.n(); ++i) n1 += d.A[i];
    const double phat = n1 / static_cast<double>(d.n());
    const auto fits =
        constant_fits(d, phat, rng.uniform(0.5, 4.0), rng.uniform(0.2, 0.8),
                      rng.uniform(0.5, 4.0), rng.uniform(0.2, 0.8));
    const auto base = estimate_psi1(d);

    for (const TmleMode mode : {TmleMode::two_stage, TmleMode::single_stage}) {
      const auto est = estimate_tmle2(d, fits, mode);
      for (Eigen::Index j = 0; j < d.J(); ++j) {
        const bool both = base.defined[static_cast<std::size_t>(j)] &&
                          est.defined[static_cast<std::size_t>(j)];
        CHECK(base.defined[static_cast<std::size_t>(j)] ==
              est.defined[static_cast<std::size_t>(j)]);
        if (!both) continue;
        CHECK(est.psi[j] == Catch::Approx(base.psi[j]).margin(1e-10));
        CHECK((est.IF.col(j) - base.IF.col(j)).lpNorm<Eigen::Infinity>() < 1e-8);
      }
    }
  }
}

TEST_CASE("plug-in with flat nuisances reports the ratio of the constants") {
  Rng rng(8);
  const auto d = bare_counts(30, 2, rng);
  const auto fits = constant_fits(d, 0.5, 2.0, 0.5, 6.0, 0.25);
  const auto est = estimate_plugin2(d, fits);
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    REQUIRE(est.defined[static_cast<std::size_t>(j)] == 1);
    CHECK(est.psi[j] == Catch::Approx(std::log((6.0 * 0.25) / (2.0 * 0.5))).margin(1e-14));
  }
  CHECK(est.IF.isZero());
}

TEST_CASE("fold-averaged estimator equals its per-fold re-evaluation") {
  const auto d = two_arm_counts(90, 53);
  const auto fits = fitted_nuisances(d, 3, 77, LearnerMenu::light());
  const auto est = estimate_onestep2(d, fits);

  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!est.defined[static_cast<std::size_t>(j)]) continue;
    double acc = 0.0;
    for (int k = 0; k < fits.folds.K; ++k) {
      const auto& rows = fits.folds.members[static_cast<std::size_t>(k)];
      double N0 = 0.0, N1 = 0.0;
      for (int i : rows) {
        N0 += fits.mu0(i, j);
        N1 += fits.mu1(i, j);
      }
      N0 /= static_cast<double>(rows.size());
      N1 /= static_cast<double>(rows.size());
      Eigen::VectorXd N0v = Eigen::VectorXd::Constant(d.J(), 1.0);
      Eigen::VectorXd N1v = Eigen::VectorXd::Constant(d.J(), 1.0);
      N0v[j] = N0;
      N1v[j] = N1;
      const Eigen::MatrixXd IF = eif_psi2(d, fits.pi, fits.mu0, fits.mu1, N0v, N1v);
      double corr = 0.0;
      for (int i : rows) corr += IF(i, j);
      acc += std::log(N1 / N0) + corr / static_cast<double>(rows.size());
      // The stored influence rows for this fold are the same evaluations.
      for (int i : rows) {
        CHECK(est.IF(i, j) == Catch::Approx(IF(i, j)).margin(1e-12));
      }
    }
    CHECK(est.psi[j] == Catch::Approx(acc / fits.folds.K).margin(1e-12));
  }
}

TEST_CASE("doubling exposed-arm counts shifts adjusted estimates by log 2") {
  const auto d = two_arm_counts(110, 61);
  auto doubled = d;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.A[i] == 1) doubled.W.row(i) *= 2.0;
  }
  const auto fits = fitted_nuisances(d, 3, 300, LearnerMenu::light());
  const auto fits2 = fitted_nuisances(doubled, 3, 300, LearnerMenu::light());
  const auto est = estimate_tmle2(d, fits, TmleMode::two_stage);
  const auto est2 = estimate_tmle2(doubled, fits2, TmleMode::two_stage);
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!est.defined[static_cast<std::size_t>(j)] || !est2.defined[static_cast<std::size_t>(j)]) {
      continue;
    }
    CHECK(est2.psi[j] - est.psi[j] == Catch::Approx(std::log(2.0)).margin(1e-8));
  }
}

TEST_CASE("categories missing from one arm are flagged undefined everywhere") {
  Rng rng(3);
  auto d = bare_counts(40, 3, rng);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.A[i] == 0) d.W(i, 1) = 0.0;  // category 1 vanishes from the unexposed arm
  }
  const auto base = estimate_psi1(d);
  CHECK(base.defined[1] == 0);
  CHECK(std::isnan(base.psi[1]));
  CHECK(base.IF.col(1).isZero());
  CHECK(base.status[1].reason == CategoryReason::all_zero_in_arm0);

  const auto fits = constant_fits(d, 0.5, 2.0, 0.5, 2.0, 0.5);
  const auto tm = estimate_tmle2(d, fits, TmleMode::two_stage);
  CHECK(tm.defined[1] == 0);
  CHECK(std::isnan(tm.psi[1]));
  const auto os = estimate_onestep2(d, fits);
  CHECK(os.defined[1] == 0);
  const auto pl = estimate_plugin2(d, fits);
  CHECK(pl.defined[1] == 0);
  // The healthy categories stay defined.
  CHECK(tm.defined[0] == 1);
  CHECK(os.defined[2] == 1);
}

TEST_CASE("adjusted estimation is deterministic end to end") {
  const auto d = two_arm_counts(80, 67);
  const auto a = estimate_tmle2(d, fitted_nuisances(d, 3, 12, LearnerMenu::light()));
  const auto b = estimate_tmle2(d, fitted_nuisances(d, 3, 12, LearnerMenu::light()));
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!a.defined[static_cast<std::size_t>(j)]) continue;
    CHECK(a.psi[j] == b.psi[j]);
  }
  CHECK((a.IF - b.IF).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("centering an adjusted estimate behaves like centering its pieces") {
  const auto d = two_arm_counts(100, 71);
  const auto fits = fitted_nuisances(d, 3, 21, LearnerMenu::light());
  const auto est = estimate_tmle2(d, fits, TmleMode::two_stage);

  const auto mean_centered = estimate_psi2_centered(est, CenteringSpec{CenterKind::mean});
  double sum = 0.0;
  int live = 0;
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    if (!mean_centered.defined[static_cast<std::size_t>(j)]) continue;
    sum += mean_centered.psi[j];
    ++live;
  }
  REQUIRE(live >= 2);
  CHECK(std::abs(sum) < 1e-10);
  // Row sums of the centered influence matrix vanish as well.
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(d.n(), 10); ++i) {
    double rs = 0.0;
    for (Eigen::Index j = 0; j < d.J(); ++j) {
      if (mean_centered.defined[static_cast<std::size_t>(j)]) rs += mean_centered.IF(i, j);
    }
    CHECK(std::abs(rs) < 1e-10);
  }

  CenteringSpec ref;
  ref.kind = CenterKind::reference;
  ref.reference = 0;
  const auto ref_centered = estimate_psi2_centered(est, ref);
  if (ref_centered.defined[0]) {
    CHECK(ref_centered.psi[0] == 0.0);
    CHECK(ref_centered.IF.col(0).isZero());
  }
}
