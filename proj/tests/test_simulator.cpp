#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "folddiff/quadrature.hpp"
#include "folddiff/rng.hpp"
#include "folddiff/simulator.hpp"

using namespace folddiff;

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
  const QuadRule rule = gauss_legendre(8);
  REQUIRE(rule.nodes.size() == 8);

  // An 8-point rule is exact through degree 15.
  for (int k = 0; k <= 15; ++k) {
    const double got = apply_rule(rule, [k](double x) { return std::pow(x, k); }, 0.0, 1.0);
    CHECK(got == Catch::Approx(1.0 / (k + 1)).epsilon(1e-13));
  }

  const QuadRule big = gauss_legendre(128);
  double wsum = 0.0;
  for (double w : big.weights) wsum += w;
  CHECK(wsum == Catch::Approx(2.0).margin(1e-12));
  for (std::size_t k = 0; k < big.nodes.size(); ++k) {
    CHECK(big.nodes[k] == Catch::Approx(-big.nodes[big.nodes.size() - 1 - k]).margin(1e-14));
  }
}

TEST_CASE("adaptive integration matches closed forms") {
  const double pi = 3.14159265358979323846;

  const QuadResult s = integrate([](double x) { return std::sin(x); }, 0.0, pi);
  CHECK(s.value == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(s.error < 1e-9);

  const QuadResult e = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(e.value == Catch::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));

  // A spike narrow enough to force panel splits.
  const auto spike = [](double x) {
    const double d = x - 0.3;
    return 1.0 / (d * d + 1e-4);
  };
  const double spike_exact = (std::atan(70.0) + std::atan(30.0)) / 0.01;
  const QuadResult sp = integrate(spike, 0.0, 1.0, 1e-12);
  CHECK(sp.value == Catch::Approx(spike_exact).epsilon(1e-9));
  CHECK(sp.panels > 1);

  // Moments of the covariate law after the u = x^0.7 substitution:
  // E[X^k] = 0.7 / (k + 0.7).
  for (int k = 1; k <= 3; ++k) {
    const QuadResult m = integrate(
        [k](double u) { return std::pow(std::pow(u, 1.0 / 0.7), k); }, 0.0, 1.0);
    CHECK(m.value == Catch::Approx(0.7 / (k + 0.7)).epsilon(1e-9));
  }
}

TEST_CASE("integration rejects bad arguments") {
  CHECK_THROWS_AS(gauss_legendre(1), std::invalid_argument);
  CHECK_THROWS_AS(integrate([](double) { return 1.0; }, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate([](double) { return 1.0; }, 0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(
      integrate([](double) { return std::numeric_limits<double>::infinity(); }, 0.0, 1.0),
      std::runtime_error);
}

TEST_CASE("adjusted truth for the log-linear family is exact") {
  for (int J : {5, 11, 51}) {
    SimConfig cfg;
    cfg.J = J;
    cfg.mean = MeanKind::gamma_A;
    const TrueParams t = true_psi(cfg);
    REQUIRE(t.psi_adjusted.size() == J);
    CHECK(t.max_rel_error <= 1e-8);
    for (int j = 0; j < J; ++j) {
      const double expect = 2.0 * std::log(2.0 * (j + 1) / static_cast<double>(J));
      CHECK(std::abs(t.psi_adjusted[j] - expect) <= 1e-8);
    }
  }
}

TEST_CASE("unadjusted truth matches a Monte Carlo oracle") {
  SimConfig cfg;
  cfg.J = 5;
  cfg.mean = MeanKind::gamma_A;
  const TrueParams t = true_psi(cfg);

  // Sample (X, A) from the joint law and average the conditional mean within
  // each arm; this reproduces E[latent mean | A = a] without quadrature.
  const int ndraw = 2000000;
  Rng rng(2024);
  std::vector<int> check_j = {0, 2, 4};
  Eigen::MatrixXd sum(2, 5), sumsq(2, 5);
  sum.setZero();
  sumsq.setZero();
  Eigen::Vector2i narm;
  narm.setZero();
  for (int i = 0; i < ndraw; ++i) {
    const double x = std::pow(rng.uniform(), 1.0 / 0.7);
    const int a = rng.bernoulli(true_propensity(x));
    narm[a] += 1;
    for (int j : check_j) {
      const double g = latent_mean(cfg.mean, j + 1, cfg.J, a, x);
      sum(a, j) += g;
      sumsq(a, j) += g * g;
    }
  }
  for (int j : check_j) {
    double mean[2], var[2];
    for (int a = 0; a < 2; ++a) {
      mean[a] = sum(a, j) / narm[a];
      var[a] = sumsq(a, j) / narm[a] - mean[a] * mean[a];
    }
    const double est = std::log(mean[1] / mean[0]);
    const double se = std::sqrt(var[1] / (mean[1] * mean[1] * narm[1]) +
                                var[0] / (mean[0] * mean[0] * narm[0]));
    CHECK(std::abs(est - t.psi_unadjusted[j]) <= 4.0 * se + 1e-6);
  }

  // The covariate slope vanishes for the last category, so adjustment does
  // nothing there; every other category is confounded.
  CHECK(std::abs(t.psi_unadjusted[4] - t.psi_adjusted[4]) < 1e-8);
  CHECK(std::abs(t.psi_unadjusted[0] - t.psi_adjusted[0]) > 0.01);
}

TEST_CASE("curved-family truth matches a Monte Carlo oracle") {
  SimConfig cfg;
  cfg.J = 7;
  cfg.mean = MeanKind::gamma_B;
  const TrueParams t = true_psi(cfg);

  const int ndraw = 2000000;
  for (int j : {0, 3, 6}) {
    double mean[2], var[2];
    for (int a = 0; a < 2; ++a) {
      Rng rng(500 + 10 * j + a);
      double s = 0.0, ss = 0.0;
      for (int i = 0; i < ndraw; ++i) {
        const double x = std::pow(rng.uniform(), 1.0 / 0.7);
        const double g = latent_mean(cfg.mean, j + 1, cfg.J, a, x);
        s += g;
        ss += g * g;
      }
      mean[a] = s / ndraw;
      var[a] = ss / ndraw - mean[a] * mean[a];
    }
    const double est = std::log(mean[1] / mean[0]);
    const double se = std::sqrt(var[1] / (mean[1] * mean[1] * ndraw) +
                                var[0] / (mean[0] * mean[0] * ndraw));
    CHECK(std::abs(est - t.psi_adjusted[j]) <= 4.0 * se + 1e-6);
  }
}

TEST_CASE("replicate draws expose the generative pieces") {
  SimConfig cfg;
  cfg.n = 60;
  cfg.J = 4;
  cfg.seed = 7;

  const SimDraw d = draw_dataset(cfg, 0);
  REQUIRE(d.data.W.rows() == 60);
  REQUIRE(d.data.W.cols() == 4);
  REQUIRE(d.data.X.cols() == 1);
  CHECK(d.data.sample_ids.front() == "s01");
  CHECK(d.data.sample_ids.back() == "s60");
  CHECK(d.data.category_names == std::vector<std::string>{"cat1", "cat2", "cat3", "cat4"});

  for (int i = 0; i < 60; ++i) {
    CHECK((d.data.A[i] == 0 || d.data.A[i] == 1));
    CHECK(d.data.X(i, 0) > 0.0);
    CHECK(d.data.X(i, 0) <= 1.0);
    for (int j = 0; j < 4; ++j) {
      CHECK(d.data.W(i, j) == d.latent.V(i, j) * d.latent.S[i] * d.latent.E[j]);
    }
  }

  // The sparsity levels are a permutation of the grid and the efficiency
  // ranks a permutation of 1..J.
  std::vector<double> sp(d.latent.sparsity.data(), d.latent.sparsity.data() + 4);
  std::sort(sp.begin(), sp.end());
  for (int j = 0; j < 4; ++j) {
    CHECK(sp[static_cast<std::size_t>(j)] ==
          Catch::Approx(0.1 + 0.8 * j / 3.0).margin(1e-12));
  }
  std::vector<int> rk = d.latent.efficiency_rank;
  std::sort(rk.begin(), rk.end());
  CHECK(rk == std::vector<int>{1, 2, 3, 4});

  // Same seed, same replicate: identical. New replicate: different counts.
  const SimDraw again = draw_dataset(cfg, 0);
  CHECK(again.data.W == d.data.W);
  CHECK(again.data.A == d.data.A);
  const SimDraw next = draw_dataset(cfg, 1);
  CHECK(next.data.W != d.data.W);
}

TEST_CASE("grid assignments can be shared across replicates") {
  SimConfig cfg;
  cfg.n = 8;
  cfg.J = 7;
  cfg.seed = 11;

  cfg.fix_assignments = true;
  const SimDraw a0 = draw_dataset(cfg, 0);
  const SimDraw a3 = draw_dataset(cfg, 3);
  CHECK(a0.latent.sparsity == a3.latent.sparsity);
  CHECK(a0.latent.efficiency_rank == a3.latent.efficiency_rank);

  cfg.fix_assignments = false;
  const SimDraw b0 = draw_dataset(cfg, 0);
  const SimDraw b3 = draw_dataset(cfg, 3);
  const bool same = b0.latent.sparsity == b3.latent.sparsity &&
                    b0.latent.efficiency_rank == b3.latent.efficiency_rank;
  CHECK_FALSE(same);
}

TEST_CASE("distortion toggles leave the other components untouched") {
  SimConfig cfg;
  cfg.n = 30;
  cfg.J = 3;
  cfg.seed = 21;

  const SimDraw full = draw_dataset(cfg, 2);

  cfg.effort_on = false;
  const SimDraw no_s = draw_dataset(cfg, 2);
  CHECK(no_s.latent.S == Eigen::VectorXd::Ones(30));
  CHECK(no_s.latent.V == full.latent.V);
  CHECK(no_s.latent.E == full.latent.E);

  cfg.efficiency_on = false;
  const SimDraw bare = draw_dataset(cfg, 2);
  CHECK(bare.latent.E == Eigen::VectorXd::Ones(3));
  CHECK(bare.latent.V == full.latent.V);
  CHECK(bare.data.W == bare.latent.V);
}

TEST_CASE("zero-inflated draws have the stated mean and zero mass") {
  Rng rng(99);
  const double p = 0.3, gamma = 6.0, size = 2.0;
  const int ndraw = 400000;
  double s = 0.0, ss = 0.0;
  int zeros = 0;
  for (int i = 0; i < ndraw; ++i) {
    const double v = detail::draw_zinb(rng, p, gamma, size);
    s += v;
    ss += v * v;
    if (v == 0.0) ++zeros;
  }
  const double mean = s / ndraw;
  const double sd = std::sqrt(ss / ndraw - mean * mean);
  CHECK(std::abs(mean - gamma) <= 4.0 * sd / std::sqrt(static_cast<double>(ndraw)));

  // P(0) = (1 - p) + p * (1 + mu/size)^(-size) with mu = gamma / p.
  const double p0 = (1.0 - p) + p * std::pow(1.0 + gamma / p / size, -size);
  const double phat = static_cast<double>(zeros) / ndraw;
  CHECK(std::abs(phat - p0) <= 4.0 * std::sqrt(p0 * (1.0 - p0) / ndraw));
}

TEST_CASE("latent counts average to the conditional mean family") {
  SimConfig cfg;
  cfg.n = 40000;
  cfg.J = 1;
  cfg.seed = 31;
  const SimDraw d = draw_dataset(cfg, 0);

  // E[V | A, X] equals the latent mean, so the residual mean is zero.
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < cfg.n; ++i) {
    const double r =
        d.latent.V(i, 0) - latent_mean(cfg.mean, 1, 1, d.data.A[i], d.data.X(i, 0));
    s += r;
    ss += r * r;
  }
  const double mean = s / cfg.n;
  const double se = std::sqrt((ss / cfg.n - mean * mean) / cfg.n);
  CHECK(std::abs(mean) <= 4.0 * se);

  // The exposure rate matches the integrated ramp and the covariate mean
  // matches its Beta(0.7, 1) expectation.
  const double mass1 =
      integrate([](double u) { return true_propensity(std::pow(u, 1.0 / 0.7)); }, 0.0, 1.0)
          .value;
  const double arate = d.data.A.cast<double>().mean();
  CHECK(std::abs(arate - mass1) <= 4.0 * std::sqrt(0.25 / cfg.n));
  const double xbar = d.data.X.col(0).mean();
  CHECK(std::abs(xbar - 0.7 / 1.7) <= 4.0 * 0.3 / std::sqrt(static_cast<double>(cfg.n)));
}

TEST_CASE("effort law shrinks exposed samples by the designed ratio") {
  SimConfig cfg;
  cfg.n = 200000;
  cfg.J = 1;
  cfg.seed = 41;
  const SimDraw d = draw_dataset(cfg, 0);

  double s0 = 0.0, s1 = 0.0;
  int n0 = 0, n1 = 0;
  for (int i = 0; i < cfg.n; ++i) {
    if (d.data.A[i] == 1) {
      s1 += d.latent.S[i];
      ++n1;
    } else {
      s0 += d.latent.S[i];
      ++n0;
    }
  }
  const double m0 = s0 / n0, m1 = s1 / n1;
  const double se = 0.3 / std::sqrt(12.0);
  CHECK(std::abs(m0 - 0.25) <= 4.0 * se / std::sqrt(static_cast<double>(n0)));
  CHECK(std::abs(m1 - 0.15) <= 4.0 * se / std::sqrt(static_cast<double>(n1)));
  CHECK(m1 / m0 == Catch::Approx(0.6).margin(0.01));
}

TEST_CASE("efficiency spread spans a factor of about fifty-five") {
  SimConfig cfg;
  cfg.n = 1;
  cfg.J = 51;
  cfg.seed = 51;
  cfg.fix_assignments = true;

  const int reps = 2000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(51);
  for (int r = 0; r < reps; ++r) {
    sum += draw_dataset(cfg, r).latent.E;
  }
  const Eigen::VectorXd mean = sum / reps;
  const double ratio = mean.maxCoeff() / mean.minCoeff();
  CHECK(ratio == Catch::Approx(std::exp(4.0)).margin(2.5));
}

TEST_CASE("study driver aggregates methods against the quadrature truth") {
  StudyConfig cfg;
  cfg.sim.n = 80;
  cfg.sim.J = 3;
  cfg.sim.seed = 61;
  cfg.replicates = 4;
  cfg.methods = {SimMethod::psi1_plugin, SimMethod::psi2_tmle, SimMethod::psi2_onestep};
  cfg.outer_folds = 2;
  cfg.nuisance.menu = LearnerMenu::light();
  cfg.nuisance.inner_folds = 2;
  cfg.maxt_draws = 1000;

  const SimReport rep = run_study(cfg);
  REQUIRE(rep.methods.size() == 4);
  CHECK(rep.methods[0].method == "psi1_plugin");
  CHECK(rep.methods[1].method == "psi2_tmle");
  CHECK(rep.methods[2].method == "psi2_onestep");
  CHECK(rep.methods[3].method == "zero");
  CHECK(rep.records.size() == 12);

  const Eigen::VectorXd truth2 = rep.truth_raw.psi_adjusted;
  CHECK(rep.methods[1].truth == truth2);
  CHECK(rep.methods[3].truth == truth2);
  CHECK(rep.methods[0].truth == rep.truth_raw.psi_unadjusted);

  // The zero reference scores the squared truth exactly and never fails.
  CHECK(rep.methods[3].mse == truth2.array().square().matrix());
  CHECK(rep.methods[3].variance == Eigen::VectorXd::Zero(3));
  CHECK(rep.methods[3].n_used == Eigen::VectorXi::Constant(3, 4));

  for (const MethodReport& m : rep.methods) {
    CHECK(m.failures == 0);
    for (int j = 0; j < 3; ++j) {
      if (m.n_used[j] < 1) continue;
      CHECK(m.mse[j] >= m.bias[j] * m.bias[j] - 1e-12);
      if (std::isfinite(m.cover_marginal[j])) {
        CHECK(m.cover_marginal[j] >= 0.0);
        CHECK(m.cover_marginal[j] <= 1.0);
        CHECK(m.cover_simultaneous[j] >= m.cover_marginal[j] - 1e-12);
        CHECK(m.width_simultaneous[j] >= m.width_marginal[j] - 1e-12);
      }
    }
  }

  // Bitwise reproducibility of the whole study.
  const SimReport rep2 = run_study(cfg);
  for (std::size_t k = 0; k < rep.methods.size(); ++k) {
    for (int j = 0; j < 3; ++j) {
      if (rep.methods[k].n_used[j] < 1) continue;
      CHECK(rep.methods[k].mse[j] == rep2.methods[k].mse[j]);
    }
  }
  REQUIRE(rep2.records.size() == rep.records.size());
  CHECK(rep.records[1].psi == rep2.records[1].psi);
}

TEST_CASE("centered studies score against the centered truth") {
  StudyConfig cfg;
  cfg.sim.n = 70;
  cfg.sim.J = 3;
  cfg.sim.seed = 71;
  cfg.replicates = 2;
  cfg.methods = {SimMethod::psi1_plugin};
  cfg.centering.kind = CenterKind::mean;
  cfg.maxt_draws = 1000;

  const SimReport rep = run_study(cfg);
  CHECK(std::abs(rep.methods[0].truth.sum()) <= 1e-10);
  CHECK(std::abs(rep.methods[1].truth.sum()) <= 1e-10);
  // The raw truth is not itself centered.
  CHECK(std::abs(rep.truth_raw.psi_unadjusted.sum()) > 0.1);
}

TEST_CASE("estimator failures are recorded without aborting the study") {
  StudyConfig cfg;
  cfg.sim.n = 40;
  cfg.sim.J = 2;
  cfg.sim.seed = 81;
  cfg.sim.sparsity_lo = 0.9;  // keep both categories live in every arm
  cfg.replicates = 2;
  cfg.methods = {SimMethod::psi1_plugin};
  cfg.maxt_draws = 500;  // below the resampling minimum, so inference throws

  const SimReport rep = run_study(cfg);
  CHECK(rep.methods[0].failures == 2);
  CHECK(rep.methods[0].n_used == Eigen::VectorXi::Zero(2));
  REQUIRE(rep.records.size() == 2);
  CHECK_FALSE(rep.records[0].error.empty());
  // The zero reference is unaffected.
  CHECK(rep.methods[1].n_used == Eigen::VectorXi::Constant(2, 2));
}

TEST_CASE("study driver rejects bad configurations") {
  StudyConfig cfg;
  cfg.sim.J = 2;
  cfg.replicates = 0;
  CHECK_THROWS_AS(run_study(cfg), std::invalid_argument);
  cfg.replicates = 1;
  cfg.methods.clear();
  CHECK_THROWS_AS(run_study(cfg), std::invalid_argument);

  SimConfig bad;
  bad.n = 0;
  CHECK_THROWS_AS(draw_dataset(bad, 0), std::invalid_argument);
  bad.n = 5;
  bad.sparsity_lo = 0.0;
  CHECK_THROWS_AS(draw_dataset(bad, 0), std::invalid_argument);
  bad.sparsity_lo = 0.1;
  bad.nb_size = 0.0;
  CHECK_THROWS_AS(true_psi(bad), std::invalid_argument);
  CHECK_THROWS_AS(parse_mean_kind("gamma_C"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sim_method("psi3"), std::invalid_argument);
}
