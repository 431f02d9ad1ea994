#ifndef FOLDDIFF_SIMULATOR_HPP
#define FOLDDIFF_SIMULATOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "folddiff/centering.hpp"
#include "folddiff/data.hpp"
#include "folddiff/estimators.hpp"
#include "folddiff/inference.hpp"
#include "folddiff/nuisance.hpp"
#include "folddiff/quadrature.hpp"
#include "folddiff/rng.hpp"

namespace folddiff {

// ---------------------------------------------------------------------------
// Synthetic data generator.
//
// Latent counts V_ij are zero-inflated negative binomials whose conditional
// mean given (exposure a, covariate x) follows one of two mean families. The
// observed matrix is W = V * S_i * E_j: each sample keeps only a random
// fraction S of its material, and each category is detected with a random
// efficiency E shared by all samples. Group contrasts of the latent means are
// available in closed form or by quadrature, which gives every estimator an
// exact target to be scored against.
// ---------------------------------------------------------------------------

enum class MeanKind { gamma_A, gamma_B };

inline const char* mean_kind_label(MeanKind k) {
  switch (k) {
    case MeanKind::gamma_A: return "gamma_A";
    case MeanKind::gamma_B: return "gamma_B";
  }
  return "gamma_A";
}

inline MeanKind parse_mean_kind(const std::string& text) {
  if (text == "gamma_A") return MeanKind::gamma_A;
  if (text == "gamma_B") return MeanKind::gamma_B;
  throw std::invalid_argument("mean kind must be gamma_A or gamma_B, got '" + text + "'");
}

// Conditional mean of the latent count for 1-based category j of J.
//
// gamma_A is log-linear in (a, x) with slopes that vary across categories;
// its adjusted group contrast is exactly 2*log(2j/J). gamma_B bends the
// exposure effect through exp(x * 2j/J), so no closed form exists and the
// truth must come from quadrature.
inline double latent_mean(MeanKind kind, int j, int J, int a, double x) {
  const double jr = static_cast<double>(j);
  const double Jr = static_cast<double>(J);
  switch (kind) {
    case MeanKind::gamma_A:
      return std::exp(5.0 + 0.5 * std::log(jr) + a * 2.0 * std::log(2.0 * jr / Jr) -
                      0.5 * std::log(jr / Jr) * x);
    case MeanKind::gamma_B:
      return std::exp(1.0 + 5.0 * jr / Jr + a * std::exp(x * 2.0 * jr / Jr) -
                      std::sin(3.14159265358979323846 * (x + jr / Jr)));
  }
  return 0.0;
}

// P(A = 1 | X = x); a smooth ramp kept inside [0.05, 1.00).
inline double true_propensity(double x) {
  return 0.95 * (std::atan(6.0 * (x - 0.3)) / 3.14159265358979323846 + 0.5) + 0.05;
}

struct SimConfig {
  int n = 100;
  int J = 11;
  MeanKind mean = MeanKind::gamma_A;
  double nb_size = 2.0;           // negative binomial dispersion of the latent counts
  double sparsity_lo = 0.1;       // presence-probability grid endpoints
  double sparsity_hi = 0.9;
  double effort_control_lo = 0.1;  // S | A=0 ~ Uniform(lo, hi)
  double effort_control_hi = 0.4;
  double effort_exposed_lo = 0.0;  // S | A=1 ~ Uniform(lo, hi)
  double effort_exposed_hi = 0.3;
  double efficiency_shape = 20.0;  // Gamma shape of the per-category efficiency
  bool effort_on = true;           // false: S fixed at 1 (no per-sample distortion)
  bool efficiency_on = true;       // false: E fixed at 1 (no per-category distortion)
  bool fix_assignments = false;    // share the category grid assignments across replicates
  std::uint64_t seed = 1;
};

inline void check_sim_config(const SimConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("simulate: n must be at least 1");
  if (cfg.J < 1) throw std::invalid_argument("simulate: J must be at least 1");
  if (!(cfg.nb_size > 0.0)) throw std::invalid_argument("simulate: nb_size must be positive");
  if (!(cfg.sparsity_lo > 0.0 && cfg.sparsity_hi <= 1.0 && cfg.sparsity_lo <= cfg.sparsity_hi)) {
    throw std::invalid_argument("simulate: sparsity grid must satisfy 0 < lo <= hi <= 1");
  }
  if (!(cfg.effort_control_lo >= 0.0 && cfg.effort_control_lo < cfg.effort_control_hi) ||
      !(cfg.effort_exposed_lo >= 0.0 && cfg.effort_exposed_lo < cfg.effort_exposed_hi)) {
    throw std::invalid_argument("simulate: effort bounds must satisfy 0 <= lo < hi");
  }
  if (!(cfg.efficiency_shape > 0.0)) {
    throw std::invalid_argument("simulate: efficiency_shape must be positive");
  }
}

// Everything the generator knows and the analyst does not.
struct LatentDraw {
  Eigen::MatrixXd V;                 // n x J latent counts
  Eigen::VectorXd S;                 // per-sample effort multiplier
  Eigen::VectorXd E;                 // per-category efficiency multiplier
  Eigen::VectorXd sparsity;          // realized presence probability per category
  std::vector<int> efficiency_rank;  // 1..J rank driving each category's efficiency rate
};

struct SimDraw {
  Dataset data;
  LatentDraw latent;
};

namespace detail {

// Zero-inflated negative binomial: zero with probability 1 - p, otherwise a
// count with mean gamma / p and the given size, drawn as Gamma-Poisson. The
// unconditional mean is exactly gamma.
inline double draw_zinb(Rng& rng, double p, double gamma, double size) {
  if (rng.bernoulli(p) == 0) return 0.0;
  const double mean = gamma / p;
  const double lambda = rng.gamma(size, mean / size);
  return static_cast<double>(rng.poisson(lambda));
}

// Efficiency rate multiplier for the category holding 1-based rank r of J.
// Rates grow from 1 (rank 1) to J^(4/log J) = e^4 (rank J), so expected
// efficiencies span a factor of e^4 ~ 55 regardless of J.
inline double efficiency_rate(int rank, int J) {
  if (J == 1) return 1.0;
  const double base = static_cast<double>(J) / static_cast<double>(J + 1 - rank);
  return std::pow(base, 4.0 / std::log(static_cast<double>(J)));
}

inline std::string padded_name(const char* prefix, int index, int width) {
  std::string num = std::to_string(index);
  while (static_cast<int>(num.size()) < width) num.insert(num.begin(), '0');
  return std::string(prefix) + num;
}

}  // namespace detail

// Draws one replicate. Covariates, counts, effort, and efficiency each use a
// seed derived from (seed, replicate, component), so toggling one component
// off leaves the draws of the others bit-identical.
inline SimDraw draw_dataset(const SimConfig& cfg, int replicate) {
  check_sim_config(cfg);
  if (replicate < 0) throw std::invalid_argument("simulate: replicate index must be >= 0");

  const int n = cfg.n, J = cfg.J;
  const std::uint64_t rep_seed =
      derive_seed(cfg.seed, {rngtag::kReplicate, static_cast<std::uint64_t>(replicate)});
  const std::uint64_t assign_base = cfg.fix_assignments ? cfg.seed : rep_seed;

  SimDraw out;
  out.latent.V.setZero(n, J);
  out.latent.S = Eigen::VectorXd::Ones(n);
  out.latent.E = Eigen::VectorXd::Ones(J);
  out.latent.sparsity.resize(J);
  out.latent.efficiency_rank.resize(static_cast<std::size_t>(J));

  // Category grid assignments: which sparsity level and which efficiency rank
  // each category receives.
  {
    Rng arng(derive_seed(assign_base, {rngtag::kPermutation}));
    const std::vector<int> sp = arng.permutation(J);
    const std::vector<int> rk = arng.permutation(J);
    for (int j = 0; j < J; ++j) {
      const double frac =
          J > 1 ? static_cast<double>(sp[static_cast<std::size_t>(j)]) / (J - 1.0) : 0.5;
      out.latent.sparsity[j] = cfg.sparsity_lo + (cfg.sparsity_hi - cfg.sparsity_lo) * frac;
      out.latent.efficiency_rank[static_cast<std::size_t>(j)] =
          rk[static_cast<std::size_t>(j)] + 1;
    }
  }

  // Covariate X ~ Beta(0.7, 1) by inverse CDF, exposure A | X by the ramp.
  Dataset& d = out.data;
  d.W.setZero(n, J);
  d.A.resize(n);
  d.X.resize(n, 1);
  {
    Rng xrng(derive_seed(rep_seed, {rngtag::kLatent, 0}));
    for (int i = 0; i < n; ++i) {
      double u = xrng.uniform();
      if (u <= 0.0) u = std::numeric_limits<double>::min();
      const double x = std::pow(u, 1.0 / 0.7);
      d.X(i, 0) = x;
      d.A[i] = xrng.bernoulli(true_propensity(x));
    }
  }

  {
    Rng vrng(derive_seed(rep_seed, {rngtag::kLatent, 1}));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < J; ++j) {
        const double gamma = latent_mean(cfg.mean, j + 1, J, d.A[i], d.X(i, 0));
        out.latent.V(i, j) =
            detail::draw_zinb(vrng, out.latent.sparsity[j], gamma, cfg.nb_size);
      }
    }
  }

  if (cfg.effort_on) {
    Rng srng(derive_seed(rep_seed, {rngtag::kLatent, 2}));
    for (int i = 0; i < n; ++i) {
      out.latent.S[i] = d.A[i] == 1 ? srng.uniform(cfg.effort_exposed_lo, cfg.effort_exposed_hi)
                                    : srng.uniform(cfg.effort_control_lo, cfg.effort_control_hi);
    }
  }

  if (cfg.efficiency_on) {
    Rng erng(derive_seed(rep_seed, {rngtag::kLatent, 3}));
    for (int j = 0; j < J; ++j) {
      const double rate = cfg.efficiency_shape *
                          detail::efficiency_rate(
                              out.latent.efficiency_rank[static_cast<std::size_t>(j)], J);
      out.latent.E[j] = erng.gamma(cfg.efficiency_shape, 1.0 / rate);
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j) {
      d.W(i, j) = out.latent.V(i, j) * out.latent.S[i] * out.latent.E[j];
    }
  }

  const int sw = static_cast<int>(std::to_string(n).size());
  const int cw = static_cast<int>(std::to_string(J).size());
  d.sample_ids.reserve(static_cast<std::size_t>(n));
  d.category_names.reserve(static_cast<std::size_t>(J));
  for (int i = 0; i < n; ++i) d.sample_ids.push_back(detail::padded_name("s", i + 1, sw));
  for (int j = 0; j < J; ++j) d.category_names.push_back(detail::padded_name("cat", j + 1, cw));
  d.covariate_names = {"x"};
  // No structural check here: a small replicate can legitimately draw a
  // single-arm exposure vector, and the estimators already reject that with
  // a clear error. The study driver records such replicates as failures.
  return out;
}

// ---------------------------------------------------------------------------
// True parameter values by quadrature.
//
// X has density 0.7 * x^(-0.3) on (0,1). Substituting u = x^0.7 absorbs the
// endpoint singularity: integrals against the density become plain integrals
// of f(u^(1/0.7)) over (0,1) with a smooth integrand.
// ---------------------------------------------------------------------------

struct TrueParams {
  Eigen::VectorXd psi_adjusted;    // log contrast of covariate-marginalized latent means
  Eigen::VectorXd psi_unadjusted;  // log contrast of arm-conditional latent means
  double max_rel_error = 0.0;      // worst relative quadrature error across all integrals
};

namespace detail {

inline double checked_integral(const std::function<double(double)>& f, double& max_rel_err) {
  const QuadResult r = integrate(f, 0.0, 1.0, 1e-10, 128);
  const double rel = r.error / std::max(std::abs(r.value), 1e-300);
  if (rel > max_rel_err) max_rel_err = rel;
  if (rel > 1e-8) {
    throw std::runtime_error("true_psi: quadrature error estimate exceeds 1e-8");
  }
  return r.value;
}

}  // namespace detail

inline TrueParams true_psi(const SimConfig& cfg) {
  check_sim_config(cfg);
  const int J = cfg.J;
  TrueParams out;
  out.psi_adjusted.resize(J);
  out.psi_unadjusted.resize(J);

  const auto to_x = [](double u) { return std::pow(u, 1.0 / 0.7); };

  // Marginal exposure weights are shared by all categories.
  const double mass1 = detail::checked_integral(
      [&](double u) { return true_propensity(to_x(u)); }, out.max_rel_error);
  const double mass0 = 1.0 - mass1;

  for (int j = 0; j < J; ++j) {
    double mean[2];       // E[ latent_mean(a, X) ]
    double cond_num[2];   // E[ latent_mean(a, X) * P(A=a | X) ]
    for (int a = 0; a < 2; ++a) {
      mean[a] = detail::checked_integral(
          [&](double u) { return latent_mean(cfg.mean, j + 1, J, a, to_x(u)); },
          out.max_rel_error);
      cond_num[a] = detail::checked_integral(
          [&](double u) {
            const double x = to_x(u);
            const double pi1 = true_propensity(x);
            return latent_mean(cfg.mean, j + 1, J, a, x) * (a == 1 ? pi1 : 1.0 - pi1);
          },
          out.max_rel_error);
    }
    out.psi_adjusted[j] = std::log(mean[1] / mean[0]);
    out.psi_unadjusted[j] = std::log((cond_num[1] / mass1) / (cond_num[0] / mass0));
  }
  return out;
}

// Truth on the centered scale: subtract g of the truth vector itself.
inline Eigen::VectorXd center_truth(const Eigen::VectorXd& truth, const CenteringSpec& g) {
  if (g.kind == CenterKind::none) return truth;
  return truth.array() - center_value(g, truth);
}

// ---------------------------------------------------------------------------
// Replicated study driver.
// ---------------------------------------------------------------------------

enum class SimMethod { psi1_plugin, psi2_tmle, psi2_onestep };

inline const char* sim_method_label(SimMethod m) {
  switch (m) {
    case SimMethod::psi1_plugin: return "psi1_plugin";
    case SimMethod::psi2_tmle: return "psi2_tmle";
    case SimMethod::psi2_onestep: return "psi2_onestep";
  }
  return "psi1_plugin";
}

inline SimMethod parse_sim_method(const std::string& text) {
  if (text == "psi1_plugin") return SimMethod::psi1_plugin;
  if (text == "psi2_tmle") return SimMethod::psi2_tmle;
  if (text == "psi2_onestep") return SimMethod::psi2_onestep;
  throw std::invalid_argument("unknown study method '" + text + "'");
}

struct StudyConfig {
  SimConfig sim;
  int replicates = 300;
  std::vector<SimMethod> methods = {SimMethod::psi2_tmle};
  CenteringSpec centering;  // kind none scores the raw estimand
  int outer_folds = 5;
  NuisanceOptions nuisance;
  TmleMode tmle_mode = TmleMode::two_stage;
  double alpha = 0.05;
  int maxt_draws = 2000;
  bool keep_replicates = true;  // retain per-replicate rows in the report
  int progress_every = 0;       // > 0: note progress on stderr every that many replicates
};

struct ReplicateRecord {
  int replicate = 0;
  std::string method;
  Eigen::VectorXd psi;              // NaN where undefined
  Eigen::MatrixXd ci_marginal;      // J x 2
  Eigen::MatrixXd ci_simultaneous;  // J x 2
  std::string error;                // nonempty when the estimator failed outright
};

// Per-category aggregates for one method. Coverage and widths are averages
// over the replicates where the category was defined; n_used counts those.
struct MethodReport {
  std::string method;
  Eigen::VectorXd truth;
  Eigen::VectorXd mse, mse_se;
  Eigen::VectorXd bias, bias_se;
  Eigen::VectorXd variance;
  Eigen::VectorXd cover_marginal, cover_marginal_se;
  Eigen::VectorXd cover_simultaneous, cover_simultaneous_se;
  Eigen::VectorXd width_marginal, width_simultaneous;
  Eigen::VectorXi n_used;
  int failures = 0;  // replicates where the whole fit threw
};

struct SimReport {
  StudyConfig config;
  TrueParams truth_raw;
  std::vector<MethodReport> methods;  // requested methods, then the zero reference
  std::vector<ReplicateRecord> records;
};

namespace detail {

struct MethodAccumulator {
  explicit MethodAccumulator(int J)
      : count(Eigen::VectorXi::Zero(J)),
        sum_err(Eigen::VectorXd::Zero(J)),
        sum_err2(Eigen::VectorXd::Zero(J)),
        sum_err4(Eigen::VectorXd::Zero(J)),
        hits_marginal(Eigen::VectorXi::Zero(J)),
        hits_simultaneous(Eigen::VectorXi::Zero(J)),
        sum_width_marginal(Eigen::VectorXd::Zero(J)),
        sum_width_simultaneous(Eigen::VectorXd::Zero(J)) {}

  Eigen::VectorXi count;
  Eigen::VectorXd sum_err, sum_err2, sum_err4;
  Eigen::VectorXi hits_marginal, hits_simultaneous;
  Eigen::VectorXd sum_width_marginal, sum_width_simultaneous;
  int failures = 0;
};

inline MethodReport finalize_method(const std::string& label, const Eigen::VectorXd& truth,
                                    const MethodAccumulator& acc) {
  const Eigen::Index J = truth.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MethodReport rep;
  rep.method = label;
  rep.truth = truth;
  rep.mse = rep.mse_se = rep.bias = rep.bias_se = rep.variance = Eigen::VectorXd::Constant(J, nan);
  rep.cover_marginal = rep.cover_marginal_se = Eigen::VectorXd::Constant(J, nan);
  rep.cover_simultaneous = rep.cover_simultaneous_se = Eigen::VectorXd::Constant(J, nan);
  rep.width_marginal = rep.width_simultaneous = Eigen::VectorXd::Constant(J, nan);
  rep.n_used = acc.count;
  rep.failures = acc.failures;
  for (Eigen::Index j = 0; j < J; ++j) {
    const int m = acc.count[j];
    if (m < 1) continue;
    const double mm = static_cast<double>(m);
    const double mse = acc.sum_err2[j] / mm;
    const double bias = acc.sum_err[j] / mm;
    rep.mse[j] = mse;
    rep.bias[j] = bias;
    rep.variance[j] = std::max(0.0, mse - bias * bias);
    rep.mse_se[j] = std::sqrt(std::max(0.0, acc.sum_err4[j] / mm - mse * mse) / mm);
    rep.bias_se[j] = std::sqrt(std::max(0.0, mse - bias * bias) / mm);
    const double cm = static_cast<double>(acc.hits_marginal[j]) / mm;
    const double cs = static_cast<double>(acc.hits_simultaneous[j]) / mm;
    rep.cover_marginal[j] = cm;
    rep.cover_marginal_se[j] = std::sqrt(cm * (1.0 - cm) / mm);
    rep.cover_simultaneous[j] = cs;
    rep.cover_simultaneous_se[j] = std::sqrt(cs * (1.0 - cs) / mm);
    rep.width_marginal[j] = acc.sum_width_marginal[j] / mm;
    rep.width_simultaneous[j] = acc.sum_width_simultaneous[j] / mm;
  }
  return rep;
}

}  // namespace detail

// Runs the replicated study: draw, estimate with every requested method,
// score against the quadrature truth on the configured (possibly centered)
// scale. A replicate where an estimator throws is recorded and skipped for
// that method; it does not abort the study. The zero reference, which always
// reports 0 for every category, is appended so that mean-squared errors have
// a scale anchor (its MSE is the squared truth).
inline SimReport run_study(const StudyConfig& cfg) {
  check_sim_config(cfg.sim);
  if (cfg.replicates < 1) throw std::invalid_argument("run_study: replicates must be >= 1");
  if (cfg.methods.empty()) throw std::invalid_argument("run_study: no methods requested");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw std::invalid_argument("run_study: alpha outside (0,1)");
  }

  const int J = cfg.sim.J;
  SimReport report;
  report.config = cfg;
  report.truth_raw = true_psi(cfg.sim);

  const Eigen::VectorXd truth1 = center_truth(report.truth_raw.psi_unadjusted, cfg.centering);
  const Eigen::VectorXd truth2 = center_truth(report.truth_raw.psi_adjusted, cfg.centering);

  bool need_adjusted = false;
  for (SimMethod m : cfg.methods) {
    if (m != SimMethod::psi1_plugin) need_adjusted = true;
  }

  std::vector<detail::MethodAccumulator> accs(cfg.methods.size(),
                                              detail::MethodAccumulator(J));

  for (int r = 0; r < cfg.replicates; ++r) {
    if (cfg.progress_every > 0 && r % cfg.progress_every == 0) {
      std::cerr << "replicate " << r << "/" << cfg.replicates << "\n";
    }
    const SimDraw draw = draw_dataset(cfg.sim, r);
    const std::uint64_t rep_seed =
        derive_seed(cfg.sim.seed, {rngtag::kReplicate, static_cast<std::uint64_t>(r)});

    NuisanceFits fits;
    std::string shared_error;
    if (need_adjusted) {
      try {
        const FoldAssignment folds =
            make_folds(cfg.sim.n, cfg.outer_folds, draw.data.A, rep_seed);
        fits = fit_nuisances(draw.data, folds, cfg.nuisance, rep_seed);
      } catch (const std::exception& e) {
        shared_error = e.what();
      }
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      const SimMethod m = cfg.methods[mi];
      const Eigen::VectorXd& truth = m == SimMethod::psi1_plugin ? truth1 : truth2;
      ReplicateRecord rec;
      rec.replicate = r;
      rec.method = sim_method_label(m);
      try {
        Eigen::VectorXd psi;
        Eigen::MatrixXd IF;
        std::vector<std::uint8_t> defined;
        if (m == SimMethod::psi1_plugin) {
          const UnadjustedEstimate est = estimate_psi1_centered(draw.data, cfg.centering);
          psi = est.psi;
          IF = est.IF;
          defined = est.defined;
        } else {
          if (!shared_error.empty()) throw std::runtime_error(shared_error);
          AdjustedEstimate est = m == SimMethod::psi2_tmle
                                     ? estimate_tmle2(draw.data, fits, cfg.tmle_mode)
                                     : estimate_onestep2(draw.data, fits);
          est = estimate_psi2_centered(est, cfg.centering);
          psi = est.psi;
          IF = est.IF;
          defined = est.defined;
        }
        const InferenceResult inf =
            infer(psi, IF, defined, cfg.alpha, cfg.maxt_draws, rep_seed);
        rec.psi = psi;
        rec.ci_marginal = inf.ci_marginal;
        rec.ci_simultaneous = inf.ci_simultaneous;

        detail::MethodAccumulator& acc = accs[mi];
        for (int j = 0; j < J; ++j) {
          if (!defined[static_cast<std::size_t>(j)] || !std::isfinite(psi[j])) continue;
          const double err = psi[j] - truth[j];
          acc.count[j] += 1;
          acc.sum_err[j] += err;
          acc.sum_err2[j] += err * err;
          acc.sum_err4[j] += err * err * err * err;
          acc.hits_marginal[j] +=
              inf.ci_marginal(j, 0) <= truth[j] && truth[j] <= inf.ci_marginal(j, 1) ? 1 : 0;
          acc.hits_simultaneous[j] += inf.ci_simultaneous(j, 0) <= truth[j] &&
                                              truth[j] <= inf.ci_simultaneous(j, 1)
                                          ? 1
                                          : 0;
          acc.sum_width_marginal[j] += inf.ci_marginal(j, 1) - inf.ci_marginal(j, 0);
          acc.sum_width_simultaneous[j] +=
              inf.ci_simultaneous(j, 1) - inf.ci_simultaneous(j, 0);
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
        accs[mi].failures += 1;
      }
      if (cfg.keep_replicates) report.records.push_back(std::move(rec));
    }
  }

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const SimMethod m = cfg.methods[mi];
    const Eigen::VectorXd& truth = m == SimMethod::psi1_plugin ? truth1 : truth2;
    report.methods.push_back(detail::finalize_method(sim_method_label(m), truth, accs[mi]));
  }

  // Zero reference: deterministic, no intervals, exact squared-truth MSE.
  {
    const Eigen::VectorXd& truth = need_adjusted ? truth2 : truth1;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MethodReport zero;
    zero.method = "zero";
    zero.truth = truth;
    zero.mse = truth.array().square();
    zero.mse_se = Eigen::VectorXd::Zero(J);
    zero.bias = -truth;
    zero.bias_se = Eigen::VectorXd::Zero(J);
    zero.variance = Eigen::VectorXd::Zero(J);
    zero.cover_marginal = Eigen::VectorXd::Constant(J, nan);
    zero.cover_marginal_se = Eigen::VectorXd::Constant(J, nan);
    zero.cover_simultaneous = Eigen::VectorXd::Constant(J, nan);
    zero.cover_simultaneous_se = Eigen::VectorXd::Constant(J, nan);
    zero.width_marginal = Eigen::VectorXd::Constant(J, nan);
    zero.width_simultaneous = Eigen::VectorXd::Constant(J, nan);
    zero.n_used = Eigen::VectorXi::Constant(J, cfg.replicates);
    report.methods.push_back(std::move(zero));
  }

  return report;
}

}  // namespace folddiff

#endif
