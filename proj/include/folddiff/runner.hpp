#ifndef FOLDDIFF_RUNNER_HPP
#define FOLDDIFF_RUNNER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "folddiff/centering.hpp"
#include "folddiff/data.hpp"
#include "folddiff/estimators.hpp"
#include "folddiff/inference.hpp"
#include "folddiff/io.hpp"
#include "folddiff/nuisance.hpp"
#include "folddiff/simulator.hpp"
#include "folddiff/version.hpp"

// Orchestration behind the command-line tool. Everything here is a plain
// function over a RunConfig so the behavior is testable without spawning a
// process; the binary only parses flags into the config and dispatches.

namespace folddiff {

// Exit-code taxonomy: 1 usage/config, 2 file problems, 3 computation.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;  // estimate | simulate | validate

  // Data files (estimate, validate).
  std::string counts;
  std::string meta;
  std::string exposure;
  std::string id_column;              // empty: first metadata column
  std::vector<std::string> covariates;
  std::string delimiter = ",";

  // Estimation settings.
  std::string estimand = "psi2g";  // psi1 | psi1g | psi2 | psi2g
  std::string method;              // empty: plugin for psi1*, tmle for psi2*
  std::string center;              // empty: none for psi1/psi2, mean for the g forms
  std::string tmle_mode = "two-stage";
  std::string mean_form = "product";
  int k = 5;       // outer cross-fitting folds
  int v = 5;       // inner stacking folds
  int b = 0;       // simultaneous-band draws; 0 picks the per-command default
  double alpha = 0.05;
  std::string menu = "default";  // default | light
  std::vector<std::string> regression_learners;  // nonempty: replaces the menu's list
  std::vector<std::string> binary_learners;

  // Simulation settings.
  std::string mean = "gamma_A";
  int n = 0;        // 0: desk-scale pair 100 and 400
  int j = 11;
  int reps = 300;
  std::vector<std::string> sim_methods = {"psi1_plugin", "psi2_tmle", "psi2_onestep"};
  bool paper_scale = false;
  bool fix_assignments = false;
  bool keep_replicates = false;
  bool effort = true;
  bool efficiency = true;
  int progress_every = 0;

  std::uint64_t seed = 1;
  int threads = 0;  // 0: all available cores
  std::string out;
};

inline int default_band_draws(const std::string& command) {
  // Replicated studies redraw the band every replicate, so they get a lighter
  // default than a single estimation run.
  return command == "simulate" ? 2000 : 10000;
}

// ---------------------------------------------------------------------------
// Config file and manifest. One JSON document, keys identical to the long
// flag names; the manifest is the fully resolved config plus provenance, so
// feeding a manifest back through --config reruns the job byte-for-byte.
// ---------------------------------------------------------------------------

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  if (c.command == "estimate" || c.command == "validate") {
    j["counts"] = c.counts;
    j["meta"] = c.meta;
    j["exposure"] = c.exposure;
    j["id-column"] = c.id_column;
    j["covariates"] = c.covariates;
    j["delimiter"] = c.delimiter;
  }
  if (c.command == "estimate" || c.command == "simulate") {
    j["center"] = c.center;
    j["tmle-mode"] = c.tmle_mode;
    j["mean-form"] = c.mean_form;
    j["k"] = c.k;
    j["v"] = c.v;
    j["b"] = c.b;
    j["alpha"] = c.alpha;
    j["menu"] = c.menu;
    j["regression-learners"] = c.regression_learners;
    j["binary-learners"] = c.binary_learners;
  }
  if (c.command == "estimate") {
    j["estimand"] = c.estimand;
    j["method"] = c.method;
  }
  if (c.command == "simulate") {
    j["mean"] = c.mean;
    j["n"] = c.n;
    j["j"] = c.j;
    j["reps"] = c.reps;
    j["methods"] = c.sim_methods;
    j["paper-scale"] = c.paper_scale;
    j["fix-assignments"] = c.fix_assignments;
    j["keep-replicates"] = c.keep_replicates;
    j["effort"] = c.effort;
    j["efficiency"] = c.efficiency;
    j["progress-every"] = c.progress_every;
  }
  return j;
}

namespace detail {

template <typename T>
inline void take(const nlohmann::json& j, const char* key, T& into) {
  if (j.contains(key)) {
    try {
      into = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError(std::string("config: bad value for key '") + key + "'");
    }
  }
}

}  // namespace detail

// Applies a config document on top of the current values. Flags parsed after
// this call override whatever the file set.
inline void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  static const std::vector<std::string> known = {
      "command", "program", "version", "counts", "meta", "exposure", "id-column",
      "covariates", "delimiter", "estimand", "method", "center", "tmle-mode", "mean-form",
      "k", "v", "b", "alpha", "menu", "regression-learners", "binary-learners", "mean", "n",
      "j", "reps", "methods", "paper-scale", "fix-assignments", "keep-replicates", "effort",
      "efficiency", "progress-every", "seed", "threads", "out"};
  for (const auto& item : j.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
      throw UsageError("config: unknown key '" + item.key() + "'");
    }
  }
  std::string command;
  detail::take(j, "command", command);
  if (!command.empty() && !c.command.empty() && command != c.command) {
    throw UsageError("config: file is for command '" + command + "', not '" + c.command + "'");
  }
  detail::take(j, "counts", c.counts);
  detail::take(j, "meta", c.meta);
  detail::take(j, "exposure", c.exposure);
  detail::take(j, "id-column", c.id_column);
  detail::take(j, "covariates", c.covariates);
  detail::take(j, "delimiter", c.delimiter);
  detail::take(j, "estimand", c.estimand);
  detail::take(j, "method", c.method);
  detail::take(j, "center", c.center);
  detail::take(j, "tmle-mode", c.tmle_mode);
  detail::take(j, "mean-form", c.mean_form);
  detail::take(j, "k", c.k);
  detail::take(j, "v", c.v);
  detail::take(j, "b", c.b);
  detail::take(j, "alpha", c.alpha);
  detail::take(j, "menu", c.menu);
  detail::take(j, "regression-learners", c.regression_learners);
  detail::take(j, "binary-learners", c.binary_learners);
  detail::take(j, "mean", c.mean);
  detail::take(j, "n", c.n);
  detail::take(j, "j", c.j);
  detail::take(j, "reps", c.reps);
  detail::take(j, "methods", c.sim_methods);
  detail::take(j, "paper-scale", c.paper_scale);
  detail::take(j, "fix-assignments", c.fix_assignments);
  detail::take(j, "keep-replicates", c.keep_replicates);
  detail::take(j, "effort", c.effort);
  detail::take(j, "efficiency", c.efficiency);
  detail::take(j, "progress-every", c.progress_every);
  detail::take(j, "seed", c.seed);
  detail::take(j, "threads", c.threads);
  detail::take(j, "out", c.out);
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  apply_config_json(c, j);
}

// ---------------------------------------------------------------------------
// Resolution of string settings into library types.
// ---------------------------------------------------------------------------

struct EstimandChoice {
  bool adjusted = true;  // psi2 family
  bool centered = true;  // g forms
};

inline EstimandChoice parse_estimand(const std::string& text) {
  if (text == "psi1") return {false, false};
  if (text == "psi1g") return {false, true};
  if (text == "psi2") return {true, false};
  if (text == "psi2g") return {true, true};
  throw UsageError("estimand must be one of psi1, psi1g, psi2, psi2g; got '" + text + "'");
}

// Fills the defaults that depend on other settings and validates the
// combination. Called by every command that estimates something.
inline void resolve_estimation(RunConfig& c) {
  const EstimandChoice e = parse_estimand(c.estimand);
  if (c.method.empty()) c.method = e.adjusted ? "tmle" : "plugin";
  if (!e.adjusted && c.method != "plugin") {
    throw UsageError("estimand " + c.estimand + " has no nuisance model; only method=plugin applies");
  }
  if (e.adjusted && c.method != "tmle" && c.method != "onestep" && c.method != "plugin") {
    throw UsageError("method must be tmle, onestep or plugin; got '" + c.method + "'");
  }
  if (c.center.empty()) c.center = e.centered ? "mean" : "none";
  if (e.centered && c.center == "none") {
    throw UsageError("estimand " + c.estimand + " is centered; pick --center mean, ref:... or smedian:...");
  }
  if (!e.centered && c.center != "none") {
    throw UsageError("estimand " + c.estimand + " is uncentered; --center must stay 'none'");
  }
  if (c.tmle_mode != "two-stage" && c.tmle_mode != "single-stage") {
    throw UsageError("tmle-mode must be two-stage or single-stage");
  }
  if (c.mean_form != "product" && c.mean_form != "direct") {
    throw UsageError("mean-form must be product or direct");
  }
  if (c.tmle_mode == "two-stage" && c.mean_form == "direct" && c.method == "tmle") {
    throw UsageError("two-stage targeting needs mean-form=product");
  }
  if (c.k < 2) throw UsageError("k (outer folds) must be at least 2");
  if (c.v < 2) throw UsageError("v (inner folds) must be at least 2");
  if (c.b == 0) c.b = default_band_draws(c.command);
  if (c.b < 1000) throw UsageError("b (band draws) must be at least 1000");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw UsageError("alpha must lie in (0,1)");
  if (c.threads < 0) throw UsageError("threads must be >= 0");
  if (c.menu != "default" && c.menu != "light") {
    throw UsageError("menu must be 'default' or 'light'");
  }
}

inline LearnerMenu resolve_menu(const RunConfig& c) {
  LearnerMenu menu = c.menu == "light" ? LearnerMenu::light() : LearnerMenu::defaults();
  try {
    if (!c.regression_learners.empty()) {
      menu.regression.clear();
      for (const auto& s : c.regression_learners) menu.regression.push_back(LearnerSpec::parse(s));
    }
    if (!c.binary_learners.empty()) {
      menu.binary.clear();
      for (const auto& s : c.binary_learners) menu.binary.push_back(LearnerSpec::parse(s));
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  for (const auto& s : menu.regression) {
    if (!s.compatible(TaskKind::regression_nonneg)) {
      throw UsageError("learner '" + s.name() + "' cannot serve as a regression candidate");
    }
  }
  for (const auto& s : menu.binary) {
    if (!s.compatible(TaskKind::binary)) {
      throw UsageError("learner '" + s.name() + "' cannot serve as a binary candidate");
    }
  }
  return menu;
}

inline NuisanceOptions resolve_nuisance(const RunConfig& c) {
  NuisanceOptions opt;
  opt.menu = resolve_menu(c);
  opt.form = c.mean_form == "direct" ? MeanForm::direct : MeanForm::product;
  opt.inner_folds = c.v;
  opt.threads = c.threads > 0 ? c.threads
                              : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return opt;
}

inline CenteringSpec resolve_centering(const RunConfig& c,
                                       const std::vector<std::string>& category_names) {
  try {
    return CenteringSpec::parse(c.center, category_names);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Output helpers. All numbers print with %.17g so reruns are byte-identical
// and reloads are exact; no file carries a timestamp or host detail.
// ---------------------------------------------------------------------------

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  return out;
}

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw UsageError("--out directory is required");
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");
  return p;
}

inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

inline double vector_quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

inline nlohmann::json five_number_summary(const std::vector<double>& v) {
  nlohmann::json j;
  j["min"] = json_number(vector_quantile(v, 0.0));
  j["q25"] = json_number(vector_quantile(v, 0.25));
  j["median"] = json_number(vector_quantile(v, 0.5));
  j["q75"] = json_number(vector_quantile(v, 0.75));
  j["max"] = json_number(vector_quantile(v, 1.0));
  return j;
}

// Total counts per sample, summarized per arm. Large systematic differences
// between arms are the footprint of unequal sampling effort, which is what
// the centered estimands are built to survive.
inline nlohmann::json depth_by_arm(const Dataset& d) {
  nlohmann::json j;
  for (int a = 0; a < 2; ++a) {
    std::vector<double> depth;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      if (d.A[i] == a) depth.push_back(d.W.row(i).sum());
    }
    j[a == 0 ? "arm0" : "arm1"] = five_number_summary(depth);
    j[a == 0 ? "arm0_samples" : "arm1_samples"] = depth.size();
  }
  return j;
}

}  // namespace detail

inline void write_manifest(const RunConfig& cfg, const std::filesystem::path& dir) {
  nlohmann::json j = config_json(cfg);
  j["program"] = "folddiff";
  j["version"] = FOLDDIFF_VERSION_STRING;
  auto out = detail::open_out(dir / "manifest.json");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArtifacts {
  Eigen::VectorXd psi;
  InferenceResult inference;
  std::vector<std::uint8_t> defined;
  std::vector<CategoryStatus> status;
};

namespace detail {

inline void write_results_csv(const std::filesystem::path& path, const RunConfig& cfg,
                              const Dataset& d, const EstimateArtifacts& art) {
  auto out = open_out(path);
  out << "category,estimand,method,estimate,se,ci_marginal_lo,ci_marginal_hi,"
         "ci_simultaneous_lo,ci_simultaneous_hi,p_value,defined,reason,degenerate_se\n";
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    out << d.category_names[sj] << ',' << cfg.estimand << ',' << cfg.method << ','
        << format_double(art.psi[j]) << ',' << format_double(art.inference.se[j]) << ','
        << format_double(art.inference.ci_marginal(j, 0)) << ','
        << format_double(art.inference.ci_marginal(j, 1)) << ','
        << format_double(art.inference.ci_simultaneous(j, 0)) << ','
        << format_double(art.inference.ci_simultaneous(j, 1)) << ','
        << format_double(art.inference.p_values[j]) << ',' << (art.defined[sj] ? 1 : 0) << ','
        << reason_label(art.status[sj].reason) << ',' << (art.inference.degenerate_se[sj] ? 1 : 0)
        << "\n";
  }
}

inline void write_results_json(const std::filesystem::path& path, const RunConfig& cfg,
                               const Dataset& d, const EstimateArtifacts& art) {
  nlohmann::json j;
  j["estimand"] = cfg.estimand;
  j["method"] = cfg.method;
  j["center"] = cfg.center;
  j["alpha"] = cfg.alpha;
  j["band_draws"] = cfg.b;
  j["crit_simultaneous"] = json_number(art.inference.crit_simultaneous);
  j["samples"] = d.n();
  j["categories_total"] = d.J();
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index q = 0; q < d.J(); ++q) {
    const auto sq = static_cast<std::size_t>(q);
    nlohmann::json r;
    r["category"] = d.category_names[sq];
    r["estimate"] = json_number(art.psi[q]);
    r["se"] = json_number(art.inference.se[q]);
    r["ci_marginal"] = {json_number(art.inference.ci_marginal(q, 0)),
                        json_number(art.inference.ci_marginal(q, 1))};
    r["ci_simultaneous"] = {json_number(art.inference.ci_simultaneous(q, 0)),
                            json_number(art.inference.ci_simultaneous(q, 1))};
    r["p_value"] = json_number(art.inference.p_values[q]);
    r["defined"] = art.defined[sq] != 0;
    r["reason"] = reason_label(art.status[sq].reason);
    r["degenerate_se"] = art.inference.degenerate_se[sq] != 0;
    rows.push_back(r);
  }
  j["results"] = rows;
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

inline void write_ensemble_csv(const std::filesystem::path& path,
                               const std::vector<EnsembleRecord>& records) {
  auto out = open_out(path);
  out << "fold,target,learner,weight,cv_risk,failed,degenerate\n";
  for (const EnsembleRecord& rec : records) {
    for (std::size_t l = 0; l < rec.learners.size(); ++l) {
      out << rec.fold << ',' << rec.target << ',' << rec.learners[l] << ','
          << format_double(rec.weights[static_cast<Eigen::Index>(l)]) << ','
          << format_double(rec.cv_risk[static_cast<Eigen::Index>(l)]) << ','
          << (rec.failed[l] ? 1 : 0) << ',' << (rec.degenerate ? 1 : 0) << "\n";
    }
  }
}

}  // namespace detail

inline int run_estimate(RunConfig cfg) {
  cfg.command = "estimate";
  try {
    resolve_estimation(cfg);
    if (cfg.counts.empty() || cfg.meta.empty()) {
      throw UsageError("estimate needs --counts and --meta");
    }
    if (cfg.exposure.empty()) throw UsageError("estimate needs --exposure <column>");
    if (cfg.delimiter.size() != 1) throw UsageError("delimiter must be a single character");
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  Dataset d;
  try {
    IngestSchema schema;
    schema.exposure = cfg.exposure;
    schema.covariates = cfg.covariates;
    schema.id_column = cfg.id_column;
    schema.delimiter = cfg.delimiter[0];
    d = load_dataset(cfg.counts, cfg.meta, schema);
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }

  try {
    const EstimandChoice choice = parse_estimand(cfg.estimand);
    const CenteringSpec centering = resolve_centering(cfg, d.category_names);
    const std::filesystem::path dir = detail::prepare_out_dir(cfg.out);

    EstimateArtifacts art;
    NuisanceFits fits;
    TargetedNuisances targeted;
    bool have_fits = false;
    bool have_targeted = false;

    if (!choice.adjusted) {
      const UnadjustedEstimate est = estimate_psi1_centered(d, centering);
      art.psi = est.psi;
      art.status = est.status;
      art.defined = est.defined;
      art.inference = infer(est.psi, est.IF, est.defined, cfg.alpha, cfg.b, cfg.seed);
    } else {
      const NuisanceOptions opt = resolve_nuisance(cfg);
      const FoldAssignment folds =
          make_folds(static_cast<int>(d.n()), cfg.k, d.A, cfg.seed);
      fits = fit_nuisances(d, folds, opt, cfg.seed);
      have_fits = true;
      AdjustedEstimate est;
      if (cfg.method == "tmle") {
        targeted = tmle_target(d, fits,
                               cfg.tmle_mode == "single-stage" ? TmleMode::single_stage
                                                               : TmleMode::two_stage);
        have_targeted = true;
        est = estimate_tmle2(d, fits, targeted);
      } else if (cfg.method == "onestep") {
        est = estimate_onestep2(d, fits);
      } else {
        est = estimate_plugin2(d, fits);
      }
      est = estimate_psi2_centered(est, centering);
      art.psi = est.psi;
      art.status = est.status;
      art.defined = est.defined;
      art.inference = infer(est.psi, est.IF, est.defined, cfg.alpha, cfg.b, cfg.seed);
    }

    detail::write_results_csv(dir / "results.csv", cfg, d, art);
    detail::write_results_json(dir / "results.json", cfg, d, art);
    detail::write_ensemble_csv(dir / "ensemble.csv",
                               have_fits ? fits.records : std::vector<EnsembleRecord>{});

    nlohmann::json diag;
    diag["samples"] = d.n();
    diag["categories_total"] = d.J();
    diag["covariates"] = d.covariate_names;
    diag["depth"] = detail::depth_by_arm(d);
    if (have_fits) {
      std::vector<double> pi(fits.pi.data(), fits.pi.data() + fits.pi.size());
      nlohmann::json prop;
      prop["summary"] = detail::five_number_summary(pi);
      prop["clip"] = fits.propensity_clip;
      int lo = 0, hi = 0;
      for (double p : pi) {
        if (p <= fits.propensity_clip) ++lo;
        if (p >= 1.0 - fits.propensity_clip) ++hi;
      }
      prop["at_lower_clip"] = lo;
      prop["at_upper_clip"] = hi;
      diag["propensity"] = prop;
      std::vector<int> fold_sizes;
      for (const auto& members : fits.folds.members) {
        fold_sizes.push_back(static_cast<int>(members.size()));
      }
      diag["fold_sizes"] = fold_sizes;
      diag["small_stratum_warning"] = fits.folds.small_stratum_warning;
      nlohmann::json fallback = nlohmann::json::array();
      for (Eigen::Index q = 0; q < d.J(); ++q) {
        const auto sq = static_cast<std::size_t>(q);
        for (int a = 0; a < 2; ++a) {
          const auto& flags = a == 0 ? fits.m_fallback0 : fits.m_fallback1;
          if (!flags.empty() && flags[sq]) {
            fallback.push_back({{"category", d.category_names[sq]}, {"arm", a}});
          }
        }
      }
      diag["positive_mean_fallback"] = fallback;
    }
    if (have_targeted) {
      nlohmann::json t;
      t["mode"] = tmle_mode_label(targeted.mode);
      nlohmann::json pf = nlohmann::json::array(), lf = nlohmann::json::array(),
                     fl = nlohmann::json::array();
      for (Eigen::Index q = 0; q < d.J(); ++q) {
        const auto sq = static_cast<std::size_t>(q);
        pf.push_back({detail::json_number(targeted.poisson_fluct(0, q)),
                      detail::json_number(targeted.poisson_fluct(1, q))});
        lf.push_back({detail::json_number(targeted.logistic_fluct(0, q)),
                      detail::json_number(targeted.logistic_fluct(1, q))});
        for (int a = 0; a < 2; ++a) {
          const auto& flags = a == 0 ? targeted.flagged0 : targeted.flagged1;
          if (!flags.empty() && flags[sq]) {
            fl.push_back({{"category", d.category_names[sq]}, {"arm", a}});
          }
        }
      }
      t["poisson_fluct"] = pf;
      t["logistic_fluct"] = lf;
      t["flagged"] = fl;
      diag["tmle"] = t;
    }
    {
      auto out = detail::open_out(dir / "diagnostics.json");
      out << diag.dump(2) << "\n";
    }

    write_manifest(cfg, dir);
    std::cout << "wrote " << (dir / "results.csv").string() << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return 3;
  }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

namespace detail {

inline void write_study_rows(std::ofstream& out, int n, const MethodReport& m) {
  const Eigen::Index J = m.truth.size();
  for (Eigen::Index q = 0; q < J; ++q) {
    out << n << ',' << m.method << ',' << (q + 1) << ',' << format_double(m.truth[q]) << ','
        << format_double(m.mse[q]) << ',' << format_double(m.mse_se[q]) << ','
        << format_double(m.bias[q]) << ',' << format_double(m.bias_se[q]) << ','
        << format_double(m.variance[q]) << ',' << format_double(m.cover_marginal[q]) << ','
        << format_double(m.cover_marginal_se[q]) << ','
        << format_double(m.cover_simultaneous[q]) << ','
        << format_double(m.cover_simultaneous_se[q]) << ','
        << format_double(m.width_marginal[q]) << ',' << format_double(m.width_simultaneous[q])
        << ',' << m.n_used[q] << ',' << m.failures << "\n";
  }
}

inline nlohmann::json method_report_json(const MethodReport& m) {
  nlohmann::json j;
  j["method"] = m.method;
  j["failures"] = m.failures;
  const Eigen::Index J = m.truth.size();
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index q = 0; q < J; ++q) {
    nlohmann::json r;
    r["category"] = q + 1;
    r["truth"] = json_number(m.truth[q]);
    r["mse"] = json_number(m.mse[q]);
    r["mse_se"] = json_number(m.mse_se[q]);
    r["bias"] = json_number(m.bias[q]);
    r["bias_se"] = json_number(m.bias_se[q]);
    r["variance"] = json_number(m.variance[q]);
    r["coverage_marginal"] = json_number(m.cover_marginal[q]);
    r["coverage_marginal_se"] = json_number(m.cover_marginal_se[q]);
    r["coverage_simultaneous"] = json_number(m.cover_simultaneous[q]);
    r["coverage_simultaneous_se"] = json_number(m.cover_simultaneous_se[q]);
    r["width_marginal"] = json_number(m.width_marginal[q]);
    r["width_simultaneous"] = json_number(m.width_simultaneous[q]);
    r["n_used"] = m.n_used[q];
    rows.push_back(r);
  }
  j["categories"] = rows;
  return j;
}

}  // namespace detail

inline StudyConfig build_study_config(const RunConfig& cfg, int n) {
  StudyConfig sc;
  sc.sim.n = n;
  sc.sim.J = cfg.j;
  sc.sim.mean = parse_mean_kind(cfg.mean);
  sc.sim.effort_on = cfg.effort;
  sc.sim.efficiency_on = cfg.efficiency;
  sc.sim.fix_assignments = cfg.fix_assignments;
  sc.sim.seed = cfg.seed;
  sc.replicates = cfg.reps;
  sc.methods.clear();
  for (const auto& name : cfg.sim_methods) sc.methods.push_back(parse_sim_method(name));
  {
    std::vector<std::string> names;
    for (int q = 1; q <= cfg.j; ++q) names.push_back("cat" + std::to_string(q));
    sc.centering = CenteringSpec::parse(cfg.center, names);
  }
  sc.outer_folds = cfg.k;
  sc.nuisance = resolve_nuisance(cfg);
  sc.tmle_mode =
      cfg.tmle_mode == "single-stage" ? TmleMode::single_stage : TmleMode::two_stage;
  sc.alpha = cfg.alpha;
  sc.maxt_draws = cfg.b;
  sc.keep_replicates = cfg.keep_replicates;
  sc.progress_every = cfg.progress_every;
  return sc;
}

inline int run_simulate(RunConfig cfg) {
  cfg.command = "simulate";
  std::vector<int> sizes;
  try {
    if (cfg.paper_scale) {
      // Large preset; fields still at their desk-scale defaults move up,
      // anything set explicitly stays put.
      if (cfg.j == 11) cfg.j = 51;
      if (cfg.reps == 300) cfg.reps = 500;
      if (cfg.n == 0) cfg.n = 100;
    }
    resolve_estimation(cfg);
    if (cfg.j < 1) throw UsageError("j must be at least 1");
    if (cfg.reps < 1) throw UsageError("reps must be at least 1");
    if (cfg.n < 0) throw UsageError("n must be positive (or omitted for the default pair)");
    if (cfg.sim_methods.empty()) throw UsageError("methods list must not be empty");
    sizes = cfg.n > 0 ? std::vector<int>{cfg.n} : std::vector<int>{100, 400};
    parse_mean_kind(cfg.mean);
    for (const auto& name : cfg.sim_methods) parse_sim_method(name);
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const std::filesystem::path dir = detail::prepare_out_dir(cfg.out);

    auto summary = detail::open_out(dir / "study_summary.csv");
    summary << "n,method,category,truth,mse,mse_se,bias,bias_se,variance,"
               "coverage_marginal,coverage_marginal_se,coverage_simultaneous,"
               "coverage_simultaneous_se,width_marginal,width_simultaneous,n_used,failures\n";
    auto plot = detail::open_out(dir / "plot_data.csv");
    plot << "n,method,category,mse,coverage,width\n";
    std::ofstream reps_out;
    if (cfg.keep_replicates) {
      reps_out = detail::open_out(dir / "replicates.csv");
      reps_out << "n,replicate,method,category,estimate,ci_marginal_lo,ci_marginal_hi,"
                  "ci_simultaneous_lo,ci_simultaneous_hi,error\n";
    }

    nlohmann::json studies = nlohmann::json::array();
    for (int n : sizes) {
      const StudyConfig sc = build_study_config(cfg, n);
      const SimReport report = run_study(sc);

      nlohmann::json study;
      study["n"] = n;
      study["replicates"] = cfg.reps;
      nlohmann::json truth;
      truth["max_rel_error"] = report.truth_raw.max_rel_error;
      nlohmann::json t1 = nlohmann::json::array(), t2 = nlohmann::json::array();
      for (int q = 0; q < cfg.j; ++q) {
        t1.push_back(report.truth_raw.psi_unadjusted[q]);
        t2.push_back(report.truth_raw.psi_adjusted[q]);
      }
      truth["psi_unadjusted"] = t1;
      truth["psi_adjusted"] = t2;
      study["truth"] = truth;
      nlohmann::json methods = nlohmann::json::array();
      for (const MethodReport& m : report.methods) {
        detail::write_study_rows(summary, n, m);
        for (Eigen::Index q = 0; q < m.truth.size(); ++q) {
          plot << n << ',' << m.method << ',' << (q + 1) << ','
               << detail::format_double(m.mse[q]) << ','
               << detail::format_double(m.cover_marginal[q]) << ','
               << detail::format_double(m.width_marginal[q]) << "\n";
        }
        methods.push_back(detail::method_report_json(m));
      }
      study["methods"] = methods;
      studies.push_back(study);

      if (cfg.keep_replicates) {
        for (const ReplicateRecord& rec : report.records) {
          for (int q = 0; q < cfg.j; ++q) {
            const bool has = rec.error.empty() && rec.psi.size() == cfg.j;
            reps_out << n << ',' << rec.replicate << ',' << rec.method << ',' << (q + 1) << ',';
            if (has) {
              reps_out << detail::format_double(rec.psi[q]) << ','
                       << detail::format_double(rec.ci_marginal(q, 0)) << ','
                       << detail::format_double(rec.ci_marginal(q, 1)) << ','
                       << detail::format_double(rec.ci_simultaneous(q, 0)) << ','
                       << detail::format_double(rec.ci_simultaneous(q, 1)) << ',';
            } else {
              reps_out << "nan,nan,nan,nan,nan,";
            }
            std::string err = rec.error;  // keep the delimiter out of the field
            std::replace(err.begin(), err.end(), ',', ';');
            reps_out << err << "\n";
          }
        }
      }
    }

    nlohmann::json j;
    j["mean"] = cfg.mean;
    j["j"] = cfg.j;
    j["center"] = cfg.center;
    j["alpha"] = cfg.alpha;
    j["studies"] = studies;
    {
      auto out = detail::open_out(dir / "report.json");
      out << j.dump(2) << "\n";
    }
    write_manifest(cfg, dir);
    std::cout << "wrote " << (dir / "study_summary.csv").string() << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return 3;
  }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

inline int run_validate(RunConfig cfg, std::ostream& os = std::cout) {
  cfg.command = "validate";
  try {
    if (cfg.counts.empty() || cfg.meta.empty()) {
      throw UsageError("validate needs --counts and --meta");
    }
    if (cfg.exposure.empty()) throw UsageError("validate needs --exposure <column>");
    if (cfg.delimiter.size() != 1) throw UsageError("delimiter must be a single character");
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  Dataset d;
  try {
    IngestSchema schema;
    schema.exposure = cfg.exposure;
    schema.covariates = cfg.covariates;
    schema.id_column = cfg.id_column;
    schema.delimiter = cfg.delimiter[0];
    d = load_dataset(cfg.counts, cfg.meta, schema);
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }

  const std::vector<CategoryStatus> status = validate(d);
  int n1 = 0;
  for (Eigen::Index i = 0; i < d.n(); ++i) n1 += d.A[i];
  os << "samples: " << d.n() << "  categories: " << d.J() << "  covariates: " << d.p() << "\n";
  os << "arm sizes: " << (d.n() - n1) << " (exposure=0), " << n1 << " (exposure=1)\n";
  os << "category,estimable,reason,zeros_arm0,zeros_arm1\n";
  int flagged = 0;
  for (Eigen::Index j = 0; j < d.J(); ++j) {
    int z0 = 0, z1 = 0;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      if (d.W(i, j) == 0.0) (d.A[i] == 1 ? z1 : z0) += 1;
    }
    const auto& s = status[static_cast<std::size_t>(j)];
    if (!s.estimable) ++flagged;
    os << d.category_names[static_cast<std::size_t>(j)] << ',' << (s.estimable ? 1 : 0) << ','
       << reason_label(s.reason) << ',' << z0 << ',' << z1 << "\n";
  }
  os << "flagged categories: " << flagged << "\n";
  return 0;  // findings are informational, not errors
}

}  // namespace folddiff

#endif
