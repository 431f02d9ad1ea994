#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "folddiff/runner.hpp"
#include "folddiff/version.hpp"

namespace {

void add_common_options(CLI::App* cmd, folddiff::RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "JSON config file mirroring these flags; explicit flags override it");
  cmd->add_option("--seed", cfg.seed, "master random seed");
  cmd->add_option("--threads", cfg.threads, "worker thread cap (0 = all cores)");
  cmd->add_option("--out", cfg.out, "output directory");
}

void add_data_options(CLI::App* cmd, folddiff::RunConfig& cfg) {
  cmd->add_option("--counts", cfg.counts, "outcome matrix (rows samples, columns categories)");
  cmd->add_option("--meta", cfg.meta, "sample metadata with exposure and covariates");
  cmd->add_option("--exposure", cfg.exposure, "metadata column holding the 0/1 exposure");
  cmd->add_option("--covariates", cfg.covariates, "adjustment columns, comma separated")
      ->delimiter(',');
  cmd->add_option("--id-column", cfg.id_column, "metadata sample-id column (default: first)");
  cmd->add_option("--delimiter", cfg.delimiter, "field delimiter, a single character");
}

void add_estimation_options(CLI::App* cmd, folddiff::RunConfig& cfg) {
  cmd->add_option("--center", cfg.center, "none | mean | ref:<category> | smedian:<eps>");
  cmd->add_option("--tmle-mode", cfg.tmle_mode, "two-stage | single-stage");
  cmd->add_option("--mean-form", cfg.mean_form, "product | direct conditional-mean model");
  cmd->add_option("--k", cfg.k, "outer cross-fitting folds");
  cmd->add_option("--v", cfg.v, "inner stacking folds");
  cmd->add_option("--b", cfg.b, "simultaneous-band draws (min 1000)");
  cmd->add_option("--alpha", cfg.alpha, "level for (1 - alpha) intervals");
  cmd->add_option("--menu", cfg.menu, "default | light learner menu");
  cmd->add_option("--regression-learners", cfg.regression_learners,
                  "explicit regression candidates, comma separated")
      ->delimiter(',');
  cmd->add_option("--binary-learners", cfg.binary_learners,
                  "explicit binary candidates, comma separated")
      ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  folddiff::RunConfig cfg;
  std::string config_path;

  // The config file must land before flag parsing so flags override it, and
  // the subcommand name must be known for the file's own command check.
  if (argc > 1 && argv[1][0] != '-') cfg.command = argv[1];
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  }
  if (!config_path.empty()) {
    try {
      folddiff::apply_config_file(cfg, config_path);
    } catch (const folddiff::DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"fold-difference estimation for sparse multi-category count data"};
  app.set_version_flag("--version", FOLDDIFF_VERSION_STRING);
  app.require_subcommand(1);

  CLI::App* est = app.add_subcommand("estimate", "estimate per-category fold differences");
  add_data_options(est, cfg);
  est->add_option("--estimand", cfg.estimand, "psi1 | psi1g | psi2 | psi2g");
  est->add_option("--method", cfg.method, "tmle | onestep | plugin");
  add_estimation_options(est, cfg);
  add_common_options(est, cfg, config_path);

  CLI::App* sim = app.add_subcommand("simulate", "run a replicated synthetic study");
  sim->add_option("--mean", cfg.mean, "latent mean family: gamma_A | gamma_B");
  sim->add_option("--n", cfg.n, "samples per replicate (omit for the 100/400 pair)");
  sim->add_option("--j", cfg.j, "number of categories");
  sim->add_option("--reps", cfg.reps, "number of replicates");
  sim->add_option("--methods", cfg.sim_methods,
                  "scored methods: psi1_plugin, psi2_tmle, psi2_onestep")
      ->delimiter(',');
  sim->add_flag("--paper-scale", cfg.paper_scale,
                "j=51, 500 replicates, n=100 unless set explicitly");
  sim->add_flag("--fix-assignments", cfg.fix_assignments,
                "share category grid assignments across replicates");
  sim->add_flag("--keep-replicates", cfg.keep_replicates, "write per-replicate estimates");
  sim->add_flag("--effort,!--no-effort", cfg.effort, "per-sample effort distortion");
  sim->add_flag("--efficiency,!--no-efficiency", cfg.efficiency,
                "per-category efficiency distortion");
  sim->add_option("--progress-every", cfg.progress_every, "stderr progress interval (0 = quiet)");
  add_estimation_options(sim, cfg);
  add_common_options(sim, cfg, config_path);

  CLI::App* val = app.add_subcommand("validate", "report per-category estimability of a dataset");
  add_data_options(val, cfg);
  add_common_options(val, cfg, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (est->parsed()) return folddiff::run_estimate(cfg);
  if (sim->parsed()) return folddiff::run_simulate(cfg);
  if (val->parsed()) return folddiff::run_validate(cfg);
  std::cerr << "config error: pick a subcommand (estimate, simulate, validate)\n";
  return 1;
}
