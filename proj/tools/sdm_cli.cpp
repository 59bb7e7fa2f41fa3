#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sdm/commands.hpp"
#include "sdm/errors.hpp"

namespace {

std::optional<double> opt_double(CLI::Option* opt, double v) {
  return opt->count() ? std::optional<double>(v) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonstationary spatial covariance by constrained deformation"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  auto* sim = app.add_subcommand("simulate", "simulate the swirl study data");
  sim->add_option("--config", config_path, "key=value config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory")->required();
  auto* seed_opt = sim->add_option("--seed", seed, "overrides the config seed");

  sdm::EstimateOptions est;
  std::string est_data, est_out;
  double est_eps = 0.0, est_tol = 0.0;
  auto* estimate = app.add_subcommand("estimate", "fit the deformation model");
  estimate->add_option("--data", est_data, "long-format CSV")->required()->check(CLI::ExistingFile);
  estimate->add_option("--k", est.k, "knots per axis (K1 = K2 = K)")->required()->check(CLI::Range(2, 64));
  auto* eps_opt = estimate->add_option("--epsilon", est_eps, "Jacobian margin");
  auto* tol_opt = estimate->add_option("--tol", est_tol, "relative log-likelihood tolerance");
  estimate->add_option("--out", est_out, "model JSON path")->required();

  sdm::PredictOptions pred;
  std::string pred_model, pred_grid, pred_out;
  auto* predict = app.add_subcommand("predict", "Kriging prediction from a fitted model");
  predict->add_option("--model", pred_model, "model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--grid", pred_grid, "x1,x2 CSV of points")->required()->check(CLI::ExistingFile);
  predict->add_option("--time", pred.time, "time label to condition on")->required();
  predict->add_option("--out", pred_out, "output CSV")->required();
  predict->add_option("--draws", pred.draws, "conditional simulation draws")->check(CLI::NonNegativeNumber);
  predict->add_option("--seed", pred.seed, "seed for draws");

  std::string cmp_config, cmp_out;
  auto* compare = app.add_subcommand("compare", "compare estimators on one simulated data set");
  compare->add_option("--config", cmp_config, "key=value config file")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", cmp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      std::optional<std::uint64_t> s;
      if (seed_opt->count()) s = seed;
      const auto study = sdm::cmd_simulate(sdm::Config::load(config_path), out_dir, s);
      std::cout << "wrote " << study.data.n() << " stations x " << study.data.t() << " periods to " << out_dir
                << '\n';
    } else if (*estimate) {
      est.data = est_data;
      est.out = est_out;
      est.epsilon = opt_double(eps_opt, est_eps);
      est.tol = opt_double(tol_opt, est_tol);
      const auto file = sdm::cmd_estimate(est);
      const auto& d = file.model.diagnostics;
      std::cout << "loglik " << d.loglik.at(d.selected) << "  min|J| " << d.margin.at(d.selected) << "  iterations " << d.iterations
                << (d.converged ? "" : "  (not converged)") << '\n';
    } else if (*predict) {
      pred.model = pred_model;
      pred.grid = pred_grid;
      pred.out = pred_out;
      const auto kr = sdm::cmd_predict(pred);
      std::cout << "predicted " << kr.mean.size() << " points\n";
    } else if (*compare) {
      for (const auto& r : sdm::cmd_compare(sdm::Config::load(cmp_config), cmp_out)) {
        std::cout << r.method << " k=" << r.k << " slope " << r.stats.slope << " corr " << r.stats.correlation
                  << " mse " << r.stats.mse << '\n';
      }
    }
  } catch (const sdm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
