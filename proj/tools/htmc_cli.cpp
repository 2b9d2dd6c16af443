// Command-line driver for the hybrid two-level MCMC workflow: data generation,
// surrogate training, chain runs, quadrature references and report handling.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "htmc/config.hpp"
#include "htmc/mlp.hpp"
#include "htmc/workflow.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitTraining = 4;

htmc::ExperimentConfig load_config(const std::string& path) {
  return htmc::ExperimentConfig::load(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid two-level MCMC for PDE-constrained Bayesian inversion"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode = "hybrid";
  int repeats = 1;
  double err_ml = 0.0, err_num = 0.0;
  std::vector<std::string> report_inputs;
  std::string aggregate_out;
  bool do_aggregate = false;

  auto* gen = app.add_subcommand("generate-data", "create observations and training data");
  gen->add_option("--config", config_path, "experiment config JSON")->required();

  auto* train = app.add_subcommand("train", "train the surrogate network");
  train->add_option("--config", config_path, "experiment config JSON")->required();

  auto* run = app.add_subcommand("run", "run an estimator");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--mode", mode, "numerical | ml | hybrid | quadrature")
      ->check(CLI::IsMember({"numerical", "ml", "hybrid", "quadrature"}));
  run->add_option("--repeats", repeats, "independent seeded repeats")->check(CLI::PositiveNumber);

  auto* eps = app.add_subcommand("estimate-epsilon", "surrogate error exponent");
  eps->add_option("--config", config_path, "experiment config JSON");
  eps->add_option("--err-ml", err_ml, "surrogate error vs reference");
  eps->add_option("--err-num", err_num, "numerical error vs reference");

  auto* rep = app.add_subcommand("report", "post-process run reports");
  rep->add_flag("--aggregate", do_aggregate, "aggregate qoi_estimate across reports");
  rep->add_option("--input", report_inputs, "report JSON files")->required();
  rep->add_option("--output", aggregate_out, "aggregate output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      std::cout << htmc::cmd_generate_data(load_config(config_path)).dump(2) << '\n';
    } else if (train->parsed()) {
      std::cout << htmc::cmd_train(load_config(config_path)).dump(2) << '\n';
    } else if (run->parsed()) {
      std::cout << htmc::cmd_run(load_config(config_path), mode, repeats).dump(2) << '\n';
    } else if (eps->parsed()) {
      if (err_ml > 0.0 && err_num > 0.0) {
        const auto est = htmc::estimate_epsilon(err_ml, err_num);
        nlohmann::json j{{"err_ml", est.err_ml}, {"err_num", est.err_num},
                         {"epsilon", est.epsilon}};
        std::cout << j.dump(2) << '\n';
      } else if (!config_path.empty()) {
        auto cfg = load_config(config_path);
        if (cfg.surrogate.epsilon_reference_offset <= 0)
          cfg.surrogate.epsilon_reference_offset = 2;
        const int ref_level = std::min(10, cfg.level + cfg.surrogate.epsilon_reference_offset);
        const auto num = htmc::make_numerical(cfg, cfg.level);
        const auto ref = htmc::make_numerical(cfg, ref_level);
        const auto sur = htmc::make_surrogate(cfg);
        const auto prior = htmc::make_prior(cfg);
        const double e_num = htmc::reference_error(num, ref, prior,
                                                   cfg.surrogate.epsilon_reference_draws,
                                                   cfg.surrogate.epsilon_reference_seed);
        const double e_ml = htmc::reference_error(*sur, ref, prior,
                                                  cfg.surrogate.epsilon_reference_draws,
                                                  cfg.surrogate.epsilon_reference_seed);
        const auto est = htmc::estimate_epsilon(e_ml, e_num);
        nlohmann::json j{{"err_ml", est.err_ml}, {"err_num", est.err_num},
                         {"epsilon", est.epsilon}, {"reference_level", ref_level}};
        std::cout << j.dump(2) << '\n';
      } else {
        throw htmc::ConfigError("estimate-epsilon needs --config or both --err-ml/--err-num");
      }
    } else if (rep->parsed()) {
      if (!do_aggregate) throw htmc::ConfigError("report: only --aggregate is supported");
      std::cout << htmc::cmd_aggregate(report_inputs, aggregate_out).dump(2) << '\n';
    }
  } catch (const htmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const htmc::TrainingError& e) {
    std::cerr << "training error: " << e.what() << " (epoch " << e.epoch << ")\n";
    return kExitTraining;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
