#ifndef HTMC_WORKFLOW_HPP
#define HTMC_WORKFLOW_HPP

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "htmc/config.hpp"
#include "htmc/dataset.hpp"
#include "htmc/hybrid.hpp"
#include "htmc/mlp.hpp"
#include "htmc/model.hpp"
#include "htmc/prior.hpp"
#include "htmc/quadrature.hpp"
#include "htmc/sampler.hpp"

namespace htmc {

inline PriorSpec make_prior(const ExperimentConfig& cfg) {
  const int dim = static_cast<int>(cfg.truth.size());
  if (cfg.prior_type == "uniform") return PriorSpec::uniform(cfg.prior_low, cfg.prior_high, dim);
  return PriorSpec::gaussian(dim);
}

inline NumericalForward make_numerical(const ExperimentConfig& cfg, int level) {
  if (cfg.problem == "elliptic_uniform")
    return NumericalForward(MeshLevel(level), build_field_uniform,
                            ObservationLayout::lattice6x6());
  const auto spec = GaussianFieldSpec::sin_decay(static_cast<int>(cfg.truth.size()));
  return NumericalForward(
      MeshLevel(level),
      [spec](const Eigen::VectorXd& z, const Mesh& mesh) {
        return build_field_lognormal(z, spec, mesh);
      },
      ObservationLayout::lattice6x6());
}

// The "ML" role: trained network by default, or a coarse numerical model when
// surrogate_level is set (removes training stochasticity from experiments).
inline std::unique_ptr<ForwardModel> make_surrogate(const ExperimentConfig& cfg) {
  if (cfg.surrogate_level > 0)
    return std::make_unique<NumericalForward>(make_numerical(cfg, cfg.surrogate_level));
  const std::string path = cfg.resolved_model_path();
  if (!std::filesystem::exists(path))
    throw ConfigError("surrogate model file missing: " + path + " (run `train` first)");
  return std::make_unique<SurrogateForward>(load_model(path));
}

inline ObservationSet load_observations(const ExperimentConfig& cfg) {
  const std::string path = cfg.resolved_observations_path();
  if (!std::filesystem::exists(path))
    throw ConfigError("observations file missing: " + path + " (run `generate-data` first)");
  return ObservationSet::load(path);
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

inline nlohmann::json provenance_block(const std::string& mode) {
  return {{"generator", "htmc"}, {"version", "1.0.0"}, {"mode", mode},
          {"schema", "run_report_v1"}};
}

inline std::vector<double> eig_to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline nlohmann::json cmd_generate_data(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto model = make_numerical(cfg, cfg.level);
  const Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(
      cfg.truth.data(), static_cast<Eigen::Index>(cfg.truth.size()));
  const auto obs = generate_observations(model, truth, cfg.sigma2, cfg.noise_seed,
                                         ObservationLayout::lattice6x6(), cfg.zero_noise);
  obs.save(cfg.resolved_observations_path());

  const auto data = generate_dataset(model, make_prior(cfg), cfg.surrogate.dataset_count,
                                     cfg.surrogate.fractions, cfg.surrogate.dataset_seed);
  save_dataset(data, cfg.resolved_dataset_csv(), cfg.resolved_dataset_sidecar());

  nlohmann::json j;
  j["provenance"] = provenance_block("generate-data");
  j["config"] = cfg.to_json();
  j["observations_path"] = cfg.resolved_observations_path();
  j["dataset_csv"] = cfg.resolved_dataset_csv();
  j["dataset_rows"] = data.count();
  j["observation_dim"] = static_cast<int>(obs.delta.size());
  return j;
}

// Mean RMS observation-space gap to a finer reference, over fixed prior draws.
inline double reference_error(const ForwardModel& model, const ForwardModel& reference,
                              const PriorSpec& prior, int draws, std::uint64_t seed) {
  Rng rng(seed);
  double acc = 0.0;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd z = sample_prior_one(prior, rng);
    const Eigen::VectorXd diff = model.evaluate(z) - reference.evaluate(z);
    acc += std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));
  }
  return acc / draws;
}

inline nlohmann::json cmd_train(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  if (!std::filesystem::exists(cfg.resolved_dataset_csv()))
    throw ConfigError("dataset missing: " + cfg.resolved_dataset_csv() +
                      " (run `generate-data` first)");
  const auto data = load_dataset(cfg.resolved_dataset_csv(), cfg.resolved_dataset_sidecar());

  AdamParams adam;
  adam.step = cfg.surrogate.adam_step;
  adam.cosine_decay = cfg.surrogate.cosine_decay;
  const auto model = train_mlp(data, cfg.surrogate.hidden, adam, cfg.surrogate.epochs,
                               cfg.surrogate.train_seed);
  save_model(model, cfg.resolved_model_path());

  nlohmann::json j;
  j["provenance"] = provenance_block("train");
  j["config"] = cfg.to_json();
  j["model_path"] = cfg.resolved_model_path();
  j["final_train_loss"] = model.loss_history.back();
  j["loss_history"] = model.loss_history;

  // held-out test metrics
  const auto x_test = data.rows(data.inputs, data.test_idx);
  const auto y_test = data.rows(data.targets, data.test_idx);
  const auto pred = model.predict_batch(x_test);
  const double mse =
      (pred - y_test).squaredNorm() / static_cast<double>(pred.rows() * pred.cols());
  const Eigen::RowVectorXd col_means = y_test.colwise().mean();
  const double ss_tot = (y_test.rowwise() - col_means).squaredNorm();
  j["test_mse"] = mse;
  j["test_r2"] = 1.0 - (pred - y_test).squaredNorm() / ss_tot;

  if (cfg.surrogate.epsilon_reference_offset > 0) {
    const int ref_level =
        std::min(10, cfg.level + cfg.surrogate.epsilon_reference_offset);
    const auto num = make_numerical(cfg, cfg.level);
    const auto ref = make_numerical(cfg, ref_level);
    const SurrogateForward sur(model);
    const auto prior = make_prior(cfg);
    const double err_num = reference_error(num, ref, prior, cfg.surrogate.epsilon_reference_draws,
                                           cfg.surrogate.epsilon_reference_seed);
    const double err_ml = reference_error(sur, ref, prior, cfg.surrogate.epsilon_reference_draws,
                                          cfg.surrogate.epsilon_reference_seed);
    const auto eps = estimate_epsilon(err_ml, err_num);
    j["epsilon_estimate"] = {{"err_ml", eps.err_ml},
                             {"err_num", eps.err_num},
                             {"epsilon", eps.epsilon},
                             {"reference_level", ref_level}};
  }
  write_json(j, cfg.output_dir + "/train_report.json");
  return j;
}

namespace detail {

inline ChainConfig base_chain_config(const ExperimentConfig& cfg, long length,
                                     std::uint64_t seed) {
  ChainConfig cc;
  cc.kernel = cfg.chains.kernel == "pcn" ? KernelType::Pcn : KernelType::RwReflect;
  cc.step = cfg.chains.step;
  cc.beta = cfg.chains.beta;
  cc.length = static_cast<int>(length);
  cc.burn_in = cfg.burn_in_for(length);
  cc.thin = cfg.chains.thin;
  cc.seed = seed;
  return cc;
}

inline nlohmann::json chain_report(const Chain& chain, const std::string& mode,
                                   const ExperimentConfig& cfg) {
  const auto est = batch_mean_estimate(chain.qoi);
  nlohmann::json j;
  j["provenance"] = provenance_block(mode);
  j["config"] = cfg.to_json();
  j["qoi_estimate"] = est.mean[0];
  j["std_error"] = est.std_error[0];
  j["chain"] = chain_summary(chain);
  return j;
}

inline void dump_correction_csv(const Chain& chain_num, const Chain* chain_short,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.precision(17);
  out << "chain,step,phi_num,phi_ml,q,a1,a2,a3,a4,a5,a6\n";
  auto emit = [&out](const char* name, int i, double phi_num, double phi_ml,
                     const Eigen::VectorXd& q) {
    const ATerms t = a_terms({Eigen::VectorXd(), phi_num, phi_ml, q});
    out << name << ',' << i << ',' << phi_num << ',' << phi_ml << ',' << q[0] << ','
        << t.a1[0] << ',' << t.a2[0] << ',' << t.a3[0] << ',' << t.a4[0] << ','
        << t.a5 << ',' << t.a6 << '\n';
  };
  for (int i = 0; i < chain_num.size(); ++i)
    emit("numerical", i, chain_num.potentials[static_cast<std::size_t>(i)],
         chain_num.aux_potentials[static_cast<std::size_t>(i)],
         chain_num.qoi[static_cast<std::size_t>(i)]);
  if (chain_short)
    for (int i = 0; i < chain_short->size(); ++i)
      emit("ml_short", i, chain_short->aux_potentials[static_cast<std::size_t>(i)],
           chain_short->potentials[static_cast<std::size_t>(i)],
           chain_short->qoi[static_cast<std::size_t>(i)]);
}

inline nlohmann::json hybrid_json(const HybridEstimate& est) {
  nlohmann::json j;
  j["total"] = est.total[0];
  j["base_ml_mean"] = est.base_ml_mean[0];
  j["term_weighted"] = est.term_weighted[0];
  j["term_ratio"] = est.term_ratio;
  j["se_base"] = est.se_base[0];
  j["se_weighted"] = est.se_weighted[0];
  j["se_ratio"] = est.se_ratio;
  j["se_combined"] = est.se_combined[0];
  j["numerical_solves"] = est.numerical_solves;
  if (est.a_term_means) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& m : *est.a_term_means) a.push_back(m[0]);
    j["a_term_means"] = a;
  }
  return j;
}

}  // namespace detail

// One seeded run of a given mode; writes the report and chain CSVs with the
// given filename suffix and returns the report.
inline nlohmann::json run_once(const ExperimentConfig& cfg, const std::string& mode,
                               const std::string& suffix) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto prior = make_prior(cfg);
  const QoiFunction qoi = qoi_component(0);

  if (mode == "quadrature") {
    if (cfg.prior_type != "uniform" || cfg.truth.size() != 1)
      throw ConfigError("quadrature mode needs a scalar uniform prior");
    const int level =
        cfg.quadrature.reference_level > 0 ? cfg.quadrature.reference_level : cfg.level;
    const auto model = make_numerical(cfg, level);
    const auto obs = load_observations(cfg);
    const double value =
        posterior_expectation_quadrature(model, obs, prior, qoi, cfg.quadrature.points);
    nlohmann::json j;
    j["provenance"] = provenance_block(mode);
    j["config"] = cfg.to_json();
    j["qoi_estimate"] = value;
    j["std_error"] = 0.0;
    j["quadrature_level"] = level;
    j["quadrature_points"] = cfg.quadrature.points;
    write_json(j, cfg.output_dir + "/run_" + mode + suffix + ".json");
    return j;
  }

  const auto obs = load_observations(cfg);

  if (mode == "numerical") {
    const auto model = make_numerical(cfg, cfg.level);
    const auto cc = detail::base_chain_config(cfg, cfg.chains.num_length, cfg.chains.num_seed);
    const auto chain = run_chain(model, obs, prior, cc, qoi);
    dump_chain_csv(chain, cfg.output_dir + "/chain_numerical" + suffix + ".csv");
    auto j = detail::chain_report(chain, mode, cfg);
    write_json(j, cfg.output_dir + "/run_" + mode + suffix + ".json");
    return j;
  }

  if (mode == "ml") {
    const auto surrogate = make_surrogate(cfg);
    const auto cc = detail::base_chain_config(cfg, cfg.chains.ml_length, cfg.chains.ml_seed);
    const auto chain = run_chain(*surrogate, obs, prior, cc, qoi);
    dump_chain_csv(chain, cfg.output_dir + "/chain_ml" + suffix + ".csv");
    auto j = detail::chain_report(chain, mode, cfg);
    write_json(j, cfg.output_dir + "/run_" + mode + suffix + ".json");
    return j;
  }

  if (mode != "hybrid") throw ConfigError("unknown run mode: " + mode);

  const auto numerical = make_numerical(cfg, cfg.level);
  const auto surrogate = make_surrogate(cfg);

  const auto cc_num =
      detail::base_chain_config(cfg, cfg.chains.num_length, cfg.chains.num_seed);
  const auto chain_num = run_chain(numerical, obs, prior, cc_num, qoi, surrogate.get());
  const auto cc_ml = detail::base_chain_config(cfg, cfg.chains.ml_length, cfg.chains.ml_seed);
  const auto chain_ml = run_chain(*surrogate, obs, prior, cc_ml, qoi);

  HybridEstimate est;
  std::unique_ptr<Chain> chain_short;
  if (prior.type == PriorType::UniformBox) {
    est = hybrid_estimate_uniform(chain_num, chain_ml);
  } else {
    const auto cc_short =
        detail::base_chain_config(cfg, cfg.chains.num_length, cfg.chains.short_seed);
    chain_short = std::make_unique<Chain>(
        run_chain(*surrogate, obs, prior, cc_short, qoi, &numerical));
    est = hybrid_estimate_gaussian(chain_num, *chain_short, chain_ml);
  }

  dump_chain_csv(chain_num, cfg.output_dir + "/chain_numerical" + suffix + ".csv");
  dump_chain_csv(chain_ml, cfg.output_dir + "/chain_ml" + suffix + ".csv");
  if (chain_short)
    dump_chain_csv(*chain_short, cfg.output_dir + "/chain_ml_short" + suffix + ".csv");
  detail::dump_correction_csv(chain_num, chain_short.get(),
                              cfg.output_dir + "/correction_terms" + suffix + ".csv");

  nlohmann::json j;
  j["provenance"] = provenance_block(mode);
  j["config"] = cfg.to_json();
  j["qoi_estimate"] = est.total[0];
  j["std_error"] = est.se_combined[0];
  j["hybrid"] = detail::hybrid_json(est);
  j["chain_numerical"] = chain_summary(chain_num);
  j["chain_ml"] = chain_summary(chain_ml);
  if (chain_short) j["chain_ml_short"] = chain_summary(*chain_short);
  write_json(j, cfg.output_dir + "/run_" + mode + suffix + ".json");
  return j;
}

inline nlohmann::json aggregate_reports(const std::vector<nlohmann::json>& reports) {
  if (reports.empty()) throw ConfigError("nothing to aggregate");
  double mean = 0.0;
  for (const auto& r : reports) mean += r.at("qoi_estimate").get<double>();
  mean /= static_cast<double>(reports.size());
  double var = 0.0;
  for (const auto& r : reports) {
    const double d = r.at("qoi_estimate").get<double>() - mean;
    var += d * d;
  }
  var = reports.size() > 1 ? var / static_cast<double>(reports.size() - 1) : 0.0;
  nlohmann::json j;
  j["provenance"] = provenance_block("aggregate");
  j["schema"] = "aggregate_v1";
  j["count"] = reports.size();
  j["mean"] = mean;
  j["std"] = std::sqrt(var);
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& r : reports) vals.push_back(r.at("qoi_estimate").get<double>());
  j["values"] = vals;
  return j;
}

// Repeats offset every chain seed by the repeat index, so runs are independent
// but each report's embedded config reproduces that exact run.
inline nlohmann::json cmd_run(const ExperimentConfig& cfg, const std::string& mode,
                              int repeats) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (repeats == 1) return run_once(cfg, mode, "");
  std::vector<nlohmann::json> reports;
  for (int r = 0; r < repeats; ++r) {
    ExperimentConfig c = cfg;
    c.chains.ml_seed += static_cast<std::uint64_t>(r);
    c.chains.num_seed += static_cast<std::uint64_t>(r);
    c.chains.short_seed += static_cast<std::uint64_t>(r);
    reports.push_back(run_once(c, mode, "_r" + std::to_string(r)));
  }
  auto agg = aggregate_reports(reports);
  write_json(agg, cfg.output_dir + "/run_" + mode + "_aggregate.json");
  return agg;
}

inline nlohmann::json cmd_aggregate(const std::vector<std::string>& report_paths,
                                    const std::string& output_path) {
  std::vector<nlohmann::json> reports;
  for (const auto& p : report_paths) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open report " + p);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad report " + p + ": " + e.what());
    }
    reports.push_back(std::move(j));
  }
  auto agg = aggregate_reports(reports);
  if (!output_path.empty()) write_json(agg, output_path);
  return agg;
}

}  // namespace htmc

#endif
